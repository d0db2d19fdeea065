#include "faith/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace faith {

int64_t numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

namespace detail {

uint64_t next_node_id() {
  static std::atomic<uint64_t> counter{0};
  return ++counter;
}

}  // namespace detail

using detail::BackwardFn;
using detail::Node;
using detail::NodePtr;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

void check_shape(const Shape& s, const char* op) {
  for (int d : s)
    if (d <= 0) fail(std::string(op) + ": non-positive dimension in shape " + shape_str(s));
}

Tensor make_node(const char* op, Shape shape, std::vector<double> value,
                 std::vector<NodePtr> parents, BackwardFn bw,
                 std::vector<int> iargs = {}) {
  auto n = std::make_shared<Node>();
  n->id = detail::next_node_id();
  n->op = op;
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->parents = std::move(parents);
  for (const auto& p : n->parents)
    if (p->track) n->track = true;
  if (n->track) n->backward = std::move(bw);
  n->iargs = std::move(iargs);
  return Tensor(std::move(n));
}

NodePtr need(const Tensor& t, const char* op) {
  if (!t.defined()) fail(std::string(op) + ": undefined tensor");
  return t.node_handle();
}

}  // namespace

// ---- Tensor basics ----------------------------------------------------

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double v) {
  check_shape(shape, "full");
  std::vector<double> data(static_cast<size_t>(numel(shape)), v);
  return from(std::move(shape), std::move(data));
}

Tensor Tensor::scalar(double v) { return from({1}, {v}); }

Tensor Tensor::from(Shape shape, std::vector<double> data) {
  check_shape(shape, "from");
  if (numel(shape) != static_cast<int64_t>(data.size()))
    fail("tensor: shape " + shape_str(shape) + " does not match data length " +
         std::to_string(data.size()));
  auto n = std::make_shared<Node>();
  n->id = detail::next_node_id();
  n->op = "leaf";
  n->shape = std::move(shape);
  n->value = std::move(data);
  return Tensor(std::move(n));
}

Tensor Tensor::param(Shape shape, std::vector<double> data) {
  Tensor t = from(std::move(shape), std::move(data));
  t.node_ptr()->requires_grad = true;
  t.node_ptr()->track = true;
  t.node_ptr()->op = "param";
  return t;
}

const Shape& Tensor::shape() const { return node_->shape; }
int64_t Tensor::size() const { return numel(node_->shape); }
uint64_t Tensor::id() const { return node_->id; }
const char* Tensor::op() const { return node_->op; }
bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
const std::vector<double>& Tensor::values() const& { return node_->value; }
std::vector<double> Tensor::values() && { return node_->value; }
std::span<const double> Tensor::data() const { return node_->value; }

std::vector<double>& Tensor::leaf_data() {
  if (!node_->parents.empty()) fail("leaf_data: tensor is not a leaf");
  return node_->value;
}

double Tensor::item() const {
  if (size() != 1) fail("item: tensor has shape " + shape_str(shape()));
  return node_->value[0];
}

double Tensor::at(std::initializer_list<int> idx) const {
  const Shape& s = shape();
  if (idx.size() != s.size()) fail("at: rank mismatch");
  int64_t off = 0;
  int i = 0;
  for (int v : idx) {
    if (v < 0 || v >= s[i]) fail("at: index out of range");
    off = off * s[i] + v;
    ++i;
  }
  return node_->value[static_cast<size_t>(off)];
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

const std::vector<double>& Tensor::grad() const {
  if (!has_grad()) fail("grad: no gradient recorded");
  return node_->grad;
}

Tensor Tensor::grad_tensor() const { return Tensor::from(shape(), grad()); }

void Tensor::zero_grad() { node_->grad.clear(); }

// ---- elementwise ------------------------------------------------------

static void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    fail(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
         shape_str(b.shape()));
}

Tensor add(const Tensor& a, const Tensor& b) {
  auto na = need(a, "add"), nb = need(b, "add");
  check_same_shape(a, b, "add");
  std::vector<double> out(na->value.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = na->value[i] + nb->value[i];
  return make_node("add", na->shape, std::move(out), {na, nb},
                   [](const Node&, const std::vector<double>& g,
                      const std::vector<std::vector<double>*>& gp) {
                     for (int side = 0; side < 2; ++side)
                       if (gp[side])
                         for (size_t i = 0; i < g.size(); ++i) (*gp[side])[i] += g[i];
                   });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  auto na = need(a, "sub"), nb = need(b, "sub");
  check_same_shape(a, b, "sub");
  std::vector<double> out(na->value.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = na->value[i] - nb->value[i];
  return make_node("sub", na->shape, std::move(out), {na, nb},
                   [](const Node&, const std::vector<double>& g,
                      const std::vector<std::vector<double>*>& gp) {
                     if (gp[0])
                       for (size_t i = 0; i < g.size(); ++i) (*gp[0])[i] += g[i];
                     if (gp[1])
                       for (size_t i = 0; i < g.size(); ++i) (*gp[1])[i] -= g[i];
                   });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  auto na = need(a, "mul"), nb = need(b, "mul");
  check_same_shape(a, b, "mul");
  std::vector<double> out(na->value.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = na->value[i] * nb->value[i];
  return make_node("mul", na->shape, std::move(out), {na, nb},
                   [](const Node& self, const std::vector<double>& g,
                      const std::vector<std::vector<double>*>& gp) {
                     const auto& av = self.parents[0]->value;
                     const auto& bv = self.parents[1]->value;
                     if (gp[0])
                       for (size_t i = 0; i < g.size(); ++i) (*gp[0])[i] += g[i] * bv[i];
                     if (gp[1])
                       for (size_t i = 0; i < g.size(); ++i) (*gp[1])[i] += g[i] * av[i];
                   });
}

Tensor scale(const Tensor& a, double c) {
  auto na = need(a, "scale");
  std::vector<double> out(na->value.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = c * na->value[i];
  return make_node("scale", na->shape, std::move(out), {na},
                   [c](const Node&, const std::vector<double>& g,
                       const std::vector<std::vector<double>*>& gp) {
                     if (gp[0])
                       for (size_t i = 0; i < g.size(); ++i) (*gp[0])[i] += c * g[i];
                   });
}

// ---- linear algebra ---------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  auto na = need(a, "matmul"), nb = need(b, "matmul");
  if (na->shape.size() != 2 || nb->shape.size() != 2)
    fail("matmul: expects rank-2 tensors, got " + shape_str(na->shape) + " and " +
         shape_str(nb->shape));
  const int m = na->shape[0], k = na->shape[1];
  const int k2 = nb->shape[0], n = nb->shape[1];
  if (k != k2)
    fail("matmul: inner dimensions disagree, " + shape_str(na->shape) + " x " +
         shape_str(nb->shape));
  std::vector<double> out(static_cast<size_t>(m) * n, 0.0);
  const double* A = na->value.data();
  const double* B = nb->value.data();
  for (int i = 0; i < m; ++i) {
    double* orow = &out[static_cast<size_t>(i) * n];
    const double* arow = &A[static_cast<size_t>(i) * k];
    for (int p = 0; p < k; ++p) {
      const double aip = arow[p];
      const double* brow = &B[static_cast<size_t>(p) * n];
      for (int j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  return make_node(
      "matmul", {m, n}, std::move(out), {na, nb},
      [m, k, n](const Node& self, const std::vector<double>& g,
                const std::vector<std::vector<double>*>& gp) {
        const double* A = self.parents[0]->value.data();
        const double* B = self.parents[1]->value.data();
        if (gp[0]) {
          double* dA = gp[0]->data();
          for (int i = 0; i < m; ++i) {
            const double* grow = &g[static_cast<size_t>(i) * n];
            double* darow = &dA[static_cast<size_t>(i) * k];
            for (int p = 0; p < k; ++p) {
              const double* brow = &B[static_cast<size_t>(p) * n];
              double s = 0.0;
              for (int j = 0; j < n; ++j) s += grow[j] * brow[j];
              darow[p] += s;
            }
          }
        }
        if (gp[1]) {
          double* dB = gp[1]->data();
          for (int p = 0; p < k; ++p) {
            double* dbrow = &dB[static_cast<size_t>(p) * n];
            for (int i = 0; i < m; ++i) {
              const double aip = A[static_cast<size_t>(i) * k + p];
              const double* grow = &g[static_cast<size_t>(i) * n];
              for (int j = 0; j < n; ++j) dbrow[j] += aip * grow[j];
            }
          }
        }
      });
}

Tensor transpose2d(const Tensor& a) {
  auto na = need(a, "transpose2d");
  if (na->shape.size() != 2) fail("transpose2d: expects rank-2, got " + shape_str(na->shape));
  const int m = na->shape[0], n = na->shape[1];
  std::vector<double> out(na->value.size());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out[static_cast<size_t>(j) * m + i] = na->value[static_cast<size_t>(i) * n + j];
  return make_node("transpose2d", {n, m}, std::move(out), {na},
                   [m, n](const Node&, const std::vector<double>& g,
                          const std::vector<std::vector<double>*>& gp) {
                     if (!gp[0]) return;
                     auto& d = *gp[0];
                     for (int j = 0; j < n; ++j)
                       for (int i = 0; i < m; ++i)
                         d[static_cast<size_t>(i) * n + j] += g[static_cast<size_t>(j) * m + i];
                   });
}

Tensor reshape(const Tensor& a, Shape shape) {
  auto na = need(a, "reshape");
  check_shape(shape, "reshape");
  if (numel(shape) != numel(na->shape))
    fail("reshape: element count mismatch, " + shape_str(na->shape) + " -> " + shape_str(shape));
  std::vector<double> out = na->value;
  return make_node("reshape", std::move(shape), std::move(out), {na},
                   [](const Node&, const std::vector<double>& g,
                      const std::vector<std::vector<double>*>& gp) {
                     if (!gp[0]) return;
                     for (size_t i = 0; i < g.size(); ++i) (*gp[0])[i] += g[i];
                   });
}

Tensor relu(const Tensor& a) {
  auto na = need(a, "relu");
  std::vector<double> out(na->value.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = na->value[i] > 0.0 ? na->value[i] : 0.0;
  return make_node("relu", na->shape, std::move(out), {na},
                   [](const Node& self, const std::vector<double>& g,
                      const std::vector<std::vector<double>*>& gp) {
                     if (!gp[0]) return;
                     const auto& x = self.parents[0]->value;
                     for (size_t i = 0; i < g.size(); ++i)
                       if (x[i] > 0.0) (*gp[0])[i] += g[i];
                   });
}

// ---- softmax / losses --------------------------------------------------

Tensor softmax(const Tensor& a, int axis) {
  auto na = need(a, "softmax");
  const int rank = static_cast<int>(na->shape.size());
  if (axis < 0 || axis >= rank)
    fail("softmax: axis " + std::to_string(axis) + " out of range for rank " +
         std::to_string(rank));
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= na->shape[i];
  for (int i = axis + 1; i < rank; ++i) inner *= na->shape[i];
  const int len = na->shape[axis];
  std::vector<double> out(na->value.size());
  const double* x = na->value.data();
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t in = 0; in < inner; ++in) {
      const int64_t base = o * len * inner + in;
      double mx = x[base];
      for (int kk = 1; kk < len; ++kk) mx = std::max(mx, x[base + kk * inner]);
      double z = 0.0;
      for (int kk = 0; kk < len; ++kk) {
        double e = std::exp(x[base + kk * inner] - mx);
        out[base + kk * inner] = e;
        z += e;
      }
      const double invz = 1.0 / z;
      for (int kk = 0; kk < len; ++kk) out[base + kk * inner] *= invz;
    }
  }
  return make_node(
      "softmax", na->shape, std::move(out), {na},
      [outer, inner, len](const Node& self, const std::vector<double>& g,
                          const std::vector<std::vector<double>*>& gp) {
        if (!gp[0]) return;
        const double* s = self.value.data();
        double* d = gp[0]->data();
        for (int64_t o = 0; o < outer; ++o) {
          for (int64_t in = 0; in < inner; ++in) {
            const int64_t base = o * len * inner + in;
            double dot = 0.0;
            for (int kk = 0; kk < len; ++kk) dot += g[base + kk * inner] * s[base + kk * inner];
            for (int kk = 0; kk < len; ++kk) {
              const int64_t ix = base + kk * inner;
              d[ix] += s[ix] * (g[ix] - dot);
            }
          }
        }
      });
}

Tensor sum(const Tensor& a) {
  auto na = need(a, "sum");
  double s = 0.0;
  for (double v : na->value) s += v;
  return make_node("sum", {1}, {s}, {na},
                   [](const Node&, const std::vector<double>& g,
                      const std::vector<std::vector<double>*>& gp) {
                     if (!gp[0]) return;
                     for (double& d : *gp[0]) d += g[0];
                   });
}

Tensor cross_entropy(const Tensor& logits, int target) {
  auto nl = need(logits, "cross_entropy");
  if (nl->shape.size() != 1)
    fail("cross_entropy: expects rank-1 logits, got " + shape_str(nl->shape));
  const int v = nl->shape[0];
  if (target < 0 || target >= v)
    fail("cross_entropy: target " + std::to_string(target) + " out of range for " +
         std::to_string(v) + " classes");
  const double* x = nl->value.data();
  double mx = x[0];
  for (int i = 1; i < v; ++i) mx = std::max(mx, x[i]);
  double z = 0.0;
  for (int i = 0; i < v; ++i) z += std::exp(x[i] - mx);
  const double loss = mx + std::log(z) - x[target];
  return make_node("cross_entropy", {1}, {loss}, {nl},
                   [v, target](const Node& self, const std::vector<double>& g,
                               const std::vector<std::vector<double>*>& gp) {
                     if (!gp[0]) return;
                     const double* x = self.parents[0]->value.data();
                     double mx = x[0];
                     for (int i = 1; i < v; ++i) mx = std::max(mx, x[i]);
                     double z = 0.0;
                     for (int i = 0; i < v; ++i) z += std::exp(x[i] - mx);
                     for (int i = 0; i < v; ++i) {
                       double p = std::exp(x[i] - mx) / z;
                       (*gp[0])[i] += g[0] * (p - (i == target ? 1.0 : 0.0));
                     }
                   });
}

// ---- convolution -------------------------------------------------------

Tensor conv2d(const Tensor& input, const Tensor& kernels, int stride, int padding) {
  auto ni = need(input, "conv2d"), nk = need(kernels, "conv2d");
  if (ni->shape.size() != 3)
    fail("conv2d: input must be [C,H,W], got " + shape_str(ni->shape));
  if (nk->shape.size() != 4)
    fail("conv2d: kernels must be [F,C,kh,kw], got " + shape_str(nk->shape));
  if (stride < 1) fail("conv2d: stride must be >= 1");
  if (padding < 0) fail("conv2d: padding must be >= 0");
  const int C = ni->shape[0], H = ni->shape[1], W = ni->shape[2];
  const int F = nk->shape[0], KC = nk->shape[1], KH = nk->shape[2], KW = nk->shape[3];
  if (KC != C)
    fail("conv2d: kernel channels " + std::to_string(KC) + " do not match input channels " +
         std::to_string(C));
  if (KH > H + 2 * padding || KW > W + 2 * padding)
    fail("conv2d: kernel " + std::to_string(KH) + "x" + std::to_string(KW) +
         " larger than padded input " + std::to_string(H + 2 * padding) + "x" +
         std::to_string(W + 2 * padding));
  const int OH = (H + 2 * padding - KH) / stride + 1;
  const int OW = (W + 2 * padding - KW) / stride + 1;

  // Valid output-column range for a given kernel column kx:
  // ix = ox*stride + kx - padding must land in [0, W).
  auto ox_range = [&](int kx, int& lo, int& hi) {
    int a = padding - kx;  // need ox*stride >= a
    lo = a <= 0 ? 0 : (a + stride - 1) / stride;
    int b = W - 1 - kx + padding;  // need ox*stride <= b
    hi = b < 0 ? -1 : std::min(OW - 1, b / stride);
  };
  auto oy_range = [&](int ky, int& lo, int& hi) {
    int a = padding - ky;
    lo = a <= 0 ? 0 : (a + stride - 1) / stride;
    int b = H - 1 - ky + padding;
    hi = b < 0 ? -1 : std::min(OH - 1, b / stride);
  };

  std::vector<double> out(static_cast<size_t>(F) * OH * OW, 0.0);
  const double* in = ni->value.data();
  const double* kn = nk->value.data();
  for (int f = 0; f < F; ++f) {
    double* oplane = &out[static_cast<size_t>(f) * OH * OW];
    for (int c = 0; c < C; ++c) {
      const double* iplane = &in[static_cast<size_t>(c) * H * W];
      const double* kplane = &kn[((static_cast<size_t>(f) * C) + c) * KH * KW];
      for (int ky = 0; ky < KH; ++ky) {
        int oy_lo, oy_hi;
        oy_range(ky, oy_lo, oy_hi);
        for (int kx = 0; kx < KW; ++kx) {
          const double w = kplane[ky * KW + kx];
          if (w == 0.0) continue;
          int ox_lo, ox_hi;
          ox_range(kx, ox_lo, ox_hi);
          for (int oy = oy_lo; oy <= oy_hi; ++oy) {
            const int iy = oy * stride + ky - padding;
            const double* irow = &iplane[static_cast<size_t>(iy) * W];
            double* orow = &oplane[static_cast<size_t>(oy) * OW];
            int ix = ox_lo * stride + kx - padding;
            for (int ox = ox_lo; ox <= ox_hi; ++ox, ix += stride) orow[ox] += w * irow[ix];
          }
        }
      }
    }
  }

  return make_node(
      "conv2d", {F, OH, OW}, std::move(out), {ni, nk},
      [C, H, W, F, KH, KW, OH, OW, stride, padding](
          const Node& self, const std::vector<double>& g,
          const std::vector<std::vector<double>*>& gp) {
        const double* in = self.parents[0]->value.data();
        const double* kn = self.parents[1]->value.data();
        auto ox_range = [&](int kx, int& lo, int& hi) {
          int a = padding - kx;
          lo = a <= 0 ? 0 : (a + stride - 1) / stride;
          int b = W - 1 - kx + padding;
          hi = b < 0 ? -1 : std::min(OW - 1, b / stride);
        };
        auto oy_range = [&](int ky, int& lo, int& hi) {
          int a = padding - ky;
          lo = a <= 0 ? 0 : (a + stride - 1) / stride;
          int b = H - 1 - ky + padding;
          hi = b < 0 ? -1 : std::min(OH - 1, b / stride);
        };
        for (int f = 0; f < F; ++f) {
          const double* gplane = &g[static_cast<size_t>(f) * OH * OW];
          for (int c = 0; c < C; ++c) {
            const double* iplane = &in[static_cast<size_t>(c) * H * W];
            const double* kplane = &kn[((static_cast<size_t>(f) * C) + c) * KH * KW];
            double* diplane = gp[0] ? &(*gp[0])[static_cast<size_t>(c) * H * W] : nullptr;
            double* dkplane =
                gp[1] ? &(*gp[1])[((static_cast<size_t>(f) * C) + c) * KH * KW] : nullptr;
            for (int ky = 0; ky < KH; ++ky) {
              int oy_lo, oy_hi;
              oy_range(ky, oy_lo, oy_hi);
              for (int kx = 0; kx < KW; ++kx) {
                int ox_lo, ox_hi;
                ox_range(kx, ox_lo, ox_hi);
                const double w = kplane[ky * KW + kx];
                double dk = 0.0;
                for (int oy = oy_lo; oy <= oy_hi; ++oy) {
                  const int iy = oy * stride + ky - padding;
                  const double* irow = &iplane[static_cast<size_t>(iy) * W];
                  const double* grow = &gplane[static_cast<size_t>(oy) * OW];
                  double* dirow = diplane ? &diplane[static_cast<size_t>(iy) * W] : nullptr;
                  int ix = ox_lo * stride + kx - padding;
                  for (int ox = ox_lo; ox <= ox_hi; ++ox, ix += stride) {
                    const double gv = grow[ox];
                    if (dirow) dirow[ix] += w * gv;
                    dk += irow[ix] * gv;
                  }
                }
                if (dkplane) dkplane[ky * KW + kx] += dk;
              }
            }
          }
        }
      });
}

// ---- broadcast helpers --------------------------------------------------

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
  auto nx = need(x, "add_channel_bias"), nb = need(bias, "add_channel_bias");
  if (nx->shape.size() != 3) fail("add_channel_bias: x must be [C,H,W]");
  if (nb->shape.size() != 1 || nb->shape[0] != nx->shape[0])
    fail("add_channel_bias: bias shape " + shape_str(nb->shape) + " does not match channels " +
         std::to_string(nx->shape[0]));
  const int C = nx->shape[0];
  const int64_t plane = static_cast<int64_t>(nx->shape[1]) * nx->shape[2];
  std::vector<double> out(nx->value.size());
  for (int c = 0; c < C; ++c) {
    const double b = nb->value[c];
    for (int64_t i = 0; i < plane; ++i) out[c * plane + i] = nx->value[c * plane + i] + b;
  }
  return make_node("add_channel_bias", nx->shape, std::move(out), {nx, nb},
                   [C, plane](const Node&, const std::vector<double>& g,
                              const std::vector<std::vector<double>*>& gp) {
                     if (gp[0])
                       for (size_t i = 0; i < g.size(); ++i) (*gp[0])[i] += g[i];
                     if (gp[1])
                       for (int c = 0; c < C; ++c) {
                         double s = 0.0;
                         for (int64_t i = 0; i < plane; ++i) s += g[c * plane + i];
                         (*gp[1])[c] += s;
                       }
                   });
}

Tensor add_rowwise(const Tensor& x, const Tensor& v) {
  auto nx = need(x, "add_rowwise"), nv = need(v, "add_rowwise");
  if (nx->shape.size() != 2) fail("add_rowwise: x must be rank-2");
  if (nv->shape.size() != 1 || nv->shape[0] != nx->shape[1])
    fail("add_rowwise: vector shape " + shape_str(nv->shape) + " does not match columns of " +
         shape_str(nx->shape));
  const int n = nx->shape[0], m = nx->shape[1];
  std::vector<double> out(nx->value.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      out[static_cast<size_t>(i) * m + j] = nx->value[static_cast<size_t>(i) * m + j] + nv->value[j];
  return make_node("add_rowwise", nx->shape, std::move(out), {nx, nv},
                   [n, m](const Node&, const std::vector<double>& g,
                          const std::vector<std::vector<double>*>& gp) {
                     if (gp[0])
                       for (size_t i = 0; i < g.size(); ++i) (*gp[0])[i] += g[i];
                     if (gp[1])
                       for (int j = 0; j < m; ++j) {
                         double s = 0.0;
                         for (int i = 0; i < n; ++i) s += g[static_cast<size_t>(i) * m + j];
                         (*gp[1])[j] += s;
                       }
                   });
}

// ---- slicing / gather ----------------------------------------------------

Tensor slice_cols(const Tensor& x, int from, int to) {
  auto nx = need(x, "slice_cols");
  if (nx->shape.size() != 2) fail("slice_cols: x must be rank-2");
  const int n = nx->shape[0], m = nx->shape[1];
  if (from < 0 || to > m || from >= to) fail("slice_cols: bad range");
  const int w = to - from;
  std::vector<double> out(static_cast<size_t>(n) * w);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < w; ++j)
      out[static_cast<size_t>(i) * w + j] = nx->value[static_cast<size_t>(i) * m + from + j];
  return make_node("slice_cols", {n, w}, std::move(out), {nx},
                   [n, m, w, from](const Node&, const std::vector<double>& g,
                                   const std::vector<std::vector<double>*>& gp) {
                     if (!gp[0]) return;
                     for (int i = 0; i < n; ++i)
                       for (int j = 0; j < w; ++j)
                         (*gp[0])[static_cast<size_t>(i) * m + from + j] +=
                             g[static_cast<size_t>(i) * w + j];
                   });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) fail("concat_cols: no inputs");
  std::vector<NodePtr> ps;
  int n = parts[0].shape()[0];
  int total = 0;
  for (const auto& p : parts) {
    auto np = need(p, "concat_cols");
    if (np->shape.size() != 2 || np->shape[0] != n)
      fail("concat_cols: inconsistent shapes");
    total += np->shape[1];
    ps.push_back(np);
  }
  std::vector<double> out(static_cast<size_t>(n) * total);
  std::vector<int> widths;
  int off = 0;
  for (const auto& np : ps) {
    const int w = np->shape[1];
    widths.push_back(w);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < w; ++j)
        out[static_cast<size_t>(i) * total + off + j] = np->value[static_cast<size_t>(i) * w + j];
    off += w;
  }
  return make_node("concat_cols", {n, total}, std::move(out), std::move(ps),
                   [n, total](const Node& self, const std::vector<double>& g,
                              const std::vector<std::vector<double>*>& gp) {
                     int off = 0;
                     for (size_t s = 0; s < self.parents.size(); ++s) {
                       const int w = self.parents[s]->shape[1];
                       if (gp[s])
                         for (int i = 0; i < n; ++i)
                           for (int j = 0; j < w; ++j)
                             (*gp[s])[static_cast<size_t>(i) * w + j] +=
                                 g[static_cast<size_t>(i) * total + off + j];
                       off += w;
                     }
                   });
}

Tensor slice_row(const Tensor& x, int row) {
  auto nx = need(x, "slice_row");
  if (nx->shape.size() != 2) fail("slice_row: x must be rank-2");
  const int n = nx->shape[0], m = nx->shape[1];
  if (row < 0 || row >= n) fail("slice_row: row out of range");
  std::vector<double> out(nx->value.begin() + static_cast<size_t>(row) * m,
                          nx->value.begin() + static_cast<size_t>(row + 1) * m);
  return make_node("slice_row", {m}, std::move(out), {nx},
                   [m, row](const Node&, const std::vector<double>& g,
                            const std::vector<std::vector<double>*>& gp) {
                     if (!gp[0]) return;
                     for (int j = 0; j < m; ++j)
                       (*gp[0])[static_cast<size_t>(row) * m + j] += g[j];
                   });
}

Tensor embed_rows(const Tensor& table, const std::vector<int>& ids) {
  auto nt = need(table, "embed_rows");
  if (nt->shape.size() != 2) fail("embed_rows: table must be rank-2");
  const int v = nt->shape[0], d = nt->shape[1];
  for (int id : ids)
    if (id < 0 || id >= v)
      fail("embed_rows: id " + std::to_string(id) + " out of range for table with " +
           std::to_string(v) + " rows");
  const int L = static_cast<int>(ids.size());
  if (L == 0) fail("embed_rows: empty id list");
  std::vector<double> out(static_cast<size_t>(L) * d);
  for (int l = 0; l < L; ++l)
    std::copy_n(&nt->value[static_cast<size_t>(ids[l]) * d], d, &out[static_cast<size_t>(l) * d]);
  return make_node("embed_rows", {L, d}, std::move(out), {nt},
                   [d](const Node& self, const std::vector<double>& g,
                       const std::vector<std::vector<double>*>& gp) {
                     if (!gp[0]) return;
                     const int L = static_cast<int>(self.iargs.size());
                     for (int l = 0; l < L; ++l) {
                       const int id = self.iargs[l];
                       for (int j = 0; j < d; ++j)
                         (*gp[0])[static_cast<size_t>(id) * d + j] += g[static_cast<size_t>(l) * d + j];
                     }
                   },
                   std::vector<int>(ids.begin(), ids.end()));
}

Tensor layernorm_rows(const Tensor& x, double eps) {
  auto nx = need(x, "layernorm_rows");
  if (nx->shape.size() != 2) fail("layernorm_rows: x must be rank-2");
  const int n = nx->shape[0], m = nx->shape[1];
  std::vector<double> out(nx->value.size());
  for (int i = 0; i < n; ++i) {
    const double* row = &nx->value[static_cast<size_t>(i) * m];
    double mu = 0.0;
    for (int j = 0; j < m; ++j) mu += row[j];
    mu /= m;
    double var = 0.0;
    for (int j = 0; j < m; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= m;
    const double inv = 1.0 / std::sqrt(var + eps);
    for (int j = 0; j < m; ++j) out[static_cast<size_t>(i) * m + j] = (row[j] - mu) * inv;
  }
  return make_node(
      "layernorm_rows", nx->shape, std::move(out), {nx},
      [n, m, eps](const Node& self, const std::vector<double>& g,
                  const std::vector<std::vector<double>*>& gp) {
        if (!gp[0]) return;
        const auto& xin = self.parents[0]->value;
        const auto& y = self.value;
        for (int i = 0; i < n; ++i) {
          const double* row = &xin[static_cast<size_t>(i) * m];
          const double* yrow = &y[static_cast<size_t>(i) * m];
          const double* grow = &g[static_cast<size_t>(i) * m];
          double mu = 0.0;
          for (int j = 0; j < m; ++j) mu += row[j];
          mu /= m;
          double var = 0.0;
          for (int j = 0; j < m; ++j) var += (row[j] - mu) * (row[j] - mu);
          var /= m;
          const double inv = 1.0 / std::sqrt(var + eps);
          double gmean = 0.0, gydot = 0.0;
          for (int j = 0; j < m; ++j) {
            gmean += grow[j];
            gydot += grow[j] * yrow[j];
          }
          gmean /= m;
          gydot /= m;
          double* drow = &(*gp[0])[static_cast<size_t>(i) * m];
          for (int j = 0; j < m; ++j) drow[j] += inv * (grow[j] - gmean - yrow[j] * gydot);
        }
      });
}

Tensor mean_of(const std::vector<Tensor>& scalars) {
  if (scalars.empty()) fail("mean_of: no inputs");
  std::vector<NodePtr> ps;
  double s = 0.0;
  for (const auto& t : scalars) {
    auto nt = need(t, "mean_of");
    if (numel(nt->shape) != 1) fail("mean_of: inputs must be scalars");
    s += nt->value[0];
    ps.push_back(nt);
  }
  const double invn = 1.0 / static_cast<double>(scalars.size());
  return make_node("mean_of", {1}, {s * invn}, std::move(ps),
                   [invn](const Node& self, const std::vector<double>& g,
                          const std::vector<std::vector<double>*>& gp) {
                     for (size_t i = 0; i < self.parents.size(); ++i)
                       if (gp[i]) (*gp[i])[0] += g[0] * invn;
                   });
}

// ---- backward ------------------------------------------------------------

std::vector<double>& GradSink::buffer_for(const detail::Node* leaf) {
  auto& buf = buffers_[leaf];
  if (buf.empty()) buf.assign(leaf->value.size(), 0.0);
  return buf;
}

const std::vector<double>* GradSink::find(const Tensor& leaf) const {
  auto it = buffers_.find(leaf.node_ptr());
  return it == buffers_.end() ? nullptr : &it->second;
}

void GradSink::add_into_leaves() const {
  for (const auto& [node, buf] : buffers_) {
    auto* n = const_cast<detail::Node*>(node);
    if (n->grad.empty()) n->grad.assign(n->value.size(), 0.0);
    for (size_t i = 0; i < buf.size(); ++i) n->grad[i] += buf[i];
  }
}

void backward_into(const Tensor& loss, GradSink& sink) {
  Node* root = loss.node_ptr();
  if (!root) fail("backward: undefined tensor");
  if (numel(root->shape) != 1)
    fail("backward: loss must be a scalar, got shape " + shape_str(root->shape));

  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{root};
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    order.push_back(n);
    for (const auto& p : n->parents)
      if (p->track) stack.push_back(p.get());
  }
  std::sort(order.begin(), order.end(), [](Node* a, Node* b) { return a->id > b->id; });

  std::unordered_map<Node*, std::vector<double>> gm;
  gm[root] = {1.0};
  for (Node* n : order) {
    auto it = gm.find(n);
    if (it == gm.end()) continue;
    std::vector<double> g = std::move(it->second);
    gm.erase(it);
    if (n->requires_grad) {
      auto& buf = sink.buffer_for(n);
      for (size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
    }
    if (!n->backward) continue;
    std::vector<std::vector<double>*> slots(n->parents.size(), nullptr);
    for (size_t i = 0; i < n->parents.size(); ++i) {
      Node* p = n->parents[i].get();
      if (!p->track) continue;
      auto& pg = gm[p];
      if (pg.empty()) pg.assign(p->value.size(), 0.0);
      slots[i] = &pg;
    }
    n->backward(*n, g, slots);
  }
}

void backward(const Tensor& loss) {
  GradSink sink;
  backward_into(loss, sink);
  sink.add_into_leaves();
}

std::vector<TraceStep> computation_record(const Tensor& root) {
  if (!root.defined()) fail("computation_record: undefined tensor");
  std::vector<Node*> nodes;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{root.node_ptr()};
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    nodes.push_back(n);
    for (const auto& p : n->parents) stack.push_back(p.get());
  }
  std::sort(nodes.begin(), nodes.end(), [](Node* a, Node* b) { return a->id < b->id; });
  std::vector<TraceStep> steps;
  steps.reserve(nodes.size());
  for (Node* n : nodes) {
    TraceStep st;
    st.output = n->id;
    st.op = n->op;
    for (const auto& p : n->parents) st.inputs.push_back(p->id);
    steps.push_back(std::move(st));
  }
  return steps;
}

}  // namespace faith
