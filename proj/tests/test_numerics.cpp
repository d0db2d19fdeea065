#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "faith/gradcheck.hpp"
#include "faith/rng.hpp"
#include "faith/tensor.hpp"

using namespace faith;

namespace {

// Independent oracle: naive triple-loop matrix product.
std::vector<double> ref_matmul(const std::vector<double>& a, const std::vector<double>& b,
                               int m, int k, int n) {
  std::vector<double> out(static_cast<size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      for (int p = 0; p < k; ++p)
        out[i * n + j] += a[i * k + p] * b[p * n + j];
  return out;
}

// Independent oracle: explicit sliding-window cross-correlation.
std::vector<double> ref_conv2d(const std::vector<double>& in, int C, int H, int W,
                               const std::vector<double>& kn, int F, int KH, int KW,
                               int stride, int pad, int& OH, int& OW) {
  OH = (H + 2 * pad - KH) / stride + 1;
  OW = (W + 2 * pad - KW) / stride + 1;
  std::vector<double> out(static_cast<size_t>(F) * OH * OW, 0.0);
  for (int f = 0; f < F; ++f)
    for (int oy = 0; oy < OH; ++oy)
      for (int ox = 0; ox < OW; ++ox) {
        double s = 0.0;
        for (int c = 0; c < C; ++c)
          for (int ky = 0; ky < KH; ++ky)
            for (int kx = 0; kx < KW; ++kx) {
              const int iy = oy * stride + ky - pad;
              const int ix = ox * stride + kx - pad;
              if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
              s += in[(c * H + iy) * W + ix] * kn[((f * C + c) * KH + ky) * KW + kx];
            }
        out[(f * OH + oy) * OW + ox] = s;
      }
  return out;
}

std::vector<double> random_vec(std::mt19937_64& rng, size_t n, double lo = -1.0,
                               double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = uniform(rng, lo, hi);
  return v;
}

}  // namespace

TEST_CASE("matmul basics") {
  Tensor i2 = Tensor::from({2, 2}, {1, 0, 0, 1});
  Tensor b = Tensor::from({2, 2}, {5, 6, 7, 8});
  Tensor r = matmul(i2, b);
  CHECK(r.values() == std::vector<double>{5, 6, 7, 8});

  Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
  // Frozen from ref_matmul({1,2,3,4},{5,6,7,8},2,2,2).
  Tensor c = matmul(a, b);
  CHECK(c.values() == std::vector<double>{19, 22, 43, 50});
  CHECK(ref_matmul({1, 2, 3, 4}, {5, 6, 7, 8}, 2, 2, 2) == c.values());

  Tensor row = Tensor::from({1, 2}, {1, 2});
  CHECK_THROWS_WITH_AS(matmul(row, row), doctest::Contains("[1x2]"), std::invalid_argument);
}

TEST_CASE("matmul agrees with triple-loop reference on random shapes") {
  auto rng = make_rng(11);
  for (int t = 0; t < 200; ++t) {
    const int m = uniform_int(rng, 1, 8), k = uniform_int(rng, 1, 8), n = uniform_int(rng, 1, 8);
    auto av = random_vec(rng, static_cast<size_t>(m) * k);
    auto bv = random_vec(rng, static_cast<size_t>(k) * n);
    Tensor r = matmul(Tensor::from({m, k}, av), Tensor::from({k, n}, bv));
    auto ref = ref_matmul(av, bv, m, k, n);
    double worst = 0.0;
    for (size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::fabs(ref[i] - r.values()[i]));
    CHECK(worst <= 1e-10);
  }
}

TEST_CASE("softmax basics") {
  Tensor r = softmax(Tensor::from({2}, {0, 0}), 0);
  CHECK(r.values()[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(r.values()[1] == doctest::Approx(0.5).epsilon(1e-14));

  Tensor s = softmax(Tensor::from({2}, {0.0, std::log(3.0)}), 0);
  CHECK(std::fabs(s.values()[0] - 0.25) <= 1e-14);
  CHECK(std::fabs(s.values()[1] - 0.75) <= 1e-14);

  Tensor big = softmax(Tensor::from({2}, {1000, 1000}), 0);
  CHECK(big.values()[0] == 0.5);
  CHECK(big.values()[1] == 0.5);

  CHECK_THROWS_AS(softmax(Tensor::from({2}, {0, 0}), 1), std::invalid_argument);
}

TEST_CASE("softmax slices sum to one and shift invariance") {
  auto rng = make_rng(12);
  for (int t = 0; t < 50; ++t) {
    const int n = uniform_int(rng, 1, 6), m = uniform_int(rng, 1, 6);
    auto v = random_vec(rng, static_cast<size_t>(n) * m, -5, 5);
    const int axis = uniform_int(rng, 0, 1);
    Tensor s = softmax(Tensor::from({n, m}, v), axis);
    // sums along axis
    const int outer = axis == 0 ? m : n;
    for (int o = 0; o < outer; ++o) {
      double sum = 0.0;
      const int len = axis == 0 ? n : m;
      for (int kk = 0; kk < len; ++kk)
        sum += axis == 0 ? s.values()[kk * m + o] : s.values()[o * m + kk];
      CHECK(std::fabs(sum - 1.0) <= 1e-12);
    }
    const double c = uniform(rng, -3, 3);
    auto shifted = v;
    for (auto& x : shifted) x += c;
    Tensor s2 = softmax(Tensor::from({n, m}, shifted), axis);
    for (size_t i = 0; i < v.size(); ++i)
      CHECK(std::fabs(s.values()[i] - s2.values()[i]) <= 1e-12);
  }
}

TEST_CASE("conv2d basics") {
  Tensor x = Tensor::from({1, 2, 2}, {1, 2, 3, 4});
  Tensor ident = Tensor::from({1, 1, 1, 1}, {1});
  CHECK(conv2d(x, ident, 1, 0).values() == x.values());

  Tensor ones = Tensor::from({1, 1, 2, 2}, {1, 1, 1, 1});
  Tensor r = conv2d(x, ones, 1, 0);
  CHECK(r.shape() == Shape{1, 1, 1});
  CHECK(r.values()[0] == 10.0);

  Tensor big = Tensor::from({1, 1, 3, 3}, std::vector<double>(9, 1.0));
  CHECK_THROWS_WITH_AS(conv2d(x, big, 1, 0), doctest::Contains("larger than padded input"),
                       std::invalid_argument);
}

TEST_CASE("conv2d agrees with sliding-window reference") {
  auto rng = make_rng(13);
  for (int t = 0; t < 100; ++t) {
    const int C = uniform_int(rng, 1, 3), F = uniform_int(rng, 1, 3);
    const int H = uniform_int(rng, 3, 9), W = uniform_int(rng, 3, 9);
    const int KH = uniform_int(rng, 1, 3), KW = uniform_int(rng, 1, 3);
    const int stride = uniform_int(rng, 1, 2), pad = uniform_int(rng, 0, 2);
    auto iv = random_vec(rng, static_cast<size_t>(C) * H * W);
    auto kv = random_vec(rng, static_cast<size_t>(F) * C * KH * KW);
    Tensor r = conv2d(Tensor::from({C, H, W}, iv), Tensor::from({F, C, KH, KW}, kv), stride, pad);
    int OH, OW;
    auto ref = ref_conv2d(iv, C, H, W, kv, F, KH, KW, stride, pad, OH, OW);
    REQUIRE(r.shape() == Shape{F, OH, OW});
    double worst = 0.0;
    for (size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::fabs(ref[i] - r.values()[i]));
    CHECK(worst <= 1e-12);
  }
}

TEST_CASE("cross entropy") {
  std::vector<double> v(8, -40.0);
  v[3] = 40.0;
  CHECK(cross_entropy(Tensor::from({8}, v), 3).item() < 1e-10);

  Tensor u = Tensor::zeros({8});
  CHECK(cross_entropy(u, 0).item() == doctest::Approx(std::log(8.0)).epsilon(1e-14));

  CHECK_THROWS_WITH_AS(cross_entropy(u, 8), doctest::Contains("out of range"),
                       std::invalid_argument);
}

TEST_CASE("backward populates leaf gradients") {
  auto rng = make_rng(14);
  auto xv = random_vec(rng, 6);
  Tensor x = Tensor::param({6}, xv);

  SUBCASE("sum gives ones") {
    backward(sum(x));
    for (double g : x.grad()) CHECK(g == 1.0);
  }
  SUBCASE("dot with itself gives 2x") {
    backward(sum(mul(x, x)));
    for (size_t i = 0; i < xv.size(); ++i)
      CHECK(x.grad()[i] == doctest::Approx(2.0 * xv[i]).epsilon(1e-14));
  }
  SUBCASE("non-scalar loss rejected") {
    CHECK_THROWS_WITH_AS(backward(mul(x, x)), doctest::Contains("scalar"), std::invalid_argument);
  }
  SUBCASE("repeated calls accumulate until zero_grad") {
    backward(sum(x));
    backward(sum(x));
    for (double g : x.grad()) CHECK(g == 2.0);
    x.zero_grad();
    CHECK_FALSE(x.has_grad());
    backward(sum(x));
    for (double g : x.grad()) CHECK(g == 1.0);
  }
}

TEST_CASE("computation record is topologically ordered") {
  Tensor x = Tensor::param({2, 2}, {1, 2, 3, 4});
  Tensor y = matmul(x, relu(scale(x, -1.0)));
  auto rec = computation_record(sum(y));
  CHECK(rec.size() >= 5);
  for (const auto& step : rec)
    for (uint64_t in : step.inputs) CHECK(in < step.output);
}

TEST_CASE("finite differences: quadratic") {
  auto rng = make_rng(15);
  Tensor p = Tensor::from({5}, random_vec(rng, 5));
  double err = finite_diff_check(
      [](const Tensor& x) { return scale(sum(mul(x, x)), 0.5); }, p, 1e-5);
  CHECK(err < 1e-6);
}

TEST_CASE("finite differences: cross_entropy of matmul") {
  auto rng = make_rng(16);
  auto wv = random_vec(rng, 16);
  Tensor p = Tensor::from({4, 4}, random_vec(rng, 16));
  double err = finite_diff_check(
      [&](const Tensor& x) {
        Tensor w = Tensor::from({4, 4}, wv);
        Tensor y = matmul(x, w);
        return cross_entropy(reshape(slice_row(y, 1), {4}), 2);
      },
      p, 1e-5);
  CHECK(err < 1e-4);
}

TEST_CASE("finite differences on random composite graphs") {
  auto rng = make_rng(17);
  // A few structurally different graphs; 100 sampled coordinates each.
  for (int t = 0; t < 5; ++t) {
    const int n = uniform_int(rng, 3, 6);
    Tensor a = Tensor::param({n, n}, random_vec(rng, static_cast<size_t>(n) * n));
    Tensor b = Tensor::param({n, n}, random_vec(rng, static_cast<size_t>(n) * n));
    Tensor k = Tensor::param({2, 1, 2, 2}, random_vec(rng, 8));
    Tensor bias = Tensor::param({n}, random_vec(rng, n));
    std::vector<Tensor> params = {a, b, k, bias};
    auto loss_fn = [&]() {
      Tensor m = matmul(a, transpose2d(b));
      m = add_rowwise(m, bias);
      Tensor s = softmax(m, 1);
      Tensor img = reshape(s, {1, n, n});
      Tensor c = relu(conv2d(img, k, 1, 1));
      Tensor flat = reshape(c, {static_cast<int>(c.size())});
      return cross_entropy(flat, 1);
    };
    double err = finite_diff_check_params(loss_fn, params, 1e-5, 100, rng);
    CHECK(err <= 1e-3);
  }
}

TEST_CASE("layernorm gradient") {
  auto rng = make_rng(18);
  Tensor p = Tensor::from({3, 4}, random_vec(rng, 12));
  double err = finite_diff_check(
      [](const Tensor& x) { return sum(mul(layernorm_rows(x), layernorm_rows(x))); }, p, 1e-6);
  CHECK(err < 1e-3);
}

TEST_CASE("gradients flow through attention-shaped composites") {
  auto rng = make_rng(19);
  Tensor q = Tensor::param({3, 4}, random_vec(rng, 12));
  Tensor v = Tensor::param({3, 4}, random_vec(rng, 12));
  std::vector<Tensor> params = {q, v};
  auto loss_fn = [&]() {
    Tensor logits = scale(matmul(q, transpose2d(q)), 1.0 / 2.0);
    Tensor attn = softmax(logits, 1);
    Tensor out = add(matmul(attn, v), v);
    return sum(mul(out, out));
  };
  double err = finite_diff_check_params(loss_fn, params, 1e-6, 0, rng);
  CHECK(err <= 1e-3);
}

TEST_CASE("gradients flow through gather, slice, concat, and channel-bias ops") {
  auto rng = make_rng(20);
  Tensor table = Tensor::param({5, 4}, random_vec(rng, 20));
  Tensor p = Tensor::param({3, 5}, random_vec(rng, 15));
  Tensor cmap = Tensor::param({2, 3, 1}, random_vec(rng, 6));
  Tensor cbias = Tensor::param({2}, random_vec(rng, 2));
  std::vector<Tensor> params = {table, p, cmap, cbias};
  const int targets[3] = {0, 7, 3};
  auto loss_fn = [&]() {
    Tensor e = embed_rows(table, {0, 3, 1});                       // [3,4]
    Tensor s = slice_cols(p, 1, 3);                                // [3,2]
    Tensor c = transpose2d(reshape(add_channel_bias(cmap, cbias), {2, 3}));  // [3,2]
    Tensor m = scale(concat_cols({e, s, c}), 1.7);                 // [3,8]
    std::vector<Tensor> losses;
    for (int i = 0; i < 3; ++i) losses.push_back(cross_entropy(slice_row(m, i), targets[i]));
    return mean_of(losses);
  };
  double err = finite_diff_check_params(loss_fn, params, 1e-6, 0, rng);
  CHECK(err <= 1e-4);
}
