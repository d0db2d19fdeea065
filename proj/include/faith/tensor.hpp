#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace faith {

// Dense n-dimensional 64-bit float array, row-major. A Tensor is a value
// handle onto an immutable computation node; operations on tensors record
// the graph needed to replay the chain rule in reverse.

using Shape = std::vector<int>;

int64_t numel(const Shape& s);
std::string shape_str(const Shape& s);

namespace detail {

struct Node;
using NodePtr = std::shared_ptr<Node>;

// Backward contract: given the node and the gradient flowing into its output,
// accumulate contributions into the per-parent buffers. A null buffer means
// that parent does not need a gradient.
using BackwardFn = std::function<void(const Node& self,
                                      const std::vector<double>& gout,
                                      const std::vector<std::vector<double>*>& gparents)>;

struct Node {
  uint64_t id = 0;
  const char* op = "";
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;    // populated for requires_grad leaves by backward()
  bool requires_grad = false;  // leaf parameter flag
  bool track = false;          // true if a requires_grad leaf is reachable below
  std::vector<NodePtr> parents;
  BackwardFn backward;
  // Extra integer payload some ops need at backward time (targets, strides...).
  std::vector<int> iargs;
};

uint64_t next_node_id();

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(detail::NodePtr n) : node_(std::move(n)) {}

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double v);
  static Tensor scalar(double v);
  static Tensor from(Shape shape, std::vector<double> data);
  // requires_grad leaf (a trainable parameter).
  static Tensor param(Shape shape, std::vector<double> data);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int rank() const { return static_cast<int>(shape().size()); }
  int64_t size() const;
  uint64_t id() const;
  const char* op() const;
  bool requires_grad() const;

  const std::vector<double>& values() const&;
  // Guard against `for (v : f(...).values())`: a temporary handle hands out a
  // copy instead of a reference into a node it is about to release.
  std::vector<double> values() &&;
  std::span<const double> data() const;
  // In-place access to a leaf's storage; used by the optimizer between
  // recorded computations. Must not be called on nodes with parents.
  std::vector<double>& leaf_data();

  double item() const;                       // scalar only
  double at(std::initializer_list<int>) const;

  bool has_grad() const;
  const std::vector<double>& grad() const;   // valid only when has_grad()
  Tensor grad_tensor() const;
  void zero_grad();

  detail::Node* node_ptr() const { return node_.get(); }
  detail::NodePtr node_handle() const { return node_; }

 private:
  detail::NodePtr node_;
};

// ---- operations ------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);               // same shape
Tensor sub(const Tensor& a, const Tensor& b);               // same shape
Tensor mul(const Tensor& a, const Tensor& b);               // elementwise
Tensor scale(const Tensor& a, double c);
Tensor matmul(const Tensor& a, const Tensor& b);            // [m,k] x [k,n]
Tensor transpose2d(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
Tensor relu(const Tensor& a);
Tensor softmax(const Tensor& a, int axis);
Tensor sum(const Tensor& a);                                // -> scalar
Tensor cross_entropy(const Tensor& logits, int target);     // logits rank 1
// Cross-correlation: input [C,H,W], kernels [F,C,kh,kw] -> [F,H',W'].
Tensor conv2d(const Tensor& input, const Tensor& kernels, int stride, int padding);
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);  // x [C,H,W], bias [C]
Tensor add_rowwise(const Tensor& x, const Tensor& v);          // x [n,m], v [m]
Tensor slice_cols(const Tensor& x, int from, int to);          // x [n,m]
Tensor concat_cols(const std::vector<Tensor>& parts);          // all [n,mi]
Tensor slice_row(const Tensor& x, int row);                    // x [n,m] -> [m]
Tensor embed_rows(const Tensor& table, const std::vector<int>& ids);  // [V,d] -> [L,d]
Tensor layernorm_rows(const Tensor& x, double eps = 1e-6);     // per-row, no affine
Tensor mean_of(const std::vector<Tensor>& scalars);

// ---- reverse-mode differentiation ------------------------------------

// Collects leaf gradients. backward() routes them into each leaf's grad
// buffer (accumulating across calls); backward_into() routes them into a
// caller-owned sink so independent graphs can run on worker threads and be
// reduced deterministically afterwards.
class GradSink {
 public:
  std::vector<double>& buffer_for(const detail::Node* leaf);
  const std::vector<double>* find(const Tensor& leaf) const;
  void add_into_leaves() const;  // accumulate every buffer into its leaf's grad
  void clear() { buffers_.clear(); }

 private:
  std::unordered_map<const detail::Node*, std::vector<double>> buffers_;
};

void backward(const Tensor& loss);
void backward_into(const Tensor& loss, GradSink& sink);

// Replayable (op, inputs, output) record of everything reachable from root,
// in ascending creation order; every input id precedes its output id.
struct TraceStep {
  uint64_t output;
  const char* op;
  std::vector<uint64_t> inputs;
};
std::vector<TraceStep> computation_record(const Tensor& root);

}  // namespace faith
