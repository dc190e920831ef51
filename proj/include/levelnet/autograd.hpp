#pragma once

// Minimal reverse-mode automatic differentiation over dense double tensors.
//
// Every backward rule is itself written with the differentiable ops below, so
// `grad(..., create_graph = true)` yields gradients that can be differentiated
// again (needed for the gradient penalty of a WGAN critic).
//
// Layout conventions: images and feature maps are NHWC; convolution kernels
// are (kh, kw, c_in, c_out); matrices are row-major.

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace levelnet::ag {

using Shape = std::vector<int>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

class Tensor;
using BackwardFn = std::function<std::vector<Tensor>(const Tensor& grad_out,
                                                     const std::vector<bool>& needs)>;

struct Node {
  Shape shape;
  std::vector<double> value;
  bool requires_grad = false;
  std::vector<Tensor> inputs;
  BackwardFn backward;
  const char* op = "leaf";
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor constant(Shape shape, std::vector<double> values);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double v);
  static Tensor scalar(double v) { return full({1}, v); }
  /// Trainable leaf. Optimizers update its values in place.
  static Tensor parameter(Shape shape, std::vector<double> values);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  int dim(int i) const { return node_->shape.at(static_cast<std::size_t>(i)); }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  std::size_t size() const { return node_->value.size(); }
  const std::vector<double>& values() const { return node_->value; }
  /// Direct access for leaves (parameter updates, initialization).
  std::vector<double>& mutable_values() { return node_->value; }
  double operator[](std::size_t i) const { return node_->value[i]; }
  double item() const;
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const char* op() const { return node_->op; }

  /// Identity of the underlying storage; two tensors with equal ids alias.
  const Node* id() const { return node_.get(); }
  Node* node() const { return node_.get(); }

  /// Same values, no history.
  Tensor detach() const;

 private:
  std::shared_ptr<Node> node_;
};

/// Whether new ops record history. Thread-local.
bool grad_enabled();
class GradModeGuard {
 public:
  explicit GradModeGuard(bool enabled);
  ~GradModeGuard();
  GradModeGuard(const GradModeGuard&) = delete;
  GradModeGuard& operator=(const GradModeGuard&) = delete;

 private:
  bool previous_;
};

/// Gradients of scalar `output` with respect to each of `inputs` (zeros when
/// unreachable). With `create_graph` the result carries history.
std::vector<Tensor> grad(const Tensor& output, const std::vector<Tensor>& inputs,
                         bool create_graph = false);

/// Builds a node; history is kept only when grad mode is on and an input
/// requires grad.
Tensor make_node(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                 BackwardFn backward, const char* op);

using ConstBuffer = std::shared_ptr<const std::vector<double>>;
using IndexBuffer = std::shared_ptr<const std::vector<int>>;

// Elementwise (identical shapes).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor square(const Tensor& a);
/// a * m with m a constant of the same size (masks, dropout).
Tensor mul_const(const Tensor& a, ConstBuffer m);
/// a + c with c a constant of the same size (noise).
Tensor add_const(const Tensor& a, ConstBuffer c);

// Reductions and their adjoint broadcasts.
Tensor sum_all(const Tensor& a);                             // -> {1}
Tensor expand_scalar(const Tensor& s, const Shape& shape);   // {1} -> shape
Tensor sum_last(const Tensor& a);                            // (..., C) -> (...)
Tensor expand_last(const Tensor& a, int c);                  // (...) -> (..., C)
Tensor sum_rows(const Tensor& a);                            // (..., C) -> {C}
Tensor expand_rows(const Tensor& v, const Shape& shape);     // {C} -> (..., C)

// Structure.
Tensor reshape(const Tensor& a, const Shape& shape);
Tensor transpose2d(const Tensor& a);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor concat_last(const std::vector<Tensor>& parts);
Tensor slice_last(const Tensor& a, int begin, int len);
Tensor embed_last(const Tensor& a, int begin, int total);
/// out[k] = a[idx[k]].
Tensor gather(const Tensor& a, IndexBuffer idx, const Shape& out_shape);
/// out[idx[k]] += a[k], out has `out_shape`.
Tensor scatter_add(const Tensor& a, IndexBuffer idx, const Shape& out_shape);

/// Geometry of a 2-D cross-correlation from an (in_h, in_w) map to an
/// (out_h, out_w) map: out[oh, ow] reads in[oh*sh + i - pad_t, ow*sw + j - pad_l].
struct ConvGeom {
  int in_h = 0, in_w = 0, out_h = 0, out_w = 0;
  int kh = 1, kw = 1, sh = 1, sw = 1;
  int pad_t = 0, pad_l = 0;

  /// "same" padding: out = ceil(in / stride), padding split as evenly as
  /// possible with the extra row/column at the bottom/right.
  static ConvGeom same(int in_h, int in_w, int kh, int kw, int sh, int sw);
  friend bool operator==(const ConvGeom&, const ConvGeom&) = default;
};

/// x (B, in_h, in_w, Cin), w (kh, kw, Cin, Cout) -> (B, out_h, out_w, Cout).
Tensor conv2d(const Tensor& x, const Tensor& w, const ConvGeom& g);
/// Adjoint of conv2d in its input; also the transposed convolution.
/// gy (B, out_h, out_w, Cout), w (kh, kw, Cin, Cout) -> (B, in_h, in_w, Cin).
Tensor conv2d_input_grad(const Tensor& gy, const Tensor& w, const ConvGeom& g);
/// Adjoint of conv2d in its kernel. x, gy -> (kh, kw, Cin, Cout).
Tensor conv2d_weight_grad(const Tensor& x, const Tensor& gy, const ConvGeom& g);

// Composites.
Tensor mean_all(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
/// Softmax over the last axis.
Tensor softmax_last(const Tensor& a);
/// x (..., C) + b {C}.
Tensor add_bias(const Tensor& x, const Tensor& b);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }

}  // namespace levelnet::ag
