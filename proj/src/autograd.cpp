#include "levelnet/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "levelnet/error.hpp"

namespace levelnet::ag {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeError("negative dimension in shape " + to_string(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string to_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

namespace {

thread_local bool g_grad_enabled = true;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
}

Shape drop_last(const Shape& s) {
  if (s.size() <= 1) return {1};
  return Shape(s.begin(), s.end() - 1);
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }
GradModeGuard::GradModeGuard(bool enabled) : previous_(g_grad_enabled) { g_grad_enabled = enabled; }
GradModeGuard::~GradModeGuard() { g_grad_enabled = previous_; }

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
  if (numel(shape) != values.size())
    throw ShapeError("constant of shape " + to_string(shape) + " given " +
                     std::to_string(values.size()) + " values");
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  return Tensor(std::move(n));
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double v) {
  auto n = numel(shape);
  return constant(std::move(shape), std::vector<double>(n, v));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  Tensor t = constant(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  return t;
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape()));
  return node_->value[0];
}

Tensor Tensor::detach() const { return constant(shape(), values()); }

Tensor make_node(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                 BackwardFn backward, const char* op) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->op = op;
  if (g_grad_enabled &&
      std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); })) {
    n->requires_grad = true;
    n->inputs = std::move(inputs);
    n->backward = std::move(backward);
  }
  return Tensor(std::move(n));
}

std::vector<Tensor> grad(const Tensor& output, const std::vector<Tensor>& inputs,
                         bool create_graph) {
  if (output.size() != 1) throw ShapeError("grad() needs a scalar output");
  std::vector<Tensor> result;
  result.reserve(inputs.size());
  if (!output.requires_grad()) {
    for (const auto& in : inputs) result.push_back(Tensor::zeros(in.shape()));
    return result;
  }

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{output.node(), 0}};
  visited.insert(output.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].node();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  GradModeGuard guard(create_graph);
  std::unordered_map<Node*, Tensor> grads;
  grads[output.node()] = Tensor::full(output.shape(), 1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    auto g = grads.find(node);
    if (g == grads.end() || !node->backward) continue;
    std::vector<bool> needs(node->inputs.size());
    for (std::size_t i = 0; i < needs.size(); ++i) needs[i] = node->inputs[i].requires_grad();
    auto input_grads = node->backward(g->second, needs);
    for (std::size_t i = 0; i < needs.size(); ++i) {
      if (!needs[i] || !input_grads[i].defined()) continue;
      Node* child = node->inputs[i].node();
      auto existing = grads.find(child);
      if (existing == grads.end())
        grads.emplace(child, input_grads[i]);
      else
        existing->second = add(existing->second, input_grads[i]);
    }
    // Intermediate gradients are no longer needed once propagated.
    if (!node->inputs.empty()) {
      bool wanted = std::any_of(inputs.begin(), inputs.end(),
                                [&](const Tensor& t) { return t.node() == node; });
      if (!wanted) grads.erase(node);
    }
  }
  for (const auto& in : inputs) {
    auto g = grads.find(in.node());
    result.push_back(g == grads.end() ? Tensor::zeros(in.shape()) : g->second);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a[i] + b[i];
  return make_node(a.shape(), std::move(v), {a, b},
                   [](const Tensor& g, const std::vector<bool>&) -> std::vector<Tensor> {
                     return {g, g};
                   },
                   "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a[i] - b[i];
  return make_node(a.shape(), std::move(v), {a, b},
                   [](const Tensor& g, const std::vector<bool>& needs) -> std::vector<Tensor> {
                     return {g, needs[1] ? neg(g) : Tensor()};
                   },
                   "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a[i] * b[i];
  return make_node(a.shape(), std::move(v), {a, b},
                   [a, b](const Tensor& g, const std::vector<bool>& needs) -> std::vector<Tensor> {
                     return {needs[0] ? mul(g, b) : Tensor(), needs[1] ? mul(g, a) : Tensor()};
                   },
                   "mul");
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "div");
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a[i] / b[i];
  return make_node(a.shape(), std::move(v), {a, b},
                   [a, b](const Tensor& g, const std::vector<bool>& needs) -> std::vector<Tensor> {
                     return {needs[0] ? div(g, b) : Tensor(),
                             needs[1] ? neg(div(mul(g, a), mul(b, b))) : Tensor()};
                   },
                   "div");
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor scale(const Tensor& a, double s) {
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a[i] * s;
  return make_node(a.shape(), std::move(v), {a},
                   [s](const Tensor& g, const std::vector<bool>&) -> std::vector<Tensor> {
                     return {scale(g, s)};
                   },
                   "scale");
}

Tensor add_scalar(const Tensor& a, double s) {
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a[i] + s;
  return make_node(a.shape(), std::move(v), {a},
                   [](const Tensor& g, const std::vector<bool>&) -> std::vector<Tensor> {
                     return {g};
                   },
                   "add_scalar");
}

Tensor exp(const Tensor& a) {
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::exp(a[i]);
  return make_node(a.shape(), std::move(v), {a},
                   [a](const Tensor& g, const std::vector<bool>&) -> std::vector<Tensor> {
                     return {mul(g, exp(a))};
                   },
                   "exp");
}

Tensor log(const Tensor& a) {
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::log(a[i]);
  return make_node(a.shape(), std::move(v), {a},
                   [a](const Tensor& g, const std::vector<bool>&) -> std::vector<Tensor> {
                     return {div(g, a)};
                   },
                   "log");
}

Tensor sqrt(const Tensor& a) {
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::sqrt(a[i]);
  return make_node(a.shape(), std::move(v), {a},
                   [a](const Tensor& g, const std::vector<bool>&) -> std::vector<Tensor> {
                     return {div(scale(g, 0.5), sqrt(a))};
                   },
                   "sqrt");
}

Tensor square(const Tensor& a) { return mul(a, a); }

Tensor mul_const(const Tensor& a, ConstBuffer m) {
  if (m->size() != a.size()) throw ShapeError("mul_const: mask size mismatch");
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a[i] * (*m)[i];
  return make_node(a.shape(), std::move(v), {a},
                   [m](const Tensor& g, const std::vector<bool>&) -> std::vector<Tensor> {
                     return {mul_const(g, m)};
                   },
                   "mul_const");
}

Tensor add_const(const Tensor& a, ConstBuffer c) {
  if (c->size() != a.size()) throw ShapeError("add_const: size mismatch");
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a[i] + (*c)[i];
  return make_node(a.shape(), std::move(v), {a},
                   [](const Tensor& g, const std::vector<bool>&) -> std::vector<Tensor> {
                     return {g};
                   },
                   "add_const");
}

// ---------------------------------------------------------------------------
// Reductions

Tensor sum_all(const Tensor& a) {
  double s = std::accumulate(a.values().begin(), a.values().end(), 0.0);
  Shape shape = a.shape();
  return make_node({1}, {s}, {a},
                   [shape](const Tensor& g, const std::vector<bool>&) -> std::vector<Tensor> {
                     return {expand_scalar(g, shape)};
                   },
                   "sum_all");
}

Tensor expand_scalar(const Tensor& s, const Shape& shape) {
  if (s.size() != 1) throw ShapeError("expand_scalar needs a single value");
  std::vector<double> v(numel(shape), s[0]);
  Shape s_shape = s.shape();
  return make_node(shape, std::move(v), {s},
                   [s_shape](const Tensor& g, const std::vector<bool>&) -> std::vector<Tensor> {
                     return {reshape(sum_all(g), s_shape)};
                   },
                   "expand_scalar");
}

Tensor sum_last(const Tensor& a) {
  const int c = a.shape().back();
  const std::size_t rows = a.size() / c;
  std::vector<double> v(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (int k = 0; k < c; ++k) v[r] += a[r * c + k];
  Shape in_shape = a.shape();
  return make_node(drop_last(a.shape()), std::move(v), {a},
                   [in_shape, c](const Tensor& g, const std::vector<bool>&) -> std::vector<Tensor> {
                     return {reshape(expand_last(g, c), in_shape)};
                   },
                   "sum_last");
}

Tensor expand_last(const Tensor& a, int c) {
  Shape shape = a.shape();
  shape.push_back(c);
  std::vector<double> v(a.size() * c);
  for (std::size_t r = 0; r < a.size(); ++r)
    for (int k = 0; k < c; ++k) v[r * c + k] = a[r];
  Shape in_shape = a.shape();
  return make_node(std::move(shape), std::move(v), {a},
                   [in_shape](const Tensor& g, const std::vector<bool>&) -> std::vector<Tensor> {
                     return {reshape(sum_last(g), in_shape)};
                   },
                   "expand_last");
}

Tensor sum_rows(const Tensor& a) {
  const int c = a.shape().back();
  const std::size_t rows = a.size() / c;
  std::vector<double> v(c, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (int k = 0; k < c; ++k) v[k] += a[r * c + k];
  Shape in_shape = a.shape();
  return make_node({c}, std::move(v), {a},
                   [in_shape](const Tensor& g, const std::vector<bool>&) -> std::vector<Tensor> {
                     return {expand_rows(g, in_shape)};
                   },
                   "sum_rows");
}

Tensor expand_rows(const Tensor& vec, const Shape& shape) {
  const int c = shape.back();
  if (vec.rank() != 1 || vec.dim(0) != c)
    throw ShapeError("expand_rows: vector " + to_string(vec.shape()) + " vs target " +
                     to_string(shape));
  std::vector<double> v(numel(shape));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = vec[i % c];
  return make_node(shape, std::move(v), {vec},
                   [](const Tensor& g, const std::vector<bool>&) -> std::vector<Tensor> {
                     return {sum_rows(g)};
                   },
                   "expand_rows");
}

// ---------------------------------------------------------------------------
// Structure

Tensor reshape(const Tensor& a, const Shape& shape) {
  if (numel(shape) != a.size())
    throw ShapeError("reshape " + to_string(a.shape()) + " -> " + to_string(shape));
  Shape in_shape = a.shape();
  return make_node(shape, a.values(), {a},
                   [in_shape](const Tensor& g, const std::vector<bool>&) -> std::vector<Tensor> {
                     return {reshape(g, in_shape)};
                   },
                   "reshape");
}

Tensor transpose2d(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose2d needs a matrix");
  const int m = a.dim(0), n = a.dim(1);
  std::vector<double> v(a.size());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) v[static_cast<std::size_t>(j) * m + i] = a[static_cast<std::size_t>(i) * n + j];
  return make_node({n, m}, std::move(v), {a},
                   [](const Tensor& g, const std::vector<bool>&) -> std::vector<Tensor> {
                     return {transpose2d(g)};
                   },
                   "transpose2d");
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw ShapeError("matmul " + to_string(a.shape()) + " x " + to_string(b.shape()));
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> v(static_cast<std::size_t>(m) * n, 0.0);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (int i = 0; i < m; ++i) {
    double* row = &v[static_cast<std::size_t>(i) * n];
    for (int p = 0; p < k; ++p) {
      const double x = av[static_cast<std::size_t>(i) * k + p];
      if (x == 0.0) continue;
      const double* brow = &bv[static_cast<std::size_t>(p) * n];
      for (int j = 0; j < n; ++j) row[j] += x * brow[j];
    }
  }
  return make_node({m, n}, std::move(v), {a, b},
                   [a, b](const Tensor& g, const std::vector<bool>& needs) -> std::vector<Tensor> {
                     return {needs[0] ? matmul(g, transpose2d(b)) : Tensor(),
                             needs[1] ? matmul(transpose2d(a), g) : Tensor()};
                   },
                   "matmul");
}

Tensor concat_last(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat of nothing");
  Shape lead = drop_last(parts[0].shape());
  int total = 0;
  std::vector<int> widths;
  for (const auto& p : parts) {
    if (drop_last(p.shape()) != lead || p.rank() != parts[0].rank())
      throw ShapeError("concat_last: incompatible shapes " + to_string(parts[0].shape()) +
                       " and " + to_string(p.shape()));
    widths.push_back(p.shape().back());
    total += widths.back();
  }
  const std::size_t rows = parts[0].size() / widths[0];
  std::vector<double> v(rows * total);
  int offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(&parts[p].values()[r * widths[p]], widths[p], &v[r * total + offset]);
    offset += widths[p];
  }
  Shape shape = parts[0].shape();
  shape.back() = total;
  return make_node(std::move(shape), std::move(v), parts,
                   [widths](const Tensor& g, const std::vector<bool>& needs) -> std::vector<Tensor> {
                     std::vector<Tensor> out(widths.size());
                     int off = 0;
                     for (std::size_t p = 0; p < widths.size(); ++p) {
                       if (needs[p]) out[p] = slice_last(g, off, widths[p]);
                       off += widths[p];
                     }
                     return out;
                   },
                   "concat_last");
}

Tensor slice_last(const Tensor& a, int begin, int len) {
  const int c = a.shape().back();
  if (begin < 0 || len <= 0 || begin + len > c) throw ShapeError("slice_last out of range");
  const std::size_t rows = a.size() / c;
  std::vector<double> v(rows * len);
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(&a.values()[r * c + begin], len, &v[r * len]);
  Shape shape = a.shape();
  shape.back() = len;
  return make_node(std::move(shape), std::move(v), {a},
                   [begin, c](const Tensor& g, const std::vector<bool>&) -> std::vector<Tensor> {
                     return {embed_last(g, begin, c)};
                   },
                   "slice_last");
}

Tensor embed_last(const Tensor& a, int begin, int total) {
  const int c = a.shape().back();
  if (begin < 0 || begin + c > total) throw ShapeError("embed_last out of range");
  const std::size_t rows = a.size() / c;
  std::vector<double> v(rows * total, 0.0);
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(&a.values()[r * c], c, &v[r * total + begin]);
  Shape shape = a.shape();
  shape.back() = total;
  return make_node(std::move(shape), std::move(v), {a},
                   [begin, c](const Tensor& g, const std::vector<bool>&) -> std::vector<Tensor> {
                     return {slice_last(g, begin, c)};
                   },
                   "embed_last");
}

Tensor gather(const Tensor& a, IndexBuffer idx, const Shape& out_shape) {
  if (idx->size() != numel(out_shape)) throw ShapeError("gather: index count mismatch");
  std::vector<double> v(idx->size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = a[static_cast<std::size_t>((*idx)[k])];
  Shape in_shape = a.shape();
  return make_node(out_shape, std::move(v), {a},
                   [idx, in_shape](const Tensor& g, const std::vector<bool>&) -> std::vector<Tensor> {
                     return {scatter_add(g, idx, in_shape)};
                   },
                   "gather");
}

Tensor scatter_add(const Tensor& a, IndexBuffer idx, const Shape& out_shape) {
  if (idx->size() != a.size()) throw ShapeError("scatter_add: index count mismatch");
  std::vector<double> v(numel(out_shape), 0.0);
  for (std::size_t k = 0; k < a.size(); ++k) v[static_cast<std::size_t>((*idx)[k])] += a[k];
  Shape in_shape = a.shape();
  return make_node(out_shape, std::move(v), {a},
                   [idx, in_shape](const Tensor& g, const std::vector<bool>&) -> std::vector<Tensor> {
                     return {gather(g, idx, in_shape)};
                   },
                   "scatter_add");
}

// ---------------------------------------------------------------------------
// Convolution family. The three kernels are the partial gradients of the
// trilinear form sum(y * conv2d(x, w)), so each one's adjoints are the other two.

ConvGeom ConvGeom::same(int in_h, int in_w, int kh, int kw, int sh, int sw) {
  ConvGeom g;
  g.in_h = in_h;
  g.in_w = in_w;
  g.kh = kh;
  g.kw = kw;
  g.sh = sh;
  g.sw = sw;
  g.out_h = (in_h + sh - 1) / sh;
  g.out_w = (in_w + sw - 1) / sw;
  g.pad_t = std::max((g.out_h - 1) * sh + kh - in_h, 0) / 2;
  g.pad_l = std::max((g.out_w - 1) * sw + kw - in_w, 0) / 2;
  return g;
}

namespace {

void check_conv(const Shape& x, const Shape& w, const Shape& y, const ConvGeom& g, bool check_x,
                bool check_w, bool check_y) {
  if (check_x && (x.size() != 4 || x[1] != g.in_h || x[2] != g.in_w))
    throw ShapeError("conv input " + to_string(x) + " does not match geometry " +
                     std::to_string(g.in_h) + "x" + std::to_string(g.in_w));
  if (check_w && (w.size() != 4 || w[0] != g.kh || w[1] != g.kw))
    throw ShapeError("conv kernel " + to_string(w) + " does not match geometry");
  if (check_y && (y.size() != 4 || y[1] != g.out_h || y[2] != g.out_w))
    throw ShapeError("conv output " + to_string(y) + " does not match geometry " +
                     std::to_string(g.out_h) + "x" + std::to_string(g.out_w));
}

// Calls f(x_offset, y_offset, w_offset) for every (input pixel, output pixel,
// kernel tap) triple that contributes, with offsets to the channel-0 entries.
template <class F>
void for_each_tap(int batch, const ConvGeom& g, int cin, int cout, F&& f) {
  for (int b = 0; b < batch; ++b)
    for (int oh = 0; oh < g.out_h; ++oh)
      for (int ow = 0; ow < g.out_w; ++ow) {
        const std::size_t yo = ((static_cast<std::size_t>(b) * g.out_h + oh) * g.out_w + ow) * cout;
        for (int i = 0; i < g.kh; ++i) {
          const int ih = oh * g.sh + i - g.pad_t;
          if (ih < 0 || ih >= g.in_h) continue;
          for (int j = 0; j < g.kw; ++j) {
            const int iw = ow * g.sw + j - g.pad_l;
            if (iw < 0 || iw >= g.in_w) continue;
            const std::size_t xo = ((static_cast<std::size_t>(b) * g.in_h + ih) * g.in_w + iw) * cin;
            const std::size_t wo = (static_cast<std::size_t>(i) * g.kw + j) * cin * cout;
            f(xo, yo, wo);
          }
        }
      }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const ConvGeom& g) {
  check_conv(x.shape(), w.shape(), {}, g, true, true, false);
  const int batch = x.dim(0), cin = x.dim(3), cout = w.dim(3);
  if (w.dim(2) != cin) throw ShapeError("conv2d: kernel expects " + std::to_string(w.dim(2)) +
                                        " channels, input has " + std::to_string(cin));
  std::vector<double> y(static_cast<std::size_t>(batch) * g.out_h * g.out_w * cout, 0.0);
  const auto& xv = x.values();
  const auto& wv = w.values();
  for_each_tap(batch, g, cin, cout, [&](std::size_t xo, std::size_t yo, std::size_t wo) {
    double* yr = &y[yo];
    for (int ci = 0; ci < cin; ++ci) {
      const double xval = xv[xo + ci];
      if (xval == 0.0) continue;
      const double* wr = &wv[wo + static_cast<std::size_t>(ci) * cout];
      for (int co = 0; co < cout; ++co) yr[co] += xval * wr[co];
    }
  });
  return make_node({batch, g.out_h, g.out_w, cout}, std::move(y), {x, w},
                   [x, w, g](const Tensor& gy, const std::vector<bool>& needs) -> std::vector<Tensor> {
                     return {needs[0] ? conv2d_input_grad(gy, w, g) : Tensor(),
                             needs[1] ? conv2d_weight_grad(x, gy, g) : Tensor()};
                   },
                   "conv2d");
}

Tensor conv2d_input_grad(const Tensor& gy, const Tensor& w, const ConvGeom& g) {
  check_conv({}, w.shape(), gy.shape(), g, false, true, true);
  const int batch = gy.dim(0), cin = w.dim(2), cout = w.dim(3);
  if (gy.dim(3) != cout) throw ShapeError("conv2d_input_grad: channel mismatch");
  std::vector<double> gx(static_cast<std::size_t>(batch) * g.in_h * g.in_w * cin, 0.0);
  const auto& gv = gy.values();
  const auto& wv = w.values();
  for_each_tap(batch, g, cin, cout, [&](std::size_t xo, std::size_t yo, std::size_t wo) {
    const double* gr = &gv[yo];
    for (int ci = 0; ci < cin; ++ci) {
      const double* wr = &wv[wo + static_cast<std::size_t>(ci) * cout];
      double acc = 0;
      for (int co = 0; co < cout; ++co) acc += gr[co] * wr[co];
      gx[xo + ci] += acc;
    }
  });
  return make_node({batch, g.in_h, g.in_w, cin}, std::move(gx), {gy, w},
                   [gy, w, g](const Tensor& h, const std::vector<bool>& needs) -> std::vector<Tensor> {
                     return {needs[0] ? conv2d(h, w, g) : Tensor(),
                             needs[1] ? conv2d_weight_grad(h, gy, g) : Tensor()};
                   },
                   "conv2d_input_grad");
}

Tensor conv2d_weight_grad(const Tensor& x, const Tensor& gy, const ConvGeom& g) {
  check_conv(x.shape(), {}, gy.shape(), g, true, false, true);
  const int batch = x.dim(0), cin = x.dim(3), cout = gy.dim(3);
  if (gy.dim(0) != batch) throw ShapeError("conv2d_weight_grad: batch mismatch");
  std::vector<double> gw(static_cast<std::size_t>(g.kh) * g.kw * cin * cout, 0.0);
  const auto& xv = x.values();
  const auto& gv = gy.values();
  for_each_tap(batch, g, cin, cout, [&](std::size_t xo, std::size_t yo, std::size_t wo) {
    const double* gr = &gv[yo];
    for (int ci = 0; ci < cin; ++ci) {
      const double xval = xv[xo + ci];
      if (xval == 0.0) continue;
      double* wr = &gw[wo + static_cast<std::size_t>(ci) * cout];
      for (int co = 0; co < cout; ++co) wr[co] += xval * gr[co];
    }
  });
  return make_node({g.kh, g.kw, cin, cout}, std::move(gw), {x, gy},
                   [x, gy, g](const Tensor& h, const std::vector<bool>& needs) -> std::vector<Tensor> {
                     return {needs[0] ? conv2d_input_grad(gy, h, g) : Tensor(),
                             needs[1] ? conv2d(x, h, g) : Tensor()};
                   },
                   "conv2d_weight_grad");
}

// ---------------------------------------------------------------------------
// Composites

Tensor mean_all(const Tensor& a) { return scale(sum_all(a), 1.0 / static_cast<double>(a.size())); }

Tensor leaky_relu(const Tensor& a, double slope) {
  auto mask = std::make_shared<std::vector<double>>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) (*mask)[i] = a[i] > 0 ? 1.0 : slope;
  return mul_const(a, std::move(mask));
}

Tensor softmax_last(const Tensor& a) {
  const int c = a.shape().back();
  const std::size_t rows = a.size() / c;
  auto shift = std::make_shared<std::vector<double>>(a.size());
  for (std::size_t r = 0; r < rows; ++r) {
    double m = *std::max_element(&a.values()[r * c], &a.values()[r * c] + c);
    for (int k = 0; k < c; ++k) (*shift)[r * c + k] = -m;
  }
  Tensor e = exp(add_const(a, std::move(shift)));
  return div(e, reshape(expand_last(sum_last(e), c), a.shape()));
}

Tensor add_bias(const Tensor& x, const Tensor& b) { return add(x, expand_rows(b, x.shape())); }

}  // namespace levelnet::ag
