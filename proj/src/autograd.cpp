#include "cmsep/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_set>
#include <utility>

namespace cmsep::ag {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace {

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

void check_shape(const Shape& shape) {
  if (shape.empty()) throw std::invalid_argument("tensor shape must have at least one axis");
  for (std::size_t e : shape)
    if (e == 0) throw std::invalid_argument("tensor extents must be positive: " + to_string(shape));
}

template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> value, std::vector<NodePtr<T>> parents,
                      std::function<void(Node<T>&)> backward_fn) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  const bool needs = std::any_of(parents.begin(), parents.end(),
                                 [](const NodePtr<T>& p) { return p->requires_grad; });
  if (needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor<T>(std::move(node));
}

template <typename T>
std::vector<T>* grad_of(const NodePtr<T>& p) {
  if (!p->requires_grad) return nullptr;
  p->ensure_grad();
  return &p->grad;
}

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b)
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + to_string(a) + " vs " +
                                to_string(b));
}

void require_rank(const Shape& s, std::size_t rank, const char* op) {
  if (s.size() != rank)
    throw std::invalid_argument(std::string(op) + ": expected rank " + std::to_string(rank) +
                                ", got " + to_string(s));
}

}  // namespace

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  check_shape(shape);
  const std::size_t n = ag::numel(shape);
  return from(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> values, bool requires_grad) {
  check_shape(shape);
  if (values.size() != ag::numel(shape))
    throw std::invalid_argument("tensor: " + std::to_string(values.size()) +
                                " values for shape " + to_string(shape));
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw std::invalid_argument("item() on tensor of shape " + to_string(shape()));
  return node_->value[0];
}

template <typename T>
void Tensor<T>::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return from(shape(), node_->value, false);
}

template <typename T>
void Tensor<T>::backward() {
  if (numel() != 1)
    throw std::invalid_argument("backward() needs a scalar loss, got shape " + to_string(shape()));

  // Iterative post-order DFS; `order` ends up parents-before-children.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node<T>* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  // Interior grads are recomputed from scratch; only leaves accumulate.
  for (Node<T>* n : order) {
    if (n->backward_fn) n->grad.assign(n->value.size(), T(0));
  }
  node_->ensure_grad();
  node_->grad[0] += T(1);

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  return make_result<T>(a.shape(), std::move(out), {a.node_ptr(), b.node_ptr()}, [](Node<T>& n) {
    for (std::size_t k = 0; k < 2; ++k)
      if (auto* g = grad_of(n.parents[k]))
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += n.grad[i];
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "sub");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
  return make_result<T>(a.shape(), std::move(out), {a.node_ptr(), b.node_ptr()}, [](Node<T>& n) {
    if (auto* g = grad_of(n.parents[0]))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += n.grad[i];
    if (auto* g = grad_of(n.parents[1]))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= n.grad[i];
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "mul");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  return make_result<T>(a.shape(), std::move(out), {a.node_ptr(), b.node_ptr()}, [](Node<T>& n) {
    const auto& av = n.parents[0]->value;
    const auto& bv = n.parents[1]->value;
    if (auto* g = grad_of(n.parents[0]))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += n.grad[i] * bv[i];
    if (auto* g = grad_of(n.parents[1]))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += n.grad[i] * av[i];
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * factor;
  return make_result<T>(a.shape(), std::move(out), {a.node_ptr()}, [factor](Node<T>& n) {
    if (auto* g = grad_of(n.parents[0]))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += n.grad[i] * factor;
  });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& a) {
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::abs(a.values()[i]);
  return make_result<T>(a.shape(), std::move(out), {a.node_ptr()}, [](Node<T>& n) {
    const auto& x = n.parents[0]->value;
    if (auto* g = grad_of(n.parents[0]))
      for (std::size_t i = 0; i < g->size(); ++i) {
        const T s = x[i] > T(0) ? T(1) : (x[i] < T(0) ? T(-1) : T(0));
        (*g)[i] += n.grad[i] * s;
      }
  });
}

template <typename T>
Tensor<T> elu(const Tensor<T>& a, T alpha) {
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T x = a.values()[i];
    out[i] = x > T(0) ? x : alpha * std::expm1(x);
  }
  return make_result<T>(a.shape(), std::move(out), {a.node_ptr()}, [alpha](Node<T>& n) {
    const auto& x = n.parents[0]->value;
    if (auto* g = grad_of(n.parents[0]))
      for (std::size_t i = 0; i < g->size(); ++i)
        (*g)[i] += n.grad[i] * (x[i] > T(0) ? T(1) : n.value[i] + alpha);
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T s(0);
  for (T v : a.values()) s += v;
  return make_result<T>({1}, {s}, {a.node_ptr()}, [](Node<T>& n) {
    if (auto* g = grad_of(n.parents[0]))
      for (auto& v : *g) v += n.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  const T inv = T(1) / static_cast<T>(a.numel());
  T s(0);
  for (T v : a.values()) s += v;
  return make_result<T>({1}, {s * inv}, {a.node_ptr()}, [inv](Node<T>& n) {
    if (auto* g = grad_of(n.parents[0]))
      for (auto& v : *g) v += n.grad[0] * inv;
  });
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                 std::size_t stride, kernels::Padding padding) {
  require_rank(x.shape(), 3, "conv2d input");
  require_rank(w.shape(), 4, "conv2d weights");
  if (w.dim(1) != x.dim(0))
    throw std::invalid_argument("conv2d: input has " + std::to_string(x.dim(0)) +
                                " channels, weights expect " + std::to_string(w.dim(1)));
  if (w.dim(2) != w.dim(3)) throw std::invalid_argument("conv2d: kernels must be square");
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != w.dim(0)))
    throw std::invalid_argument("conv2d: bias shape " + to_string(bias.shape()));

  const kernels::ConvGeometry g = kernels::conv_geometry(x.dim(0), w.dim(0), x.dim(1), x.dim(2),
                                                         w.dim(2), stride, padding);
  std::vector<T> out(g.out_channels * g.out_h * g.out_w);
  kernels::parallel::conv2d_forward(g, x.values().data(), w.values().data(),
                                    bias.defined() ? bias.values().data() : nullptr, out.data());

  std::vector<NodePtr<T>> parents{x.node_ptr(), w.node_ptr()};
  if (bias.defined()) parents.push_back(bias.node_ptr());
  return make_result<T>({g.out_channels, g.out_h, g.out_w}, std::move(out), std::move(parents),
                        [g](Node<T>& n) {
                          const auto& in = n.parents[0]->value;
                          const auto& wv = n.parents[1]->value;
                          if (auto* gi = grad_of(n.parents[0]))
                            kernels::parallel::conv2d_backward_input(g, n.grad.data(), wv.data(),
                                                                     gi->data());
                          auto* gw = grad_of(n.parents[1]);
                          std::vector<T>* gb =
                              n.parents.size() > 2 ? grad_of(n.parents[2]) : nullptr;
                          if (gw) {
                            kernels::parallel::conv2d_backward_weights(
                                g, in.data(), n.grad.data(), gw->data(),
                                gb ? gb->data() : nullptr);
                          } else if (gb) {
                            const std::size_t plane = g.out_h * g.out_w;
                            for (std::size_t co = 0; co < g.out_channels; ++co)
                              for (std::size_t i = 0; i < plane; ++i)
                                (*gb)[co] += n.grad[co * plane + i];
                          }
                        });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size())
    throw std::invalid_argument("concat: axis " + std::to_string(axis) + " out of range for " +
                                to_string(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size())
      throw std::invalid_argument("concat: rank mismatch " + to_string(s) + " vs " +
                                  to_string(first));
    for (std::size_t d = 0; d < s.size(); ++d)
      if (d != axis && s[d] != first[d])
        throw std::invalid_argument("concat: shape mismatch " + to_string(s) + " vs " +
                                    to_string(first));
    out_shape[axis] += s[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];
  const std::size_t out_row = out_shape[axis] * inner;

  std::vector<T> out(ag::numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  std::vector<NodePtr<T>> parents;
  for (const auto& p : parts) {
    const std::size_t row = p.dim(axis) * inner;
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(p.values().data() + o * row, row, out.data() + o * out_row + offset);
    offsets.push_back(offset);
    offset += row;
    parents.push_back(p.node_ptr());
  }
  return make_result<T>(std::move(out_shape), std::move(out), std::move(parents),
                        [offsets, outer, inner, out_row, axis](Node<T>& n) {
                          for (std::size_t k = 0; k < n.parents.size(); ++k) {
                            auto* g = grad_of(n.parents[k]);
                            if (!g) continue;
                            const std::size_t row = n.parents[k]->shape[axis] * inner;
                            for (std::size_t o = 0; o < outer; ++o) {
                              const T* src = n.grad.data() + o * out_row + offsets[k];
                              T* dst = g->data() + o * row;
                              for (std::size_t i = 0; i < row; ++i) dst[i] += src[i];
                            }
                          }
                        });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a.shape(), 2, "matmul");
  require_rank(b.shape(), 2, "matmul");
  if (a.dim(1) != b.dim(0))
    throw std::invalid_argument("matmul: inner dimensions differ " + to_string(a.shape()) +
                                " x " + to_string(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<T> out(m * n);
  kernels::parallel::gemm(false, false, m, n, k, a.values().data(), b.values().data(), out.data(),
                          false);
  return make_result<T>({m, n}, std::move(out), {a.node_ptr(), b.node_ptr()},
                        [m, k, n](Node<T>& node) {
                          const auto& av = node.parents[0]->value;
                          const auto& bv = node.parents[1]->value;
                          if (auto* ga = grad_of(node.parents[0]))
                            kernels::parallel::gemm(false, true, m, k, n, node.grad.data(),
                                                    bv.data(), ga->data(), true);
                          if (auto* gb = grad_of(node.parents[1]))
                            kernels::parallel::gemm(true, false, k, n, m, av.data(),
                                                    node.grad.data(), gb->data(), true);
                        });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  require_rank(a.shape(), 2, "transpose");
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<T> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a.values()[i * c + j];
  return make_result<T>({c, r}, std::move(out), {a.node_ptr()}, [r, c](Node<T>& n) {
    if (auto* g = grad_of(n.parents[0]))
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) (*g)[i * c + j] += n.grad[j * r + i];
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  check_shape(shape);
  if (ag::numel(shape) != a.numel())
    throw std::invalid_argument("reshape: " + to_string(a.shape()) + " to " + to_string(shape));
  std::vector<T> out(a.values().begin(), a.values().end());
  return make_result<T>(std::move(shape), std::move(out), {a.node_ptr()}, [](Node<T>& n) {
    if (auto* g = grad_of(n.parents[0]))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += n.grad[i];
  });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& a, std::size_t axis) {
  const Shape& s = a.shape();
  if (axis >= s.size())
    throw std::invalid_argument("softmax: axis " + std::to_string(axis) + " out of range for " +
                                to_string(s));
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= s[d];
  for (std::size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];
  const std::size_t len = s[axis];

  std::vector<T> out(a.numel());
  const T* x = a.values().data();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * len * inner + i;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j < len; ++j) mx = std::max(mx, x[base + j * inner]);
      T z(0);
      for (std::size_t j = 0; j < len; ++j) {
        const T e = std::exp(x[base + j * inner] - mx);
        out[base + j * inner] = e;
        z += e;
      }
      for (std::size_t j = 0; j < len; ++j) out[base + j * inner] /= z;
    }
  return make_result<T>(s, std::move(out), {a.node_ptr()}, [outer, inner, len](Node<T>& n) {
    auto* g = grad_of(n.parents[0]);
    if (!g) return;
    const auto& y = n.value;
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t base = o * len * inner + i;
        T dot(0);
        for (std::size_t j = 0; j < len; ++j) dot += n.grad[base + j * inner] * y[base + j * inner];
        for (std::size_t j = 0; j < len; ++j) {
          const std::size_t idx = base + j * inner;
          (*g)[idx] += y[idx] * (n.grad[idx] - dot);
        }
      }
  });
}

template <typename T>
Tensor<T> pad2d(const Tensor<T>& x, std::size_t top, std::size_t bottom, std::size_t left,
                std::size_t right) {
  require_rank(x.shape(), 3, "pad2d");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t oh = h + top + bottom, ow = w + left + right;
  std::vector<T> out(c * oh * ow, T(0));
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < h; ++i)
      std::copy_n(x.values().data() + (ch * h + i) * w, w,
                  out.data() + (ch * oh + i + top) * ow + left);
  return make_result<T>({c, oh, ow}, std::move(out), {x.node_ptr()},
                        [c, h, w, oh, ow, top, left](Node<T>& n) {
                          if (auto* g = grad_of(n.parents[0]))
                            for (std::size_t ch = 0; ch < c; ++ch)
                              for (std::size_t i = 0; i < h; ++i)
                                for (std::size_t j = 0; j < w; ++j)
                                  (*g)[(ch * h + i) * w + j] +=
                                      n.grad[(ch * oh + i + top) * ow + left + j];
                        });
}

template <typename T>
Tensor<T> crop2d(const Tensor<T>& x, std::size_t top, std::size_t left, std::size_t height,
                 std::size_t width) {
  require_rank(x.shape(), 3, "crop2d");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (top + height > h || left + width > w || height == 0 || width == 0)
    throw std::invalid_argument("crop2d: window out of range for " + to_string(x.shape()));
  std::vector<T> out(c * height * width);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < height; ++i)
      std::copy_n(x.values().data() + (ch * h + i + top) * w + left, width,
                  out.data() + (ch * height + i) * width);
  return make_result<T>({c, height, width}, std::move(out), {x.node_ptr()},
                        [c, h, w, height, width, top, left](Node<T>& n) {
                          if (auto* g = grad_of(n.parents[0]))
                            for (std::size_t ch = 0; ch < c; ++ch)
                              for (std::size_t i = 0; i < height; ++i)
                                for (std::size_t j = 0; j < width; ++j)
                                  (*g)[(ch * h + i + top) * w + left + j] +=
                                      n.grad[(ch * height + i) * width + j];
                        });
}

template <typename T>
Tensor<T> avg_pool2(const Tensor<T>& x) {
  require_rank(x.shape(), 3, "avg_pool2");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h < 2 || w < 2 || h % 2 || w % 2)
    throw std::invalid_argument("avg_pool2: spatial dims must be even and >= 2, got " +
                                to_string(x.shape()));
  const std::size_t oh = h / 2, ow = w / 2;
  std::vector<T> out(c * oh * ow);
  const T* v = x.values().data();
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        const T* p = v + (ch * h + 2 * i) * w + 2 * j;
        out[(ch * oh + i) * ow + j] = T(0.25) * (p[0] + p[1] + p[w] + p[w + 1]);
      }
  return make_result<T>({c, oh, ow}, std::move(out), {x.node_ptr()},
                        [c, h, w, oh, ow](Node<T>& n) {
                          auto* g = grad_of(n.parents[0]);
                          if (!g) return;
                          for (std::size_t ch = 0; ch < c; ++ch)
                            for (std::size_t i = 0; i < oh; ++i)
                              for (std::size_t j = 0; j < ow; ++j) {
                                const T q = T(0.25) * n.grad[(ch * oh + i) * ow + j];
                                T* p = g->data() + (ch * h + 2 * i) * w + 2 * j;
                                p[0] += q;
                                p[1] += q;
                                p[w] += q;
                                p[w + 1] += q;
                              }
                        });
}

template <typename T>
Tensor<T> upsample_nearest2(const Tensor<T>& x) {
  require_rank(x.shape(), 3, "upsample_nearest2");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t oh = 2 * h, ow = 2 * w;
  std::vector<T> out(c * oh * ow);
  const T* v = x.values().data();
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j)
        out[(ch * oh + i) * ow + j] = v[(ch * h + i / 2) * w + j / 2];
  return make_result<T>({c, oh, ow}, std::move(out), {x.node_ptr()},
                        [c, h, w, oh, ow](Node<T>& n) {
                          if (auto* g = grad_of(n.parents[0]))
                            for (std::size_t ch = 0; ch < c; ++ch)
                              for (std::size_t i = 0; i < oh; ++i)
                                for (std::size_t j = 0; j < ow; ++j)
                                  (*g)[(ch * h + i / 2) * w + j / 2] +=
                                      n.grad[(ch * oh + i) * ow + j];
                        });
}

#define CMSEP_INSTANTIATE_AG(T)                                                                 \
  template class Tensor<T>;                                                                     \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> scale(const Tensor<T>&, T);                                                \
  template Tensor<T> abs(const Tensor<T>&);                                                     \
  template Tensor<T> elu(const Tensor<T>&, T);                                                  \
  template Tensor<T> sum(const Tensor<T>&);                                                     \
  template Tensor<T> mean(const Tensor<T>&);                                                    \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t, \
                            kernels::Padding);                                                  \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, std::size_t);                        \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> transpose(const Tensor<T>&);                                               \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                          \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);                                    \
  template Tensor<T> pad2d(const Tensor<T>&, std::size_t, std::size_t, std::size_t,            \
                           std::size_t);                                                        \
  template Tensor<T> crop2d(const Tensor<T>&, std::size_t, std::size_t, std::size_t,           \
                            std::size_t);                                                       \
  template Tensor<T> avg_pool2(const Tensor<T>&);                                               \
  template Tensor<T> upsample_nearest2(const Tensor<T>&);

CMSEP_INSTANTIATE_AG(float)
CMSEP_INSTANTIATE_AG(double)

#undef CMSEP_INSTANTIATE_AG

}  // namespace cmsep::ag
