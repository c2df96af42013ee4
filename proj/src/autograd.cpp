#include "vosmem/autograd.hpp"

#include <cmath>
#include <unordered_set>

#include "vosmem/kernels.hpp"

namespace vosmem::autograd {

namespace {

thread_local bool g_grad_enabled = true;
thread_local ActivationFingerprint* g_fingerprint = nullptr;

void require_same(const Shape& a, const Shape& b, const char* op) {
  if (a != b) throw ConfigError(std::string(op) + ": shape mismatch " + a.str() + " vs " + b.str());
}

}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

ActivationFingerprint::ActivationFingerprint() : previous_(g_fingerprint) { g_fingerprint = this; }
ActivationFingerprint::~ActivationFingerprint() { g_fingerprint = previous_; }
ActivationFingerprint* ActivationFingerprint::active() { return g_fingerprint; }
void ActivationFingerprint::mix(std::uint64_t v) {
  hash_ ^= v + 0x9e3779b97f4a7c15ull + (hash_ << 6) + (hash_ >> 2);
}

template <typename T>
Var<T> make_node(Tensor<T> value, std::vector<Var<T>> parents, std::function<void(Node<T>&)> backward_fn) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs = needs || p->requires_grad;
  }
  if (needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward_fn = std::move(backward_fn);
  }
  return node;
}

template <typename T>
Var<T> constant(Tensor<T> value) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  return node;
}

template <typename T>
Var<T> parameter(Tensor<T> value) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->requires_grad = true;
  return node;
}

template <typename T>
void backward(const Var<T>& root) {
  if (root->value.size() != 1) throw ConfigError("backward: root must be a scalar, got " + root->value.shape().str());
  if (!root->requires_grad) return;

  // Iterative post-order DFS.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.push_back({parent, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad()[0] += T{1};
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (node->backward_fn && node->has_grad()) node->backward_fn(*node);
  }
}

template <typename T>
Var<T> conv2d(const Var<T>& input, const Var<T>& weight, const Var<T>& bias, int kernel) {
  Tensor<T> out;
  kernels::conv2d_forward(input->value, weight->value, bias->value, kernel, out);
  return make_node<T>(std::move(out), {input, weight, bias}, [kernel](Node<T>& self) {
    auto& in = *self.parents[0];
    auto& w = *self.parents[1];
    auto& b = *self.parents[2];
    Tensor<T> scratch_w, scratch_b;
    Tensor<T>& gw = w.requires_grad ? w.ensure_grad() : (scratch_w = Tensor<T>(w.value.shape()));
    Tensor<T>& gb = b.requires_grad ? b.ensure_grad() : (scratch_b = Tensor<T>(b.value.shape()));
    kernels::conv2d_backward(in.value, w.value, kernel, self.grad, in.requires_grad ? &in.ensure_grad() : nullptr,
                             gw, gb);
  });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  Tensor<T> out(x->value.shape());
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) out[i] = x->value[i] > T{0} ? x->value[i] : T{0};
  if (auto* fp = ActivationFingerprint::active()) {
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < n; ++i) {
      bits = (bits << 1) | (x->value[i] > T{0} ? 1u : 0u);
      if ((i & 63) == 63) fp->mix(bits), bits = 0;
    }
    fp->mix(bits);
  }
  return make_node<T>(std::move(out), {x}, [](Node<T>& self) {
    auto& in = *self.parents[0];
    if (!in.requires_grad) return;
    auto& g = in.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (in.value[i] > T{0}) g[i] += self.grad[i];
    }
  });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  Tensor<T> out(x->value.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = T{1} / (T{1} + std::exp(-x->value[i]));
  return make_node<T>(std::move(out), {x}, [](Node<T>& self) {
    auto& in = *self.parents[0];
    if (!in.requires_grad) return;
    auto& g = in.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const T s = self.value[i];
      g[i] += self.grad[i] * s * (T{1} - s);
    }
  });
}

template <typename T>
Var<T> tanh(const Var<T>& x) {
  Tensor<T> out(x->value.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x->value[i]);
  return make_node<T>(std::move(out), {x}, [](Node<T>& self) {
    auto& in = *self.parents[0];
    if (!in.requires_grad) return;
    auto& g = in.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const T t = self.value[i];
      g[i] += self.grad[i] * (T{1} - t * t);
    }
  });
}

template <typename T>
Var<T> maxpool2(const Var<T>& x) {
  Tensor<T> out;
  auto argmax = std::make_shared<std::vector<int>>();
  kernels::maxpool2_forward(x->value, out, *argmax);
  if (auto* fp = ActivationFingerprint::active()) {
    for (int idx : *argmax) fp->mix(static_cast<std::uint64_t>(idx));
  }
  return make_node<T>(std::move(out), {x}, [argmax](Node<T>& self) {
    auto& in = *self.parents[0];
    if (in.requires_grad) kernels::maxpool2_backward(self.grad, *argmax, in.ensure_grad());
  });
}

template <typename T>
Var<T> upsample2(const Var<T>& x) {
  Tensor<T> out;
  kernels::upsample2_forward(x->value, out);
  return make_node<T>(std::move(out), {x}, [](Node<T>& self) {
    auto& in = *self.parents[0];
    if (in.requires_grad) kernels::upsample2_backward(self.grad, in.ensure_grad());
  });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same(a->value.shape(), b->value.shape(), "add");
  Tensor<T> out = a->value;
  out.add(b->value);
  return make_node<T>(std::move(out), {a, b}, [](Node<T>& self) {
    for (auto& p : self.parents) {
      if (p->requires_grad) p->ensure_grad().add(self.grad);
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same(a->value.shape(), b->value.shape(), "mul");
  Tensor<T> out(a->value.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] * b->value[i];
  return make_node<T>(std::move(out), {a, b}, [](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.value[i];
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& x, double factor) {
  Tensor<T> out(x->value.shape());
  const T f = static_cast<T>(factor);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f * x->value[i];
  return make_node<T>(std::move(out), {x}, [f](Node<T>& self) {
    auto& in = *self.parents[0];
    if (!in.requires_grad) return;
    auto& g = in.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += f * self.grad[i];
  });
}

template <typename T>
Var<T> concat(std::span<const Var<T>> parts) {
  if (parts.empty()) throw ConfigError("concat: no inputs");
  const int h = parts[0]->value.height();
  const int w = parts[0]->value.width();
  int channels = 0;
  for (const auto& p : parts) {
    if (p->value.height() != h || p->value.width() != w) {
      throw ConfigError("concat: spatial mismatch " + parts[0]->value.shape().str() + " vs " + p->value.shape().str());
    }
    channels += p->value.channels();
  }
  Tensor<T> out(channels, h, w);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy(p->value.data(), p->value.data() + p->value.size(), out.data() + offset);
    offset += p->value.size();
  }
  return make_node<T>(std::move(out), {parts.begin(), parts.end()}, [](Node<T>& self) {
    std::size_t off = 0;
    for (auto& p : self.parents) {
      const std::size_t n = p->value.size();
      if (p->requires_grad) {
        auto& g = p->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[off + i];
      }
      off += n;
    }
  });
}

template <typename T>
Var<T> slice_channels(const Var<T>& x, int begin, int count) {
  if (begin < 0 || count <= 0 || begin + count > x->value.channels()) {
    throw ConfigError("slice_channels: range out of bounds for " + x->value.shape().str());
  }
  Tensor<T> out(count, x->value.height(), x->value.width());
  const std::size_t plane = x->value.shape().plane();
  std::copy_n(x->value.channel(begin), count * plane, out.data());
  return make_node<T>(std::move(out), {x}, [begin, count, plane](Node<T>& self) {
    auto& in = *self.parents[0];
    if (!in.requires_grad) return;
    T* g = in.ensure_grad().channel(begin);
    for (std::size_t i = 0; i < count * plane; ++i) g[i] += self.grad[i];
  });
}

template <typename T>
Var<T> softmax_all(const Var<T>& x) {
  Tensor<T> out(x->value.shape());
  T mx = x->value[0];
  for (std::size_t i = 1; i < out.size(); ++i) mx = std::max(mx, x->value[i]);
  T sum{};
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::exp(x->value[i] - mx);
    sum += out[i];
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= sum;
  return make_node<T>(std::move(out), {x}, [](Node<T>& self) {
    auto& in = *self.parents[0];
    if (!in.requires_grad) return;
    T dot{};
    for (std::size_t i = 0; i < self.value.size(); ++i) dot += self.grad[i] * self.value[i];
    auto& g = in.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.value[i] * (self.grad[i] - dot);
  });
}

template <typename T>
Var<T> softmax_channels(const Var<T>& x) {
  const int k = x->value.channels();
  const std::size_t plane = x->value.shape().plane();
  Tensor<T> out(x->value.shape());
  for (std::size_t p = 0; p < plane; ++p) {
    T mx = x->value[p];
    for (int c = 1; c < k; ++c) mx = std::max(mx, x->value[c * plane + p]);
    T sum{};
    for (int c = 0; c < k; ++c) {
      const T e = std::exp(x->value[c * plane + p] - mx);
      out[c * plane + p] = e;
      sum += e;
    }
    for (int c = 0; c < k; ++c) out[c * plane + p] /= sum;
  }
  return make_node<T>(std::move(out), {x}, [k, plane](Node<T>& self) {
    auto& in = *self.parents[0];
    if (!in.requires_grad) return;
    auto& g = in.ensure_grad();
    for (std::size_t p = 0; p < plane; ++p) {
      T dot{};
      for (int c = 0; c < k; ++c) dot += self.grad[c * plane + p] * self.value[c * plane + p];
      for (int c = 0; c < k; ++c) {
        const std::size_t i = c * plane + p;
        g[i] += self.value[i] * (self.grad[i] - dot);
      }
    }
  });
}

template <typename T>
Var<T> scale_by(const Var<T>& x, const Var<T>& weights, int index) {
  if (index < 0 || static_cast<std::size_t>(index) >= weights->value.size()) {
    throw ConfigError("scale_by: weight index out of range");
  }
  const T wv = weights->value[index];
  Tensor<T> out(x->value.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = wv * x->value[i];
  return make_node<T>(std::move(out), {x, weights}, [index](Node<T>& self) {
    auto& in = *self.parents[0];
    auto& w = *self.parents[1];
    const T wv = w.value[index];
    if (in.requires_grad) {
      auto& g = in.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += wv * self.grad[i];
    }
    if (w.requires_grad) {
      T dot{};
      for (std::size_t i = 0; i < self.grad.size(); ++i) dot += self.grad[i] * in.value[i];
      w.ensure_grad()[index] += dot;
    }
  });
}

template <typename T>
Var<T> sum_scalars(std::span<const Var<T>> scalars) {
  Tensor<T> out(1, 1, 1);
  for (const auto& s : scalars) {
    if (s->value.size() != 1) throw ConfigError("sum_scalars: non-scalar input " + s->value.shape().str());
    out[0] += s->value[0];
  }
  return make_node<T>(std::move(out), {scalars.begin(), scalars.end()}, [](Node<T>& self) {
    for (auto& p : self.parents) {
      if (p->requires_grad) p->ensure_grad()[0] += self.grad[0];
    }
  });
}

#define VOSMEM_INSTANTIATE(T)                                                                               \
  template Var<T> make_node<T>(Tensor<T>, std::vector<Var<T>>, std::function<void(Node<T>&)>);              \
  template Var<T> constant<T>(Tensor<T>);                                                                   \
  template Var<T> parameter<T>(Tensor<T>);                                                                  \
  template void backward<T>(const Var<T>&);                                                                 \
  template Var<T> conv2d<T>(const Var<T>&, const Var<T>&, const Var<T>&, int);                              \
  template Var<T> relu<T>(const Var<T>&);                                                                   \
  template Var<T> sigmoid<T>(const Var<T>&);                                                                \
  template Var<T> tanh<T>(const Var<T>&);                                                                   \
  template Var<T> maxpool2<T>(const Var<T>&);                                                               \
  template Var<T> upsample2<T>(const Var<T>&);                                                              \
  template Var<T> add<T>(const Var<T>&, const Var<T>&);                                                     \
  template Var<T> mul<T>(const Var<T>&, const Var<T>&);                                                     \
  template Var<T> scale<T>(const Var<T>&, double);                                                          \
  template Var<T> concat<T>(std::span<const Var<T>>);                                                       \
  template Var<T> slice_channels<T>(const Var<T>&, int, int);                                               \
  template Var<T> softmax_all<T>(const Var<T>&);                                                            \
  template Var<T> softmax_channels<T>(const Var<T>&);                                                       \
  template Var<T> scale_by<T>(const Var<T>&, const Var<T>&, int);                                           \
  template Var<T> sum_scalars<T>(std::span<const Var<T>>);

VOSMEM_INSTANTIATE(float)
VOSMEM_INSTANTIATE(double)
#undef VOSMEM_INSTANTIATE

}  // namespace vosmem::autograd
