#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "safa/core/tensor.hpp"

namespace safa {

// Tape-based reverse-mode autodiff. Graphs are built dynamically; a Node owns
// its forward value and (optionally) an accumulated gradient. Backward
// functions read node.grad and scatter into the parents' grads.

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
    Tensor value;
    Tensor grad;
    std::vector<Var> parents;
    std::function<void(Node&)> backward_fn;
    bool requires_grad = false;

    Tensor& ensure_grad() {
        if (!grad.defined()) grad = Tensor::zeros(value.dims());
        return grad;
    }
    void zero_grad() {
        if (grad.defined()) grad.zero();
    }
};

inline bool& grad_enabled() {
    static thread_local bool enabled = true;
    return enabled;
}

// Inference scope: ops built inside do not record backward functions.
struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(grad_enabled()) { grad_enabled() = false; }
    ~NoGradGuard() { grad_enabled() = prev; }
};

inline Var make_leaf(Tensor v, bool requires_grad = false) {
    auto n = std::make_shared<Node>();
    n->value = std::move(v);
    n->requires_grad = requires_grad;
    return n;
}

inline Var make_op(Tensor v, std::vector<Var> parents,
                   std::function<void(Node&)> backward) {
    auto n = std::make_shared<Node>();
    n->value = std::move(v);
    if (grad_enabled()) {
        for (const auto& p : parents)
            if (p->requires_grad) n->requires_grad = true;
        if (n->requires_grad) {
            n->parents = std::move(parents);
            n->backward_fn = std::move(backward);
        }
    }
    return n;
}

// Reverse topological order from root, then run backward functions.
inline void backward(const Var& root, float seed = 1.f) {
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    // iterative DFS; graphs here are deep (K blocks) but not huge
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(root.get(), 0);
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [n, i] = stack.back();
        if (i < n->parents.size()) {
            Node* p = n->parents[i++].get();
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    root->ensure_grad().fill(seed);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn) n->backward_fn(*n);
    }
}

// ---------------------------------------------------------------------------
// elementwise ops

inline Var add(const Var& a, const Var& b) {
    SAFA_CHECK(a->value.same_shape(b->value), "add: shape mismatch");
    Tensor out = a->value.clone();
    const float* pb = b->value.data();
    float* po = out.data();
    for (int64_t i = 0, n = out.numel(); i < n; ++i) po[i] += pb[i];
    return make_op(std::move(out), {a, b}, [a, b](Node& self) {
        const float* g = self.grad.data();
        const int64_t n = self.grad.numel();
        if (a->requires_grad) {
            float* ga = a->ensure_grad().data();
            for (int64_t i = 0; i < n; ++i) ga[i] += g[i];
        }
        if (b->requires_grad) {
            float* gb = b->ensure_grad().data();
            for (int64_t i = 0; i < n; ++i) gb[i] += g[i];
        }
    });
}

inline Var sub(const Var& a, const Var& b) {
    SAFA_CHECK(a->value.same_shape(b->value), "sub: shape mismatch");
    Tensor out = a->value.clone();
    const float* pb = b->value.data();
    float* po = out.data();
    for (int64_t i = 0, n = out.numel(); i < n; ++i) po[i] -= pb[i];
    return make_op(std::move(out), {a, b}, [a, b](Node& self) {
        const float* g = self.grad.data();
        const int64_t n = self.grad.numel();
        if (a->requires_grad) {
            float* ga = a->ensure_grad().data();
            for (int64_t i = 0; i < n; ++i) ga[i] += g[i];
        }
        if (b->requires_grad) {
            float* gb = b->ensure_grad().data();
            for (int64_t i = 0; i < n; ++i) gb[i] -= g[i];
        }
    });
}

inline Var mul(const Var& a, const Var& b) {
    SAFA_CHECK(a->value.same_shape(b->value), "mul: shape mismatch");
    Tensor out = a->value.clone();
    const float* pb = b->value.data();
    float* po = out.data();
    for (int64_t i = 0, n = out.numel(); i < n; ++i) po[i] *= pb[i];
    return make_op(std::move(out), {a, b}, [a, b](Node& self) {
        const float* g = self.grad.data();
        const int64_t n = self.grad.numel();
        if (a->requires_grad) {
            float* ga = a->ensure_grad().data();
            const float* pb2 = b->value.data();
            for (int64_t i = 0; i < n; ++i) ga[i] += g[i] * pb2[i];
        }
        if (b->requires_grad) {
            float* gb = b->ensure_grad().data();
            const float* pa2 = a->value.data();
            for (int64_t i = 0; i < n; ++i) gb[i] += g[i] * pa2[i];
        }
    });
}

// y = s*x + c
inline Var affine(const Var& x, float s, float c = 0.f) {
    Tensor out = x->value.clone();
    for (float& v : out) v = s * v + c;
    return make_op(std::move(out), {x}, [x, s](Node& self) {
        if (!x->requires_grad) return;
        float* gx = x->ensure_grad().data();
        const float* g = self.grad.data();
        for (int64_t i = 0, n = self.grad.numel(); i < n; ++i) gx[i] += s * g[i];
    });
}

inline Var one_minus(const Var& x) { return affine(x, -1.f, 1.f); }

inline Var sigmoid(const Var& x) {
    Tensor out = x->value.clone();
    for (float& v : out) v = 1.f / (1.f + std::exp(-v));
    Var r = make_op(out, {x}, [x](Node& self) {
        if (!x->requires_grad) return;
        float* gx = x->ensure_grad().data();
        const float* g = self.grad.data();
        const float* y = self.value.data();
        for (int64_t i = 0, n = self.grad.numel(); i < n; ++i)
            gx[i] += g[i] * y[i] * (1.f - y[i]);
    });
    return r;
}

inline Var tanh_op(const Var& x) {
    Tensor out = x->value.clone();
    for (float& v : out) v = std::tanh(v);
    return make_op(out, {x}, [x](Node& self) {
        if (!x->requires_grad) return;
        float* gx = x->ensure_grad().data();
        const float* g = self.grad.data();
        const float* y = self.value.data();
        for (int64_t i = 0, n = self.grad.numel(); i < n; ++i)
            gx[i] += g[i] * (1.f - y[i] * y[i]);
    });
}

// PReLU with one learnable slope per channel; x is [N,C,H,W], slope is [C].
inline Var prelu(const Var& x, const Var& slope) {
    SAFA_CHECK(x->value.ndim() == 4 && slope->value.ndim() == 1 &&
                   slope->value.dim(0) == x->value.dim(1),
               "prelu: expected NCHW input and per-channel slope");
    const int N = x->value.dim(0), C = x->value.dim(1);
    const int64_t hw = static_cast<int64_t>(x->value.dim(2)) * x->value.dim(3);
    Tensor out = x->value.clone();
    const float* a = slope->value.data();
    float* po = out.data();
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            float* p = po + (static_cast<int64_t>(n) * C + c) * hw;
            const float ac = a[c];
            for (int64_t i = 0; i < hw; ++i)
                if (p[i] < 0.f) p[i] *= ac;
        }
    return make_op(std::move(out), {x, slope}, [x, slope, N, C, hw](Node& self) {
        const float* g = self.grad.data();
        const float* xv = x->value.data();
        const float* a = slope->value.data();
        float* gx = x->requires_grad ? x->ensure_grad().data() : nullptr;
        float* ga = slope->requires_grad ? slope->ensure_grad().data() : nullptr;
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c) {
                const int64_t base = (static_cast<int64_t>(n) * C + c) * hw;
                const float ac = a[c];
                float acc = 0.f;
                for (int64_t i = 0; i < hw; ++i) {
                    const float xi = xv[base + i], gi = g[base + i];
                    if (xi >= 0.f) {
                        if (gx) gx[base + i] += gi;
                    } else {
                        if (gx) gx[base + i] += gi * ac;
                        acc += gi * xi;
                    }
                }
                if (ga) ga[c] += acc;
            }
    });
}

// ---------------------------------------------------------------------------
// shape ops

// Concatenate NCHW tensors along the channel axis.
inline Var concat_channels(const std::vector<Var>& xs) {
    SAFA_CHECK(!xs.empty(), "concat: no inputs");
    const int N = xs[0]->value.dim(0), H = xs[0]->value.dim(2), W = xs[0]->value.dim(3);
    int C = 0;
    for (const auto& x : xs) {
        SAFA_CHECK(x->value.ndim() == 4 && x->value.dim(0) == N &&
                       x->value.dim(2) == H && x->value.dim(3) == W,
                   "concat: spatial/batch mismatch");
        C += x->value.dim(1);
    }
    Tensor out({N, C, H, W});
    const int64_t hw = static_cast<int64_t>(H) * W;
    for (int n = 0; n < N; ++n) {
        int64_t off = static_cast<int64_t>(n) * C * hw;
        for (const auto& x : xs) {
            const int64_t sz = static_cast<int64_t>(x->value.dim(1)) * hw;
            std::memcpy(out.data() + off,
                        x->value.data() + static_cast<int64_t>(n) * sz, sz * sizeof(float));
            off += sz;
        }
    }
    return make_op(std::move(out), xs, [xs, N, C, hw](Node& self) {
        const float* g = self.grad.data();
        for (int n = 0; n < N; ++n) {
            int64_t off = static_cast<int64_t>(n) * C * hw;
            for (const auto& x : xs) {
                const int64_t sz = static_cast<int64_t>(x->value.dim(1)) * hw;
                if (x->requires_grad) {
                    float* gx = x->ensure_grad().data() + static_cast<int64_t>(n) * sz;
                    const float* gs = g + off;
                    for (int64_t i = 0; i < sz; ++i) gx[i] += gs[i];
                }
                off += sz;
            }
        }
    });
}

// Channel slice [c0, c1) of an NCHW tensor.
inline Var slice_channels(const Var& x, int c0, int c1) {
    const int N = x->value.dim(0), C = x->value.dim(1);
    const int H = x->value.dim(2), W = x->value.dim(3);
    SAFA_CHECK(0 <= c0 && c0 < c1 && c1 <= C, "slice_channels: bad range");
    const int Cs = c1 - c0;
    const int64_t hw = static_cast<int64_t>(H) * W;
    Tensor out({N, Cs, H, W});
    for (int n = 0; n < N; ++n)
        std::memcpy(out.data() + static_cast<int64_t>(n) * Cs * hw,
                    x->value.data() + (static_cast<int64_t>(n) * C + c0) * hw,
                    static_cast<int64_t>(Cs) * hw * sizeof(float));
    return make_op(std::move(out), {x}, [x, N, C, c0, Cs, hw](Node& self) {
        if (!x->requires_grad) return;
        float* gx = x->ensure_grad().data();
        const float* g = self.grad.data();
        for (int n = 0; n < N; ++n) {
            float* dst = gx + (static_cast<int64_t>(n) * C + c0) * hw;
            const float* src = g + static_cast<int64_t>(n) * Cs * hw;
            for (int64_t i = 0; i < static_cast<int64_t>(Cs) * hw; ++i) dst[i] += src[i];
        }
    });
}

// ---------------------------------------------------------------------------
// reductions / gating

inline Var sum_all(const Var& x) {
    Tensor out({1});
    out[0] = x->value.sum();
    return make_op(std::move(out), {x}, [x](Node& self) {
        if (!x->requires_grad) return;
        float* gx = x->ensure_grad().data();
        const float g = self.grad[0];
        for (int64_t i = 0, n = x->value.numel(); i < n; ++i) gx[i] += g;
    });
}

// mean |a - b| over all elements
inline Var mean_abs_diff(const Var& a, const Var& b) {
    SAFA_CHECK(a->value.same_shape(b->value), "mean_abs_diff: shape mismatch");
    const int64_t n = a->value.numel();
    Tensor out({1});
    const float* pa = a->value.data();
    const float* pb = b->value.data();
    double s = 0.0;
    for (int64_t i = 0; i < n; ++i) s += std::fabs(pa[i] - pb[i]);
    out[0] = static_cast<float>(s / static_cast<double>(n));
    return make_op(std::move(out), {a, b}, [a, b, n](Node& self) {
        const float g = self.grad[0] / static_cast<float>(n);
        const float* pa = a->value.data();
        const float* pb = b->value.data();
        float* ga = a->requires_grad ? a->ensure_grad().data() : nullptr;
        float* gb = b->requires_grad ? b->ensure_grad().data() : nullptr;
        for (int64_t i = 0; i < n; ++i) {
            const float d = pa[i] - pb[i];
            const float s = d > 0.f ? g : (d < 0.f ? -g : 0.f);
            if (ga) ga[i] += s;
            if (gb) gb[i] -= s;
        }
    });
}

// Multiply each sample of an NCHW tensor by a per-sample scalar gate [N].
inline Var mul_per_sample(const Var& x, const Var& gate) {
    SAFA_CHECK(x->value.ndim() == 4 && gate->value.ndim() == 1 &&
                   gate->value.dim(0) == x->value.dim(0),
               "mul_per_sample: gate must be [N]");
    const int N = x->value.dim(0);
    const int64_t chw = x->value.numel() / N;
    Tensor out = x->value.clone();
    for (int n = 0; n < N; ++n) {
        const float s = gate->value[n];
        float* p = out.data() + n * chw;
        for (int64_t i = 0; i < chw; ++i) p[i] *= s;
    }
    return make_op(std::move(out), {x, gate}, [x, gate, N, chw](Node& self) {
        const float* g = self.grad.data();
        if (x->requires_grad) {
            float* gx = x->ensure_grad().data();
            for (int n = 0; n < N; ++n) {
                const float s = gate->value[n];
                for (int64_t i = 0; i < chw; ++i) gx[n * chw + i] += g[n * chw + i] * s;
            }
        }
        if (gate->requires_grad) {
            float* gg = gate->ensure_grad().data();
            const float* xv = x->value.data();
            for (int n = 0; n < N; ++n) {
                double acc = 0.0;
                for (int64_t i = 0; i < chw; ++i)
                    acc += static_cast<double>(g[n * chw + i]) * xv[n * chw + i];
                gg[n] += static_cast<float>(acc);
            }
        }
    });
}

// Straight-through Bernoulli gate: forward takes the sampled binary draw,
// backward copies the gradient onto the probability unchanged.
inline Var ste_gate(const Var& prob, Tensor sampled) {
    SAFA_CHECK(prob->value.same_shape(sampled), "ste_gate: shape mismatch");
    return make_op(std::move(sampled), {prob}, [prob](Node& self) {
        if (!prob->requires_grad) return;
        float* gp = prob->ensure_grad().data();
        const float* g = self.grad.data();
        for (int64_t i = 0, n = self.grad.numel(); i < n; ++i) gp[i] += g[i];
    });
}

// Cut the graph: value passes, gradient does not.
inline Var detach(const Var& x) { return make_leaf(x->value, false); }

}  // namespace safa
