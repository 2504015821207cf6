#pragma once

#include <Eigen/Core>

#include "safa/core/autograd.hpp"
#include "safa/core/opcount.hpp"

namespace safa {

using MatRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using MapCM = Eigen::Map<const MatRM>;

namespace detail {

// im2col for one sample: x [C,H,W] -> col [C*kh*kw, Ho*Wo]
inline void im2col(const float* x, int C, int H, int W, int kh, int kw,
                   int stride, int pad, int Ho, int Wo, float* col) {
    const int64_t how = static_cast<int64_t>(Ho) * Wo;
    for (int c = 0; c < C; ++c) {
        const float* xc = x + static_cast<int64_t>(c) * H * W;
        for (int dy = 0; dy < kh; ++dy)
            for (int dx = 0; dx < kw; ++dx) {
                float* row = col + ((static_cast<int64_t>(c) * kh + dy) * kw + dx) * how;
                for (int oy = 0; oy < Ho; ++oy) {
                    const int iy = oy * stride + dy - pad;
                    float* r = row + static_cast<int64_t>(oy) * Wo;
                    if (iy < 0 || iy >= H) {
                        std::fill(r, r + Wo, 0.f);
                        continue;
                    }
                    const float* src = xc + static_cast<int64_t>(iy) * W;
                    for (int ox = 0; ox < Wo; ++ox) {
                        const int ix = ox * stride + dx - pad;
                        r[ox] = (ix < 0 || ix >= W) ? 0.f : src[ix];
                    }
                }
            }
    }
}

// scatter-add transpose of im2col
inline void col2im(const float* col, int C, int H, int W, int kh, int kw,
                   int stride, int pad, int Ho, int Wo, float* x) {
    const int64_t how = static_cast<int64_t>(Ho) * Wo;
    for (int c = 0; c < C; ++c) {
        float* xc = x + static_cast<int64_t>(c) * H * W;
        for (int dy = 0; dy < kh; ++dy)
            for (int dx = 0; dx < kw; ++dx) {
                const float* row = col + ((static_cast<int64_t>(c) * kh + dy) * kw + dx) * how;
                for (int oy = 0; oy < Ho; ++oy) {
                    const int iy = oy * stride + dy - pad;
                    if (iy < 0 || iy >= H) continue;
                    float* dst = xc + static_cast<int64_t>(iy) * W;
                    const float* r = row + static_cast<int64_t>(oy) * Wo;
                    for (int ox = 0; ox < Wo; ++ox) {
                        const int ix = ox * stride + dx - pad;
                        if (ix >= 0 && ix < W) dst[ix] += r[ox];
                    }
                }
            }
    }
}

}  // namespace detail

// 2-D convolution, NCHW input, weight [Cout, Cin, kh, kw], optional bias [Cout].
inline Var conv2d(const Var& x, const Var& w, const Var& b, int stride = 1, int pad = -1) {
    SAFA_CHECK(x->value.ndim() == 4 && w->value.ndim() == 4, "conv2d: bad rank");
    const int N = x->value.dim(0), Cin = x->value.dim(1);
    const int H = x->value.dim(2), W = x->value.dim(3);
    const int Cout = w->value.dim(0), kh = w->value.dim(2), kw = w->value.dim(3);
    SAFA_CHECK(w->value.dim(1) == Cin, "conv2d: channel mismatch");
    if (pad < 0) pad = kh / 2;
    const int Ho = (H + 2 * pad - kh) / stride + 1;
    const int Wo = (W + 2 * pad - kw) / stride + 1;
    SAFA_CHECK(Ho >= 1 && Wo >= 1, "conv2d: output would be empty");
    const int CK = Cin * kh * kw;
    const int64_t how = static_cast<int64_t>(Ho) * Wo;

    opcount::add(static_cast<int64_t>(N) * Cout * CK * how);

    Tensor out({N, Cout, Ho, Wo});
    std::vector<float> col(static_cast<size_t>(CK) * how);
    MapCM Wm(w->value.data(), Cout, CK);
    for (int n = 0; n < N; ++n) {
        detail::im2col(x->value.data() + static_cast<int64_t>(n) * Cin * H * W,
                       Cin, H, W, kh, kw, stride, pad, Ho, Wo, col.data());
        MapCM colm(col.data(), CK, how);
        MapM outm(out.data() + static_cast<int64_t>(n) * Cout * how, Cout, how);
        outm.noalias() = Wm * colm;
        if (b && b->value.defined())
            for (int c = 0; c < Cout; ++c)
                outm.row(c).array() += b->value[c];
    }

    std::vector<Var> parents = {x, w};
    if (b) parents.push_back(b);
    return make_op(std::move(out), std::move(parents),
                   [x, w, b, N, Cin, H, W, Cout, kh, kw, stride, pad, Ho, Wo, CK,
                    how](Node& self) {
        std::vector<float> col(static_cast<size_t>(CK) * how);
        std::vector<float> gcol(static_cast<size_t>(CK) * how);
        MapCM Wm(w->value.data(), Cout, CK);
        float* gw = w->requires_grad ? w->ensure_grad().data() : nullptr;
        float* gx = x->requires_grad ? x->ensure_grad().data() : nullptr;
        float* gb = (b && b->requires_grad) ? b->ensure_grad().data() : nullptr;
        for (int n = 0; n < N; ++n) {
            MapCM gom(self.grad.data() + static_cast<int64_t>(n) * Cout * how, Cout, how);
            // im2col is recomputed here instead of cached from the forward
            // pass; keeping the col buffers of every conv alive would cost
            // far more memory than the graph itself.
            if (gw || gx)
                detail::im2col(x->value.data() + static_cast<int64_t>(n) * Cin * H * W,
                               Cin, H, W, kh, kw, stride, pad, Ho, Wo, col.data());
            if (gw) {
                MapCM colm(col.data(), CK, how);
                MapM gwm(gw, Cout, CK);
                gwm.noalias() += gom * colm.transpose();
            }
            if (gx) {
                MapM gcolm(gcol.data(), CK, how);
                gcolm.noalias() = Wm.transpose() * gom;
                detail::col2im(gcol.data(), Cin, H, W, kh, kw, stride, pad, Ho, Wo,
                               gx + static_cast<int64_t>(n) * Cin * H * W);
            }
            if (gb)
                for (int c = 0; c < Cout; ++c) gb[c] += gom.row(c).sum();
        }
    });
}

// Fully connected: x [N, Cin], w [Cout, Cin], b [Cout].
inline Var linear(const Var& x, const Var& w, const Var& b) {
    const int N = x->value.dim(0), Cin = x->value.dim(1);
    const int Cout = w->value.dim(0);
    SAFA_CHECK(w->value.dim(1) == Cin, "linear: dim mismatch");
    opcount::add(static_cast<int64_t>(N) * Cout * Cin);
    Tensor out({N, Cout});
    MapCM xm(x->value.data(), N, Cin);
    MapCM wm(w->value.data(), Cout, Cin);
    MapM om(out.data(), N, Cout);
    om.noalias() = xm * wm.transpose();
    if (b && b->value.defined())
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < Cout; ++c) om(n, c) += b->value[c];
    std::vector<Var> parents = {x, w};
    if (b) parents.push_back(b);
    return make_op(std::move(out), std::move(parents), [x, w, b, N, Cin, Cout](Node& self) {
        MapCM gom(self.grad.data(), N, Cout);
        if (x->requires_grad) {
            MapM gxm(x->ensure_grad().data(), N, Cin);
            MapCM wm(w->value.data(), Cout, Cin);
            gxm.noalias() += gom * wm;
        }
        if (w->requires_grad) {
            MapM gwm(w->ensure_grad().data(), Cout, Cin);
            MapCM xm(x->value.data(), N, Cin);
            gwm.noalias() += gom.transpose() * xm;
        }
        if (b && b->requires_grad) {
            float* gb = b->ensure_grad().data();
            for (int c = 0; c < Cout; ++c) gb[c] += gom.col(c).sum();
        }
    });
}

// Global average pooling: [N,C,H,W] -> [N,C]
inline Var global_avg_pool(const Var& x) {
    const int N = x->value.dim(0), C = x->value.dim(1);
    const int64_t hw = static_cast<int64_t>(x->value.dim(2)) * x->value.dim(3);
    Tensor out({N, C});
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const float* p = x->value.data() + (static_cast<int64_t>(n) * C + c) * hw;
            double s = 0.0;
            for (int64_t i = 0; i < hw; ++i) s += p[i];
            out[n * C + c] = static_cast<float>(s / static_cast<double>(hw));
        }
    return make_op(std::move(out), {x}, [x, N, C, hw](Node& self) {
        if (!x->requires_grad) return;
        float* gx = x->ensure_grad().data();
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c) {
                const float g = self.grad[n * C + c] / static_cast<float>(hw);
                float* p = gx + (static_cast<int64_t>(n) * C + c) * hw;
                for (int64_t i = 0; i < hw; ++i) p[i] += g;
            }
    });
}

// Pixel rearrangement upsampling (SubPixel) by factor r:
// [N, C*r*r, H, W] -> [N, C, r*H, r*W]
inline Var pixel_shuffle(const Var& x, int r) {
    const int N = x->value.dim(0), Crr = x->value.dim(1);
    const int H = x->value.dim(2), W = x->value.dim(3);
    SAFA_CHECK(Crr % (r * r) == 0, "pixel_shuffle: channels not divisible by r^2");
    const int C = Crr / (r * r);
    Tensor out({N, C, H * r, W * r});
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int dy = 0; dy < r; ++dy)
                for (int dx = 0; dx < r; ++dx) {
                    const int ci = c * r * r + dy * r + dx;
                    for (int h = 0; h < H; ++h) {
                        const float* src = x->value.data() +
                            ((static_cast<int64_t>(n) * Crr + ci) * H + h) * W;
                        float* dst = out.data() +
                            ((static_cast<int64_t>(n) * C + c) * H * r + h * r + dy) *
                                static_cast<int64_t>(W) * r + dx;
                        for (int w2 = 0; w2 < W; ++w2) dst[w2 * r] = src[w2];
                    }
                }
    return make_op(std::move(out), {x}, [x, N, C, Crr, H, W, r](Node& self) {
        if (!x->requires_grad) return;
        float* gx = x->ensure_grad().data();
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c)
                for (int dy = 0; dy < r; ++dy)
                    for (int dx = 0; dx < r; ++dx) {
                        const int ci = c * r * r + dy * r + dx;
                        for (int h = 0; h < H; ++h) {
                            float* dst = gx +
                                ((static_cast<int64_t>(n) * Crr + ci) * H + h) * W;
                            const float* src = self.grad.data() +
                                ((static_cast<int64_t>(n) * C + c) * H * r + h * r + dy) *
                                    static_cast<int64_t>(W) * r + dx;
                            for (int w2 = 0; w2 < W; ++w2) dst[w2] += src[w2 * r];
                        }
                    }
    });
}

// Multiply an NCHW tensor by a single-channel map [N,1,H,W], broadcast over C.
inline Var mul_mask(const Var& x, const Var& m) {
    const int N = x->value.dim(0), C = x->value.dim(1);
    const int H = x->value.dim(2), W = x->value.dim(3);
    SAFA_CHECK(m->value.ndim() == 4 && m->value.dim(0) == N && m->value.dim(1) == 1 &&
                   m->value.dim(2) == H && m->value.dim(3) == W,
               "mul_mask: mask must be [N,1,H,W]");
    const int64_t hw = static_cast<int64_t>(H) * W;
    Tensor out = x->value.clone();
    for (int n = 0; n < N; ++n) {
        const float* mm = m->value.data() + n * hw;
        for (int c = 0; c < C; ++c) {
            float* p = out.data() + (static_cast<int64_t>(n) * C + c) * hw;
            for (int64_t i = 0; i < hw; ++i) p[i] *= mm[i];
        }
    }
    return make_op(std::move(out), {x, m}, [x, m, N, C, hw](Node& self) {
        const float* g = self.grad.data();
        if (x->requires_grad) {
            float* gx = x->ensure_grad().data();
            for (int n = 0; n < N; ++n) {
                const float* mm = m->value.data() + n * hw;
                for (int c = 0; c < C; ++c) {
                    const int64_t base = (static_cast<int64_t>(n) * C + c) * hw;
                    for (int64_t i = 0; i < hw; ++i) gx[base + i] += g[base + i] * mm[i];
                }
            }
        }
        if (m->requires_grad) {
            float* gm = m->ensure_grad().data();
            const float* xv = x->value.data();
            for (int n = 0; n < N; ++n)
                for (int c = 0; c < C; ++c) {
                    const int64_t base = (static_cast<int64_t>(n) * C + c) * hw;
                    for (int64_t i = 0; i < hw; ++i)
                        gm[n * hw + i] += g[base + i] * xv[base + i];
                }
        }
    });
}

// Column j of a [N, M] tensor as an [N] vector.
inline Var select_column(const Var& x, int j) {
    const int N = x->value.dim(0), M = x->value.dim(1);
    SAFA_CHECK(x->value.ndim() == 2 && j >= 0 && j < M, "select_column: bad index");
    Tensor out({N});
    for (int n = 0; n < N; ++n) out[n] = x->value[static_cast<int64_t>(n) * M + j];
    return make_op(std::move(out), {x}, [x, N, M, j](Node& self) {
        if (!x->requires_grad) return;
        float* gx = x->ensure_grad().data();
        for (int n = 0; n < N; ++n) gx[static_cast<int64_t>(n) * M + j] += self.grad[n];
    });
}

}  // namespace safa
