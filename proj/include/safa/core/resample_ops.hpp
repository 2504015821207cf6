#pragma once

#include "safa/core/autograd.hpp"

namespace safa {

namespace detail {

// Half-pixel-center source coordinate for bilinear resampling
// (corners intentionally not aligned). Shared by every resize in the project
// so flow scaling stays consistent.
struct LerpIdx {
    int i0, i1;
    float w1;  // weight of i1; weight of i0 is 1-w1
};

inline LerpIdx lerp_index(int out_i, int in_size, int out_size) {
    const float scale = static_cast<float>(in_size) / static_cast<float>(out_size);
    float s = (static_cast<float>(out_i) + 0.5f) * scale - 0.5f;
    if (s < 0.f) s = 0.f;
    const float smax = static_cast<float>(in_size - 1);
    if (s > smax) s = smax;
    LerpIdx r;
    r.i0 = static_cast<int>(s);
    if (r.i0 > in_size - 1) r.i0 = in_size - 1;
    r.i1 = std::min(r.i0 + 1, in_size - 1);
    r.w1 = s - static_cast<float>(r.i0);
    return r;
}

}  // namespace detail

// Bilinear resize of an NCHW tensor to an explicit output size.
inline Var resize_bilinear_nchw(const Var& x, int outH, int outW) {
    const int N = x->value.dim(0), C = x->value.dim(1);
    const int H = x->value.dim(2), W = x->value.dim(3);
    SAFA_CHECK(outH >= 1 && outW >= 1, "resize: output must be at least 1x1");
    if (outH == H && outW == W) return x;

    std::vector<detail::LerpIdx> yi(outH), xi(outW);
    for (int y = 0; y < outH; ++y) yi[y] = detail::lerp_index(y, H, outH);
    for (int xo = 0; xo < outW; ++xo) xi[xo] = detail::lerp_index(xo, W, outW);

    Tensor out({N, C, outH, outW});
    const int64_t planes = static_cast<int64_t>(N) * C;
    for (int64_t p = 0; p < planes; ++p) {
        const float* src = x->value.data() + p * H * W;
        float* dst = out.data() + p * static_cast<int64_t>(outH) * outW;
        for (int y = 0; y < outH; ++y) {
            const auto& ly = yi[y];
            const float* r0 = src + static_cast<int64_t>(ly.i0) * W;
            const float* r1 = src + static_cast<int64_t>(ly.i1) * W;
            float* d = dst + static_cast<int64_t>(y) * outW;
            for (int xo = 0; xo < outW; ++xo) {
                const auto& lx = xi[xo];
                const float top = r0[lx.i0] * (1.f - lx.w1) + r0[lx.i1] * lx.w1;
                const float bot = r1[lx.i0] * (1.f - lx.w1) + r1[lx.i1] * lx.w1;
                d[xo] = top * (1.f - ly.w1) + bot * ly.w1;
            }
        }
    }
    return make_op(std::move(out), {x}, [x, N, C, H, W, outH, outW, yi, xi](Node& self) {
        if (!x->requires_grad) return;
        float* gx = x->ensure_grad().data();
        const float* g = self.grad.data();
        const int64_t planes = static_cast<int64_t>(N) * C;
        for (int64_t p = 0; p < planes; ++p) {
            float* dst = gx + p * H * W;
            const float* gs = g + p * static_cast<int64_t>(outH) * outW;
            for (int y = 0; y < outH; ++y) {
                const auto& ly = yi[y];
                for (int xo = 0; xo < outW; ++xo) {
                    const auto& lx = xi[xo];
                    const float gv = gs[static_cast<int64_t>(y) * outW + xo];
                    dst[ly.i0 * W + lx.i0] += gv * (1.f - ly.w1) * (1.f - lx.w1);
                    dst[ly.i0 * W + lx.i1] += gv * (1.f - ly.w1) * lx.w1;
                    dst[ly.i1 * W + lx.i0] += gv * ly.w1 * (1.f - lx.w1);
                    dst[ly.i1 * W + lx.i1] += gv * ly.w1 * lx.w1;
                }
            }
        }
    });
}

// Backward warping: out(x,y) = bilinear sample of src at (x+u, y+v).
// Coordinates are border-clamped; differentiable w.r.t. src and flow.
// src [N,C,H,W], flow [N,2,H,W] (channel 0 horizontal, 1 vertical, pixels).
inline Var backward_warp_nchw(const Var& src, const Var& flow) {
    const int N = src->value.dim(0), C = src->value.dim(1);
    const int H = src->value.dim(2), W = src->value.dim(3);
    SAFA_CHECK(flow->value.ndim() == 4 && flow->value.dim(0) == N &&
                   flow->value.dim(1) == 2 && flow->value.dim(2) == H &&
                   flow->value.dim(3) == W,
               "backward_warp: flow must be [N,2,H,W] matching src");
    SAFA_CHECK(flow->value.all_finite(), "backward_warp: flow contains non-finite values");

    const int64_t hw = static_cast<int64_t>(H) * W;
    Tensor out({N, C, H, W});
    for (int n = 0; n < N; ++n) {
        const float* u = flow->value.data() + static_cast<int64_t>(n) * 2 * hw;
        const float* v = u + hw;
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const int64_t i = static_cast<int64_t>(y) * W + x;
                float sx = static_cast<float>(x) + u[i];
                float sy = static_cast<float>(y) + v[i];
                sx = std::min(std::max(sx, 0.f), static_cast<float>(W - 1));
                sy = std::min(std::max(sy, 0.f), static_cast<float>(H - 1));
                const int x0 = std::min(static_cast<int>(sx), W - 1);
                const int y0 = std::min(static_cast<int>(sy), H - 1);
                const int x1 = std::min(x0 + 1, W - 1);
                const int y1 = std::min(y0 + 1, H - 1);
                const float wx = sx - static_cast<float>(x0);
                const float wy = sy - static_cast<float>(y0);
                for (int c = 0; c < C; ++c) {
                    const float* s = src->value.data() +
                        (static_cast<int64_t>(n) * C + c) * hw;
                    const float top = s[y0 * W + x0] * (1.f - wx) + s[y0 * W + x1] * wx;
                    const float bot = s[y1 * W + x0] * (1.f - wx) + s[y1 * W + x1] * wx;
                    out.data()[(static_cast<int64_t>(n) * C + c) * hw + i] =
                        top * (1.f - wy) + bot * wy;
                }
            }
    }
    return make_op(std::move(out), {src, flow}, [src, flow, N, C, H, W, hw](Node& self) {
        float* gs = src->requires_grad ? src->ensure_grad().data() : nullptr;
        float* gf = flow->requires_grad ? flow->ensure_grad().data() : nullptr;
        const float* g = self.grad.data();
        for (int n = 0; n < N; ++n) {
            const float* u = flow->value.data() + static_cast<int64_t>(n) * 2 * hw;
            const float* v = u + hw;
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    const int64_t i = static_cast<int64_t>(y) * W + x;
                    float sx = static_cast<float>(x) + u[i];
                    float sy = static_cast<float>(y) + v[i];
                    // gradient through the coordinate dies where it clamps
                    const bool inx = sx > 0.f && sx < static_cast<float>(W - 1);
                    const bool iny = sy > 0.f && sy < static_cast<float>(H - 1);
                    sx = std::min(std::max(sx, 0.f), static_cast<float>(W - 1));
                    sy = std::min(std::max(sy, 0.f), static_cast<float>(H - 1));
                    const int x0 = std::min(static_cast<int>(sx), W - 1);
                    const int y0 = std::min(static_cast<int>(sy), H - 1);
                    const int x1 = std::min(x0 + 1, W - 1);
                    const int y1 = std::min(y0 + 1, H - 1);
                    const float wx = sx - static_cast<float>(x0);
                    const float wy = sy - static_cast<float>(y0);
                    float du = 0.f, dv = 0.f;
                    for (int c = 0; c < C; ++c) {
                        const int64_t base = (static_cast<int64_t>(n) * C + c) * hw;
                        const float go = g[base + i];
                        if (go == 0.f) continue;
                        const float* s = src->value.data() + base;
                        if (gs) {
                            float* d = gs + base;
                            d[y0 * W + x0] += go * (1.f - wx) * (1.f - wy);
                            d[y0 * W + x1] += go * wx * (1.f - wy);
                            d[y1 * W + x0] += go * (1.f - wx) * wy;
                            d[y1 * W + x1] += go * wx * wy;
                        }
                        if (gf) {
                            du += go * ((s[y0 * W + x1] - s[y0 * W + x0]) * (1.f - wy) +
                                        (s[y1 * W + x1] - s[y1 * W + x0]) * wy);
                            dv += go * ((s[y1 * W + x0] - s[y0 * W + x0]) * (1.f - wx) +
                                        (s[y1 * W + x1] - s[y0 * W + x1]) * wx);
                        }
                    }
                    if (gf) {
                        float* gu = gf + static_cast<int64_t>(n) * 2 * hw;
                        float* gv = gu + hw;
                        if (inx) gu[i] += du;
                        if (iny) gv[i] += dv;
                    }
                }
        }
    });
}

// Resize a flow field [N,2,H,W]: displacement values are scaled by the
// spatial factor alongside the bilinear resize.
inline Var resize_flow_nchw(const Var& flow, int outH, int outW) {
    const int H = flow->value.dim(2), W = flow->value.dim(3);
    Var r = resize_bilinear_nchw(flow, outH, outW);
    const float fx = static_cast<float>(outW) / static_cast<float>(W);
    const float fy = static_cast<float>(outH) / static_cast<float>(H);
    if (fx == 1.f && fy == 1.f) return r;
    Var u = slice_channels(r, 0, 1);
    Var v = slice_channels(r, 1, 2);
    return concat_channels({affine(u, fx), affine(v, fy)});
}

}  // namespace safa
