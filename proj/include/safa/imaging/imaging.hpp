#pragma once

#include <cmath>
#include <limits>

#include "safa/core/resample_ops.hpp"

namespace safa {

// Layout conventions used across the project:
//   Frame     : [H, W, 3] interleaved RGB, values in [0,1]
//   FlowField : [2, H, W], channel 0 horizontal, channel 1 vertical, pixels
//   model tensors : [N, C, H, W]
using Frame = Tensor;
using FlowField = Tensor;

inline Frame make_frame(int H, int W) { return Tensor({H, W, 3}); }
inline FlowField make_flow(int H, int W) { return Tensor({2, H, W}); }

inline Tensor hwc_to_chw(const Frame& f) {
    const int H = f.dim(0), W = f.dim(1), C = f.dim(2);
    Tensor t({C, H, W});
    for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w)
            for (int c = 0; c < C; ++c)
                t.at3(c, h, w) = f[(static_cast<int64_t>(h) * W + w) * C + c];
    return t;
}

inline Frame chw_to_hwc(const Tensor& t) {
    const int C = t.dim(0), H = t.dim(1), W = t.dim(2);
    Tensor f({H, W, C});
    for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w)
            for (int c = 0; c < C; ++c)
                f[(static_cast<int64_t>(h) * W + w) * C + c] = t.at3(c, h, w);
    return f;
}

// Add a leading batch axis of 1.
inline Tensor unsqueeze0(const Tensor& t) {
    std::vector<int> d = {1};
    for (int i = 0; i < t.ndim(); ++i) d.push_back(t.dim(i));
    return t.reshaped(d);
}

inline Tensor squeeze0(const Tensor& t) {
    SAFA_CHECK(t.dim(0) == 1, "squeeze0: leading dim must be 1");
    std::vector<int> d(t.dims().begin() + 1, t.dims().end());
    return t.reshaped(d);
}

// ---------------------------------------------------------------------------
// backward warping (plain API over the differentiable op)

inline Frame backward_warp(const Frame& src, const FlowField& flow) {
    SAFA_CHECK(src.ndim() == 3 && flow.ndim() == 3 && flow.dim(0) == 2,
               "backward_warp: expected HWC frame and [2,H,W] flow");
    SAFA_CHECK(src.dim(0) == flow.dim(1) && src.dim(1) == flow.dim(2),
               "backward_warp: frame and flow sizes differ");
    NoGradGuard ng;
    Var s = make_leaf(unsqueeze0(hwc_to_chw(src)));
    Var f = make_leaf(unsqueeze0(flow));
    return chw_to_hwc(squeeze0(backward_warp_nchw(s, f)->value));
}

inline Tensor backward_warp_chw(const Tensor& src, const FlowField& flow) {
    NoGradGuard ng;
    Var s = make_leaf(unsqueeze0(src));
    Var f = make_leaf(unsqueeze0(flow));
    return squeeze0(backward_warp_nchw(s, f)->value);
}

// ---------------------------------------------------------------------------
// resizing

inline int scaled_size(int n, float factor) {
    const int r = static_cast<int>(std::lround(static_cast<double>(n) * factor));
    return std::max(1, r);
}

// Bilinear resize of an HWC frame or feature map by a positive factor.
inline Frame resize_bilinear(const Frame& src, float factor) {
    SAFA_CHECK(factor > 0.f, "resize_bilinear: factor must be positive");
    const int H = src.dim(0), W = src.dim(1);
    const int oh = scaled_size(H, factor), ow = scaled_size(W, factor);
    if (oh == H && ow == W) return src.clone();
    NoGradGuard ng;
    Var s = make_leaf(unsqueeze0(hwc_to_chw(src)));
    return chw_to_hwc(squeeze0(resize_bilinear_nchw(s, oh, ow)->value));
}

inline Frame resize_bilinear(const Frame& src, int out_h, int out_w) {
    SAFA_CHECK(out_h > 0 && out_w > 0, "resize_bilinear: bad output size");
    if (out_h == src.dim(0) && out_w == src.dim(1)) return src.clone();
    NoGradGuard ng;
    Var s = make_leaf(unsqueeze0(hwc_to_chw(src)));
    return chw_to_hwc(squeeze0(resize_bilinear_nchw(s, out_h, out_w)->value));
}

// Flow fields additionally scale their displacement values by the factor.
inline FlowField resize_flow(const FlowField& flow, float factor) {
    SAFA_CHECK(factor > 0.f, "resize_flow: factor must be positive");
    const int H = flow.dim(1), W = flow.dim(2);
    const int oh = scaled_size(H, factor), ow = scaled_size(W, factor);
    NoGradGuard ng;
    Var f = make_leaf(unsqueeze0(flow));
    return squeeze0(resize_flow_nchw(f, oh, ow)->value);
}

namespace detail {

// Catmull-Rom kernel (a = -0.5)
inline float cubic_weight(float t) {
    constexpr float a = -0.5f;
    t = std::fabs(t);
    if (t <= 1.f) return ((a + 2.f) * t - (a + 3.f)) * t * t + 1.f;
    if (t < 2.f) return (((t - 5.f) * t + 8.f) * t - 4.f) * a;
    return 0.f;
}

// one bicubic pass along a line with border-clamped taps
inline void bicubic_line(const float* src, int n, int stride, int out_n,
                         float* dst, int dst_stride) {
    const float scale = static_cast<float>(n) / static_cast<float>(out_n);
    for (int o = 0; o < out_n; ++o) {
        const float s = (static_cast<float>(o) + 0.5f) * scale - 0.5f;
        const int i0 = static_cast<int>(std::floor(s));
        const float fr = s - static_cast<float>(i0);
        float acc = 0.f;
        for (int k = -1; k <= 2; ++k) {
            const int idx = std::min(std::max(i0 + k, 0), n - 1);
            acc += cubic_weight(static_cast<float>(k) - fr) * src[idx * stride];
        }
        dst[o * dst_stride] = acc;
    }
}

}  // namespace detail

// Bicubic resize of an HWC frame; output clamped to [0,1].
inline Frame resize_bicubic(const Frame& src, float factor) {
    SAFA_CHECK(factor > 0.f, "resize_bicubic: factor must be positive");
    const int H = src.dim(0), W = src.dim(1), C = src.dim(2);
    const int oh = scaled_size(H, factor), ow = scaled_size(W, factor);
    // horizontal pass
    Tensor tmp({H, ow, C});
    std::vector<float> line(static_cast<size_t>(std::max(W, H)));
    std::vector<float> out_line(static_cast<size_t>(std::max(ow, oh)));
    for (int h = 0; h < H; ++h)
        for (int c = 0; c < C; ++c) {
            for (int w = 0; w < W; ++w) line[w] = src[(static_cast<int64_t>(h) * W + w) * C + c];
            detail::bicubic_line(line.data(), W, 1, ow, out_line.data(), 1);
            for (int w = 0; w < ow; ++w) tmp[(static_cast<int64_t>(h) * ow + w) * C + c] = out_line[w];
        }
    // vertical pass
    Tensor out({oh, ow, C});
    for (int w = 0; w < ow; ++w)
        for (int c = 0; c < C; ++c) {
            for (int h = 0; h < H; ++h) line[h] = tmp[(static_cast<int64_t>(h) * ow + w) * C + c];
            detail::bicubic_line(line.data(), H, 1, oh, out_line.data(), 1);
            for (int h = 0; h < oh; ++h)
                out[(static_cast<int64_t>(h) * ow + w) * C + c] =
                    std::min(std::max(out_line[h], 0.f), 1.f);
        }
    return out;
}

// ---------------------------------------------------------------------------
// quality metrics

// ITU-R BT.601 luma, full-range [0,1] RGB in, studio-range Y out:
// Y = (65.481 R + 128.553 G + 24.966 B + 16) / 255
inline Tensor rgb_to_y(const Frame& f) {
    const int H = f.dim(0), W = f.dim(1);
    SAFA_CHECK(f.dim(2) == 3, "rgb_to_y: expected 3 channels");
    Tensor y({H, W});
    for (int64_t i = 0, n = static_cast<int64_t>(H) * W; i < n; ++i) {
        const float r = f[i * 3], g = f[i * 3 + 1], b = f[i * 3 + 2];
        y[i] = (65.481f * r + 128.553f * g + 24.966f * b + 16.f) / 255.f;
    }
    return y;
}

// PSNR on the Y plane, dynamic range 1. Identical inputs return +infinity;
// capping is the caller's policy.
inline double psnr_y(const Frame& a, const Frame& b) {
    SAFA_CHECK(a.same_shape(b), "psnr_y: shape mismatch");
    Tensor ya = rgb_to_y(a), yb = rgb_to_y(b);
    double mse = 0.0;
    const int64_t n = ya.numel();
    for (int64_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(ya[i]) - yb[i];
        mse += d * d;
    }
    mse /= static_cast<double>(n);
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

// Single-scale SSIM on Y planes: 11x11 Gaussian window sigma=1.5,
// K1=0.01, K2=0.03, L=1, windows fully inside the image.
inline double ssim_y(const Frame& a, const Frame& b) {
    SAFA_CHECK(a.same_shape(b), "ssim_y: shape mismatch");
    const int H = a.dim(0), W = a.dim(1);
    constexpr int win = 11;
    SAFA_CHECK(H >= win && W >= win, "ssim_y: image smaller than 11x11 window");
    Tensor ya = rgb_to_y(a), yb = rgb_to_y(b);

    float g[win];
    float gsum = 0.f;
    for (int i = 0; i < win; ++i) {
        const float d = static_cast<float>(i - win / 2);
        g[i] = std::exp(-d * d / (2.f * 1.5f * 1.5f));
        gsum += g[i];
    }
    for (int i = 0; i < win; ++i) g[i] /= gsum;

    constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double total = 0.0;
    int64_t count = 0;
    for (int y = 0; y + win <= H; ++y)
        for (int x = 0; x + win <= W; ++x) {
            double mu_a = 0, mu_b = 0, aa = 0, bb = 0, ab = 0;
            for (int dy = 0; dy < win; ++dy)
                for (int dx = 0; dx < win; ++dx) {
                    const double w = static_cast<double>(g[dy]) * g[dx];
                    const double va = ya[(y + dy) * static_cast<int64_t>(W) + x + dx];
                    const double vb = yb[(y + dy) * static_cast<int64_t>(W) + x + dx];
                    mu_a += w * va;
                    mu_b += w * vb;
                    aa += w * va * va;
                    bb += w * vb * vb;
                    ab += w * va * vb;
                }
            const double var_a = aa - mu_a * mu_a;
            const double var_b = bb - mu_b * mu_b;
            const double cov = ab - mu_a * mu_b;
            total += ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) /
                     ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
            ++count;
        }
    return total / static_cast<double>(count);
}

// ---------------------------------------------------------------------------
// flow visualization

namespace detail {
inline void hsv_to_rgb(float h, float s, float v, float* rgb) {
    const float hh = h * 6.f;
    const int i = std::min(static_cast<int>(hh), 5);
    const float f = hh - static_cast<float>(i);
    const float p = v * (1.f - s);
    const float q = v * (1.f - s * f);
    const float t = v * (1.f - s * (1.f - f));
    switch (i) {
        case 0: rgb[0] = v; rgb[1] = t; rgb[2] = p; break;
        case 1: rgb[0] = q; rgb[1] = v; rgb[2] = p; break;
        case 2: rgb[0] = p; rgb[1] = v; rgb[2] = t; break;
        case 3: rgb[0] = p; rgb[1] = q; rgb[2] = v; break;
        case 4: rgb[0] = t; rgb[1] = p; rgb[2] = v; break;
        default: rgb[0] = v; rgb[1] = p; rgb[2] = q; break;
    }
}
}  // namespace detail

// Hue encodes displacement angle, saturation encodes magnitude normalized by
// the field's own maximum; zero motion renders white.
inline Frame flow_to_color(const FlowField& flow) {
    SAFA_CHECK(flow.all_finite(), "flow_to_color: non-finite flow");
    const int H = flow.dim(1), W = flow.dim(2);
    float maxmag = 0.f;
    for (int64_t i = 0, hw = static_cast<int64_t>(H) * W; i < hw; ++i) {
        const float u = flow[i], v = flow[hw + i];
        maxmag = std::max(maxmag, std::sqrt(u * u + v * v));
    }
    Frame out = make_frame(H, W);
    const int64_t hw = static_cast<int64_t>(H) * W;
    for (int64_t i = 0; i < hw; ++i) {
        const float u = flow[i], v = flow[hw + i];
        const float mag = std::sqrt(u * u + v * v);
        float hue = std::atan2(v, u) / (2.f * static_cast<float>(M_PI));
        if (hue < 0.f) hue += 1.f;
        if (hue >= 1.f) hue = 0.f;
        const float sat = maxmag > 0.f ? mag / maxmag : 0.f;
        detail::hsv_to_rgb(hue, sat, 1.f, out.data() + i * 3);
    }
    return out;
}

inline Frame clamp01(const Frame& f) {
    Frame out = f.clone();
    for (float& v : out) v = std::min(std::max(v, 0.f), 1.f);
    return out;
}

}  // namespace safa
