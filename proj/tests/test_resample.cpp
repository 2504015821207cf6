#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"

using namespace safa;
using safa::testing::grad_check;

namespace {

FlowField uniform_flow(int h, int w, float u, float v) {
    FlowField f({2, h, w});
    for (int64_t i = 0; i < static_cast<int64_t>(h) * w; ++i) {
        f[i] = u;
        f[static_cast<int64_t>(h) * w + i] = v;
    }
    return f;
}

Tensor ramp_chw(int h, int w) {  // v(x,y) = x/(w-1)
    Tensor t({1, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            t[static_cast<int64_t>(y) * w + x] =
                static_cast<float>(x) / static_cast<float>(w - 1);
    return t;
}

// border-clamped gather for integer flows
Tensor gather_ref(const Tensor& src, const FlowField& flow) {
    const int C = src.dim(0), H = src.dim(1), W = src.dim(2);
    Tensor out({C, H, W});
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const int64_t i = static_cast<int64_t>(y) * W + x;
            int sx = x + static_cast<int>(std::lround(flow[i]));
            int sy = y + static_cast<int>(std::lround(flow[static_cast<int64_t>(H) * W + i]));
            sx = std::clamp(sx, 0, W - 1);
            sy = std::clamp(sy, 0, H - 1);
            for (int c = 0; c < C; ++c)
                out[static_cast<int64_t>(c) * H * W + i] =
                    src[(static_cast<int64_t>(c) * H + sy) * W + sx];
        }
    return out;
}

}  // namespace

TEST_CASE("warp with zero flow is the identity") {
    Rng rng(31);
    Tensor src = Tensor::rand({3, 6, 7}, rng);
    Tensor out = backward_warp_chw(src, uniform_flow(6, 7, 0.f, 0.f));
    for (int64_t i = 0; i < src.numel(); ++i)
        REQUIRE(out[i] == Catch::Approx(src[i]).margin(1e-7));
}

TEST_CASE("warp on a ramp: the hand-evaluated oracles") {
    Tensor src = ramp_chw(4, 4);  // v(x,y) = x/3
    Tensor a = backward_warp_chw(src, uniform_flow(4, 4, 1.f, 0.f));
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x)
            REQUIRE(a[y * 4 + x] == Catch::Approx(std::min(x + 1, 3) / 3.f));
    Tensor b = backward_warp_chw(src, uniform_flow(4, 4, 0.5f, 0.f));
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x)
            REQUIRE(b[y * 4 + x] ==
                    Catch::Approx((x / 3.f + std::min(x + 1, 3) / 3.f) / 2.f).margin(1e-6));
}

TEST_CASE("warp equals the gather oracle on randomized integer flows") {
    Rng rng(37);
    for (int rep = 0; rep < 200; ++rep) {
        const int h = rng.uniform_int(8, 32), w = rng.uniform_int(8, 32);
        Tensor src = Tensor::rand({2, h, w}, rng);
        FlowField flow({2, h, w});
        for (float& v : flow) v = static_cast<float>(rng.uniform_int(-5, 5));
        Tensor out = backward_warp_chw(src, flow);
        Tensor ref = gather_ref(src, flow);
        for (int64_t i = 0; i < out.numel(); ++i) REQUIRE(out[i] == ref[i]);
    }
}

TEST_CASE("warp rejects mismatched flow dimensions") {
    Tensor src = Tensor::zeros({1, 4, 4});
    REQUIRE_THROWS_AS(backward_warp_chw(src, uniform_flow(4, 5, 0.f, 0.f)), InvalidArgument);
    FlowField bad = uniform_flow(4, 4, 0.f, 0.f);
    bad[3] = std::numeric_limits<float>::quiet_NaN();
    REQUIRE_THROWS_AS(backward_warp_chw(src, bad), InvalidArgument);
}

TEST_CASE("warp gradients match finite differences at interior coordinates") {
    Rng rng(41);
    Var src = make_leaf(Tensor::randn({1, 1, 8, 8}, rng), true);
    Tensor ft({1, 2, 8, 8});
    for (float& v : ft) v = rng.uniform(-1.2f, 1.2f);
    Var flow = make_leaf(ft, true);
    auto loss = [&] { Var y = backward_warp_nchw(src, flow); return sum_all(mul(y, y)); };
    REQUIRE(grad_check(loss, src, 1e-2f) < 1e-3);
    REQUIRE(grad_check(loss, flow, 1e-3f, 1e-2f) < 2e-3);
}

TEST_CASE("bilinear resize: constants, factor 1, round trip") {
    Rng rng(43);
    Frame c({5, 7, 3});
    c.fill(0.42f);
    Frame up = resize_bilinear(c, 2.f);
    REQUIRE(up.dim(0) == 10);
    for (float v : up) REQUIRE(v == Catch::Approx(0.42f));
    Frame back = resize_bilinear(up, 0.5f);
    for (float v : back) REQUIRE(v == Catch::Approx(0.42f));
    Frame f = safa::testing::random_frame(6, 6, rng);
    Frame same = resize_bilinear(f, 1.f);
    for (int64_t i = 0; i < f.numel(); ++i) REQUIRE(same[i] == f[i]);
    REQUIRE_THROWS_AS(resize_bilinear(f, 0.f), InvalidArgument);
}

TEST_CASE("flow resize scales displacement values with the factor") {
    FlowField f({2, 4, 4});
    for (int64_t i = 0; i < 16; ++i) { f[i] = 2.f; f[16 + i] = 0.f; }
    FlowField half = resize_flow(f, 0.5f);
    REQUIRE(half.dim(1) == 2);
    for (int64_t i = 0; i < 4; ++i) {
        REQUIRE(half[i] == Catch::Approx(1.f));
        REQUIRE(half[4 + i] == Catch::Approx(0.f).margin(1e-7));
    }
    // anisotropic NCHW path: u scales with fx, v with fy
    Tensor fn({1, 2, 4, 8});
    for (int64_t i = 0; i < 32; ++i) { fn[i] = 1.f; fn[32 + i] = 1.f; }
    NoGradGuard ng;
    Tensor r = resize_flow_nchw(make_leaf(fn), 8, 4)->value;
    REQUIRE(r.at4(0, 0, 3, 1) == Catch::Approx(0.5f));  // u scaled by 4/8
    REQUIRE(r.at4(0, 1, 3, 1) == Catch::Approx(2.f));   // v scaled by 8/4
}

TEST_CASE("resize gradients match finite differences") {
    Rng rng(47);
    Var x = make_leaf(Tensor::randn({1, 2, 5, 4}, rng), true);
    REQUIRE(grad_check([&] {
        Var y = resize_bilinear_nchw(x, 9, 7);
        return sum_all(mul(y, y));
    }, x) < 1e-3);
    REQUIRE(grad_check([&] {
        Var y = resize_bilinear_nchw(x, 3, 2);
        return sum_all(mul(y, y));
    }, x) < 1e-3);
}
