#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"

using namespace safa;
using safa::testing::grad_check;

namespace {

// naive direct convolution, same padding semantics as conv2d
Tensor conv_ref(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int O = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const int oh = (H + 2 * pad - kh) / stride + 1;
    const int ow = (W + 2 * pad - kw) / stride + 1;
    Tensor out({N, O, oh, ow});
    for (int n = 0; n < N; ++n)
        for (int o = 0; o < O; ++o)
            for (int y = 0; y < oh; ++y)
                for (int xx = 0; xx < ow; ++xx) {
                    double acc = b[o];
                    for (int c = 0; c < C; ++c)
                        for (int ky = 0; ky < kh; ++ky)
                            for (int kx = 0; kx < kw; ++kx) {
                                const int iy = y * stride + ky - pad;
                                const int ix = xx * stride + kx - pad;
                                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                                acc += static_cast<double>(x.at4(n, c, iy, ix)) *
                                       w.at4(o, c, ky, kx);
                            }
                    out.at4(n, o, y, xx) = static_cast<float>(acc);
                }
    return out;
}

}  // namespace

TEST_CASE("conv2d matches the direct-sum reference") {
    Rng rng(11);
    for (const auto& [stride, pad] : std::vector<std::pair<int, int>>{{1, 1}, {2, 1}, {4, 1}}) {
        Var x = make_leaf(Tensor::randn({2, 3, 9, 7}, rng), true);
        Var w = make_leaf(Tensor::randn({4, 3, 3, 3}, rng), true);
        Var b = make_leaf(Tensor::randn({4}, rng), true);
        Var y = conv2d(x, w, b, stride, pad);
        Tensor ref = conv_ref(x->value, w->value, b->value, stride, pad);
        REQUIRE(y->value.same_shape(ref));
        for (int64_t i = 0; i < ref.numel(); ++i)
            REQUIRE(y->value[i] == Catch::Approx(ref[i]).margin(1e-4));
    }
}

TEST_CASE("conv2d gradients match finite differences") {
    Rng rng(13);
    Var x = make_leaf(Tensor::randn({1, 2, 5, 5}, rng), true);
    Var w = make_leaf(Tensor::randn({3, 2, 3, 3}, rng), true);
    Var b = make_leaf(Tensor::randn({3}, rng), true);
    auto loss = [&] { Var y = conv2d(x, w, b); return sum_all(mul(y, y)); };
    REQUIRE(grad_check(loss, x, 1e-2f) < 2e-3);
    REQUIRE(grad_check(loss, w, 1e-2f) < 2e-3);
    REQUIRE(grad_check(loss, b, 1e-2f) < 2e-3);
}

TEST_CASE("conv2d counts one MAC per multiply") {
    Rng rng(1);
    Var x = make_leaf(Tensor::rand({1, 2, 8, 8}, rng));
    Var w = make_leaf(Tensor::randn({4, 2, 3, 3}, rng));
    Var b = make_leaf(Tensor::zeros({4}));
    opcount::reset();
    conv2d(x, w, b);
    REQUIRE(opcount::read() == static_cast<int64_t>(4) * 2 * 3 * 3 * 8 * 8);
}

TEST_CASE("linear and global_avg_pool") {
    Rng rng(17);
    Var x = make_leaf(Tensor::randn({2, 3}, rng), true);
    Var w = make_leaf(Tensor::randn({4, 3}, rng), true);
    Var b = make_leaf(Tensor::randn({4}, rng), true);
    Var y = linear(x, w, b);
    REQUIRE(y->value.dim(0) == 2);
    REQUIRE(y->value.dim(1) == 4);
    float ref = b->value[1];
    for (int i = 0; i < 3; ++i) ref += x->value[i] * w->value[3 + i];
    REQUIRE(y->value[1] == Catch::Approx(ref));
    auto loss = [&] { Var z = linear(x, w, b); return sum_all(mul(z, z)); };
    REQUIRE(grad_check(loss, x, 1e-2f) < 1e-3);
    REQUIRE(grad_check(loss, w, 1e-2f) < 1e-3);

    Var f = make_leaf(Tensor::randn({2, 3, 4, 4}, rng), true);
    Var p = global_avg_pool(f);
    double acc = 0;
    for (int y2 = 0; y2 < 4; ++y2)
        for (int x2 = 0; x2 < 4; ++x2) acc += f->value.at4(1, 2, y2, x2);
    REQUIRE(p->value[5] == Catch::Approx(acc / 16.0));
    REQUIRE(grad_check([&] { Var q = global_avg_pool(f); return sum_all(mul(q, q)); }, f) < 1e-3);
}

TEST_CASE("pixel_shuffle rearranges r^2 channel groups into space") {
    // channel c of output pixel (2y+dy, 2x+dx) comes from input channel
    // c*r^2 + dy*r + dx at (y, x)
    Tensor x({1, 8, 2, 2});
    for (int64_t i = 0; i < x.numel(); ++i) x[i] = static_cast<float>(i);
    Var y = pixel_shuffle(make_leaf(x, true), 2);
    REQUIRE(y->value.dim(1) == 2);
    REQUIRE(y->value.dim(2) == 4);
    for (int c = 0; c < 2; ++c)
        for (int oy = 0; oy < 4; ++oy)
            for (int ox = 0; ox < 4; ++ox) {
                const int ic = c * 4 + (oy % 2) * 2 + (ox % 2);
                REQUIRE(y->value.at4(0, c, oy, ox) == x.at4(0, ic, oy / 2, ox / 2));
            }
    Var leaf = make_leaf(x, true);
    REQUIRE(grad_check([&] { Var z = pixel_shuffle(leaf, 2); return sum_all(mul(z, z)); },
                       leaf, 1e-2f) < 1e-3);
}

TEST_CASE("mul_mask broadcasts a single-channel mask") {
    Rng rng(23);
    Var x = make_leaf(Tensor::randn({2, 3, 4, 4}, rng), true);
    Var m = make_leaf(Tensor::rand({2, 1, 4, 4}, rng), true);
    Var y = mul_mask(x, m);
    REQUIRE(y->value.at4(1, 2, 3, 1) ==
            Catch::Approx(x->value.at4(1, 2, 3, 1) * m->value.at4(1, 0, 3, 1)));
    auto loss = [&] { Var z = mul_mask(x, m); return sum_all(mul(z, z)); };
    REQUIRE(grad_check(loss, x) < 1e-3);
    REQUIRE(grad_check(loss, m) < 1e-3);
}

TEST_CASE("select_column picks one column with gradient routing") {
    Rng rng(29);
    Var x = make_leaf(Tensor::randn({3, 4}, rng), true);
    Var c = select_column(x, 2);
    for (int n = 0; n < 3; ++n) REQUIRE(c->value[n] == x->value[n * 4 + 2]);
    backward(sum_all(c));
    for (int n = 0; n < 3; ++n)
        for (int j = 0; j < 4; ++j)
            REQUIRE(x->grad[n * 4 + j] == (j == 2 ? 1.f : 0.f));
}
