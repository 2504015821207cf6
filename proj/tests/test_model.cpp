#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "helpers.hpp"

using namespace safa;

namespace {

SafaConfig small_cfg(int nc = 8, int K = 2) {
    SafaConfig c;
    c.nc = nc;
    c.extractor.out_channels = nc;
    c.estimator.K = K;
    return c;
}

}  // namespace

TEST_CASE("forward maps a 32x48 LR pair to 128x192 output with ranged heads") {
    SafaModel model(small_cfg(), 23);
    Rng drng(1), grng(2);
    const Tensor lr0 = Tensor::rand({1, 3, 32, 48}, drng);
    const Tensor lr1 = Tensor::rand({1, 3, 32, 48}, drng);
    SafaOutput out = model.forward_batch(lr0, lr1, 0.5f, GateMode::EvalDeterministic, grng);
    REQUIRE(out.sr->value.dim(2) == 128);
    REQUIRE(out.sr->value.dim(3) == 192);
    REQUIRE(out.fusion->value.dim(1) == 1);
    for (float v : out.fusion->value) {
        REQUIRE(v >= 0.f);
        REQUIRE(v <= 1.f);
    }
    REQUIRE(out.refinement);
    for (float v : out.refinement->value) {
        // tanh saturates to exactly +/-1 in float, so the interval is closed
        REQUIRE(v >= -1.f);
        REQUIRE(v <= 1.f);
    }
    REQUIRE(out.flows->value.dim(1) == 4);
    REQUIRE(out.sr->value.all_finite());
}

TEST_CASE("30 randomized configurations all hold the shape/range invariants") {
    Rng crng(107);
    const std::vector<int> Ks = {1, 2, 4, 6};
    const std::vector<int> ncs = {16, 32, 80};
    const std::vector<Aggregation> aggs = {Aggregation::ImageFeature, Aggregation::ImageOnly,
                                           Aggregation::FeatureOnly};
    for (int rep = 0; rep < 30; ++rep) {
        SafaConfig cfg;
        cfg.estimator.K = Ks[crng.uniform_int(0, 3)];
        cfg.nc = ncs[crng.uniform_int(0, 2)];
        cfg.extractor.out_channels = cfg.nc;
        cfg.aggregation = aggs[crng.uniform_int(0, 2)];
        cfg.estimator.adaptive = crng.bernoulli(0.5f);
        if (crng.bernoulli(0.3f)) {
            cfg.estimator.manual_schedule.assign(cfg.estimator.K, 1.f);
            for (auto& s : cfg.estimator.manual_schedule)
                s = cfg.estimator.scales[crng.uniform_int(0, 2)];
        }
        CAPTURE(rep, cfg.estimator.K, cfg.nc, static_cast<int>(cfg.aggregation),
                cfg.estimator.adaptive);
        SafaModel model(cfg, 1000 + rep);
        Rng drng(rep), grng(rep + 1);
        NoGradGuard ng;  // keep the 80-channel configs cheap
        const Tensor lr0 = Tensor::rand({1, 3, 8, 12}, drng);
        const Tensor lr1 = Tensor::rand({1, 3, 8, 12}, drng);
        SafaOutput out =
            model.forward_batch(lr0, lr1, 0.25f, GateMode::TrainStochastic, grng);
        REQUIRE(out.sr->value.dim(2) == 32);
        REQUIRE(out.sr->value.dim(3) == 48);
        REQUIRE(out.sr->value.all_finite());
        for (float v : out.fusion->value) REQUIRE((v >= 0.f && v <= 1.f));
        if (cfg.aggregation == Aggregation::ImageOnly) REQUIRE_FALSE(out.refinement);
        else
            for (float v : out.refinement->value) REQUIRE((v >= -1.f && v <= 1.f));
        REQUIRE(out.scale_trace.size() == static_cast<size_t>(cfg.estimator.K));
        if (!cfg.estimator.manual_schedule.empty())
            for (size_t k = 0; k < out.scale_trace.size(); ++k)
                REQUIRE(out.scale_trace[k][0] == cfg.estimator.manual_schedule[k]);
    }
}

TEST_CASE("hidden state keeps its shape across scale branches") {
    ParamStore ps;
    EstimatorConfig cfg;
    Rng rng(31);
    SafeEstimator est(ps, 8, cfg, rng);
    Rng drng(33);
    Var c0 = make_leaf(Tensor::rand({1, 8, 16, 24}, drng));
    Var c1 = make_leaf(Tensor::rand({1, 8, 16, 24}, drng));
    Var g = est.init_hidden(c0, c1);
    Var xcat = concat_channels({c0, c1, g, make_leaf(Tensor::full({1, 1, 16, 24}, 0.5f))});
    for (int b = 0; b < 3; ++b) {
        Var y = est.block_body_at_scale(0, b, cfg.scales[b], xcat);
        REQUIRE(y->value.same_shape(g->value));
    }
}

TEST_CASE("composition identities per aggregation mode") {
    Rng drng(37), grng(39);
    const Tensor lr0 = Tensor::rand({1, 3, 8, 8}, drng);
    const Tensor lr1 = Tensor::rand({1, 3, 8, 8}, drng);

    SECTION("image-only: output is exactly the fusion blend of the warps") {
        SafaConfig cfg = small_cfg();
        cfg.aggregation = Aggregation::ImageOnly;
        SafaModel model(cfg, 41);
        SafaOutput out = model.forward_batch(lr0, lr1, 0.5f, GateMode::EvalDeterministic, grng);
        for (int64_t i = 0; i < out.sr->value.numel(); ++i) {
            const int64_t p = i % (32 * 32);
            const float m = out.fusion->value[p];
            const float expect =
                m * out.warped0->value[i] + (1.f - m) * out.warped1->value[i];
            REQUIRE(out.sr->value[i] == Catch::Approx(expect).margin(1e-6));
        }
    }

    SECTION("feature-only: output is the unweighted warp average plus the residual") {
        SafaConfig cfg = small_cfg();
        cfg.aggregation = Aggregation::FeatureOnly;
        SafaModel model(cfg, 43);
        SafaOutput out = model.forward_batch(lr0, lr1, 0.5f, GateMode::EvalDeterministic, grng);
        for (int64_t i = 0; i < out.sr->value.numel(); ++i) {
            const float expect = 0.5f * (out.warped0->value[i] + out.warped1->value[i]) +
                                 out.refinement->value[i];
            REQUIRE(out.sr->value[i] == Catch::Approx(expect).margin(1e-6));
        }
    }

    SECTION("image+feature with a zeroed reconstruction head degrades to the blend") {
        SafaModel model(small_cfg(), 47);
        for (const auto& name : model.params().names())
            if (name.rfind("recon.head", 0) == 0) model.params().get(name)->value.zero();
        SafaOutput out = model.forward_batch(lr0, lr1, 0.5f, GateMode::EvalDeterministic, grng);
        for (float v : out.refinement->value) REQUIRE(v == 0.f);
        for (int64_t i = 0; i < out.sr->value.numel(); ++i) {
            const int64_t p = i % (32 * 32);
            const float m = out.fusion->value[p];
            REQUIRE(out.sr->value[i] ==
                    Catch::Approx(m * out.warped0->value[i] +
                                  (1.f - m) * out.warped1->value[i]).margin(1e-6));
        }
    }
}

TEST_CASE("endpoint time-steps reproduce near-identity warping targets") {
    // At t=0 the flow to frame 0 should be learnable toward zero; structurally
    // we check that t enters the computation: outputs at t=0 and t=1 differ.
    SafaModel model(small_cfg(), 53);
    Rng drng(57), grng(59);
    const Tensor lr0 = Tensor::rand({1, 3, 8, 8}, drng);
    const Tensor lr1 = Tensor::rand({1, 3, 8, 8}, drng);
    Rng g1(7), g2(7);
    SafaOutput o0 = model.forward_batch(lr0, lr1, 0.f, GateMode::EvalDeterministic, g1);
    SafaOutput o1 = model.forward_batch(lr0, lr1, 1.f, GateMode::EvalDeterministic, g2);
    double diff = 0;
    for (int64_t i = 0; i < o0.sr->value.numel(); ++i)
        diff += std::fabs(o0.sr->value[i] - o1.sr->value[i]);
    REQUIRE(diff > 1e-4);
    REQUIRE_THROWS_AS(model.forward_batch(lr0, lr1, 1.5f, GateMode::EvalDeterministic, g1),
                      InvalidArgument);
}

TEST_CASE("default parameter count sits in the paper's 4-6M band") {
    SafaConfig cfg;  // nc=80, K=6 defaults
    SafaModel model(cfg, 61);
    const int64_t n = model.params().total_count();
    CAPTURE(n);
    REQUIRE(n >= 4000000);
    REQUIRE(n <= 6000000);
}

TEST_CASE("disabling cross-scale sharing grows the parameter count") {
    SafaConfig base = small_cfg(16, 4);
    SafaConfig c7 = base;
    c7.estimator.share_across_scales = false;
    const int64_t n_base = SafaModel(base, 1).params().total_count();
    const int64_t n_c7 = SafaModel(c7, 1).params().total_count();
    REQUIRE(n_c7 > n_base);
}

TEST_CASE("every parameter receives gradient after one training-mode backward") {
    SafaModel model(small_cfg(), 67);
    Rng drng(71), grng(73);
    const Tensor lr0 = Tensor::rand({2, 3, 8, 8}, drng);
    const Tensor lr1 = Tensor::rand({2, 3, 8, 8}, drng);
    const Var target = make_leaf(Tensor::rand({2, 3, 32, 32}, drng));
    // accumulate several stochastic draws so every branch body gets visited
    model.params().zero_grads();
    for (int rep = 0; rep < 12; ++rep) {
        SafaOutput out =
            model.forward_batch(lr0, lr1, 0.3f + 0.05f * rep, GateMode::TrainStochastic, grng);
        backward(mean_abs_diff(out.sr, target));
    }
    for (const auto& name : model.params().names()) {
        const Var p = model.params().get(name);
        CAPTURE(name);
        REQUIRE(p->grad.defined());
        REQUIRE(p->grad.max_abs() > 0.f);
    }
}

TEST_CASE("interpolate_batch with shared features matches per-call forwards") {
    SafaModel model(small_cfg(), 79);
    Rng drng(83);
    const Tensor lr0 = Tensor::rand({1, 3, 8, 8}, drng);
    const Tensor lr1 = Tensor::rand({1, 3, 8, 8}, drng);
    NoGradGuard ng;
    Rng g1(5);
    const auto outs = model.interpolate_batch(lr0, lr1, {0.f, 0.5f, 1.f},
                                              GateMode::EvalDeterministic, g1);
    REQUIRE(outs.size() == 3);
    Rng g2(5);
    SafaOutput direct = model.forward_batch(lr0, lr1, 0.5f, GateMode::EvalDeterministic, g2);
    for (int64_t i = 0; i < direct.sr->value.numel(); ++i)
        REQUIRE(outs[1].sr->value[i] == Catch::Approx(direct.sr->value[i]).margin(1e-5));
}

TEST_CASE("weight save/load round trip reproduces outputs exactly") {
    namespace fs = std::filesystem;
    const std::string path =
        (fs::temp_directory_path() / "safa_model_rt.safat").string();
    SafaModel model(small_cfg(), 89);
    model.save_weights(path);
    SafaModel loaded = SafaModel::load(path);
    REQUIRE(loaded.config().nc == 8);
    Rng drng(91);
    const Tensor lr0 = Tensor::rand({1, 3, 8, 8}, drng);
    const Tensor lr1 = Tensor::rand({1, 3, 8, 8}, drng);
    NoGradGuard ng;
    Rng g1(1), g2(1);
    SafaOutput a = model.forward_batch(lr0, lr1, 0.5f, GateMode::EvalDeterministic, g1);
    SafaOutput b = loaded.forward_batch(lr0, lr1, 0.5f, GateMode::EvalDeterministic, g2);
    for (int64_t i = 0; i < a.sr->value.numel(); ++i)
        REQUIRE(a.sr->value[i] == b.sr->value[i]);
    fs::remove(path);
}

TEST_CASE("deterministic gating is reproducible and thread-independent of the rng") {
    SafaModel model(small_cfg(), 97);
    Rng drng(99);
    const Tensor lr0 = Tensor::rand({1, 3, 8, 8}, drng);
    const Tensor lr1 = Tensor::rand({1, 3, 8, 8}, drng);
    NoGradGuard ng;
    Rng g1(1), g2(999);  // deterministic mode must ignore the gate stream
    SafaOutput a = model.forward_batch(lr0, lr1, 0.5f, GateMode::EvalDeterministic, g1);
    SafaOutput b = model.forward_batch(lr0, lr1, 0.5f, GateMode::EvalDeterministic, g2);
    for (int64_t i = 0; i < a.sr->value.numel(); ++i)
        REQUIRE(a.sr->value[i] == b.sr->value[i]);
}
