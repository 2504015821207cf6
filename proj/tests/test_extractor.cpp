#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"

using namespace safa;

TEST_CASE("extractor emits nc channels at half resolution for every variant") {
    Rng rng(101);
    const Tensor frame = Tensor::rand({2, 3, 48, 64}, rng);
    for (const ExtractorVariant v :
         {ExtractorVariant::StemS1S2, ExtractorVariant::S2Only, ExtractorVariant::S3Only,
          ExtractorVariant::R50Style}) {
        ParamStore ps;
        ExtractorConfig cfg;
        cfg.variant = v;
        cfg.out_channels = 12;
        Rng wrng(3);
        FeatureExtractor fx(ps, cfg, wrng);
        Var out = fx.forward(make_leaf(frame));
        REQUIRE(out->value.dim(0) == 2);
        REQUIRE(out->value.dim(1) == 12);
        REQUIRE(out->value.dim(2) == 24);
        REQUIRE(out->value.dim(3) == 32);
        REQUIRE(out->value.all_finite());
    }
}

TEST_CASE("extractor rejects inputs below the minimum or with odd dimensions") {
    ParamStore ps;
    ExtractorConfig cfg;
    cfg.out_channels = 8;
    Rng rng(5);
    FeatureExtractor fx(ps, cfg, rng);
    Rng drng(7);
    REQUIRE_THROWS_AS(fx.forward(make_leaf(Tensor::rand({1, 3, 16, 48}, drng))),
                      InvalidArgument);
    REQUIRE_THROWS_AS(fx.forward(make_leaf(Tensor::rand({1, 3, 33, 48}, drng))),
                      InvalidArgument);
}

TEST_CASE("trunk weight loading reports missing keys and shape mismatches per key") {
    ParamStore ps;
    ExtractorConfig cfg;
    cfg.out_channels = 8;
    Rng rng(5);
    FeatureExtractor fx(ps, cfg, rng);

    // collect the trunk snapshot, then damage it
    std::vector<std::pair<std::string, Tensor>> tensors;
    for (const auto& name : ps.names())
        if (name.rfind("extractor.trunk.", 0) == 0) tensors.emplace_back(name, ps.get(name)->value);
    REQUIRE_FALSE(tensors.empty());

    archive::Loaded good;
    for (auto& [n, t] : tensors) good.tensors.emplace(n, t.clone());
    REQUIRE_NOTHROW(fx.load_trunk_weights(ps, good));

    archive::Loaded bad = good;
    bad.tensors.erase(bad.tensors.begin()->first);
    bad.tensors["extractor.trunk.stem_act.slope"] = Tensor::zeros({99});
    try {
        fx.load_trunk_weights(ps, bad);
        FAIL("expected load_trunk_weights to throw");
    } catch (const RuntimeError& e) {
        const std::string msg = e.what();
        REQUIRE(msg.find("missing") != std::string::npos);
        REQUIRE(msg.find("mismatch") != std::string::npos);
    }
}

TEST_CASE("selector cost stays within 2% of a full-resolution block at 64x64") {
    // Criterion 6 companion at module level: measure with the op counter.
    const int nc = 80;
    ParamStore ps;
    EstimatorConfig cfg;
    Rng rng(11);
    SafeEstimator est(ps, nc, cfg, rng);
    Rng drng(13);
    Var c0 = make_leaf(Tensor::rand({1, nc, 64, 64}, drng));
    Var c1 = make_leaf(Tensor::rand({1, nc, 64, 64}, drng));
    Var tplane = make_leaf(Tensor::full({1, 1, 64, 64}, 0.5f));
    Var g = est.init_hidden(c0, c1);
    Var xcat = concat_channels({c0, c1, g, tplane});

    opcount::reset();
    est.block_body(0, 0, xcat);
    const int64_t block_macs = opcount::read();
    opcount::reset();
    est.selector_probs(0, xcat);
    const int64_t sel_macs = opcount::read();
    REQUIRE(block_macs > 0);
    REQUIRE(static_cast<double>(sel_macs) <= 0.02 * static_cast<double>(block_macs));
}

TEST_CASE("branch costs scale as 1 : 1/4 : 1/16 with the processing scale") {
    const int nc = 16;
    ParamStore ps;
    EstimatorConfig cfg;
    Rng rng(17);
    SafeEstimator est(ps, nc, cfg, rng);
    Rng drng(19);
    Var c0 = make_leaf(Tensor::rand({1, nc, 64, 64}, drng));
    Var c1 = make_leaf(Tensor::rand({1, nc, 64, 64}, drng));
    Var tplane = make_leaf(Tensor::full({1, 1, 64, 64}, 0.5f));
    Var xcat = concat_channels({c0, c1, est.init_hidden(c0, c1), tplane});

    std::vector<int64_t> macs;
    for (int b = 0; b < 3; ++b) {
        opcount::reset();
        est.block_body_at_scale(0, b, cfg.scales[b], xcat);
        macs.push_back(opcount::read());
    }
    REQUIRE(std::fabs(static_cast<double>(macs[1]) / macs[0] - 0.25) < 0.005);
    REQUIRE(std::fabs(static_cast<double>(macs[2]) / macs[0] - 0.0625) < 0.00125);
}
