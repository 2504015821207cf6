#pragma once

#include "safa/model/layers.hpp"

namespace safa {

// Multi-level contextual feature extractor. A ResNet-18-style trunk is tapped
// at the stem (1/2 resolution), stage-1 (1/4) and stage-2 (1/8); each tap is
// projected with a 1x1 convolution to nc channels, bilinearly upsampled to
// 1/2 frame resolution and summed. Variant switches restrict the taps or swap
// the block type.
//
// The stem is a 7x7 stride-2 convolution + activation with no pooling, so the
// shallowest tap already sits at the 1/2-resolution output grid.
class FeatureExtractor {
  public:
    static constexpr int kMinInput = 32;

    FeatureExtractor() = default;

    FeatureExtractor(ParamStore& ps, const ExtractorConfig& cfg, Rng& rng)
        : cfg_(cfg) {
        const int nc = cfg.out_channels;
        SAFA_CHECK(nc > 0, "extractor: out_channels must be positive");
        const int w1 = nc, w2 = 2 * nc;
        const bool r50 = cfg.variant == ExtractorVariant::R50Style;

        stem_ = Conv(ps, "extractor.trunk.stem", 3, nc, 7, rng, 2);
        stem_act_ = PRelu(ps, "extractor.trunk.stem_act", nc);
        auto make_stage = [&](const std::string& name, int cin, int cout) {
            Stage s;
            if (r50) {
                s.bn1 = BottleneckBlock(ps, name + ".block1", cin, cout, rng, 2);
                s.bn2 = BottleneckBlock(ps, name + ".block2", cout, cout, rng);
            } else {
                s.bb1 = BasicBlock(ps, name + ".block1", cin, cout, rng, 2);
                s.bb2 = BasicBlock(ps, name + ".block2", cout, cout, rng);
            }
            s.r50 = r50;
            return s;
        };
        stage1_ = make_stage("extractor.trunk.stage1", nc, w1);
        stage2_ = make_stage("extractor.trunk.stage2", w1, w2);
        if (cfg.variant == ExtractorVariant::S3Only)
            stage3_ = make_stage("extractor.trunk.stage3", w2, 4 * nc);

        switch (cfg.variant) {
            case ExtractorVariant::StemS1S2:
            case ExtractorVariant::R50Style:
                proj_stem_ = Conv(ps, "extractor.proj.stem", nc, nc, 1, rng);
                proj_s1_ = Conv(ps, "extractor.proj.s1", w1, nc, 1, rng);
                proj_s2_ = Conv(ps, "extractor.proj.s2", w2, nc, 1, rng);
                break;
            case ExtractorVariant::S2Only:
                proj_s2_ = Conv(ps, "extractor.proj.s2", w2, nc, 1, rng);
                break;
            case ExtractorVariant::S3Only:
                proj_s3_ = Conv(ps, "extractor.proj.s3", 4 * nc, nc, 1, rng);
                break;
        }
    }

    // frame: [N, 3, H, W] bicubic-upsampled input; output [N, nc, H/2, W/2]
    Var forward(const Var& frame) const {
        const int H = frame->value.dim(2), W = frame->value.dim(3);
        SAFA_CHECK(H >= kMinInput && W >= kMinInput,
                   "extractor: input smaller than 32x32");
        SAFA_CHECK(H % 2 == 0 && W % 2 == 0,
                   "extractor: input dimensions must be even");
        const int oh = H / 2, ow = W / 2;

        Var s0 = stem_act_(stem_(frame));
        Var s1 = stage1_(s0);
        Var s2 = stage2_(s1);

        auto up = [&](const Var& x) { return resize_bilinear_nchw(x, oh, ow); };
        switch (cfg_.variant) {
            case ExtractorVariant::S2Only:
                return up(proj_s2_(s2));
            case ExtractorVariant::S3Only:
                return up(proj_s3_(stage3_(s2)));
            default:
                return add(add(proj_stem_(s0), up(proj_s1_(s1))), up(proj_s2_(s2)));
        }
    }

    // Replace trunk weights from a named-tensor archive. Projection layers are
    // untouched. All key problems are collected and reported together.
    void load_trunk_weights(const ParamStore& ps, const archive::Loaded& ar) const {
        std::string errors;
        for (const auto& name : ps.names()) {
            if (name.rfind("extractor.trunk.", 0) != 0) continue;
            auto it = ar.tensors.find(name);
            if (it == ar.tensors.end()) {
                errors += "  missing key: " + name + "\n";
                continue;
            }
            Var p = ps.get(name);
            if (!(it->second.same_shape(p->value))) {
                errors += "  shape mismatch for " + name + ": archive " +
                          shape_str(it->second) + " vs model " + shape_str(p->value) + "\n";
                continue;
            }
            std::memcpy(p->value.data(), it->second.data(),
                        static_cast<size_t>(p->value.numel()) * sizeof(float));
        }
        SAFA_REQUIRE(errors.empty(), "load_trunk_weights failed:\n" + errors);
    }

  private:
    struct Stage {
        BasicBlock bb1, bb2;
        BottleneckBlock bn1, bn2;
        bool r50 = false;
        Var operator()(const Var& x) const {
            return r50 ? bn2(bn1(x)) : bb2(bb1(x));
        }
    };

    ExtractorConfig cfg_;
    Conv stem_;
    PRelu stem_act_;
    Stage stage1_, stage2_, stage3_;
    Conv proj_stem_, proj_s1_, proj_s2_, proj_s3_;
};

}  // namespace safa
