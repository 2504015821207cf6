#pragma once

#include "safa/imaging/imaging.hpp"
#include "safa/model/estimator.hpp"
#include "safa/model/extractor.hpp"
#include "safa/model/reconstruction.hpp"

namespace safa {

struct SafaOutput {
    Var sr;          // [N,3,H,W] unclamped; clamp only at the output boundary
    Var flows;       // [N,4,H,W]
    Var fusion;      // [N,1,H,W] in [0,1]
    Var refinement;  // [N,3,H,W] in (-1,1); null for image-only aggregation
    Var warped0, warped1;  // [N,3,H,W]
    std::vector<std::vector<float>> scale_trace;  // [K][N]
};

// Frames [h,w,3] -> batch tensor [N,3,h,w]
inline Tensor frames_to_batch(const std::vector<Frame>& frames) {
    SAFA_CHECK(!frames.empty(), "frames_to_batch: empty input");
    const int H = frames[0].dim(0), W = frames[0].dim(1);
    Tensor out({static_cast<int>(frames.size()), 3, H, W});
    for (size_t n = 0; n < frames.size(); ++n) {
        SAFA_CHECK(frames[n].dim(0) == H && frames[n].dim(1) == W,
                   "frames_to_batch: inconsistent sizes");
        Tensor chw = hwc_to_chw(frames[n]);
        std::memcpy(out.data() + static_cast<int64_t>(n) * chw.numel(), chw.data(),
                    static_cast<size_t>(chw.numel()) * sizeof(float));
    }
    return out;
}

inline Frame batch_to_frame(const Tensor& batch, int n) {
    const int C = batch.dim(1), H = batch.dim(2), W = batch.dim(3);
    Tensor chw({C, H, W});
    std::memcpy(chw.data(), batch.data() + static_cast<int64_t>(n) * chw.numel(),
                static_cast<size_t>(chw.numel()) * sizeof(float));
    return chw_to_hwc(chw);
}

// End-to-end SAFA: bicubic x4 pre-upsampling, feature extraction, iterative
// scale-adaptive flow estimation, warping, reconstruction, composition.
class SafaModel {
  public:
    explicit SafaModel(const SafaConfig& cfg, uint64_t init_seed = 0) : cfg_(cfg) {
        cfg_.validate();
        cfg_.extractor.out_channels = cfg_.nc;
        Rng rng(init_seed);
        extractor_ = FeatureExtractor(params_, cfg_.extractor, rng);
        estimator_ = SafeEstimator(params_, cfg_.nc, cfg_.estimator, rng);
        if (cfg_.aggregation != Aggregation::ImageOnly)
            recon_ = Reconstruction(params_, cfg_.nc, rng);
    }

    const SafaConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    const FeatureExtractor& extractor() const { return extractor_; }
    const SafeEstimator& estimator() const { return estimator_; }

    // Bicubic x4 upsampling of an LR batch (data path, not differentiated).
    Tensor upsample_input(const Tensor& lr) const {
        const int N = lr.dim(0), h = lr.dim(2), w = lr.dim(3);
        Tensor out({N, 3, h * cfg_.space_scale, w * cfg_.space_scale});
        for (int n = 0; n < N; ++n) {
            Frame up = resize_bicubic(batch_to_frame(lr, n),
                                      static_cast<float>(cfg_.space_scale));
            Tensor chw = hwc_to_chw(up);
            std::memcpy(out.data() + static_cast<int64_t>(n) * chw.numel(), chw.data(),
                        static_cast<size_t>(chw.numel()) * sizeof(float));
        }
        return out;
    }

    Var extract_features(const Var& up_frames) const { return extractor_.forward(up_frames); }

    SafaOutput forward_batch(const Tensor& lr0, const Tensor& lr1, float t, GateMode mode,
                             Rng& rng, int k_limit = -1) const {
        return forward_batch(lr0, lr1, std::vector<float>(lr0.dim(0), t), mode, rng, k_limit);
    }

    // Per-sample time-steps (training batches mix different t values).
    SafaOutput forward_batch(const Tensor& lr0, const Tensor& lr1,
                             const std::vector<float>& t, GateMode mode, Rng& rng,
                             int k_limit = -1) const {
        validate_inputs(lr0, lr1, t.empty() ? 0.f : t[0]);
        Var up0 = make_leaf(upsample_input(lr0));
        Var up1 = make_leaf(upsample_input(lr1));
        Var c0 = extract_features(up0);
        Var c1 = extract_features(up1);
        return forward_from_features(up0, up1, c0, c1, t, mode, rng, k_limit);
    }

    SafaOutput forward_from_features(const Var& up0, const Var& up1, const Var& c0,
                                     const Var& c1, float t, GateMode mode, Rng& rng,
                                     int k_limit = -1) const {
        return forward_from_features(up0, up1, c0, c1,
                                     std::vector<float>(c0->value.dim(0), t), mode, rng,
                                     k_limit);
    }

    // Heads-only forward given precomputed upsampled frames and features;
    // interpolate_batch reuses this across time-steps.
    SafaOutput forward_from_features(const Var& up0, const Var& up1, const Var& c0,
                                     const Var& c1, const std::vector<float>& t,
                                     GateMode mode, Rng& rng, int k_limit = -1) const {
        const int N = c0->value.dim(0);
        SAFA_CHECK(static_cast<int>(t.size()) == N, "forward: need one t per sample");
        for (float tv : t)
            SAFA_CHECK(tv >= 0.f && tv <= 1.f, "forward: t outside [0,1]");
        const int fh = c0->value.dim(2), fw = c0->value.dim(3);
        Tensor tp({N, 1, fh, fw});
        for (int n = 0; n < N; ++n)
            std::fill(tp.data() + static_cast<int64_t>(n) * fh * fw,
                      tp.data() + static_cast<int64_t>(n + 1) * fh * fw, t[n]);
        Var tplane = make_leaf(std::move(tp));

        EstimatorResult est = estimator_.run(c0, c1, tplane, mode, rng, k_limit);

        SafaOutput out;
        out.flows = est.flows;
        out.fusion = est.mask;
        out.scale_trace = std::move(est.trace);

        Var f0 = slice_channels(est.flows, 0, 2);
        Var f1 = slice_channels(est.flows, 2, 4);
        out.warped0 = backward_warp_nchw(up0, f0);
        out.warped1 = backward_warp_nchw(up1, f1);

        Var comp;
        if (cfg_.aggregation == Aggregation::FeatureOnly) {
            comp = affine(add(out.warped0, out.warped1), 0.5f);
        } else {
            comp = add(mul_mask(out.warped0, est.mask),
                       mul_mask(out.warped1, one_minus(est.mask)));
        }
        if (cfg_.aggregation != Aggregation::ImageOnly) {
            Var ct0 = backward_warp_nchw(c0, resize_flow_nchw(f0, fh, fw));
            Var ct1 = backward_warp_nchw(c1, resize_flow_nchw(f1, fh, fw));
            out.refinement = recon_.forward(ct0, ct1);
            comp = add(comp, out.refinement);
        }
        out.sr = comp;
        return out;
    }

    std::vector<SafaOutput> interpolate_batch(const Tensor& lr0, const Tensor& lr1,
                                              const std::vector<float>& time_steps,
                                              GateMode mode, Rng& rng) const {
        SAFA_CHECK(!time_steps.empty(), "interpolate: no time steps");
        validate_inputs(lr0, lr1, time_steps[0]);
        Var up0 = make_leaf(upsample_input(lr0));
        Var up1 = make_leaf(upsample_input(lr1));
        Var c0 = extract_features(up0);
        Var c1 = extract_features(up1);
        std::vector<SafaOutput> outs;
        outs.reserve(time_steps.size());
        for (float t : time_steps)
            outs.push_back(forward_from_features(up0, up1, c0, c1, t, mode, rng));
        return outs;
    }

    Frame output_frame(const SafaOutput& out, int n = 0) const {
        return clamp01(batch_to_frame(out.sr->value, n));
    }

    // ------------------------------------------------------------------
    // checkpointing (model weights + config; the trainer adds optimizer state)

    void save_weights(const std::string& path, const std::string& extra_meta = "") const {
        archive::save(path, params_.snapshot(), serialize_kv(cfg_) + extra_meta);
    }

    void load_weights_from(const archive::Loaded& ar) {
        std::string errors;
        for (const auto& name : params_.names()) {
            auto it = ar.tensors.find(name);
            if (it == ar.tensors.end()) {
                errors += "  missing key: " + name + "\n";
                continue;
            }
            Var p = params_.get(name);
            if (!it->second.same_shape(p->value)) {
                errors += "  shape mismatch for " + name + "\n";
                continue;
            }
            std::memcpy(p->value.data(), it->second.data(),
                        static_cast<size_t>(p->value.numel()) * sizeof(float));
        }
        SAFA_REQUIRE(errors.empty(), "load_weights failed:\n" + errors);
    }

    static SafaModel load(const std::string& path) {
        archive::Loaded ar = archive::load(path);
        SafaConfig cfg;
        std::istringstream meta(ar.meta);
        apply_kv(cfg, parse_kv(meta));
        SafaModel model(cfg);
        model.load_weights_from(ar);
        return model;
    }

  private:
    void validate_inputs(const Tensor& lr0, const Tensor& lr1, float t) const {
        SAFA_CHECK(lr0.ndim() == 4 && lr0.dim(1) == 3, "forward: expected [N,3,h,w] input");
        SAFA_CHECK(lr0.same_shape(lr1), "forward: LR frame sizes differ");
        SAFA_CHECK(t >= 0.f && t <= 1.f, "forward: t outside [0,1]");
        SAFA_CHECK(lr0.dim(2) * cfg_.space_scale >= FeatureExtractor::kMinInput &&
                       lr0.dim(3) * cfg_.space_scale >= FeatureExtractor::kMinInput,
                   "forward: input frames below minimum size");
    }

    SafaConfig cfg_;
    ParamStore params_;
    FeatureExtractor extractor_;
    SafeEstimator estimator_;
    Reconstruction recon_;
};

}  // namespace safa
