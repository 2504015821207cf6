#pragma once

#include <chrono>

#include "safa/data/dataset.hpp"
#include "safa/imaging/flow_io.hpp"
#include "safa/model/safa.hpp"

namespace safa {

// ---------------------------------------------------------------------------
// evaluation over a dataset: sliding-window schedule, PSNR/SSIM per target,
// Center / Average regime aggregation

struct FrameRecord {
    std::string clip;
    int pair_lo = 0, pair_hi = 0, target = 0;
    float t = 0.f;
    bool center = false;
    double psnr = 0.0, ssim = 0.0;
};

struct ClipResult {
    std::string clip;
    double psnr_center = 0.0, ssim_center = 0.0;
    double psnr_average = 0.0, ssim_average = 0.0;
    int frames_center = 0, frames_average = 0;
};

struct EvalReport {
    int time_scale = 8;
    int clip_count = 0;
    int frame_count = 0;       // Average regime target count
    int dropped_frames = 0;    // trailing frames not covered by a full window
    double psnr_center = 0.0, ssim_center = 0.0;
    double psnr_average = 0.0, ssim_average = 0.0;
    std::vector<ClipResult> clips;
    std::vector<FrameRecord> records;
};

struct EvalOptions {
    bool stochastic_gates = false;  // research flag; defaults to threshold gating
    uint64_t seed = 0;
    int max_clips = 0;  // 0 = all
};

inline EvalReport evaluate(const std::vector<VideoSequence>& clips, const SafaModel& model,
                           int time_scale, const EvalOptions& opts = {}) {
    SAFA_CHECK(time_scale == 6 || time_scale == 8 || time_scale == 12 || time_scale == 16,
               "time_scale must be one of 6, 8, 12, 16");
    NoGradGuard ng;
    const GateMode mode =
        opts.stochastic_gates ? GateMode::EvalStochastic : GateMode::EvalDeterministic;
    EvalReport rep;
    rep.time_scale = time_scale;
    int used = 0;
    for (const auto& clip : clips) {
        if (opts.max_clips > 0 && used >= opts.max_clips) break;
        if (clip.frame_count() <= time_scale) continue;
        ++used;
        Rng rng(opts.seed);  // per-clip stream keeps clips order-independent
        const EvalSchedule sched = make_eval_schedule(clip.frame_count(), time_scale);
        rep.dropped_frames += sched.dropped_frames;

        ClipResult cr;
        cr.clip = clip.name;
        // group consecutive schedule items that share the same input pair so
        // features are extracted once per pair
        size_t i = 0;
        while (i < sched.items.size()) {
            size_t j = i;
            while (j < sched.items.size() &&
                   sched.items[j].pair_lo == sched.items[i].pair_lo)
                ++j;
            const Frame hr_lo = crop_to_multiple(clip.load(sched.items[i].pair_lo), 8);
            const Frame hr_hi = crop_to_multiple(clip.load(sched.items[i].pair_hi), 8);
            const Tensor lr0 = frames_to_batch({make_lr(hr_lo)});
            const Tensor lr1 = frames_to_batch({make_lr(hr_hi)});
            std::vector<float> ts;
            for (size_t k = i; k < j; ++k) ts.push_back(sched.items[k].t);
            const auto outs = model.interpolate_batch(lr0, lr1, ts, mode, rng);
            for (size_t k = i; k < j; ++k) {
                const Frame pred = model.output_frame(outs[k - i]);
                const Frame gt = crop_to_multiple(clip.load(sched.items[k].target), 8);
                FrameRecord fr;
                fr.clip = clip.name;
                fr.pair_lo = sched.items[k].pair_lo;
                fr.pair_hi = sched.items[k].pair_hi;
                fr.target = sched.items[k].target;
                fr.t = sched.items[k].t;
                fr.center = sched.items[k].center;
                fr.psnr = psnr_y(pred, gt);
                fr.ssim = ssim_y(pred, gt);
                rep.records.push_back(fr);
                cr.psnr_average += fr.psnr;
                cr.ssim_average += fr.ssim;
                ++cr.frames_average;
                if (fr.center) {
                    cr.psnr_center += fr.psnr;
                    cr.ssim_center += fr.ssim;
                    ++cr.frames_center;
                }
            }
            i = j;
        }
        if (cr.frames_average) {
            cr.psnr_average /= cr.frames_average;
            cr.ssim_average /= cr.frames_average;
        }
        if (cr.frames_center) {
            cr.psnr_center /= cr.frames_center;
            cr.ssim_center /= cr.frames_center;
        }
        rep.clips.push_back(cr);
    }
    SAFA_CHECK(!rep.clips.empty(), "evaluate: no clip is long enough for the schedule");
    rep.clip_count = static_cast<int>(rep.clips.size());
    // regime means are arithmetic means over per-frame values
    int nc = 0, na = 0;
    for (const auto& fr : rep.records) {
        rep.psnr_average += fr.psnr;
        rep.ssim_average += fr.ssim;
        ++na;
        if (fr.center) {
            rep.psnr_center += fr.psnr;
            rep.ssim_center += fr.ssim;
            ++nc;
        }
    }
    rep.frame_count = na;
    if (na) { rep.psnr_average /= na; rep.ssim_average /= na; }
    if (nc) { rep.psnr_center /= nc; rep.ssim_center /= nc; }
    return rep;
}

inline std::string frame_record_json(const FrameRecord& fr) {
    std::ostringstream o;
    o << "{\"clip\":\"" << fr.clip << "\",\"pair\":[" << fr.pair_lo << "," << fr.pair_hi
      << "],\"target\":" << fr.target << ",\"t\":" << fr.t
      << ",\"center\":" << (fr.center ? "true" : "false") << ",\"psnr\":" << fr.psnr
      << ",\"ssim\":" << fr.ssim << "}";
    return o.str();
}

// ---------------------------------------------------------------------------
// scale-selection statistics across input resolutions (Table 4 analogue)

struct ScaleStats {
    std::string resolution;               // e.g. "320x180"
    std::vector<double> ratios;           // per-branch selection ratio, sums to 1
    int64_t decisions = 0;                // (sample, block) count
};

// Per-block deterministic gate choices at each input resolution; resolutions
// are LR sizes (w, h) applied by bilinear pre-downsampling of the LR frames.
inline std::vector<ScaleStats> scale_stats(const std::vector<VideoSequence>& clips,
                                           const SafaModel& model,
                                           const std::vector<std::pair<int, int>>& lr_sizes,
                                           int max_pairs_per_clip = 2) {
    NoGradGuard ng;
    const auto& scales = model.config().estimator.scales;
    std::vector<ScaleStats> out;
    for (const auto& [w, h] : lr_sizes) {
        ScaleStats st;
        st.resolution = std::to_string(w) + "x" + std::to_string(h);
        st.ratios.assign(scales.size(), 0.0);
        Rng rng(0);
        for (const auto& clip : clips) {
            int pairs = 0;
            for (int lo = 0; lo + kWindow - 1 < clip.frame_count() && pairs < max_pairs_per_clip;
                 lo += kWindow - 1, ++pairs) {
                const Frame a = resize_bilinear(crop_to_multiple(clip.load(lo), 8), h, w);
                const Frame b =
                    resize_bilinear(crop_to_multiple(clip.load(lo + kWindow - 1), 8), h, w);
                const Tensor lr0 = frames_to_batch({a});
                const Tensor lr1 = frames_to_batch({b});
                const SafaOutput o =
                    model.forward_batch(lr0, lr1, 0.5f, GateMode::EvalDeterministic, rng);
                for (const auto& block : o.scale_trace)
                    for (const float s : block) {
                        for (size_t bi = 0; bi < scales.size(); ++bi)
                            if (std::fabs(s - scales[bi]) < 1e-6f) st.ratios[bi] += 1.0;
                        ++st.decisions;
                    }
            }
        }
        SAFA_CHECK(st.decisions > 0, "scale_stats: no usable frame pairs");
        for (double& r : st.ratios) r /= static_cast<double>(st.decisions);
        out.push_back(std::move(st));
    }
    return out;
}

inline std::string scale_stats_csv(const std::vector<ScaleStats>& stats,
                                   const std::vector<float>& scales) {
    std::ostringstream o;
    o << "resolution,decisions";
    for (const float s : scales) o << ",ratio_" << s;
    o << "\n";
    for (const auto& st : stats) {
        o << st.resolution << "," << st.decisions;
        for (const double r : st.ratios) o << "," << r;
        o << "\n";
    }
    return o.str();
}

// ---------------------------------------------------------------------------
// runtime benchmark: warm-up runs then timed runs on one execution stream

struct RuntimeReport {
    int lr_width = 0, lr_height = 0;
    int warmup_runs = 0, timed_runs = 0;
    double mean_ms = 0.0, min_ms = 0.0, max_ms = 0.0;
    int64_t macs_per_run = 0;  // op-counter MACs for one timed forward
};

inline RuntimeReport benchmark(const SafaModel& model, int lr_w, int lr_h,
                               int warmup = 10, int runs = 100, uint64_t seed = 0) {
    NoGradGuard ng;
    Rng data_rng(seed);
    const Tensor lr0 = Tensor::rand({1, 3, lr_h, lr_w}, data_rng);
    const Tensor lr1 = Tensor::rand({1, 3, lr_h, lr_w}, data_rng);
    Rng gate_rng(seed + 1);
    RuntimeReport rep;
    rep.lr_width = lr_w;
    rep.lr_height = lr_h;
    rep.warmup_runs = warmup;
    rep.timed_runs = runs;
    for (int i = 0; i < warmup; ++i)
        model.forward_batch(lr0, lr1, 0.5f, GateMode::EvalDeterministic, gate_rng);
    opcount::reset();
    model.forward_batch(lr0, lr1, 0.5f, GateMode::EvalDeterministic, gate_rng);
    rep.macs_per_run = opcount::read();
    rep.min_ms = 1e30;
    for (int i = 0; i < runs; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        model.forward_batch(lr0, lr1, 0.5f, GateMode::EvalDeterministic, gate_rng);
        const auto t1 = std::chrono::steady_clock::now();
        const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        rep.mean_ms += ms;
        rep.min_ms = std::min(rep.min_ms, ms);
        rep.max_ms = std::max(rep.max_ms, ms);
    }
    rep.mean_ms /= runs;
    return rep;
}

// ---------------------------------------------------------------------------
// interpolation output writer with optional diagnostics visualization

struct InterpOptions {
    bool viz = false;  // also write flow color maps, fusion mask, |delta|
    uint64_t seed = 0;
};

// Magnitude of the refinement residual as a grayscale image scaled to [0,1].
inline Frame refinement_magnitude(const Tensor& delta_chw3) {
    const int H = delta_chw3.dim(1), W = delta_chw3.dim(2);
    Frame out({H, W, 3});
    float maxv = 1e-12f;
    std::vector<float> mag(static_cast<size_t>(H) * W);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            float m = 0.f;
            for (int c = 0; c < 3; ++c) m += std::fabs(delta_chw3.at3(c, y, x));
            m /= 3.f;
            mag[static_cast<size_t>(y) * W + x] = m;
            maxv = std::max(maxv, m);
        }
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < 3; ++c)
                out[(static_cast<int64_t>(y) * W + x) * 3 + c] =
                    mag[static_cast<size_t>(y) * W + x] / maxv;
    return out;
}

inline Tensor chw_from_batch(const Tensor& batch, int n) {
    const int C = batch.dim(1), H = batch.dim(2), W = batch.dim(3);
    Tensor chw({C, H, W});
    std::memcpy(chw.data(), batch.data() + static_cast<int64_t>(n) * chw.numel(),
                static_cast<size_t>(chw.numel()) * sizeof(float));
    return chw;
}

// Interpolates one LR frame pair at the given time steps and writes results
// (and optional diagnostics) into out_dir as %08d-indexed PNG/flo files.
inline void write_interpolation(const SafaModel& model, const Frame& lr_a,
                                const Frame& lr_b, const std::vector<float>& time_steps,
                                const std::string& out_dir, const InterpOptions& opts = {}) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    NoGradGuard ng;
    Rng rng(opts.seed);
    const Tensor lr0 = frames_to_batch({lr_a});
    const Tensor lr1 = frames_to_batch({lr_b});
    const auto outs =
        model.interpolate_batch(lr0, lr1, time_steps, GateMode::EvalDeterministic, rng);
    for (size_t i = 0; i < outs.size(); ++i) {
        char idx[16];
        std::snprintf(idx, sizeof(idx), "%08zu", i);
        const fs::path base = fs::path(out_dir) / idx;
        write_png(base.string() + ".png", model.output_frame(outs[i]));
        if (!opts.viz) continue;
        const Tensor flows = outs[i].flows->value;
        const int H = flows.dim(2), W = flows.dim(3);
        for (int which = 0; which < 2; ++which) {
            FlowField f({2, H, W});
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    f[static_cast<int64_t>(y) * W + x] = flows.at4(0, which * 2 + 0, y, x);
                    f[static_cast<int64_t>(H) * W + y * W + x] =
                        flows.at4(0, which * 2 + 1, y, x);
                }
            const std::string tag = which == 0 ? "_flow0" : "_flow1";
            write_flo(base.string() + tag + ".flo", f);
            write_png(base.string() + tag + ".png", flow_to_color(f));
        }
        const Tensor mask = outs[i].fusion->value;
        Tensor gray({mask.dim(2), mask.dim(3)});
        std::memcpy(gray.data(), mask.data(),
                    static_cast<size_t>(gray.numel()) * sizeof(float));
        write_png_gray(base.string() + "_fusion.png", gray);
        if (outs[i].refinement)
            write_png(base.string() + "_delta.png",
                      refinement_magnitude(chw_from_batch(outs[i].refinement->value, 0)));
    }
}

}  // namespace safa
