#pragma once

#include <algorithm>
#include <filesystem>
#include <map>

#include "safa/imaging/png_io.hpp"

namespace safa {

// Dataset layout: root/clip_name/%08d.png with consecutive frame indices.

struct VideoSequence {
    std::string name;
    std::vector<std::string> frame_paths;  // sorted

    int frame_count() const { return static_cast<int>(frame_paths.size()); }
    Frame load(int i) const {
        SAFA_CHECK(i >= 0 && i < frame_count(), "frame index out of range");
        return read_png(frame_paths[i]);
    }
};

inline std::vector<VideoSequence> scan_dataset(const std::string& root) {
    namespace fs = std::filesystem;
    SAFA_CHECK(fs::is_directory(root), "dataset root not found: " + root);
    std::vector<VideoSequence> out;
    std::vector<fs::path> clips;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory()) clips.push_back(e.path());
    std::sort(clips.begin(), clips.end());
    for (const auto& dir : clips) {
        VideoSequence seq;
        seq.name = dir.filename().string();
        for (const auto& e : fs::directory_iterator(dir)) {
            if (e.path().extension() == ".png") seq.frame_paths.push_back(e.path().string());
        }
        std::sort(seq.frame_paths.begin(), seq.frame_paths.end());
        if (!seq.frame_paths.empty()) out.push_back(std::move(seq));
    }
    SAFA_CHECK(!out.empty(), "no clips found in dataset root: " + root);
    return out;
}

// ---- training-window sampling -------------------------------------------

// A 9-frame sliding window: LR inputs are the downsampled endpoints,
// targets are all 9 HR frames at t = k/8.
constexpr int kWindow = 9;

struct TrainSample {
    Frame hr0, hr1;     // endpoint HR frames (after crop/augment)
    Frame lr0, lr1;     // 4x-downsampled endpoints
    Frame target;       // HR frame at time t
    float t = 0.f;
};

// Crop H and W down to the nearest multiple of m (top-left anchored), so the
// 4x downsample and  the model's internal 1/8-resolution taps stay integral.
inline Frame crop_to_multiple(const Frame& f, int m) {
    const int H = f.dim(0), W = f.dim(1);
    const int h = (H / m) * m, w = (W / m) * m;
    SAFA_CHECK(h > 0 && w > 0, "frame smaller than required multiple");
    if (h == H && w == W) return f;
    Frame out({h, w, 3});
    for (int y = 0; y < h; ++y)
        std::copy(f.data() + static_cast<int64_t>(y) * W * 3,
                  f.data() + (static_cast<int64_t>(y) * W + w) * 3,
                  out.data() + static_cast<int64_t>(y) * w * 3);
    return out;
}

inline Frame crop_hwc(const Frame& f, int y0, int x0, int h, int w) {
    const int H = f.dim(0), W = f.dim(1);
    SAFA_CHECK(y0 >= 0 && x0 >= 0 && y0 + h <= H && x0 + w <= W, "crop out of bounds");
    Frame out({h, w, 3});
    for (int y = 0; y < h; ++y)
        std::copy(f.data() + ((static_cast<int64_t>(y0 + y)) * W + x0) * 3,
                  f.data() + ((static_cast<int64_t>(y0 + y)) * W + x0 + w) * 3,
                  out.data() + static_cast<int64_t>(y) * w * 3);
    return out;
}

inline Frame make_lr(const Frame& hr) {
    const Frame c = crop_to_multiple(hr, 4);
    return resize_bicubic(c, 0.25f);
}

// ---- augmentation --------------------------------------------------------

inline Frame flip_h(const Frame& f) {
    const int H = f.dim(0), W = f.dim(1);
    Frame out({H, W, 3});
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < 3; ++c)
                out[(static_cast<int64_t>(y) * W + x) * 3 + c] =
                    f[(static_cast<int64_t>(y) * W + (W - 1 - x)) * 3 + c];
    return out;
}

inline Frame flip_v(const Frame& f) {
    const int H = f.dim(0), W = f.dim(1);
    Frame out({H, W, 3});
    for (int y = 0; y < H; ++y)
        std::copy(f.data() + static_cast<int64_t>(H - 1 - y) * W * 3,
                  f.data() + static_cast<int64_t>(H - y) * W * 3,
                  out.data() + static_cast<int64_t>(y) * W * 3);
    return out;
}

inline Frame rot90(const Frame& f) {  // 90 degrees counter-clockwise
    const int H = f.dim(0), W = f.dim(1);
    Frame out({W, H, 3});
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < 3; ++c)
                out[(static_cast<int64_t>(W - 1 - x) * H + y) * 3 + c] =
                    f[(static_cast<int64_t>(y) * W + x) * 3 + c];
    return out;
}

struct Augment {
    bool hflip = false, vflip = false;
    int rot_quarters = 0;  // 0..3, spatial rotation in 90-degree steps
    bool time_reverse = false;

    static Augment sample(Rng& rng, bool allow_rot) {
        Augment a;
        a.hflip = rng.bernoulli(0.5f);
        a.vflip = rng.bernoulli(0.5f);
        if (allow_rot && rng.bernoulli(0.5f)) a.rot_quarters = rng.uniform_int(1, 3);
        a.time_reverse = rng.bernoulli(0.5f);
        return a;
    }

    Frame apply_spatial(Frame f) const {
        if (hflip) f = flip_h(f);
        if (vflip) f = flip_v(f);
        for (int r = 0; r < rot_quarters; ++r) f = rot90(f);
        return f;
    }
};

// ---- patch sampler -------------------------------------------------------

struct PatchSamplerConfig {
    int hr_patch = 128;  // must be a multiple of 4; LR patch is hr_patch / 4
    bool augment = true;
};

// Draws one training sample: random clip, random 9-frame window, random
// intermediate target, aligned HR crop, augmentation, then LR generation
// (so LR frames are exact bicubic downsamples of the augmented HR crops).
inline TrainSample draw_sample(const std::vector<VideoSequence>& clips,
                               const PatchSamplerConfig& cfg, Rng& rng) {
    SAFA_CHECK(cfg.hr_patch % 4 == 0 && cfg.hr_patch > 0, "hr_patch must be a positive multiple of 4");
    const auto& clip = clips[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(clips.size()) - 1))];
    SAFA_CHECK(clip.frame_count() >= kWindow,
               "clip " + clip.name + " shorter than the 9-frame window");
    const int start = rng.uniform_int(0, clip.frame_count() - kWindow);
    const int k = rng.uniform_int(0, kWindow - 1);

    Frame hr0 = clip.load(start);
    Frame hr1 = clip.load(start + kWindow - 1);
    Frame tgt = clip.load(start + k);

    const int H = hr0.dim(0), W = hr0.dim(1);
    SAFA_CHECK(H >= cfg.hr_patch && W >= cfg.hr_patch, "frames smaller than hr_patch");
    // crop origin aligned to the 4x scale so LR crops line up with HR crops
    const int y0 = rng.uniform_int(0, (H - cfg.hr_patch) / 4) * 4;
    const int x0 = rng.uniform_int(0, (W - cfg.hr_patch) / 4) * 4;
    hr0 = crop_hwc(hr0, y0, x0, cfg.hr_patch, cfg.hr_patch);
    hr1 = crop_hwc(hr1, y0, x0, cfg.hr_patch, cfg.hr_patch);
    tgt = crop_hwc(tgt, y0, x0, cfg.hr_patch, cfg.hr_patch);

    float t = static_cast<float>(k) / static_cast<float>(kWindow - 1);
    if (cfg.augment) {
        const Augment a = Augment::sample(rng, /*allow_rot=*/true);  // patches are square
        hr0 = a.apply_spatial(std::move(hr0));
        hr1 = a.apply_spatial(std::move(hr1));
        tgt = a.apply_spatial(std::move(tgt));
        if (a.time_reverse) {
            std::swap(hr0, hr1);
            t = 1.f - t;
        }
    }

    TrainSample s;
    s.lr0 = make_lr(hr0);
    s.lr1 = make_lr(hr1);
    s.hr0 = std::move(hr0);
    s.hr1 = std::move(hr1);
    s.target = std::move(tgt);
    s.t = t;
    return s;
}

// ---- evaluation schedule -------------------------------------------------

// Space-time upsampling of a clip: consecutive frame pairs stepped by the
// window stride, each interpolated at t = k/8 for k = 0..8. Every original
// frame index is a target ("Average"); indices divisible by half the window
// stride beyond the pair grid form the "Center" subset convention used for
// reporting (the temporally-central inserted frame plus the key frames).

struct EvalItem {
    int pair_lo = 0;     // input frame indices: pair_lo and pair_lo + stride
    int pair_hi = 0;
    float t = 0.f;
    int target = 0;      // absolute frame index of the ground-truth target
    bool center = false; // member of the Center reporting subset
};

struct EvalSchedule {
    std::vector<EvalItem> items;
    int dropped_frames = 0;  // trailing frames not covered by a full window
};

inline EvalSchedule make_eval_schedule(int frame_count, int stride = kWindow - 1) {
    SAFA_CHECK(stride >= 2 && stride % 2 == 0, "eval stride must be even and >= 2");
    SAFA_CHECK(frame_count > stride, "clip shorter than one eval window");
    EvalSchedule sched;
    const int last_lo = ((frame_count - 1) / stride - 1) * stride;
    for (int lo = 0; lo + stride < frame_count; lo += stride) {
        for (int k = 0; k < stride; ++k) {
            EvalItem it;
            it.pair_lo = lo;
            it.pair_hi = lo + stride;
            it.t = static_cast<float>(k) / static_cast<float>(stride);
            it.target = lo + k;
            it.center = (it.target % (stride / 2)) == 0;
            sched.items.push_back(it);
        }
        if (lo == last_lo) {  // cover the final endpoint with t = 1
            EvalItem it;
            it.pair_lo = lo;
            it.pair_hi = lo + stride;
            it.t = 1.f;
            it.target = lo + stride;
            it.center = true;
            sched.items.push_back(it);
        }
    }
    const int covered = last_lo + stride + 1;
    sched.dropped_frames = frame_count - covered;
    return sched;
}

}  // namespace safa
