#pragma once

#include <map>
#include <sstream>
#include <fstream>

#include "safa/core/common.hpp"

namespace safa {

enum class Aggregation { ImageFeature, ImageOnly, FeatureOnly };
enum class ExtractorVariant { StemS1S2, S2Only, S3Only, R50Style };

inline std::string to_string(Aggregation a) {
    switch (a) {
        case Aggregation::ImageFeature: return "image+feature";
        case Aggregation::ImageOnly: return "image-only";
        default: return "feature-only";
    }
}
inline std::string to_string(ExtractorVariant v) {
    switch (v) {
        case ExtractorVariant::StemS1S2: return "stem+s1+s2";
        case ExtractorVariant::S2Only: return "s2-only";
        case ExtractorVariant::S3Only: return "s3-only";
        default: return "r50-style";
    }
}

struct ExtractorConfig {
    ExtractorVariant variant = ExtractorVariant::StemS1S2;
    int out_channels = 80;  // nc
};

struct EstimatorConfig {
    int K = 6;
    int B = 3;
    std::vector<float> scales = {1.f, 0.5f, 0.25f};
    bool share_across_scales = true;    // off = ablation c7
    bool share_across_blocks = false;   // on  = ablation c5
    bool adaptive = true;               // off = ablation c6
    bool selector_enabled = true;       // off = ablation c8 (free logits)
    std::vector<float> manual_schedule;  // f2: fixed per-block scales

    void validate() const {
        SAFA_CHECK(K >= 1, "EstimatorConfig: K must be >= 1");
        SAFA_CHECK(B >= 1 && static_cast<int>(scales.size()) == B,
                   "EstimatorConfig: scales must list B entries");
        SAFA_CHECK(manual_schedule.empty() ||
                       static_cast<int>(manual_schedule.size()) == K,
                   "EstimatorConfig: manual_schedule length must equal K");
    }
};

struct SafaConfig {
    int nc = 80;
    int space_scale = 4;  // fixed by the architecture's bicubic pre-upsampling
    Aggregation aggregation = Aggregation::ImageFeature;
    ExtractorConfig extractor;
    EstimatorConfig estimator;

    void validate() const {
        SAFA_CHECK(nc > 0, "SafaConfig: nc must be positive");
        SAFA_CHECK(space_scale == 4, "SafaConfig: space_scale is fixed at 4");
        estimator.validate();
    }
};

struct TrainConfig {
    float peak_lr = 2e-4f;
    int total_iterations = 20000;
    int batch_size = 8;
    int patch_size = 32;  // LR patch edge
    uint64_t seed = 0;
    float grad_clip = 0.f;  // 0 = disabled
    int log_every = 100;
    int checkpoint_every = 1000;
    bool supervise_endpoints = false;  // also draw t=0 and t=1 targets
    bool aug_hflip = true, aug_vflip = true, aug_rot = true, aug_time_reverse = true;
};

// ---------------------------------------------------------------------------
// flat key/value config files: "key = value" lines, '#' starts a comment

using KvMap = std::map<std::string, std::string>;

inline KvMap parse_kv(std::istream& in) {
    KvMap kv;
    std::string line;
    while (std::getline(in, line)) {
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const size_t eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const char* ws = " \t\r\n";
            s.erase(0, s.find_first_not_of(ws));
            const size_t e = s.find_last_not_of(ws);
            s.erase(e == std::string::npos ? 0 : e + 1);
            return s;
        };
        const std::string key = trim(line.substr(0, eq));
        if (!key.empty()) kv[key] = trim(line.substr(eq + 1));
    }
    return kv;
}

inline KvMap parse_kv_file(const std::string& path) {
    std::ifstream f(path);
    SAFA_REQUIRE(f.good(), "config: cannot open " + path);
    return parse_kv(f);
}

namespace detail {
inline std::vector<float> parse_float_list(const std::string& s) {
    std::vector<float> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.push_back(std::stof(tok));
    return out;
}
inline std::string float_list_str(const std::vector<float>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(v[i]);
    }
    return s;
}
inline bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw InvalidArgument("config: bad boolean value '" + s + "'");
}
}  // namespace detail

inline void apply_kv(SafaConfig& c, const KvMap& kv) {
    for (const auto& [k, v] : kv) {
        if (k == "nc") {
            c.nc = std::stoi(v);
            c.extractor.out_channels = c.nc;
        } else if (k == "space_scale") c.space_scale = std::stoi(v);
        else if (k == "aggregation") {
            if (v == "image+feature") c.aggregation = Aggregation::ImageFeature;
            else if (v == "image-only") c.aggregation = Aggregation::ImageOnly;
            else if (v == "feature-only") c.aggregation = Aggregation::FeatureOnly;
            else throw InvalidArgument("config: unknown aggregation '" + v + "'");
        } else if (k == "extractor_variant") {
            if (v == "stem+s1+s2") c.extractor.variant = ExtractorVariant::StemS1S2;
            else if (v == "s2-only") c.extractor.variant = ExtractorVariant::S2Only;
            else if (v == "s3-only") c.extractor.variant = ExtractorVariant::S3Only;
            else if (v == "r50-style") c.extractor.variant = ExtractorVariant::R50Style;
            else throw InvalidArgument("config: unknown extractor_variant '" + v + "'");
        } else if (k == "K") c.estimator.K = std::stoi(v);
        else if (k == "B") c.estimator.B = std::stoi(v);
        else if (k == "scales") c.estimator.scales = detail::parse_float_list(v);
        else if (k == "share_across_scales") c.estimator.share_across_scales = detail::parse_bool(v);
        else if (k == "share_across_blocks") c.estimator.share_across_blocks = detail::parse_bool(v);
        else if (k == "adaptive") c.estimator.adaptive = detail::parse_bool(v);
        else if (k == "selector_enabled") c.estimator.selector_enabled = detail::parse_bool(v);
        else if (k == "manual_schedule") c.estimator.manual_schedule = detail::parse_float_list(v);
        // unrecognized keys may belong to TrainConfig; ignored here
    }
    c.validate();
}

inline void apply_kv(TrainConfig& c, const KvMap& kv) {
    for (const auto& [k, v] : kv) {
        if (k == "peak_lr") c.peak_lr = std::stof(v);
        else if (k == "total_iterations") c.total_iterations = std::stoi(v);
        else if (k == "batch_size") c.batch_size = std::stoi(v);
        else if (k == "patch_size") c.patch_size = std::stoi(v);
        else if (k == "seed") c.seed = std::stoull(v);
        else if (k == "grad_clip") c.grad_clip = std::stof(v);
        else if (k == "log_every") c.log_every = std::stoi(v);
        else if (k == "checkpoint_every") c.checkpoint_every = std::stoi(v);
        else if (k == "supervise_endpoints") c.supervise_endpoints = detail::parse_bool(v);
        else if (k == "aug_hflip") c.aug_hflip = detail::parse_bool(v);
        else if (k == "aug_vflip") c.aug_vflip = detail::parse_bool(v);
        else if (k == "aug_rot") c.aug_rot = detail::parse_bool(v);
        else if (k == "aug_time_reverse") c.aug_time_reverse = detail::parse_bool(v);
    }
    SAFA_CHECK(c.peak_lr > 0.f, "TrainConfig: peak_lr must be positive");
    SAFA_CHECK(c.total_iterations > 0, "TrainConfig: total_iterations must be positive");
}

inline std::string serialize_kv(const SafaConfig& c) {
    std::ostringstream o;
    o << "nc = " << c.nc << "\n"
      << "space_scale = " << c.space_scale << "\n"
      << "aggregation = " << to_string(c.aggregation) << "\n"
      << "extractor_variant = " << to_string(c.extractor.variant) << "\n"
      << "K = " << c.estimator.K << "\n"
      << "B = " << c.estimator.B << "\n"
      << "scales = " << detail::float_list_str(c.estimator.scales) << "\n"
      << "share_across_scales = " << (c.estimator.share_across_scales ? "true" : "false") << "\n"
      << "share_across_blocks = " << (c.estimator.share_across_blocks ? "true" : "false") << "\n"
      << "adaptive = " << (c.estimator.adaptive ? "true" : "false") << "\n"
      << "selector_enabled = " << (c.estimator.selector_enabled ? "true" : "false") << "\n";
    if (!c.estimator.manual_schedule.empty())
        o << "manual_schedule = " << detail::float_list_str(c.estimator.manual_schedule) << "\n";
    return o.str();
}

inline std::string serialize_kv(const TrainConfig& c) {
    std::ostringstream o;
    o << "peak_lr = " << c.peak_lr << "\n"
      << "total_iterations = " << c.total_iterations << "\n"
      << "batch_size = " << c.batch_size << "\n"
      << "patch_size = " << c.patch_size << "\n"
      << "seed = " << c.seed << "\n"
      << "grad_clip = " << c.grad_clip << "\n"
      << "log_every = " << c.log_every << "\n"
      << "checkpoint_every = " << c.checkpoint_every << "\n"
      << "supervise_endpoints = " << (c.supervise_endpoints ? "true" : "false") << "\n";
    return o.str();
}

// Named ablation presets. Returns true if the tag was recognized.
inline bool apply_ablation(const std::string& tag, SafaConfig& mc, TrainConfig& tc) {
    if (tag == "c1") mc.estimator.K = 1;
    else if (tag == "c2") mc.estimator.K = 2;
    else if (tag == "c3") mc.estimator.K = 4;
    else if (tag == "c4") mc.estimator.K = 6;
    else if (tag == "c5") mc.estimator.share_across_blocks = true;
    else if (tag == "c6") mc.estimator.adaptive = false;
    else if (tag == "c7") mc.estimator.share_across_scales = false;
    else if (tag == "c8") mc.estimator.selector_enabled = false;
    else if (tag == "b1") mc.aggregation = Aggregation::ImageFeature;
    else if (tag == "b2") mc.aggregation = Aggregation::ImageOnly;
    else if (tag == "b3") mc.aggregation = Aggregation::FeatureOnly;
    else if (tag == "a1") mc.extractor.variant = ExtractorVariant::S2Only;
    else if (tag == "a2") mc.extractor.variant = ExtractorVariant::S3Only;
    else if (tag == "a3") mc.extractor.variant = ExtractorVariant::StemS1S2;
    else if (tag == "a4") mc.extractor.variant = ExtractorVariant::R50Style;
    else if (tag == "e1") { tc.peak_lr = 2e-4f; }
    else if (tag == "e2") { mc.nc = 60; mc.extractor.out_channels = 60; }
    else if (tag == "e3") tc.peak_lr = 1e-3f;
    else if (tag == "e4") tc.peak_lr = 4e-5f;
    else if (tag == "f2") mc.estimator.manual_schedule = {0.25f, 0.25f, 0.5f, 0.5f, 1.f, 1.f};
    else return false;
    return true;
}

}  // namespace safa
