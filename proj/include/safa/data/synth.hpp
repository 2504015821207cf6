#pragma once

#include <filesystem>

#include "safa/imaging/png_io.hpp"

namespace safa {

// Procedural desk-scale dataset: smooth value-noise backgrounds with
// translating / rotating textured sprites at a controllable motion magnitude.
// Clips are written in the standard layout root/clip_name/%08d.png.

struct SynthConfig {
    int clips = 500;
    int frames = 17;
    int size = 160;       // square HR frames
    float motion_px = 6.f;  // max sprite speed, pixels per frame at HR
    float detail = 1.f;     // texture frequency multiplier (higher = finer features)
    uint64_t seed = 0;
};

namespace synth_detail {

// smooth texture: coarse random grid, bilinearly upsampled
struct NoiseTexture {
    Tensor grid;  // [gh, gw, 3]
    int gh, gw;

    NoiseTexture(int gh_, int gw_, Rng& rng) : grid({gh_, gw_, 3}), gh(gh_), gw(gw_) {
        for (float& v : grid) v = rng.uniform(0.05f, 0.95f);
    }

    void sample(float y, float x, float* rgb) const {
        const float fy = y - std::floor(y), fx = x - std::floor(x);
        const int y0 = ((static_cast<int>(std::floor(y)) % gh) + gh) % gh;
        const int x0 = ((static_cast<int>(std::floor(x)) % gw) + gw) % gw;
        const int y1 = (y0 + 1) % gh, x1 = (x0 + 1) % gw;
        for (int c = 0; c < 3; ++c) {
            const float a = grid[(y0 * gw + x0) * 3 + c] * (1 - fx) +
                            grid[(y0 * gw + x1) * 3 + c] * fx;
            const float b = grid[(y1 * gw + x0) * 3 + c] * (1 - fx) +
                            grid[(y1 * gw + x1) * 3 + c] * fx;
            rgb[c] = a * (1 - fy) + b * fy;
        }
    }
};

struct Sprite {
    float cx, cy;     // center at frame 0
    float vx, vy;     // pixels per frame
    float radius;
    float angle0, spin;  // radians, radians per frame
    bool disk;
    float color[3];
    float tex_scale;
    NoiseTexture tex;

    Sprite(int size, float motion_px, float detail, Rng& rng)
        : tex_scale(10.f / detail), tex(5, 5, rng) {
        cx = rng.uniform(0.15f, 0.85f) * static_cast<float>(size);
        cy = rng.uniform(0.15f, 0.85f) * static_cast<float>(size);
        const float speed = rng.uniform(0.2f, 1.f) * motion_px;
        const float dir = rng.uniform(0.f, 2.f * static_cast<float>(M_PI));
        vx = speed * std::cos(dir);
        vy = speed * std::sin(dir);
        radius = rng.uniform(0.08f, 0.18f) * static_cast<float>(size);
        angle0 = rng.uniform(0.f, 2.f * static_cast<float>(M_PI));
        spin = rng.uniform(-0.05f, 0.05f);
        disk = rng.bernoulli(0.5f);
        for (float& c : color) c = rng.uniform(0.1f, 0.9f);
    }

    // anti-aliased coverage in [0,1] at pixel (x, y) for frame index f
    float coverage(float x, float y, int f) const {
        const float px = cx + vx * static_cast<float>(f);
        const float py = cy + vy * static_cast<float>(f);
        float d;
        if (disk) {
            d = std::sqrt((x - px) * (x - px) + (y - py) * (y - py)) - radius;
        } else {
            const float a = angle0 + spin * static_cast<float>(f);
            const float rx = std::cos(a) * (x - px) + std::sin(a) * (y - py);
            const float ry = -std::sin(a) * (x - px) + std::cos(a) * (y - py);
            d = std::max(std::fabs(rx), std::fabs(ry)) - radius;
        }
        return std::min(std::max(0.5f - d, 0.f), 1.f);
    }

    void shade(float x, float y, int f, float* rgb) const {
        const float a = angle0 + spin * static_cast<float>(f);
        const float px = cx + vx * static_cast<float>(f);
        const float py = cy + vy * static_cast<float>(f);
        // texture carried along with the sprite so motion is observable inside it
        const float rx = std::cos(a) * (x - px) + std::sin(a) * (y - py);
        const float ry = -std::sin(a) * (x - px) + std::cos(a) * (y - py);
        float t[3];
        tex.sample(ry / tex_scale, rx / tex_scale, t);
        for (int c = 0; c < 3; ++c) rgb[c] = 0.6f * color[c] + 0.4f * t[c];
    }
};

struct Clip {
    NoiseTexture bg;
    float bg_vx, bg_vy;
    std::vector<Sprite> sprites;
    int size;
    float detail;

    Clip(const SynthConfig& cfg, Rng& rng)
        : bg(7, 7, rng), size(cfg.size), detail(cfg.detail) {
        bg_vx = rng.uniform(-0.3f, 0.3f) * cfg.motion_px;
        bg_vy = rng.uniform(-0.3f, 0.3f) * cfg.motion_px;
        const int n = rng.uniform_int(3, 6);
        for (int i = 0; i < n; ++i)
            sprites.emplace_back(cfg.size, cfg.motion_px, cfg.detail, rng);
    }

    Frame render(int f) const {
        Frame out = make_frame(size, size);
        const float cell = static_cast<float>(size) / (6.f * detail);
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                float rgb[3];
                bg.sample((static_cast<float>(y) + bg_vy * f) / cell,
                          (static_cast<float>(x) + bg_vx * f) / cell, rgb);
                for (const auto& s : sprites) {
                    const float cov = s.coverage(static_cast<float>(x),
                                                 static_cast<float>(y), f);
                    if (cov <= 0.f) continue;
                    float srgb[3];
                    s.shade(static_cast<float>(x), static_cast<float>(y), f, srgb);
                    for (int c = 0; c < 3; ++c)
                        rgb[c] = rgb[c] * (1.f - cov) + srgb[c] * cov;
                }
                float* dst = out.data() + (static_cast<int64_t>(y) * size + x) * 3;
                for (int c = 0; c < 3; ++c) dst[c] = rgb[c];
            }
        return out;
    }
};

}  // namespace synth_detail

inline Frame render_synth_frame(const SynthConfig& cfg, uint64_t clip_seed, int frame) {
    Rng rng(clip_seed);
    synth_detail::Clip clip(cfg, rng);
    return clip.render(frame);
}

inline void generate_synth_dataset(const std::string& root, const SynthConfig& cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(root);
    Rng seeder(cfg.seed);
    for (int c = 0; c < cfg.clips; ++c) {
        char name[32];
        std::snprintf(name, sizeof(name), "clip%04d", c);
        const fs::path dir = fs::path(root) / name;
        fs::create_directories(dir);
        const uint64_t clip_seed = seeder.engine()();
        Rng rng(clip_seed);
        synth_detail::Clip clip(cfg, rng);
        for (int f = 0; f < cfg.frames; ++f) {
            char fname[32];
            std::snprintf(fname, sizeof(fname), "%08d.png", f);
            write_png((dir / fname).string(), clip.render(f));
        }
    }
}

}  // namespace safa
