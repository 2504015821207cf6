#pragma once

#include <cstdio>
#include <fstream>

#include "safa/imaging/imaging.hpp"

namespace safa {

// Middlebury .flo container: "PIEH" magic, int32 width/height, then
// row-major interleaved (u, v) float32 pairs.

inline void write_flo(const std::string& path, const FlowField& flow) {
    const int H = flow.dim(1), W = flow.dim(2);
    std::ofstream f(path, std::ios::binary);
    SAFA_REQUIRE(f.good(), "write_flo: cannot open " + path);
    f.write("PIEH", 4);
    const int32_t w32 = W, h32 = H;
    f.write(reinterpret_cast<const char*>(&w32), 4);
    f.write(reinterpret_cast<const char*>(&h32), 4);
    const int64_t hw = static_cast<int64_t>(H) * W;
    for (int64_t i = 0; i < hw; ++i) {
        const float uv[2] = {flow[i], flow[hw + i]};
        f.write(reinterpret_cast<const char*>(uv), 8);
    }
    SAFA_REQUIRE(f.good(), "write_flo: write failed for " + path);
}

inline FlowField read_flo(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    SAFA_REQUIRE(f.good(), "read_flo: cannot open " + path);
    char magic[4];
    f.read(magic, 4);
    SAFA_REQUIRE(f.good() && std::string(magic, 4) == "PIEH",
                 "read_flo: bad magic in " + path);
    int32_t w32 = 0, h32 = 0;
    f.read(reinterpret_cast<char*>(&w32), 4);
    f.read(reinterpret_cast<char*>(&h32), 4);
    SAFA_REQUIRE(w32 > 0 && h32 > 0, "read_flo: bad dimensions in " + path);
    FlowField flow = make_flow(h32, w32);
    const int64_t hw = static_cast<int64_t>(h32) * w32;
    for (int64_t i = 0; i < hw; ++i) {
        float uv[2];
        f.read(reinterpret_cast<char*>(uv), 8);
        flow[i] = uv[0];
        flow[hw + i] = uv[1];
    }
    SAFA_REQUIRE(f.good(), "read_flo: truncated file " + path);
    return flow;
}

}  // namespace safa
