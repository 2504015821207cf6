#pragma once

#include <cstdint>

namespace safa::opcount {

// Global multiply-accumulate counter for convolution / linear layers.
// Used by the cost-model tests and the benchmark report; cheap enough to
// leave always on.
inline int64_t& macs() {
    static int64_t n = 0;
    return n;
}

inline void reset() { macs() = 0; }
inline void add(int64_t n) { macs() += n; }
inline int64_t read() { return macs(); }

}  // namespace safa::opcount
