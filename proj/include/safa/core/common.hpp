#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace safa {

// Rejected-input errors (bad shapes, out-of-range arguments).
struct InvalidArgument : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Runtime failures (I/O, corrupt archives, non-finite loss).
struct RuntimeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define SAFA_CHECK(cond, msg)                                \
    do {                                                     \
        if (!(cond)) throw ::safa::InvalidArgument(msg);     \
    } while (0)

#define SAFA_REQUIRE(cond, msg)                              \
    do {                                                     \
        if (!(cond)) throw ::safa::RuntimeError(msg);        \
    } while (0)

// Explicit random source passed through samplers and gate draws so parallel
// evaluation stays reproducible.
class Rng {
  public:
    explicit Rng(uint64_t seed = 0) : gen_(seed) {}

    float uniform(float lo = 0.f, float hi = 1.f) {
        return std::uniform_real_distribution<float>(lo, hi)(gen_);
    }
    float normal(float mean = 0.f, float stddev = 1.f) {
        return std::normal_distribution<float>(mean, stddev)(gen_);
    }
    // in [lo, hi] inclusive
    int uniform_int(int lo, int hi) {
        return std::uniform_int_distribution<int>(lo, hi)(gen_);
    }
    bool bernoulli(float p) { return uniform() < p; }

    std::mt19937_64& engine() { return gen_; }
    const std::mt19937_64& engine() const { return gen_; }

  private:
    std::mt19937_64 gen_;
};

}  // namespace safa
