#pragma once

#include <functional>

#include "safa/safa.hpp"

namespace safa::testing {

// Central finite differences of a scalar-valued graph builder with respect to
// one leaf tensor, compared against the autodiff gradient. The comparison is
// the normalized L2 distance between the two gradient vectors; a per-element
// relative check is not meaningful here because the loss itself is evaluated
// in single precision, so entries with near-zero gradient are dominated by
// round-off.
inline double grad_check(const std::function<Var()>& build_loss, const Var& leaf,
                         float eps = 1e-2f, float floor_mag = 1e-3f) {
    leaf->zero_grad();
    Var loss = build_loss();
    backward(loss);
    const Tensor analytic = leaf->grad.clone();

    double dist2 = 0.0, na2 = 0.0, nn2 = 0.0;
    for (int64_t i = 0; i < leaf->value.numel(); ++i) {
        const float orig = leaf->value[i];
        leaf->value[i] = orig + eps;
        const double lp = [&] { NoGradGuard ng; return static_cast<double>(build_loss()->value[0]); }();
        leaf->value[i] = orig - eps;
        const double lm = [&] { NoGradGuard ng; return static_cast<double>(build_loss()->value[0]); }();
        leaf->value[i] = orig;
        const double num = (lp - lm) / (2.0 * eps);
        const double ana = analytic[i];
        dist2 += (num - ana) * (num - ana);
        na2 += ana * ana;
        nn2 += num * num;
    }
    const double denom = std::max({std::sqrt(na2), std::sqrt(nn2),
                                   static_cast<double>(floor_mag)});
    return std::sqrt(dist2) / denom;
}

inline Frame random_frame(int h, int w, Rng& rng) {
    Frame f({h, w, 3});
    for (float& v : f) v = rng.uniform();
    return f;
}

}  // namespace safa::testing
