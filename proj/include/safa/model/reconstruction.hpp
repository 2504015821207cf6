#pragma once

#include "safa/model/layers.hpp"

namespace safa {

// Residual refinement decoder: concatenated warped features -> ResBlocks ->
// SubPixel x2 -> 3-channel tanh output at frame resolution.
class Reconstruction {
  public:
    static constexpr int kResBlocks = 4;

    Reconstruction() = default;

    Reconstruction(ParamStore& ps, int nc, Rng& rng) {
        entry_ = Conv(ps, "recon.entry", 2 * nc, nc, 3, rng);
        entry_act_ = PRelu(ps, "recon.entry_act", nc);
        for (int i = 0; i < kResBlocks; ++i) {
            const std::string base = "recon.res" + std::to_string(i);
            res_[i].c1 = Conv(ps, base + ".conv1", nc, nc, 3, rng);
            res_[i].c2 = Conv(ps, base + ".conv2", nc, nc, 3, rng);
            res_[i].a = PRelu(ps, base + ".act", nc);
        }
        head_ = Conv(ps, "recon.head", nc, 3 * 4, 3, rng);
        for (float& v : head_.w->value) v *= 0.1f;
    }

    // ct0, ct1: [N,nc,h,w] warped features at 1/2 frame resolution.
    // Returns [N,3,2h,2w] in (-1,1).
    Var forward(const Var& ct0, const Var& ct1) const {
        SAFA_CHECK(ct0->value.same_shape(ct1->value), "reconstruct: shape mismatch");
        Var y = entry_act_(entry_(concat_channels({ct0, ct1})));
        for (const auto& r : res_) y = add(y, r.c2(r.a(r.c1(y))));
        return tanh_op(pixel_shuffle(head_(y), 2));
    }

  private:
    struct Res {
        Conv c1, c2;
        PRelu a;
    };
    Conv entry_;
    PRelu entry_act_;
    Res res_[kResBlocks];
    Conv head_;
};

}  // namespace safa
