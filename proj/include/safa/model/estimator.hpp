#pragma once

#include "safa/model/layers.hpp"

namespace safa {

enum class GateMode { TrainStochastic, EvalDeterministic, EvalStochastic };

// Gate vector for one block: exactly one branch is selected. The chain
//   v_0 = p_0, v_1 = (1-p_0) p_1, ..., v_{B-1} = prod_i (1-p_i)
// defines the selection; the last gate is the deterministic fallback so the
// gates always sum to one.
struct BranchGates {
    std::vector<int> v;  // one-hot over B branches
    int chosen = 0;
    float chosen_scale = 1.f;
};

inline BranchGates sample_gates(const std::vector<float>& probs,
                                const std::vector<float>& scales, bool stochastic,
                                Rng& rng) {
    const int B = static_cast<int>(scales.size());
    SAFA_CHECK(static_cast<int>(probs.size()) == B - 1, "sample_gates: need B-1 probabilities");
    BranchGates g;
    g.v.assign(B, 0);
    int chosen = B - 1;
    for (int i = 0; i < B - 1; ++i) {
        SAFA_CHECK(probs[i] >= 0.f && probs[i] <= 1.f, "sample_gates: P out of [0,1]");
        const bool p = stochastic ? rng.bernoulli(probs[i]) : probs[i] >= 0.5f;
        if (p) {
            chosen = i;
            break;
        }
    }
    g.v[chosen] = 1;
    g.chosen = chosen;
    g.chosen_scale = scales[chosen];
    return g;
}

struct EstimatorResult {
    Var flows;  // [N,4,H,W] at HR: channels 0-1 = f_{t->0}, 2-3 = f_{t->1}
    Var mask;   // [N,1,H,W], sigmoid range
    std::vector<std::vector<float>> trace;  // [K][N] chosen scale per block
};

// The SAFE network: K chained blocks refining the motion hidden state, each
// choosing its processing scale per input through straight-through Bernoulli
// gates, plus the SubPixel head decoding HR flows and the fusion map.
class SafeEstimator {
  public:
    SafeEstimator() = default;

    SafeEstimator(ParamStore& ps, int nc, const EstimatorConfig& cfg, Rng& rng)
        : nc_(nc), cfg_(cfg) {
        cfg_.validate();
        const int cin = 3 * nc + 1;  // c_t0, c_t1, g, time channel
        init_conv_ = Conv(ps, "estimator.init", 2 * nc, nc, 3, rng);
        const int nblocks = cfg_.share_across_blocks ? 1 : cfg_.K;
        const int nbodies = cfg_.share_across_scales ? 1 : cfg_.B;
        blocks_.resize(nblocks);
        for (int i = 0; i < nblocks; ++i) {
            auto& blk = blocks_[i];
            const std::string base = "estimator.block" + std::to_string(i);
            blk.bodies.resize(nbodies);
            for (int s = 0; s < nbodies; ++s) {
                const std::string bb = nbodies == 1 ? base : base + ".scale" + std::to_string(s);
                auto& body = blk.bodies[s];
                body.c1 = Conv(ps, bb + ".conv1", cin, nc, 3, rng);
                body.c2 = Conv(ps, bb + ".conv2", nc, nc, 3, rng);
                body.c3 = Conv(ps, bb + ".conv3", nc, nc, 3, rng);
                body.c4 = Conv(ps, bb + ".conv4", nc, nc, 3, rng);
                body.a1 = PRelu(ps, bb + ".act1", nc);
                body.a2 = PRelu(ps, bb + ".act2", nc);
                body.a3 = PRelu(ps, bb + ".act3", nc);
            }
            // intermediate flow decode feeds the inter-block re-warp, so the
            // last block (or a single-block model) never uses one
            const bool needs_decode =
                cfg_.share_across_blocks ? cfg_.K > 1 : i + 1 < cfg_.K;
            if (needs_decode) {
                blk.decode = Conv(ps, base + ".decode", nc, 4, 3, rng);
                scale_weights(blk.decode.w, 0.1f);
            }
            if (cfg_.adaptive && cfg_.B > 1) {
                if (cfg_.selector_enabled) {
                    blk.sel_c1 = Conv(ps, base + ".selector.conv1", cin, 8, 3, rng, 4);
                    blk.sel_c2 = Conv(ps, base + ".selector.conv2", 8, 16, 3, rng, 2);
                    blk.sel_a1 = PRelu(ps, base + ".selector.act1", 8);
                    blk.sel_a2 = PRelu(ps, base + ".selector.act2", 16);
                    blk.sel_fc_w = ps.fc_weight(base + ".selector.fc.w", cfg_.B - 1, 16, rng);
                    // keep initial logits near zero so gates start unsaturated
                    scale_weights(blk.sel_fc_w, 0.1f);
                    blk.sel_fc_b = ps.bias(base + ".selector.fc.b", cfg_.B - 1);
                } else {
                    // ablation c8: per-block probabilities optimized directly,
                    // independent of the input
                    blk.free_logits = ps.bias(base + ".gate_logits", cfg_.B - 1);
                }
            }
        }
        head_ = Conv(ps, "estimator.head", nc, 5 * 4, 3, rng);
        scale_weights(head_.w, 0.1f);
    }

    const EstimatorConfig& config() const { return cfg_; }

    // g^0 = Conv3x3(Concat(c0, c1))
    Var init_hidden(const Var& c0, const Var& c1) const {
        SAFA_CHECK(c0->value.same_shape(c1->value), "init_hidden: shape mismatch");
        return init_conv_(concat_channels({c0, c1}));
    }

    // One block body at full resolution. xcat = concat(c_t0, c_t1, g, t).
    Var block_body(int block, int scale_idx, const Var& xcat) const {
        const auto& body = body_for(block, scale_idx);
        return body.c4(body.a3(body.c3(body.a2(body.c2(body.a1(body.c1(xcat)))))));
    }

    // Downsample-by-s, run the body, upsample back. Scale 1 is the plain body.
    Var block_body_at_scale(int block, int scale_idx, float scale, const Var& xcat) const {
        const int h = xcat->value.dim(2), w = xcat->value.dim(3);
        if (scale == 1.f) return block_body(block, scale_idx, xcat);
        const int sh = scaled_size(h, scale), sw = scaled_size(w, scale);
        SAFA_CHECK(sh >= 4 && sw >= 4,
                   "safe block: input too small for coarsest branch");
        Var down = resize_bilinear_nchw(xcat, sh, sw);
        Var y = block_body(block, scale_idx, down);
        return resize_bilinear_nchw(y, h, w);
    }

    // Selection probabilities [N, B-1] for one block.
    Var selector_probs(int block, const Var& xcat) const {
        const auto& blk = blocks_[block_index(block)];
        if (!cfg_.selector_enabled) {
            // broadcast the free logits over the batch
            const int N = xcat->value.dim(0), M = cfg_.B - 1;
            Tensor ones({N, M});
            ones.fill(1.f);
            Var onesv = make_leaf(std::move(ones));
            // out[n,i] = logits[i]; implemented as a linear layer on ones with
            // a diagonal-free weight of zeros and the logits as bias
            Tensor zero_w({M, M});
            Var wz = make_leaf(std::move(zero_w));
            return sigmoid(linear(onesv, wz, blk.free_logits));
        }
        Var y = blk.sel_a1(blk.sel_c1(xcat));
        y = blk.sel_a2(blk.sel_c2(y));
        return sigmoid(linear(global_avg_pool(y), blk.sel_fc_w, blk.sel_fc_b));
    }

    // Decode the per-iteration flow pair [N,4,h,w] at feature resolution.
    Var decode_flow(int block, const Var& g) const {
        return blocks_[block_index(block)].decode(g);
    }

    // Full estimator pass. c0, c1: [N,nc,h,w]; tplane: [N,1,h,w].
    // k_limit < 0 runs all K blocks; smaller values run a prefix (speed knob).
    EstimatorResult run(const Var& c0, const Var& c1, const Var& tplane, GateMode mode,
                        Rng& rng, int k_limit = -1) const {
        SAFA_CHECK(c0->value.same_shape(c1->value), "estimator: feature shape mismatch");
        const int N = c0->value.dim(0);
        const int K = k_limit < 0 ? cfg_.K : std::min(k_limit, cfg_.K);

        EstimatorResult res;
        Var g = init_hidden(c0, c1);
        Var ct0 = c0, ct1 = c1;
        for (int i = 0; i < K; ++i) {
            Var xcat = concat_channels({ct0, ct1, g, tplane});
            std::vector<float> chosen_scales(N, 1.f);

            if (!cfg_.manual_schedule.empty()) {
                const float s = cfg_.manual_schedule[i];
                g = add(g, block_body_at_scale(i, scale_index(s), s, xcat));
                std::fill(chosen_scales.begin(), chosen_scales.end(), s);
            } else if (!cfg_.adaptive || cfg_.B == 1) {
                g = add(g, block_body_at_scale(i, 0, cfg_.scales[0], xcat));
                std::fill(chosen_scales.begin(), chosen_scales.end(), cfg_.scales[0]);
            } else if (mode == GateMode::TrainStochastic) {
                Var probs = selector_probs(i, xcat);
                // sample the Bernoulli chain, then gate all B branch outputs;
                // the STE keeps the selector trainable
                std::vector<Var> vs = build_gates(probs, N, rng, chosen_scales);
                Var acc;
                for (int bidx = 0; bidx < cfg_.B; ++bidx) {
                    Var branch = block_body_at_scale(i, bidx, cfg_.scales[bidx], xcat);
                    Var gated = mul_per_sample(branch, vs[bidx]);
                    acc = acc ? add(acc, gated) : gated;
                }
                g = add(g, acc);
            } else {
                // inference: pick per sample, compute only the branches in use
                Var probs = selector_probs(i, xcat);
                const bool stoch = mode == GateMode::EvalStochastic;
                std::vector<int> choice(N);
                for (int n = 0; n < N; ++n) {
                    std::vector<float> pn(cfg_.B - 1);
                    for (int j = 0; j < cfg_.B - 1; ++j)
                        pn[j] = probs->value[static_cast<int64_t>(n) * (cfg_.B - 1) + j];
                    BranchGates bg = sample_gates(pn, cfg_.scales, stoch, rng);
                    choice[n] = bg.chosen;
                    chosen_scales[n] = bg.chosen_scale;
                }
                Var acc;
                for (int bidx = 0; bidx < cfg_.B; ++bidx) {
                    bool used = false;
                    Tensor gate({N});
                    for (int n = 0; n < N; ++n)
                        if (choice[n] == bidx) {
                            gate[n] = 1.f;
                            used = true;
                        }
                    if (!used) continue;
                    Var branch = block_body_at_scale(i, bidx, cfg_.scales[bidx], xcat);
                    Var gated = mul_per_sample(branch, make_leaf(std::move(gate)));
                    acc = acc ? add(acc, gated) : gated;
                }
                g = add(g, acc);
            }
            res.trace.push_back(chosen_scales);

            if (i + 1 < K) {
                Var flow_i = decode_flow(i, g);
                ct0 = backward_warp_nchw(c0, slice_channels(flow_i, 0, 2));
                ct1 = backward_warp_nchw(c1, slice_channels(flow_i, 2, 4));
            }
        }

        // HR decode: 3x3 conv + x2 SubPixel -> 4 flow channels + mask logit;
        // flow displacements double with the upsampling
        Var dec = pixel_shuffle(head_(g), 2);
        res.flows = affine(slice_channels(dec, 0, 4), 2.f);
        res.mask = sigmoid(slice_channels(dec, 4, 5));
        return res;
    }

  private:
    struct Body {
        Conv c1, c2, c3, c4;
        PRelu a1, a2, a3;
    };
    struct Block {
        std::vector<Body> bodies;
        Conv decode;
        Conv sel_c1, sel_c2;
        PRelu sel_a1, sel_a2;
        Var sel_fc_w, sel_fc_b;
        Var free_logits;
    };

    static void scale_weights(Var& w, float s) {
        for (float& v : w->value) v *= s;
    }

    int block_index(int i) const { return cfg_.share_across_blocks ? 0 : i; }

    const Body& body_for(int block, int scale_idx) const {
        const auto& blk = blocks_[block_index(block)];
        return blk.bodies[cfg_.share_across_scales ? 0 : scale_idx];
    }

    int scale_index(float s) const {
        for (int i = 0; i < static_cast<int>(cfg_.scales.size()); ++i)
            if (cfg_.scales[i] == s) return i;
        return 0;  // manual schedules may use scales outside the branch list
    }

    // STE gate chain over B branches; fills chosen_scales from the samples.
    std::vector<Var> build_gates(const Var& probs, int N, Rng& rng,
                                 std::vector<float>& chosen_scales) const {
        std::vector<Var> p(cfg_.B - 1);
        std::vector<std::vector<int>> draws(cfg_.B - 1, std::vector<int>(N));
        for (int j = 0; j < cfg_.B - 1; ++j) {
            Tensor sampled({N});
            for (int n = 0; n < N; ++n) {
                const float pj = probs->value[static_cast<int64_t>(n) * (cfg_.B - 1) + j];
                draws[j][n] = rng.bernoulli(pj) ? 1 : 0;
                sampled[n] = static_cast<float>(draws[j][n]);
            }
            p[j] = ste_gate(select_column(probs, j), std::move(sampled));
        }
        for (int n = 0; n < N; ++n) {
            int c = cfg_.B - 1;
            for (int j = 0; j < cfg_.B - 1; ++j)
                if (draws[j][n]) {
                    c = j;
                    break;
                }
            chosen_scales[n] = cfg_.scales[c];
        }
        std::vector<Var> v(cfg_.B);
        Var cum;  // prod of (1-p_j) so far
        for (int j = 0; j < cfg_.B - 1; ++j) {
            v[j] = cum ? mul(cum, p[j]) : p[j];
            Var om = one_minus(p[j]);
            cum = cum ? mul(cum, om) : om;
        }
        v[cfg_.B - 1] = cum;
        return v;
    }

    int nc_ = 0;
    EstimatorConfig cfg_;
    Conv init_conv_;
    std::vector<Block> blocks_;
    Conv head_;
};

}  // namespace safa
