#pragma once

#include <iomanip>

#include "safa/data/dataset.hpp"
#include "safa/model/safa.hpp"

namespace safa {

// Cosine annealing from peak to exactly zero over `total` steps.
inline float cosine_lr(float peak, int64_t step, int64_t total) {
    SAFA_CHECK(total > 0, "cosine_lr: total must be positive");
    if (step >= total) return 0.f;
    if (step <= 0) return peak;
    const double x = static_cast<double>(step) / static_cast<double>(total);
    return static_cast<float>(peak * (1.0 + std::cos(M_PI * x)) / 2.0);
}

// ---------------------------------------------------------------------------
// Adam with bias correction; per-parameter first/second moment tensors are
// part of the checkpoint so resume is bit-identical.

class Adam {
  public:
    explicit Adam(ParamStore& params, float beta1 = 0.9f, float beta2 = 0.999f,
                  float eps = 1e-8f)
        : params_(params), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (const auto& name : params.names()) {
            m_.emplace_back(Tensor::zeros(params.get(name)->value.dims()));
            v_.emplace_back(Tensor::zeros(params.get(name)->value.dims()));
        }
    }

    int64_t step_count() const { return t_; }

    // global gradient L2 norm across all parameters
    double grad_norm() const {
        double sq = 0.0;
        for (const auto& name : params_.names()) {
            const Var p = params_.get(name);
            if (!p->grad.defined()) continue;
            for (const float g : p->grad) sq += static_cast<double>(g) * g;
        }
        return std::sqrt(sq);
    }

    void clip_grads(float max_norm) {
        if (max_norm <= 0.f) return;
        const double norm = grad_norm();
        if (norm <= max_norm) return;
        const float s = static_cast<float>(max_norm / norm);
        for (const auto& name : params_.names()) {
            const Var p = params_.get(name);
            if (!p->grad.defined()) continue;
            for (float& g : p->grad) g *= s;
        }
    }

    void step(float lr) {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        const auto& names = params_.names();
        for (size_t i = 0; i < names.size(); ++i) {
            const Var p = params_.get(names[i]);
            if (!p->grad.defined()) continue;
            float* pm = m_[i].data();
            float* pv = v_[i].data();
            float* pw = p->value.data();
            const float* pg = p->grad.data();
            for (int64_t j = 0, n = p->value.numel(); j < n; ++j) {
                pm[j] = beta1_ * pm[j] + (1.f - beta1_) * pg[j];
                pv[j] = beta2_ * pv[j] + (1.f - beta2_) * pg[j] * pg[j];
                const double mh = pm[j] / bc1;
                const double vh = pv[j] / bc2;
                pw[j] -= static_cast<float>(lr * mh / (std::sqrt(vh) + eps_));
            }
        }
    }

    // optimizer state as named tensors for the checkpoint archive
    std::vector<std::pair<std::string, Tensor>> state_tensors() const {
        std::vector<std::pair<std::string, Tensor>> out;
        const auto& names = params_.names();
        for (size_t i = 0; i < names.size(); ++i) {
            out.emplace_back("opt.m." + names[i], m_[i]);
            out.emplace_back("opt.v." + names[i], v_[i]);
        }
        return out;
    }

    void load_state(const std::map<std::string, Tensor>& tensors, int64_t step_count) {
        const auto& names = params_.names();
        for (size_t i = 0; i < names.size(); ++i) {
            const auto im = tensors.find("opt.m." + names[i]);
            const auto iv = tensors.find("opt.v." + names[i]);
            SAFA_REQUIRE(im != tensors.end() && iv != tensors.end(),
                         "checkpoint: missing optimizer state for " + names[i]);
            SAFA_REQUIRE(im->second.same_shape(m_[i]) && iv->second.same_shape(v_[i]),
                         "checkpoint: optimizer state shape mismatch for " + names[i]);
            m_[i] = im->second.clone();
            v_[i] = iv->second.clone();
        }
        t_ = step_count;
    }

  private:
    ParamStore& params_;
    float beta1_, beta2_, eps_;
    int64_t t_ = 0;
    std::vector<Tensor> m_, v_;
};

// ---------------------------------------------------------------------------

struct StepStats {
    int64_t step = 0;
    float loss = 0.f;
    float lr = 0.f;
    double grad_norm = 0.0;
    // per-block histogram over branch scales, averaged over the batch
    std::vector<std::vector<float>> scale_hist;  // [K][B]
};

inline std::string rng_state_string(const Rng& rng) {
    std::ostringstream o;
    o << rng.engine();
    return o.str();
}

inline void rng_restore(Rng& rng, const std::string& s) {
    std::istringstream i(s);
    i >> rng.engine();
    SAFA_REQUIRE(!i.fail(), "checkpoint: malformed RNG state");
}

class Trainer {
  public:
    Trainer(SafaConfig mcfg, TrainConfig tcfg, std::vector<VideoSequence> clips)
        : mcfg_(std::move(mcfg)),
          tcfg_(tcfg),
          clips_(std::move(clips)),
          model_(mcfg_, tcfg.seed),
          opt_(model_.params()),
          data_rng_(tcfg.seed + 1),
          gate_rng_(tcfg.seed + 2) {
        mcfg_.validate();
        SAFA_CHECK(tcfg_.patch_size % 8 == 0 && tcfg_.patch_size >= 16,
                   "patch_size (LR) must be a multiple of 8 and >= 16");
    }

    SafaModel& model() { return model_; }
    const SafaConfig& model_config() const { return mcfg_; }
    const TrainConfig& train_config() const { return tcfg_; }
    int64_t step() const { return step_; }

    // Draw a batch of samples; all share the LR patch size, t varies per sample.
    std::vector<TrainSample> draw_batch() {
        PatchSamplerConfig pc;
        pc.hr_patch = tcfg_.patch_size * 4;
        pc.augment = tcfg_.aug_hflip || tcfg_.aug_vflip || tcfg_.aug_rot ||
                     tcfg_.aug_time_reverse;
        std::vector<TrainSample> batch;
        batch.reserve(tcfg_.batch_size);
        for (int i = 0; i < tcfg_.batch_size; ++i)
            batch.push_back(draw_sample(clips_, pc, data_rng_));
        return batch;
    }

    StepStats train_step() { return train_step(draw_batch()); }

    StepStats train_step(const std::vector<TrainSample>& batch) {
        const int n = static_cast<int>(batch.size());
        SAFA_CHECK(n > 0, "train_step: empty batch");
        std::vector<Frame> lr0s, lr1s, tgts;
        std::vector<float> ts;
        for (const auto& s : batch) {
            lr0s.push_back(s.lr0);
            lr1s.push_back(s.lr1);
            tgts.push_back(s.target);
            ts.push_back(s.t);
        }
        const Tensor lr0 = frames_to_batch(lr0s);
        const Tensor lr1 = frames_to_batch(lr1s);
        const Var target = make_leaf(frames_to_batch(tgts));

        model_.params().zero_grads();
        const SafaOutput out =
            model_.forward_batch(lr0, lr1, ts, GateMode::TrainStochastic, gate_rng_);
        const Var loss = mean_abs_diff(out.sr, target);
        const float loss_v = loss->value[0];
        if (!std::isfinite(loss_v)) {
            std::ostringstream diag;
            diag << "train_step: non-finite loss at step " << step_ << " (loss=" << loss_v
                 << ", sr max|.|=" << out.sr->value.max_abs()
                 << ", flows max|.|=" << out.flows->value.max_abs() << ")";
            throw RuntimeError(diag.str());
        }
        backward(loss);
        opt_.clip_grads(tcfg_.grad_clip);

        StepStats st;
        st.step = step_;
        st.loss = loss_v;
        st.lr = cosine_lr(tcfg_.peak_lr, step_, tcfg_.total_iterations);
        st.grad_norm = opt_.grad_norm();
        st.scale_hist = scale_histogram(out.scale_trace, mcfg_.estimator.scales);
        opt_.step(st.lr);
        ++step_;
        return st;
    }

    static std::vector<std::vector<float>> scale_histogram(
        const std::vector<std::vector<float>>& trace, const std::vector<float>& scales) {
        std::vector<std::vector<float>> hist(trace.size(),
                                             std::vector<float>(scales.size(), 0.f));
        for (size_t k = 0; k < trace.size(); ++k) {
            for (const float s : trace[k]) {
                for (size_t b = 0; b < scales.size(); ++b)
                    if (std::fabs(s - scales[b]) < 1e-6f) hist[k][b] += 1.f;
            }
            if (!trace[k].empty())
                for (float& h : hist[k]) h /= static_cast<float>(trace[k].size());
        }
        return hist;
    }

    // JSON-lines log record for one step
    static std::string log_record(const StepStats& st) {
        std::ostringstream o;
        o << "{\"step\":" << st.step << ",\"loss\":" << st.loss << ",\"lr\":" << st.lr
          << ",\"grad_norm\":" << st.grad_norm << ",\"scale_hist\":[";
        for (size_t k = 0; k < st.scale_hist.size(); ++k) {
            if (k) o << ",";
            o << "[";
            for (size_t b = 0; b < st.scale_hist[k].size(); ++b) {
                if (b) o << ",";
                o << st.scale_hist[k][b];
            }
            o << "]";
        }
        o << "]}";
        return o.str();
    }

    // ---- checkpoints ------------------------------------------------------
    // One archive holds model weights, optimizer moments, both configs and
    // the data/gate RNG streams, so a resumed run replays bit-identically.

    void save_checkpoint(const std::string& path) const {
        auto tensors = model_.params().snapshot();
        for (auto& [name, t] : opt_.state_tensors()) tensors.emplace_back(name, t);
        std::ostringstream meta;
        meta << serialize_kv(mcfg_) << serialize_kv(tcfg_)
             << "checkpoint_step = " << step_ << "\n"
             << "adam_step = " << opt_.step_count() << "\n"
             << "rng_data = " << rng_state_string(data_rng_) << "\n"
             << "rng_gate = " << rng_state_string(gate_rng_) << "\n";
        archive::save(path, tensors, meta.str());
    }

    void load_checkpoint(const std::string& path) {
        const archive::Loaded ar = archive::load(path);
        std::istringstream ms(ar.meta);
        const KvMap kv = parse_kv(ms);
        SAFA_REQUIRE(kv.count("checkpoint_step"), "checkpoint: missing step field");
        model_.load_weights_from(ar);
        step_ = std::stoll(kv.at("checkpoint_step"));
        opt_.load_state(ar.tensors,
                        kv.count("adam_step") ? std::stoll(kv.at("adam_step")) : step_);
        if (kv.count("rng_data")) rng_restore(data_rng_, kv.at("rng_data"));
        if (kv.count("rng_gate")) rng_restore(gate_rng_, kv.at("rng_gate"));
    }

    Rng& data_rng() { return data_rng_; }
    Rng& gate_rng() { return gate_rng_; }

  private:
    SafaConfig mcfg_;
    TrainConfig tcfg_;
    std::vector<VideoSequence> clips_;
    SafaModel model_;
    Adam opt_;
    Rng data_rng_, gate_rng_;
    int64_t step_ = 0;
};

}  // namespace safa
