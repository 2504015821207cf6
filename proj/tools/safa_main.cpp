#include <iostream>

#include <CLI11.hpp>

#include "safa/safa.hpp"

namespace {

struct CommonArgs {
    std::string config;
    std::string checkpoint;
    uint64_t seed = 0;
    int time_scale = 8;
    std::string out;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
    cmd->add_option("--config", a.config, "flat key/value config file");
    cmd->add_option("--checkpoint", a.checkpoint, "checkpoint archive path");
    cmd->add_option("--seed", a.seed, "random seed");
    cmd->add_option("--time-scale", a.time_scale, "temporal upsampling factor N")
        ->check(CLI::IsMember({6, 8, 12, 16}));
    cmd->add_option("--out", a.out, "output directory or file");
}

void load_configs(const CommonArgs& a, safa::SafaConfig& mc, safa::TrainConfig& tc,
                  const std::string& ablation) {
    if (!a.config.empty()) {
        const safa::KvMap kv = safa::parse_kv_file(a.config);
        safa::apply_kv(mc, kv);
        safa::apply_kv(tc, kv);
    }
    if (!ablation.empty() && !safa::apply_ablation(ablation, mc, tc))
        throw safa::InvalidArgument("unknown ablation tag: " + ablation);
    mc.validate();
}

// machine-readable error record on stderr; exit code stays nonzero
int fail(const std::string& kind, const std::string& msg) {
    std::ostringstream o;
    std::string esc;
    for (const char c : msg)
        if (c == '"' || c == '\\') { esc += '\\'; esc += c; }
        else if (c == '\n') esc += "\\n";
        else esc += c;
    std::cerr << "{\"error\":\"" << kind << "\",\"message\":\"" << esc << "\"}" << std::endl;
    return 1;
}

int cmd_make_synth(const CommonArgs& a, const safa::SynthConfig& sc) {
    if (a.out.empty()) return fail("usage", "make-synth requires --out <dir>");
    safa::SynthConfig cfg = sc;
    cfg.seed = a.seed;
    safa::generate_synth_dataset(a.out, cfg);
    std::cout << "wrote " << cfg.clips << " clips x " << cfg.frames << " frames to "
              << a.out << "\n";
    return 0;
}

int cmd_train(const CommonArgs& a, const std::string& data_root, const std::string& ablation,
              const std::string& resume, const std::string& log_path, int steps_override) {
    safa::SafaConfig mc;
    safa::TrainConfig tc;
    load_configs(a, mc, tc, ablation);
    if (a.seed) tc.seed = a.seed;
    if (steps_override > 0) tc.total_iterations = steps_override;
    if (a.out.empty()) return fail("usage", "train requires --out <dir>");
    std::filesystem::create_directories(a.out);

    safa::Trainer trainer(mc, tc, safa::scan_dataset(data_root));
    if (!resume.empty()) trainer.load_checkpoint(resume);

    std::ofstream log;
    if (!log_path.empty()) {
        log.open(log_path, std::ios::app);
        if (!log.good()) return fail("io", "cannot open log file " + log_path);
    }
    const auto ckpt_path = [&](int64_t s) {
        return (std::filesystem::path(a.out) /
                ("ckpt_" + std::to_string(s) + ".safat")).string();
    };
    while (trainer.step() < tc.total_iterations) {
        const safa::StepStats st = trainer.train_step();
        if (tc.log_every > 0 && st.step % tc.log_every == 0) {
            const std::string rec = safa::Trainer::log_record(st);
            std::cout << rec << "\n";
            if (log.is_open()) log << rec << "\n" << std::flush;
        }
        if (tc.checkpoint_every > 0 && (st.step + 1) % tc.checkpoint_every == 0)
            trainer.save_checkpoint(ckpt_path(st.step + 1));
    }
    trainer.save_checkpoint(
        (std::filesystem::path(a.out) / "ckpt_final.safat").string());
    std::cout << "training complete at step " << trainer.step() << "\n";
    return 0;
}

int cmd_eval(const CommonArgs& a, const std::string& data_root, bool stochastic,
             int max_clips, const std::string& records_path) {
    if (a.checkpoint.empty()) return fail("usage", "eval requires --checkpoint");
    const safa::SafaModel model = safa::SafaModel::load(a.checkpoint);
    safa::EvalOptions opts;
    opts.stochastic_gates = stochastic;
    opts.seed = a.seed;
    opts.max_clips = max_clips;
    const safa::EvalReport rep =
        safa::evaluate(safa::scan_dataset(data_root), model, a.time_scale, opts);
    std::cout << "time_scale=" << rep.time_scale << " clips=" << rep.clip_count
              << " frames=" << rep.frame_count << " dropped=" << rep.dropped_frames << "\n"
              << "Center:  PSNR " << rep.psnr_center << "  SSIM " << rep.ssim_center << "\n"
              << "Average: PSNR " << rep.psnr_average << "  SSIM " << rep.ssim_average
              << "\n";
    if (!records_path.empty()) {
        std::ofstream f(records_path);
        if (!f.good()) return fail("io", "cannot open " + records_path);
        for (const auto& fr : rep.records) f << safa::frame_record_json(fr) << "\n";
    }
    return 0;
}

int cmd_interp(const CommonArgs& a, const std::string& frame_a, const std::string& frame_b,
               int steps, bool viz) {
    if (a.checkpoint.empty()) return fail("usage", "interp requires --checkpoint");
    if (a.out.empty()) return fail("usage", "interp requires --out <dir>");
    const safa::SafaModel model = safa::SafaModel::load(a.checkpoint);
    std::vector<float> ts;
    for (int k = 0; k <= steps; ++k)
        ts.push_back(static_cast<float>(k) / static_cast<float>(steps));
    safa::InterpOptions opts;
    opts.viz = viz;
    opts.seed = a.seed;
    safa::write_interpolation(model, safa::read_png(frame_a), safa::read_png(frame_b), ts,
                              a.out, opts);
    std::cout << "wrote " << ts.size() << " frames to " << a.out << "\n";
    return 0;
}

int cmd_scale_stats(const CommonArgs& a, const std::string& data_root,
                    const std::string& sizes_str, int max_pairs) {
    if (a.checkpoint.empty()) return fail("usage", "scale-stats requires --checkpoint");
    const safa::SafaModel model = safa::SafaModel::load(a.checkpoint);
    std::vector<std::pair<int, int>> sizes;
    std::stringstream ss(sizes_str);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        const size_t x = tok.find('x');
        if (x == std::string::npos)
            return fail("usage", "bad --sizes entry '" + tok + "', expected WxH");
        sizes.emplace_back(std::stoi(tok.substr(0, x)), std::stoi(tok.substr(x + 1)));
    }
    const auto stats =
        safa::scale_stats(safa::scan_dataset(data_root), model, sizes, max_pairs);
    const std::string csv = safa::scale_stats_csv(stats, model.config().estimator.scales);
    std::cout << csv;
    if (!a.out.empty()) {
        std::ofstream f(a.out);
        if (!f.good()) return fail("io", "cannot open " + a.out);
        f << csv;
    }
    return 0;
}

int cmd_bench(const CommonArgs& a, int lr_w, int lr_h, int warmup, int runs) {
    safa::SafaConfig mc;
    safa::TrainConfig tc;
    load_configs(a, mc, tc, "");
    std::unique_ptr<safa::SafaModel> model;
    if (!a.checkpoint.empty())
        model = std::make_unique<safa::SafaModel>(safa::SafaModel::load(a.checkpoint));
    else
        model = std::make_unique<safa::SafaModel>(mc, a.seed);
    const safa::RuntimeReport rep = safa::benchmark(*model, lr_w, lr_h, warmup, runs, a.seed);
    // non-adaptive reference: same config with the selector forced off
    safa::SafaConfig ref_cfg = model->config();
    ref_cfg.estimator.adaptive = false;
    const safa::SafaModel ref(ref_cfg, a.seed);
    const safa::RuntimeReport ref_rep =
        safa::benchmark(ref, lr_w, lr_h, warmup, runs, a.seed);
    std::cout << "input " << rep.lr_width << "x" << rep.lr_height << " LR, "
              << rep.timed_runs << " timed runs after " << rep.warmup_runs << " warm-ups\n"
              << "adaptive:     mean " << rep.mean_ms << " ms  (min " << rep.min_ms
              << ", max " << rep.max_ms << ", " << rep.macs_per_run << " MACs)\n"
              << "non-adaptive: mean " << ref_rep.mean_ms << " ms  (" << ref_rep.macs_per_run
              << " MACs)\n"
              << "time ratio adaptive/non-adaptive: " << rep.mean_ms / ref_rep.mean_ms
              << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SAFA space-time video super-resolution"};
    app.require_subcommand(1);

    CommonArgs a;
    std::string data_root, ablation, resume, log_path, frame_a, frame_b;
    std::string sizes_str = "320x180,480x270,640x360";
    int steps_override = 0, max_clips = 0, interp_steps = 8, max_pairs = 2;
    int lr_w = 64, lr_h = 64, warmup = 10, runs = 100;
    bool stochastic = false, viz = false;
    std::string records_path;
    safa::SynthConfig sc;

    auto* t = app.add_subcommand("train", "train a model");
    add_common(t, a);
    t->add_option("--data", data_root, "dataset root")->required();
    t->add_option("--ablation", ablation, "ablation preset tag (c1..c8, b1..b3, a1..a4, e1..e4, f2)");
    t->add_option("--resume", resume, "checkpoint to resume from");
    t->add_option("--log", log_path, "JSON-lines training log file");
    t->add_option("--steps", steps_override, "override total_iterations");

    auto* e = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(e, a);
    e->add_option("--data", data_root, "dataset root")->required();
    e->add_flag("--stochastic-gates", stochastic, "sample gates instead of thresholding");
    e->add_option("--max-clips", max_clips, "limit number of clips");
    e->add_option("--records", records_path, "write per-frame JSON-lines records");

    auto* i = app.add_subcommand("interp", "interpolate between two LR frames");
    add_common(i, a);
    i->add_option("frame_a", frame_a, "first LR frame (png)")->required();
    i->add_option("frame_b", frame_b, "second LR frame (png)")->required();
    i->add_option("--steps", interp_steps, "number of intervals across [0,1]");
    i->add_flag("--viz", viz, "also write flow/fusion/refinement visualizations");

    auto* s = app.add_subcommand("scale-stats", "per-resolution scale-selection ratios");
    add_common(s, a);
    s->add_option("--data", data_root, "dataset root")->required();
    s->add_option("--sizes", sizes_str, "comma-separated LR WxH list");
    s->add_option("--max-pairs", max_pairs, "frame pairs per clip");

    auto* b = app.add_subcommand("bench", "runtime benchmark");
    add_common(b, a);
    b->add_option("--width", lr_w, "LR input width");
    b->add_option("--height", lr_h, "LR input height");
    b->add_option("--warmup", warmup, "warm-up runs");
    b->add_option("--runs", runs, "timed runs");

    auto* m = app.add_subcommand("make-synth", "generate a synthetic dataset");
    add_common(m, a);
    m->add_option("--clips", sc.clips, "number of clips");
    m->add_option("--frames", sc.frames, "frames per clip");
    m->add_option("--size", sc.size, "square HR frame size");
    m->add_option("--motion-px", sc.motion_px, "max sprite motion in pixels/frame");
    m->add_option("--detail", sc.detail, "texture frequency multiplier");

    CLI11_PARSE(app, argc, argv);

    try {
        if (t->parsed())
            return cmd_train(a, data_root, ablation, resume, log_path, steps_override);
        if (e->parsed()) return cmd_eval(a, data_root, stochastic, max_clips, records_path);
        if (i->parsed()) return cmd_interp(a, frame_a, frame_b, interp_steps, viz);
        if (s->parsed()) return cmd_scale_stats(a, data_root, sizes_str, max_pairs);
        if (b->parsed()) return cmd_bench(a, lr_w, lr_h, warmup, runs);
        if (m->parsed()) return cmd_make_synth(a, sc);
    } catch (const safa::InvalidArgument& ex) {
        return fail("invalid_argument", ex.what());
    } catch (const safa::RuntimeError& ex) {
        return fail("runtime", ex.what());
    } catch (const std::exception& ex) {
        return fail("unexpected", ex.what());
    }
    return fail("usage", "no subcommand given");
}
