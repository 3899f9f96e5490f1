#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>

#include "CLI11.hpp"
#include "wirevid/harness.hpp"
#include "wirevid/synth.hpp"

using namespace wirevid;

namespace {

// rho is the per-frame channel use: complex symbols per source value when
// every block is sent. Smaller values buy fewer refinement blocks per group.
int budget_from_rho(const CodecConfig& cfg, double rho) {
    double rho_full =
        (double)cfg.channels / (2.0 * cfg.down * cfg.down * 3.0);
    int b = (int)std::llround(cfg.blocks * rho / rho_full);
    if (b < 1 || b > cfg.blocks)
        throw std::invalid_argument("rho " + std::to_string(rho) +
                                    " is outside this model's range (full rate " +
                                    std::to_string(rho_full) + ")");
    return b;
}

std::optional<double> parse_snr_est(const std::string& s) {
    if (s == "matched") return std::nullopt;
    try {
        size_t n = 0;
        double v = std::stod(s, &n);
        if (n != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (...) {
        throw std::invalid_argument("--snr-est takes 'matched' or a dB value");
    }
}

struct EvalArgs {
    std::string manifest, model, alloc, out;
    std::string snr_est = "matched";
    std::string split = "test";
    std::string metric;
    double snr_min = -5.0, snr_max = 20.0, snr_step = 5.0;
    double rho = 0.0;
    bool rho_set = false;
    double power = 1.0;
    uint64_t seed = 1;
    int crop_h = 0, crop_w = 0;
};

void add_eval_flags(CLI::App* sc, EvalArgs& a, bool with_alloc) {
    sc->add_option("--manifest", a.manifest, "dataset manifest file")
        ->required()
        ->check(CLI::ExistingFile);
    sc->add_option("--model", a.model, "codec checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
    if (with_alloc)
        sc->add_option("--alloc", a.alloc, "allocation policy checkpoint")
            ->check(CLI::ExistingFile);
    sc->add_option("--snr-min", a.snr_min, "sweep start in dB");
    sc->add_option("--snr-max", a.snr_max, "sweep end in dB");
    sc->add_option("--snr-step", a.snr_step, "sweep step in dB");
    sc->add_option("--snr-est", a.snr_est,
                   "transmitter SNR estimate: 'matched' or a fixed dB value");
    auto* r = sc->add_option("--rho", a.rho,
                             "channel uses per source value (0.031 sends every "
                             "block, 0.018 about 60%)");
    sc->parse_complete_callback([&a, r] { a.rho_set = r->count() > 0; });
    sc->add_option("--metric", a.metric, "report just one metric")
        ->check(CLI::IsMember({"psnr", "ms-ssim"}));
    sc->add_option("--split", a.split, "which split to evaluate")
        ->check(CLI::IsMember({"train", "val", "test"}));
    sc->add_option("--power", a.power, "average symbol power constraint");
    sc->add_option("--seed", a.seed, "noise seed");
    sc->add_option("--crop-h", a.crop_h, "center-crop height (0: full frames)");
    sc->add_option("--crop-w", a.crop_w, "center-crop width (0: full frames)");
    sc->add_option("--out", a.out, "output directory")->required();
}

int run_eval(const EvalArgs& a, bool allow_learned) {
    ModelParams p = load_model(a.model);
    DatasetManifest data = read_manifest(a.manifest);
    EvalOptions opt;
    opt.snr_grid = snr_grid(a.snr_min, a.snr_max, a.snr_step);
    opt.snr_est = parse_snr_est(a.snr_est);
    if (!a.metric.empty()) opt.metrics = {parse_metric(a.metric)};
    opt.power = a.power;
    opt.seed = a.seed;
    opt.crop_h = a.crop_h;
    opt.crop_w = a.crop_w;

    QNet qn;
    const QNet* qp = nullptr;
    if (allow_learned && !a.alloc.empty()) {
        LoadedQNet lq = load_qnet(a.alloc);
        qn = std::move(lq.net);
        opt.budget = lq.budget;
        opt.learned = true;
        qp = &qn;
        if (a.rho_set && budget_from_rho(p.cfg, a.rho) != lq.budget)
            throw std::invalid_argument(
                "the allocation policy was trained for a different rho");
    } else {
        opt.budget = a.rho_set ? budget_from_rho(p.cfg, a.rho) : p.cfg.blocks;
    }

    auto recs = evaluate_sweep(p, qp, data, parse_split(a.split), opt);
    emit_outputs(recs, a.out);
    std::printf("wrote %s/records.csv (%zu rows) and the sweep plots\n", a.out.c_str(),
                recs.size());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"learned joint source-channel video transmission over noisy channels"};
    app.require_subcommand(1);

    // synth-data
    auto* synth = app.add_subcommand("synth-data",
                                     "generate a synthetic clip corpus and manifest");
    std::string sy_out;
    int sy_clips = 12, sy_frames = 17, sy_size = 64;
    uint64_t sy_seed = 7, sy_split_seed = 1;
    synth->add_option("--out", sy_out, "output directory")->required();
    synth->add_option("--clips", sy_clips, "number of clips");
    synth->add_option("--frames", sy_frames, "frames per clip");
    synth->add_option("--size", sy_size, "square frame size in pixels");
    synth->add_option("--seed", sy_seed, "content seed");
    synth->add_option("--split-seed", sy_split_seed, "train/val/test shuffle seed");

    // train-jscc
    auto* tj = app.add_subcommand("train-jscc",
                                  "train the key and interpolation codecs end to end");
    std::string tj_cfg, tj_manifest, tj_out, tj_metric = "psnr", tj_init;
    uint64_t tj_seed = 0;
    tj->add_option("--config", tj_cfg, "key=value training config")
        ->required()
        ->check(CLI::ExistingFile);
    tj->add_option("--manifest", tj_manifest, "dataset manifest file")
        ->required()
        ->check(CLI::ExistingFile);
    auto* tj_seed_opt = tj->add_option("--seed", tj_seed, "overrides the config seed");
    tj->add_option("--metric", tj_metric, "training objective")
        ->check(CLI::IsMember({"psnr", "ms-ssim"}));
    tj->add_option("--init", tj_init, "checkpoint to continue from")
        ->check(CLI::ExistingFile);
    tj->add_option("--out", tj_out, "output directory")->required();

    // train-alloc
    auto* ta = app.add_subcommand(
        "train-alloc", "train the bandwidth allocation policy against a frozen codec");
    std::string ta_cfg, ta_manifest, ta_model, ta_out, ta_metric = "psnr";
    double ta_rho = 0.0;
    uint64_t ta_seed = 0;
    ta->add_option("--config", ta_cfg, "key=value training config")
        ->required()
        ->check(CLI::ExistingFile);
    ta->add_option("--manifest", ta_manifest, "dataset manifest file")
        ->required()
        ->check(CLI::ExistingFile);
    ta->add_option("--model", ta_model, "codec checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
    auto* ta_rho_opt = ta->add_option("--rho", ta_rho,
                                      "channel uses per source value (0.031 sends "
                                      "every block, 0.018 about 60%)");
    auto* ta_seed_opt = ta->add_option("--seed", ta_seed, "overrides the config seed");
    ta->add_option("--metric", ta_metric, "reward objective")
        ->check(CLI::IsMember({"psnr", "ms-ssim"}));
    ta->add_option("--out", ta_out, "output directory")->required();

    // eval / ablate-uniform
    auto* ev = app.add_subcommand("eval", "SNR sweep on a split, uniform and learned");
    EvalArgs ev_args;
    add_eval_flags(ev, ev_args, true);
    auto* ab = app.add_subcommand("ablate-uniform",
                                  "SNR sweep with the uniform allocation only");
    EvalArgs ab_args;
    add_eval_flags(ab, ab_args, false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) {
            SynthSpec sp;
            sp.n_clips = sy_clips;
            sp.frames = sy_frames;
            sp.h = sp.w = sy_size;
            sp.seed = sy_seed;
            auto entries = generate_corpus(sy_out + "/clips", sp);
            // store clip paths relative to the manifest so the tree can move
            for (auto& e : entries)
                e.dir = std::filesystem::path(e.dir)
                            .lexically_relative(std::filesystem::path(sy_out))
                            .string();
            auto manifest = split_dataset(entries, sy_split_seed);
            write_manifest(manifest, sy_out + "/manifest.txt");
            std::printf("wrote %zu clips and %s/manifest.txt\n", entries.size(),
                        sy_out.c_str());
            return 0;
        }
        if (*tj) {
            Config c = Config::load(tj_cfg);
            TrainConfig tc = train_config_from(c);
            if (tj_seed_opt->count()) tc.seed = tj_seed;
            double power = c.getd("power", 1.0);
            DatasetManifest data = read_manifest(tj_manifest);
            ModelParams p;
            if (tj_init.empty()) {
                Rng init_rng = Rng(tc.seed).stream("init");
                p = ModelParams(codec_config_from(c), init_rng);
            } else {
                p = load_model(tj_init);
            }
            auto res = train_jscc(p, data, tc, parse_metric(tj_metric), power, tj_out);
            std::printf("ran %d epochs, best validation loss %.6f\nmodel: %s/model.ckpt\n",
                        res.epochs_run, res.best_val, tj_out.c_str());
            return 0;
        }
        if (*ta) {
            Config c = Config::load(ta_cfg);
            TrainConfig tc = train_config_from(c);
            if (ta_seed_opt->count()) tc.seed = ta_seed;
            DqnConfig dc = dqn_config_from(c);
            double power = c.getd("power", 1.0);
            DatasetManifest data = read_manifest(ta_manifest);
            ModelParams p = load_model(ta_model);
            int budget =
                ta_rho_opt->count() ? budget_from_rho(p.cfg, ta_rho) : p.cfg.blocks;
            int64_t n_actions = count_actions(p.cfg.gop, budget);
            if (n_actions > 500000)
                throw std::invalid_argument("action space too large (" +
                                            std::to_string(n_actions) + ")");
            Rng qrng = Rng(tc.seed).stream("qnet_init");
            QNet q(21 * (p.cfg.gop - 1) + 6, p.cfg.hidden, p.cfg.channels,
                   (int)n_actions, qrng);
            auto res = train_allocator(p, q, data, tc, dc, parse_metric(ta_metric),
                                       power, budget, ta_out);
            double tail = 0.0;
            size_t n_tail = std::max<size_t>(1, res.episode_rewards.size() / 10);
            for (size_t i = res.episode_rewards.size() - n_tail;
                 i < res.episode_rewards.size(); i++)
                tail += res.episode_rewards[i];
            std::printf(
                "ran %zu episodes over %d actions, mean reward of the last %zu: %.4f\n"
                "policy: %s/alloc.ckpt\n",
                res.episode_rewards.size(), (int)n_actions, n_tail, tail / n_tail,
                ta_out.c_str());
            return 0;
        }
        if (*ev) return run_eval(ev_args, true);
        if (*ab) return run_eval(ab_args, false);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
