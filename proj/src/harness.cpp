#include "wirevid/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "wirevid/checkpoint.hpp"

namespace fs = std::filesystem;

namespace wirevid {

namespace {

std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::string fmt_f(double v, int prec = 6) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
    return buf;
}

}  // namespace

TrainConfig train_config_from(const Config& c) {
    TrainConfig t;
    t.lr = c.getd("lr", t.lr);
    t.jscc_batch = c.geti("jscc_batch", t.jscc_batch);
    t.dqn_batch = c.geti("dqn_batch", t.dqn_batch);
    t.patience = c.geti("patience", t.patience);
    t.lr_decay_after = c.geti("lr_decay_after", t.lr_decay_after);
    t.lr_decay = c.getd("lr_decay", t.lr_decay);
    auto r = c.list("snr_train_range_db", {t.snr_min, t.snr_max});
    if (r.size() != 2 || r[0] > r[1])
        throw std::invalid_argument("snr_train_range_db needs min,max");
    t.snr_min = r[0];
    t.snr_max = r[1];
    t.epochs = c.geti("epochs", t.epochs);
    t.steps_per_epoch = c.geti("steps_per_epoch", t.steps_per_epoch);
    t.episodes = c.geti("episodes", t.episodes);
    auto crop = c.list("crop_hw", {0, 0});
    if (crop.size() != 2) throw std::invalid_argument("crop_hw needs h,w");
    t.crop_h = (int)crop[0];
    t.crop_w = (int)crop[1];
    t.seed = (uint64_t)c.geti64("seed", 1);
    return t;
}

CodecConfig codec_config_from(const Config& c) {
    CodecConfig cc;
    cc.channels = c.geti("channels", cc.channels);
    cc.gop = c.geti("gop_size", cc.gop);
    cc.blocks = c.geti("blocks", cc.blocks);
    cc.hidden = c.geti("hidden", cc.hidden);
    cc.ssf_sigma0 = (float)c.getd("ssf_sigma0", cc.ssf_sigma0);
    cc.ssf_levels = c.geti("ssf_levels", cc.ssf_levels);
    return cc;
}

DqnConfig dqn_config_from(const Config& c) {
    DqnConfig d;
    d.gamma = c.getd("gamma", d.gamma);
    d.tau = c.getd("tau", d.tau);
    d.eps0 = c.getd("eps0", d.eps0);
    d.eps_end = c.getd("eps_end", d.eps_end);
    d.eps_lambda = c.getd("eps_lambda", d.eps_lambda);
    d.replay_capacity = c.geti("replay_capacity", d.replay_capacity);
    d.batch = c.geti("dqn_batch", d.batch);
    return d;
}

uint64_t params_hash(const std::vector<Tensor>& params) {
    uint64_t h = 1469598103934665603ull;
    for (const auto& t : params) {
        const unsigned char* bytes = reinterpret_cast<const unsigned char*>(t->val.data());
        for (size_t i = 0; i < t->val.size() * sizeof(float); i++) {
            h ^= bytes[i];
            h *= 1099511628211ull;
        }
    }
    return h;
}

void save_model(const std::string& path, const ModelParams& p) {
    Config meta;
    meta.set("channels", std::to_string(p.cfg.channels));
    meta.set("gop_size", std::to_string(p.cfg.gop));
    meta.set("blocks", std::to_string(p.cfg.blocks));
    meta.set("hidden", std::to_string(p.cfg.hidden));
    meta.set("ssf_sigma0", fmt_g(p.cfg.ssf_sigma0));
    meta.set("ssf_levels", std::to_string(p.cfg.ssf_levels));
    save_checkpoint(path, ModelParams::kVersion, meta.to_text(), p.groups());
}

ModelParams load_model(const std::string& path) {
    auto info = read_checkpoint_header(path);
    CodecConfig cfg = codec_config_from(Config::parse(info.meta, path));
    Rng rng(0);
    ModelParams p(cfg, rng);
    load_checkpoint_into(path, ModelParams::kVersion, p.groups());
    return p;
}

void save_qnet(const std::string& path, const QNet& q, int budget, int gop, int hidden,
               int feat) {
    Config meta;
    meta.set("in_ch", std::to_string(21 * (gop - 1) + 6));
    meta.set("gop_size", std::to_string(gop));
    meta.set("hidden", std::to_string(hidden));
    meta.set("feat", std::to_string(feat));
    meta.set("n_actions", std::to_string(q.n_actions));
    meta.set("budget", std::to_string(budget));
    ParamGroups g(1);
    g[0].first = "qnet";
    q.collect(g[0].second);
    save_checkpoint(path, ModelParams::kVersion, meta.to_text(), g);
}

LoadedQNet load_qnet(const std::string& path) {
    auto info = read_checkpoint_header(path);
    Config meta = Config::parse(info.meta, path);
    Rng rng(0);
    LoadedQNet out;
    out.net = QNet(meta.geti("in_ch", 0), meta.geti("hidden", 0), meta.geti("feat", 0),
                   meta.geti("n_actions", 0), rng);
    out.budget = meta.geti("budget", 0);
    ParamGroups g(1);
    g[0].first = "qnet";
    out.net.collect(g[0].second);
    load_checkpoint_into(path, ModelParams::kVersion, g);
    return out;
}

std::vector<VideoSequence> load_split(const DatasetManifest& m, Split s, int gop_size) {
    std::vector<VideoSequence> out;
    for (const auto& e : m.of(s)) out.push_back(load_clip(e.dir, gop_size));
    return out;
}

namespace {

struct CropBox {
    int y0 = 0, x0 = 0, h = 0, w = 0;
};

CropBox pick_crop(const Frame& f, int ch, int cw, Rng* rng) {
    CropBox b;
    if (ch <= 0 || cw <= 0 || (ch == f.h && cw == f.w)) {
        b.h = f.h;
        b.w = f.w;
        return b;
    }
    if (ch > f.h || cw > f.w) throw std::invalid_argument("crop larger than frame");
    b.h = ch;
    b.w = cw;
    if (rng) {
        b.y0 = f.h == ch ? 0 : rng->randint(f.h - ch + 1);
        b.x0 = f.w == cw ? 0 : rng->randint(f.w - cw + 1);
    } else {
        b.y0 = (f.h - ch) / 2;
        b.x0 = (f.w - cw) / 2;
    }
    return b;
}

std::vector<Tensor> gop_tensors(const GoP& g, const CropBox& b) {
    std::vector<Tensor> out;
    for (const auto& f : g.frames)
        out.push_back(frame_tensor(crop_frame(f, b.y0, b.x0, b.h, b.w)));
    return out;
}

Tensor frame_loss(const Tensor& x, const Tensor& rec, Metric objective, int lv) {
    return objective == Metric::psnr ? mse_loss(x, rec) : msssim_loss(x, rec, lv);
}

double validate_jscc(const ModelParams& p, const std::vector<VideoSequence>& seqs,
                     const TrainConfig& tc, Metric objective, double power, int lv) {
    if (seqs.empty()) return 0.0;
    double snr = 0.5 * (tc.snr_min + tc.snr_max);
    ChannelModel ch;
    ch.power = power;
    ch.sigma2 = noise_power_for_snr(power, snr);
    ch.sigma2_est = ch.sigma2;
    AllocAction full = uniform_action(p.cfg.gop, p.cfg.blocks);
    double acc = 0.0;
    int n = 0;
    for (size_t ci = 0; ci < seqs.size(); ci++) {
        const auto& seq = seqs[ci];
        CropBox b = pick_crop(seq.bootstrap, tc.crop_h, tc.crop_w, nullptr);
        // fixed streams so successive epochs see identical noise
        Rng chan = Rng(tc.seed).stream("val_chan_" + std::to_string(ci));
        Rng emul = Rng(tc.seed).stream("val_emul_" + std::to_string(ci));
        Tensor boot = frame_tensor(crop_frame(seq.bootstrap, b.y0, b.x0, b.h, b.w));
        auto bres = transmit_key_frame(p, boot, p.cfg.blocks, ch, chan, emul);
        Tensor key_tx = detach(bres.emulated), key_rx = detach(bres.receiver);
        for (const auto& g : seq.gops) {
            auto frames = gop_tensors(g, b);
            auto gr = transmit_gop(p, key_tx, key_rx, frames, full, ch, chan, emul);
            for (int i = 0; i < p.cfg.gop; i++) {
                acc += frame_loss(frames[i], gr.receiver[i], objective, lv)->scalar();
                n++;
            }
            key_tx = detach(gr.emulated[p.cfg.gop - 1]);
            key_rx = detach(gr.receiver[p.cfg.gop - 1]);
        }
    }
    return acc / (double)n;
}

// Greedy-policy score on held-out clips: fixed noise streams and the
// mid-range SNR, so successive evals of the same net agree exactly.
double validate_alloc(const ModelParams& frozen, const QNet& online,
                      const std::vector<VideoSequence>& seqs,
                      const std::vector<AllocAction>& actions, const TrainConfig& tc,
                      Metric objective, double power, int budget) {
    if (seqs.empty()) return 0.0;
    double snr = 0.5 * (tc.snr_min + tc.snr_max);
    ChannelModel ch;
    ch.power = power;
    ch.sigma2 = noise_power_for_snr(power, snr);
    ch.sigma2_est = ch.sigma2;
    float snr_est_db = (float)cond_snr_db(ch.power, ch.sigma2_est);
    double acc = 0.0;
    int n = 0;
    for (size_t ci = 0; ci < seqs.size(); ci++) {
        const auto& seq = seqs[ci];
        CropBox b = pick_crop(seq.bootstrap, tc.crop_h, tc.crop_w, nullptr);
        int lv = max_msssim_levels(b.h, b.w);
        Rng chan = Rng(tc.seed).stream("qval_chan_" + std::to_string(ci));
        Rng emul = Rng(tc.seed).stream("qval_emul_" + std::to_string(ci));
        Tensor boot = frame_tensor(crop_frame(seq.bootstrap, b.y0, b.x0, b.h, b.w));
        auto bres = transmit_key_frame(frozen, boot, frozen.cfg.blocks, ch, chan, emul);
        Tensor key_tx = detach(bres.emulated), key_rx = detach(bres.receiver);
        for (size_t g = 0; g < seq.gops.size(); g++) {
            AllocState s = build_state(frozen, key_tx, key_rx,
                                       gop_tensors(seq.gops[g], b), ch, budget, emul);
            int ai = select_action(online(s.q_input(), snr_est_db));
            auto step = step_env(frozen, s, actions[ai], ch, objective, lv, chan, emul);
            acc += step.reward;
            n++;
            key_tx = step.next_key_tx;
            key_rx = step.next_key_rx;
        }
    }
    return acc / (double)n;
}

}  // namespace

JsccTrainResult train_jscc(ModelParams& p, const DatasetManifest& data,
                           const TrainConfig& tc, Metric objective, double power,
                           const std::string& out_dir) {
    fs::create_directories(out_dir);
    int N = p.cfg.gop, V = p.cfg.blocks;
    auto train_seqs = load_split(data, Split::train, N);
    auto val_seqs = load_split(data, Split::val, N);
    if (train_seqs.empty()) throw std::runtime_error("no training clips");
    int lv;
    {
        const Frame& f0 = train_seqs[0].bootstrap;
        CropBox b = pick_crop(f0, tc.crop_h, tc.crop_w, nullptr);
        p.cfg.validate(b.h, b.w);
        lv = max_msssim_levels(b.h, b.w);
    }
    int total_gops = 0;
    for (const auto& s : train_seqs) total_gops += (int)s.gops.size();
    int steps = tc.steps_per_epoch > 0
                    ? tc.steps_per_epoch
                    : std::max(1, (total_gops + tc.jscc_batch - 1) / tc.jscc_batch);

    auto params = p.all_params();
    Adam opt(params, (float)tc.lr);
    std::ofstream ep_log(out_dir + "/train_jscc.csv");
    ep_log << "epoch,train_loss,val_loss,lr\n";
    std::ofstream step_log(out_dir + "/train_jscc_steps.csv");
    step_log << "step,loss\n";

    JsccTrainResult res;
    double best_val = std::numeric_limits<double>::infinity();
    int bad = 0;
    int64_t gstep = 0;
    std::string best_path = out_dir + "/model.ckpt";
    bool saved = false;

    for (int epoch = 0; epoch < tc.epochs; epoch++) {
        double train_acc = 0.0;
        for (int step = 0; step < steps; step++, gstep++) {
            uint64_t batch_seed = tc.seed * 1000003ull + (uint64_t)gstep;
            Rng brng = Rng(batch_seed).stream("batch");
            double snr = brng.uniform((float)tc.snr_min, (float)tc.snr_max);
            ChannelModel ch;
            ch.power = power;
            ch.sigma2 = noise_power_for_snr(power, snr);
            ch.sigma2_est = ch.sigma2;
            opt.zero_grad();
            double batch_loss = 0.0;
            for (int b = 0; b < tc.jscc_batch; b++) {
                const VideoSequence& sq = train_seqs[brng.randint((int)train_seqs.size())];
                int g = brng.randint((int)sq.gops.size());
                CropBox box = pick_crop(sq.bootstrap, tc.crop_h, tc.crop_w, &brng);
                const Frame& prev_src =
                    g == 0 ? sq.bootstrap : sq.gops[g - 1].frames.back();
                Tensor prev =
                    frame_tensor(crop_frame(prev_src, box.y0, box.x0, box.h, box.w));
                auto frames = gop_tensors(sq.gops[g], box);
                std::vector<int> alloc(N);
                for (int i = 0; i < N; i++) alloc[i] = 1 + brng.randint(V);

                Rng chan = Rng(batch_seed).stream("chan_" + std::to_string(b));
                Rng emul = Rng(batch_seed).stream("emul_" + std::to_string(b));
                auto boot = transmit_key_frame(p, prev, V, ch, chan, emul);
                auto gr = transmit_gop(p, boot.emulated, boot.receiver, frames, alloc, ch,
                                       chan, emul);
                Tensor loss;
                for (int i = 0; i < N; i++) {
                    Tensor fl = frame_loss(frames[i], gr.receiver[i], objective, lv);
                    loss = loss ? add(loss, fl) : fl;
                }
                loss = mul_k(loss, 1.0f / (float)N);
                if (!std::isfinite(loss->scalar()))
                    throw std::runtime_error(
                        "training diverged: non-finite loss at step " +
                        std::to_string(gstep) + " (batch seed " +
                        std::to_string(batch_seed) + ")");
                batch_loss += loss->scalar() / tc.jscc_batch;
                backward(mul_k(loss, 1.0f / (float)tc.jscc_batch));
            }
            opt.step();
            train_acc += batch_loss;
            res.step_losses.push_back(batch_loss);
            step_log << gstep << "," << fmt_f(batch_loss, 8) << "\n";
        }
        double val = validate_jscc(p, val_seqs, tc, objective, power, lv);
        ep_log << epoch << "," << fmt_f(train_acc / steps, 8) << "," << fmt_f(val, 8)
               << "," << fmt_g(opt.lr) << "\n";
        ep_log.flush();
        res.epochs_run = epoch + 1;
        bool improved = val_seqs.empty() ? true : val < best_val;
        if (improved) {
            best_val = val;
            bad = 0;
            save_model(best_path, p);
            saved = true;
        } else {
            bad++;
            if (bad % tc.lr_decay_after == 0) opt.lr *= (float)tc.lr_decay;
            if (bad >= tc.patience) break;
        }
    }
    if (saved && !val_seqs.empty()) {
        // hand back the best weights, not the last ones
        load_checkpoint_into(best_path, ModelParams::kVersion, p.groups());
    } else if (!saved) {
        save_model(best_path, p);
    }
    res.best_val = best_val;
    return res;
}

AllocTrainResult train_allocator(const ModelParams& frozen, QNet& online,
                                 const DatasetManifest& data, const TrainConfig& tc,
                                 const DqnConfig& dc, Metric objective, double power,
                                 int budget, const std::string& out_dir) {
    fs::create_directories(out_dir);
    int N = frozen.cfg.gop;
    auto train_seqs = load_split(data, Split::train, N);
    if (train_seqs.empty()) throw std::runtime_error("no training clips");
    auto actions = enumerate_actions(N, budget);
    if ((int)actions.size() != online.n_actions)
        throw std::invalid_argument("policy head size does not match the action space");

    std::vector<Tensor> online_params, target_params;
    online.collect(online_params);
    Rng trng(0);
    QNet target(21 * (N - 1) + 6, frozen.cfg.hidden, frozen.cfg.channels,
                online.n_actions, trng);
    target.collect(target_params);
    copy_values(target_params, online_params);

    Adam opt(online_params, (float)tc.lr);
    ReplayBuffer buf((size_t)dc.replay_capacity);
    std::ofstream log(out_dir + "/train_alloc.csv");
    log << "episode,epsilon,reward,loss\n";

    AllocTrainResult res;
    for (int ep = 0; ep < tc.episodes; ep++) {
        Rng ep_rng = Rng(tc.seed).stream("ep_" + std::to_string(ep));
        const VideoSequence& sq = train_seqs[ep_rng.randint((int)train_seqs.size())];
        CropBox box = pick_crop(sq.bootstrap, tc.crop_h, tc.crop_w, &ep_rng);
        int lv = max_msssim_levels(box.h, box.w);
        double snr = ep_rng.uniform((float)tc.snr_min, (float)tc.snr_max);
        ChannelModel ch;
        ch.power = power;
        ch.sigma2 = noise_power_for_snr(power, snr);
        ch.sigma2_est = ch.sigma2;
        float snr_est_db = (float)cond_snr_db(ch.power, ch.sigma2_est);
        Rng chan = Rng(tc.seed).stream("dqn_chan_" + std::to_string(ep));
        Rng emul = Rng(tc.seed).stream("dqn_emul_" + std::to_string(ep));

        Tensor boot = frame_tensor(crop_frame(sq.bootstrap, box.y0, box.x0, box.h, box.w));
        auto bres = transmit_key_frame(frozen, boot, frozen.cfg.blocks, ch, chan, emul);
        Tensor key_tx = detach(bres.emulated), key_rx = detach(bres.receiver);

        double eps = epsilon_schedule(dc, ep);
        double ep_reward = 0.0, ep_loss = 0.0;
        int n_loss = 0;
        AllocState s = build_state(frozen, key_tx, key_rx, gop_tensors(sq.gops[0], box),
                                   ch, budget, emul);
        Tensor s_q = s.q_input();
        for (size_t g = 0; g < sq.gops.size(); g++) {
            int ai = ep_rng.uniform() < eps ? ep_rng.randint(online.n_actions)
                                            : select_action(online(s_q, snr_est_db));
            auto step = step_env(frozen, s, actions[ai], ch, objective, lv, chan, emul);
            ep_reward += step.reward;
            bool terminal = g + 1 == sq.gops.size();
            Transition tr;
            tr.s = s_q;
            tr.snr_est_db = snr_est_db;
            tr.action = ai;
            tr.reward = (float)step.reward;
            tr.terminal = terminal;
            if (!terminal) {
                s = build_state(frozen, step.next_key_tx, step.next_key_rx,
                                gop_tensors(sq.gops[g + 1], box), ch, budget, emul);
                s_q = s.q_input();
                tr.s2 = s_q;
            }
            buf.push(std::move(tr));
            if ((int)buf.size() >= dc.batch) {
                Rng srng = Rng(tc.seed).stream("dqn_sample_" + std::to_string(ep) + "_" +
                                               std::to_string(g));
                auto batch = buf.sample(dc.batch, srng);
                opt.zero_grad();
                Tensor loss = dqn_loss(online, target, batch, dc.gamma);
                backward(loss);
                opt.step();
                soft_update(target_params, online_params, dc.tau);
                ep_loss += loss->scalar();
                n_loss++;
            }
        }
        ep_reward /= (double)sq.gops.size();
        double mean_loss = n_loss > 0 ? ep_loss / n_loss : 0.0;
        log << ep << "," << fmt_f(eps) << "," << fmt_f(ep_reward) << ","
            << fmt_f(mean_loss, 8) << "\n";
        log.flush();
        res.episode_rewards.push_back(ep_reward);
        res.episode_losses.push_back(mean_loss);
    }
    save_qnet(out_dir + "/alloc.ckpt", online, budget, N, frozen.cfg.hidden,
              frozen.cfg.channels);
    return res;
}

SeqEvalResult transmit_sequence(const ModelParams& p, const QNet* qnet,
                                const VideoSequence& seq, const ChannelModel& ch,
                                int budget, Metric objective, int msssim_levels,
                                Rng& chan_rng, Rng& emul_rng) {
    int N = p.cfg.gop;
    float snr_est_db = (float)cond_snr_db(ch.power, ch.sigma2_est);
    auto bres = transmit_key_frame(p, frame_tensor(seq.bootstrap), p.cfg.blocks, ch,
                                   chan_rng, emul_rng);
    Tensor key_tx = detach(bres.emulated), key_rx = detach(bres.receiver);
    std::vector<AllocAction> actions;
    if (qnet) actions = enumerate_actions(N, budget);

    SeqEvalResult r;
    for (const auto& g : seq.gops) {
        auto frames = gop_tensors(g, pick_crop(g.frames[0], 0, 0, nullptr));
        AllocState s;
        AllocAction a;
        if (qnet) {
            s = build_state(p, key_tx, key_rx, frames, ch, budget, emul_rng);
            a = actions[select_action((*qnet)(s.q_input(), snr_est_db))];
        } else {
            s.frames = frames;
            s.refs.assign(N + 1, nullptr);
            s.refs[0] = key_tx;
            s.recv_ref = key_rx;
            s.sigma2_est = ch.sigma2_est;
            a = uniform_action(N, budget);
        }
        auto step = step_env(p, s, a, ch, objective, msssim_levels, chan_rng, emul_rng);
        r.mean_reward += step.reward;
        for (int i = 0; i < N; i++) {
            r.originals.push_back(tensor_frame(frames[i]));
            r.recons.push_back(tensor_frame(step.receiver[i]));
        }
        key_tx = step.next_key_tx;
        key_rx = step.next_key_rx;
    }
    r.mean_reward /= (double)seq.gops.size();
    return r;
}

std::vector<EvalRecord> evaluate_sweep(const ModelParams& p, const QNet* qnet,
                                       const DatasetManifest& data, Split split,
                                       const EvalOptions& opt) {
    auto seqs = load_split(data, split, p.cfg.gop);
    if (seqs.empty()) throw std::runtime_error("no clips in the requested split");
    for (auto& s : seqs) {
        CropBox b = pick_crop(s.bootstrap, opt.crop_h, opt.crop_w, nullptr);
        if (b.h != s.bootstrap.h || b.w != s.bootstrap.w)
            s = crop_sequence(s, b.y0, b.x0, b.h, b.w);
    }
    int h = seqs[0].bootstrap.h, w = seqs[0].bootstrap.w;
    p.cfg.validate(h, w);
    int budget = opt.budget > 0 ? opt.budget : p.cfg.blocks;
    int lv = std::max(1, max_msssim_levels(h, w));
    std::vector<std::string> policies;
    if (opt.uniform) policies.push_back("uniform");
    if (opt.learned) {
        if (!qnet) throw std::invalid_argument("learned policy requested without a policy");
        policies.push_back("learned");
    }

    std::vector<EvalRecord> recs;
    for (size_t si = 0; si < opt.snr_grid.size(); si++) {
        double snr_test = opt.snr_grid[si];
        double snr_est = opt.snr_est ? *opt.snr_est : snr_test;
        ChannelModel ch;
        ch.power = opt.power;
        ch.sigma2 = noise_power_for_snr(opt.power, snr_test);
        ch.sigma2_est = noise_power_for_snr(opt.power, snr_est);
        for (const auto& policy : policies) {
            std::vector<std::vector<double>> vals(opt.metrics.size());
            for (size_t ci = 0; ci < seqs.size(); ci++) {
                std::string tag = std::to_string(si) + "_" + policy + "_" +
                                  std::to_string(ci);
                Rng chan = Rng(opt.seed).stream("eval_chan_" + tag);
                Rng emul = Rng(opt.seed).stream("eval_emul_" + tag);
                auto r = transmit_sequence(p, policy == "learned" ? qnet : nullptr,
                                           seqs[ci], ch, budget, Metric::psnr, lv, chan,
                                           emul);
                for (size_t mi = 0; mi < opt.metrics.size(); mi++)
                    vals[mi].push_back(
                        sequence_quality(r.originals, r.recons, opt.metrics[mi], lv));
            }
            for (size_t mi = 0; mi < opt.metrics.size(); mi++) {
                double mean = 0.0;
                for (double v : vals[mi]) mean += v;
                mean /= (double)vals[mi].size();
                double var = 0.0;
                for (double v : vals[mi]) var += (v - mean) * (v - mean);
                var /= (double)vals[mi].size();
                EvalRecord rec;
                rec.snr_test = snr_test;
                rec.snr_est = snr_est;
                rec.policy = policy;
                rec.metric = metric_name(opt.metrics[mi]);
                rec.mean = mean;
                rec.std_dev = std::sqrt(var);
                recs.push_back(std::move(rec));
            }
        }
    }
    return recs;
}

void write_records_csv(const std::vector<EvalRecord>& recs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "snr_test,snr_est,policy,metric,mean,std\n";
    for (const auto& r : recs)
        out << fmt_g(r.snr_test) << "," << fmt_g(r.snr_est) << "," << r.policy << ","
            << r.metric << "," << fmt_f(r.mean) << "," << fmt_f(r.std_dev) << "\n";
}

namespace {

const char* kPalette[6] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                           "#ff7f0e", "#8c564b"};

std::string fmt_coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace

void write_sweep_svg(const std::vector<EvalRecord>& recs, Metric metric,
                     const std::string& path) {
    std::vector<const EvalRecord*> rows;
    for (const auto& r : recs)
        if (r.metric == metric_name(metric)) rows.push_back(&r);
    if (rows.empty()) throw std::invalid_argument("no records for the requested metric");

    // one series per (policy, estimate mode)
    std::vector<std::string> series_keys;
    auto key_of = [](const EvalRecord& r) {
        bool matched = r.snr_test == r.snr_est;
        return r.policy + (matched ? "" : " (est " + fmt_g(r.snr_est) + " dB)");
    };
    for (const auto* r : rows) {
        auto k = key_of(*r);
        if (std::find(series_keys.begin(), series_keys.end(), k) == series_keys.end())
            series_keys.push_back(k);
    }

    double x_min = rows[0]->snr_test, x_max = rows[0]->snr_test;
    double y_min = rows[0]->mean, y_max = rows[0]->mean;
    for (const auto* r : rows) {
        x_min = std::min(x_min, r->snr_test);
        x_max = std::max(x_max, r->snr_test);
        y_min = std::min(y_min, r->mean);
        y_max = std::max(y_max, r->mean);
    }
    if (x_max == x_min) x_max = x_min + 1.0;
    double pad = (y_max - y_min) * 0.08;
    if (pad == 0.0) pad = std::max(1e-6, std::fabs(y_max) * 0.1 + 1e-6);
    y_min -= pad;
    y_max += pad;

    const double W = 640, H = 420, L = 62, R = 16, T = 18, B = 46;
    auto sx = [&](double v) { return L + (v - x_min) / (x_max - x_min) * (W - L - R); };
    auto sy = [&](double v) { return H - B - (v - y_min) / (y_max - y_min) * (H - T - B); };

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\""
        << H << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    out << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    out << "<g stroke=\"#333\" stroke-width=\"1\" fill=\"none\">\n";
    out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\""
        << H - B << "\"/>\n";
    out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\""
        << H - B << "\"/>\n";
    out << "</g>\n";

    // x ticks every 5 dB on multiples of 5
    double tick0 = std::ceil(x_min / 5.0) * 5.0;
    for (double v = tick0; v <= x_max + 1e-9; v += 5.0) {
        double x = sx(v);
        out << "<line x1=\"" << fmt_coord(x) << "\" y1=\"" << H - B << "\" x2=\""
            << fmt_coord(x) << "\" y2=\"" << H - B + 5 << "\" stroke=\"#333\"/>\n";
        out << "<text x=\"" << fmt_coord(x) << "\" y=\"" << H - B + 19
            << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">"
            << fmt_g(v) << "</text>\n";
    }
    // y ticks: 6 even divisions
    for (int i = 0; i <= 5; i++) {
        double v = y_min + (y_max - y_min) * i / 5.0;
        double y = sy(v);
        out << "<line x1=\"" << L - 5 << "\" y1=\"" << fmt_coord(y) << "\" x2=\"" << L
            << "\" y2=\"" << fmt_coord(y) << "\" stroke=\"#333\"/>\n";
        out << "<text x=\"" << L - 8 << "\" y=\"" << fmt_coord(y + 4)
            << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">"
            << fmt_f(v, 2) << "</text>\n";
    }
    out << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10
        << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">"
           "channel SNR (dB)</text>\n";
    out << "<text x=\"14\" y=\"" << (T + H - B) / 2
        << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" "
           "transform=\"rotate(-90 14 "
        << (T + H - B) / 2 << ")\">" << metric_name(metric)
        << (metric == Metric::psnr ? " (dB)" : "") << "</text>\n";

    for (size_t si = 0; si < series_keys.size(); si++) {
        const char* color = kPalette[si % 6];
        out << "<polyline fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"1.8\" points=\"";
        for (const auto* r : rows)
            if (key_of(*r) == series_keys[si])
                out << fmt_coord(sx(r->snr_test)) << "," << fmt_coord(sy(r->mean)) << " ";
        out << "\"/>\n";
        for (const auto* r : rows)
            if (key_of(*r) == series_keys[si])
                out << "<circle cx=\"" << fmt_coord(sx(r->snr_test)) << "\" cy=\""
                    << fmt_coord(sy(r->mean)) << "\" r=\"2.4\" fill=\"" << color
                    << "\"/>\n";
        double ly = T + 16 + 16.0 * (double)si;
        out << "<line x1=\"" << L + 10 << "\" y1=\"" << fmt_coord(ly - 4) << "\" x2=\""
            << L + 34 << "\" y2=\"" << fmt_coord(ly - 4) << "\" stroke=\"" << color
            << "\" stroke-width=\"1.8\"/>\n";
        out << "<text x=\"" << L + 40 << "\" y=\"" << fmt_coord(ly)
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << series_keys[si]
            << "</text>\n";
    }
    out << "</svg>\n";
}

void emit_outputs(const std::vector<EvalRecord>& recs, const std::string& out_dir) {
    fs::create_directories(out_dir);
    write_records_csv(recs, out_dir + "/records.csv");
    for (Metric m : {Metric::psnr, Metric::ms_ssim}) {
        bool present = false;
        for (const auto& r : recs)
            if (r.metric == metric_name(m)) present = true;
        if (present)
            write_sweep_svg(recs, m,
                            out_dir + "/sweep_" + std::string(metric_name(m)) + ".svg");
    }
}

std::vector<double> snr_grid(double lo, double hi, double step) {
    if (step <= 0.0) throw std::invalid_argument("snr step must be positive");
    if (hi < lo) throw std::invalid_argument("snr range is reversed");
    std::vector<double> g;
    for (double v = lo; v <= hi + 1e-9; v += step) g.push_back(v);
    return g;
}

}  // namespace wirevid
