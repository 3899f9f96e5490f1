#include "wirevid/alloc.hpp"

#include <cmath>
#include <stdexcept>

#include "wirevid/ssw.hpp"
#include "wirevid/video.hpp"

namespace wirevid {

std::vector<AllocAction> enumerate_actions(int n, int budget) {
    if (n < 1 || budget < 0) throw std::invalid_argument("bad action space");
    std::vector<AllocAction> out;
    AllocAction cur(n, 0);
    // lexicographic by construction: fill slot `i`, give the tail the rest
    auto rec = [&](auto&& self, int i, int left) -> void {
        if (i == n - 1) {
            cur[i] = left;
            out.push_back(cur);
            return;
        }
        for (int v = 0; v <= left; v++) {
            cur[i] = v;
            self(self, i + 1, left - v);
        }
    };
    rec(rec, 0, budget);
    return out;
}

int64_t count_actions(int n, int budget) {
    // C(budget + n - 1, n - 1)
    int64_t r = 1;
    for (int i = 1; i <= n - 1; i++) r = r * (budget + i) / i;
    return r;
}

AllocAction uniform_action(int n, int budget) {
    AllocAction a(n, budget / n);
    a[n - 1] += budget - n * (budget / n);
    return a;
}

Tensor AllocState::q_input() const {
    float fs = 1.0f / 255.0f;
    int N = (int)frames.size();
    auto sched = interpolation_schedule(N);
    std::vector<Tensor> stacks;
    for (size_t j = 0; j < sched.size(); j++) {
        auto [i, t] = sched[j];
        stacks.push_back(mul_k(frames[i - 1], fs));
        stacks.push_back(mul_k(refs[i - t], fs));
        stacks.push_back(mul_k(refs[i + t], fs));
        stacks.push_back(mul_k(res_m[j], fs));
        stacks.push_back(mul_k(res_p[j], fs));
        stacks.push_back(mul_k(flow_m[j], 0.125f));
        stacks.push_back(mul_k(flow_p[j], 0.125f));
    }
    stacks.push_back(mul_k(frames[N - 1], fs));
    stacks.push_back(mul_k(refs[0], fs));
    Tensor q = concat_ch(stacks);
    return constant(q->shape, q->val);  // detach: states are data, not graph
}

AllocState build_state(const ModelParams& p, const Tensor& prev_key_tx,
                       const Tensor& prev_key_rx, const std::vector<Tensor>& frames,
                       const ChannelModel& ch, int budget, Rng& emul_rng) {
    ch.validate();
    int N = p.cfg.gop;
    if ((int)frames.size() != N) throw std::invalid_argument("frame count != group size");
    AllocAction a = uniform_action(N, budget);
    for (int v : a)
        if (v > p.cfg.blocks) throw std::invalid_argument("budget exceeds the latent blocks");
    AllocState s;
    s.frames = frames;
    s.recv_ref = prev_key_rx;
    s.sigma2_est = ch.sigma2_est;
    float snr_est = (float)cond_snr_db(ch.power, ch.sigma2_est);

    s.refs.assign(N + 1, nullptr);
    s.refs[0] = detach(prev_key_tx);
    s.refs[N] = detach(emulate_reference(p, frames[N - 1], a[N - 1], ch, emul_rng));

    // features are data for the allocator, so every stored tensor is detached
    std::vector<std::vector<Tensor>> vols(N + 1);
    auto vol_of = [&](int i) -> const std::vector<Tensor>& {
        if (vols[i].empty())
            vols[i] = build_volume(s.refs[i], p.cfg.ssf_sigma0, p.cfg.ssf_levels);
        return vols[i];
    };
    for (auto [i, t] : interpolation_schedule(N)) {
        const Tensor& x = frames[i - 1];
        Tensor f_m = detach(estimate_ssf(p, s.refs[i - t], x));
        Tensor f_p = detach(estimate_ssf(p, s.refs[i + t], x));
        Tensor r_m = detach(warp_residual(x, ssw_sample(vol_of(i - t), f_m)));
        Tensor r_p = detach(warp_residual(x, ssw_sample(vol_of(i + t), f_p)));
        Tensor z = encode_interp(p, x, s.refs[i - t], s.refs[i + t], r_m, r_p, f_m, f_p,
                                 snr_est);
        Tensor zm = mask_blocks(z, p.cfg.blocks, a[i - 1]);
        Tensor y = zm;
        if (a[i - 1] > 0) {
            Tensor zn = power_normalize_t(zm, ch.power);
            y = transmit_awgn_t(zn, ch.sigma2_est,
                                block_mask(zn->numel(), p.cfg.blocks, a[i - 1]), emul_rng);
        }
        InterpBundle b = decode_interp(p, y, snr_est);
        s.refs[i] = detach(fuse_interp(b, vol_of(i - t), vol_of(i + t)));
        s.res_m.push_back(r_m);
        s.res_p.push_back(r_p);
        s.flow_m.push_back(f_m);
        s.flow_p.push_back(f_p);
    }
    return s;
}

QNet::QNet(int in_ch, int hidden, int feat, int n_actions_, Rng& rng)
    : trunk(in_ch, hidden, feat, rng), head(feat, n_actions_, rng), n_actions(n_actions_) {}

Tensor QNet::operator()(const Tensor& q_input, float snr_est_db) const {
    return head(global_avg_pool(trunk(q_input, snr_est_db)));
}

void QNet::collect(std::vector<Tensor>& out) const {
    trunk.collect(out);
    head.collect(out);
}

int select_action(const Tensor& q) {
    int best = 0;
    for (int i = 1; i < q->numel(); i++)
        if (q->val[i] > q->val[best]) best = i;
    return best;
}

void ReplayBuffer::push(Transition t) {
    if (buf.size() < capacity) {
        buf.push_back(std::move(t));
    } else {
        buf[head] = std::move(t);
        head = (head + 1) % capacity;
    }
}

std::vector<const Transition*> ReplayBuffer::sample(int n, Rng& rng) const {
    if ((size_t)n > buf.size()) throw std::invalid_argument("not enough transitions");
    std::vector<size_t> idx(buf.size());
    for (size_t i = 0; i < idx.size(); i++) idx[i] = i;
    std::vector<const Transition*> out;
    for (int i = 0; i < n; i++) {
        size_t j = i + rng.randint((int)(idx.size() - i));
        std::swap(idx[i], idx[j]);
        out.push_back(&buf[idx[i]]);
    }
    return out;
}

double epsilon_schedule(const DqnConfig& c, int episode) {
    return c.eps_end + (c.eps0 - c.eps_end) * std::exp(-(double)episode / c.eps_lambda);
}

Tensor dqn_loss(const QNet& online, const QNet& target,
                const std::vector<const Transition*>& batch, double gamma) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    Tensor acc;
    for (const Transition* t : batch) {
        double tgt = t->reward;
        if (!t->terminal) {
            Tensor q2 = target(t->s2, t->snr_est_db);
            tgt += gamma * q2->val[select_action(q2)];
        }
        Tensor q = online(t->s, t->snr_est_db);
        Tensor err = square(sub(pick(q, t->action), constant({1}, (float)tgt)));
        acc = acc ? add(acc, err) : err;
    }
    return mul_k(acc, 1.0f / (float)batch.size());
}

void soft_update(const std::vector<Tensor>& target, const std::vector<Tensor>& online,
                 double tau) {
    if (target.size() != online.size()) throw std::invalid_argument("param list mismatch");
    for (size_t i = 0; i < target.size(); i++) {
        if (target[i]->val.size() != online[i]->val.size())
            throw std::invalid_argument("param shape mismatch");
        for (size_t j = 0; j < target[i]->val.size(); j++)
            target[i]->val[j] =
                (float)(tau * online[i]->val[j] + (1.0 - tau) * target[i]->val[j]);
    }
}

void copy_values(const std::vector<Tensor>& dst, const std::vector<Tensor>& src) {
    if (dst.size() != src.size()) throw std::invalid_argument("param list mismatch");
    for (size_t i = 0; i < dst.size(); i++) dst[i]->val = src[i]->val;
}

StepResult step_env(const ModelParams& p, const AllocState& s, const AllocAction& a,
                    const ChannelModel& ch, Metric objective, int msssim_levels,
                    Rng& chan_rng, Rng& emul_rng) {
    int N = p.cfg.gop;
    if ((int)a.size() != N) throw std::invalid_argument("action size != group size");
    int sum = 0;
    for (int v : a) {
        if (v < 0 || v > p.cfg.blocks)
            throw std::invalid_argument("per-frame block count out of range");
        sum += v;
    }
    if (sum < 1) throw std::invalid_argument("action sends nothing");
    GopResult g =
        transmit_gop(p, s.refs[0], s.recv_ref, s.frames, a, ch, chan_rng, emul_rng);
    double loss_acc = 0.0;
    for (int i = 0; i < N; i++) {
        if (objective == Metric::psnr)
            loss_acc += mse_loss(s.frames[i], g.receiver[i])->scalar();
        else
            loss_acc += msssim_loss(s.frames[i], g.receiver[i], msssim_levels)->scalar();
    }
    StepResult r;
    r.reward = -std::log10(loss_acc / (double)N);
    r.receiver = g.receiver;
    r.next_key_tx = constant(g.emulated[N - 1]->shape, g.emulated[N - 1]->val);
    r.next_key_rx = constant(g.receiver[N - 1]->shape, g.receiver[N - 1]->val);
    return r;
}

}  // namespace wirevid
