#include "wirevid/codec.hpp"

#include <cmath>
#include <stdexcept>

#include "wirevid/ssw.hpp"
#include "wirevid/video.hpp"

namespace wirevid {

int CodecConfig::latent_symbols(int h, int w) const {
    return (h / down) * (w / down) * channels / 2;
}

double CodecConfig::bandwidth_ratio(int h, int w) const {
    return (double)latent_symbols(h, w) / (3.0 * h * w * gop);
}

void CodecConfig::validate(int h, int w) const {
    if (h % down != 0 || w % down != 0)
        throw std::invalid_argument("frame dims must be divisible by " + std::to_string(down));
    if (gop < 1 || (gop & (gop - 1)) != 0)
        throw std::invalid_argument("group size must be a power of two");
    if (((h / down) * (w / down) * channels) % 2 != 0)
        throw std::invalid_argument("latent real count must be even");
    if (blocks < 1 || latent_symbols(h, w) % blocks != 0)
        throw std::invalid_argument("symbol count must divide into refinement blocks");
    if (hidden % 2 != 0) throw std::invalid_argument("hidden width must be even");
    if (ssf_levels < 1) throw std::invalid_argument("need at least one blur level");
}

Encoder::Encoder(int cin, int hidden, int cout, Rng& rng)
    : c1(cin, hidden, 5, 2, rng), c2(hidden, hidden, 5, 2, rng),
      c3(hidden, hidden, 5, 2, rng), c4(hidden, cout, 5, 2, rng),
      g1(hidden, false), g2(hidden, false), g3(hidden, false), g4(cout, false),
      a1(hidden, rng), a2(hidden, rng), a3(hidden, rng), a4(cout, rng),
      at2(hidden, rng), at4(cout, rng) {}

Tensor Encoder::operator()(const Tensor& x, float snr_db) const {
    Tensor h = a1(g1(c1(x)), snr_db);
    h = at2(a2(g2(c2(h)), snr_db));
    h = a3(g3(c3(h)), snr_db);
    return at4(a4(g4(c4(h)), snr_db));
}

void Encoder::collect(std::vector<Tensor>& out) const {
    c1.collect(out); c2.collect(out); c3.collect(out); c4.collect(out);
    g1.collect(out); g2.collect(out); g3.collect(out); g4.collect(out);
    a1.collect(out); a2.collect(out); a3.collect(out); a4.collect(out);
    at2.collect(out); at4.collect(out);
}

Decoder::Decoder(int cin, int hidden, int cout, Rng& rng)
    : at0(cin, rng), at2(hidden, rng), u1(cin, hidden, rng), u2(hidden, hidden, rng),
      u3(hidden, hidden, rng), u4(hidden, cout, rng), g1(hidden, true), g2(hidden, true),
      g3(hidden, true), a1(hidden, rng), a2(hidden, rng), a3(hidden, rng) {}

Tensor Decoder::operator()(const Tensor& z, float snr_db) const {
    Tensor h = at0(z);
    h = a1(g1(u1(h)), snr_db);
    h = at2(a2(g2(u2(h)), snr_db));
    h = a3(g3(u3(h)), snr_db);
    return u4(h);
}

void Decoder::collect(std::vector<Tensor>& out) const {
    at0.collect(out); at2.collect(out);
    u1.collect(out); u2.collect(out); u3.collect(out); u4.collect(out);
    g1.collect(out); g2.collect(out); g3.collect(out);
    a1.collect(out); a2.collect(out); a3.collect(out);
}

SsfNet::SsfNet(int hidden, Rng& rng) {
    int w0 = hidden / 2, w1 = hidden, w2 = hidden + hidden / 2;
    d0 = Conv2d(6, w0, 3, 1, rng);
    d1 = Conv2d(w0, w1, 3, 2, rng);
    d1b = Conv2d(w1, w1, 3, 1, rng);
    d2 = Conv2d(w1, w2, 3, 2, rng);
    d2b = Conv2d(w2, w2, 3, 1, rng);
    u1 = Conv2d(w2 + w1, w1, 3, 1, rng);
    u0 = Conv2d(w1 + w0, w0, 3, 1, rng);
    head = Conv2d(w0, 3, 3, 1, rng);
}

Tensor SsfNet::operator()(const Tensor& ref, const Tensor& target) const {
    Tensor x = mul_k(concat_ch({ref, target}), 1.0f / 255.0f);
    Tensor c0 = relu(d0(x));
    Tensor c1 = relu(d1b(relu(d1(c0))));
    Tensor c2 = relu(d2b(relu(d2(c1))));
    Tensor h1 = relu(u1(concat_ch({upsample_nearest2(c2), c1})));
    Tensor h0 = relu(u0(concat_ch({upsample_nearest2(h1), c0})));
    return head(h0);
}

void SsfNet::collect(std::vector<Tensor>& out) const {
    d0.collect(out); d1.collect(out); d1b.collect(out); d2.collect(out);
    d2b.collect(out); u1.collect(out); u0.collect(out); head.collect(out);
}

ModelParams::ModelParams(const CodecConfig& c, Rng& rng) : cfg(c) {
    Rng r1 = rng.stream("key_enc"), r2 = rng.stream("key_dec"), r3 = rng.stream("interp_enc"),
        r4 = rng.stream("interp_dec"), r5 = rng.stream("ssf");
    key_enc = Encoder(3, c.hidden, c.channels, r1);
    key_dec = Decoder(c.channels, c.hidden, 3, r2);
    interp_enc = Encoder(21, c.hidden, c.channels, r3);
    interp_dec = Decoder(c.channels, c.hidden, 12, r4);
    ssf = SsfNet(c.hidden, r5);
}

std::vector<std::pair<std::string, std::vector<Tensor>>> ModelParams::groups() const {
    std::vector<std::pair<std::string, std::vector<Tensor>>> g(5);
    g[0].first = "key_enc";
    key_enc.collect(g[0].second);
    g[1].first = "key_dec";
    key_dec.collect(g[1].second);
    g[2].first = "interp_enc";
    interp_enc.collect(g[2].second);
    g[3].first = "interp_dec";
    interp_dec.collect(g[3].second);
    g[4].first = "ssf";
    ssf.collect(g[4].second);
    return g;
}

std::vector<Tensor> ModelParams::all_params() const {
    std::vector<Tensor> out;
    for (auto& [name, ps] : groups()) out.insert(out.end(), ps.begin(), ps.end());
    return out;
}

Tensor encode_key_frame(const ModelParams& p, const Tensor& x, float snr_db) {
    return p.key_enc(mul_k(x, 1.0f / 255.0f), snr_db);
}

Tensor decode_key_frame(const ModelParams& p, const Tensor& z, float snr_db) {
    return mul_k(sigmoid(p.key_dec(z, snr_db)), 255.0f);
}

Tensor estimate_ssf(const ModelParams& p, const Tensor& ref, const Tensor& target) {
    return p.ssf(ref, target);
}

Tensor encode_interp(const ModelParams& p, const Tensor& x, const Tensor& ref_m,
                     const Tensor& ref_p, const Tensor& res_m, const Tensor& res_p,
                     const Tensor& flow_m, const Tensor& flow_p, float snr_db) {
    float s = 1.0f / 255.0f;
    Tensor stack = concat_ch({mul_k(x, s), mul_k(ref_m, s), mul_k(ref_p, s),
                              mul_k(res_m, s), mul_k(res_p, s), mul_k(flow_m, 0.125f),
                              mul_k(flow_p, 0.125f)});
    return p.interp_enc(stack, snr_db);
}

InterpBundle decode_interp(const ModelParams& p, const Tensor& z, float snr_db) {
    Tensor raw = p.interp_dec(z, snr_db);
    InterpBundle b;
    b.flow_minus = slice_ch(raw, 0, 3);
    b.flow_plus = slice_ch(raw, 3, 3);
    b.residual = mul_k(tanh_op(slice_ch(raw, 6, 3)), 255.0f);
    b.mask = softmax_ch(slice_ch(raw, 9, 3));
    return b;
}

namespace {

Tensor rep3(const Tensor& m1) { return concat_ch({m1, m1, m1}); }

}  // namespace

Tensor fuse_interp(const InterpBundle& b, const std::vector<Tensor>& vol_m,
                   const std::vector<Tensor>& vol_p) {
    Tensor warped_m = ssw_sample(vol_m, b.flow_minus);
    Tensor warped_p = ssw_sample(vol_p, b.flow_plus);
    Tensor acc = mul(rep3(slice_ch(b.mask, 0, 1)), warped_m);
    acc = add(acc, mul(rep3(slice_ch(b.mask, 1, 1)), warped_p));
    acc = add(acc, mul(rep3(slice_ch(b.mask, 2, 1)), b.residual));
    return clamp(acc, 0.0f, 255.0f);
}

Tensor mask_blocks(const Tensor& z, int V, int v) {
    if (v == V) return z;
    return mul(z, constant(z->shape, block_mask(z->numel(), V, v)));
}

namespace {

// shared tail: truncate, normalize, one noise draw, leaving the decode to the caller
Tensor through_channel(const Tensor& z, int V, int v, double power, double sigma2,
                       Rng& rng) {
    Tensor zm = mask_blocks(z, V, v);
    if (v == 0) return zm;
    Tensor zn = power_normalize_t(zm, power);
    return transmit_awgn_t(zn, sigma2, block_mask(zn->numel(), V, v), rng);
}

}  // namespace

Tensor emulate_reference(const ModelParams& p, const Tensor& x, int v,
                         const ChannelModel& ch, Rng& emul_rng) {
    ch.validate();
    float snr_est = (float)cond_snr_db(ch.power, ch.sigma2_est);
    Tensor z = encode_key_frame(p, x, snr_est);
    Tensor y = through_channel(z, p.cfg.blocks, v, ch.power, ch.sigma2_est, emul_rng);
    return decode_key_frame(p, y, snr_est);
}

KeyTransmitResult transmit_key_frame(const ModelParams& p, const Tensor& x, int v,
                                     const ChannelModel& ch, Rng& chan_rng,
                                     Rng& emul_rng) {
    ch.validate();
    float snr_est = (float)cond_snr_db(ch.power, ch.sigma2_est);
    Tensor z = encode_key_frame(p, x, snr_est);
    Tensor zm = mask_blocks(z, p.cfg.blocks, v);
    KeyTransmitResult r;
    if (v == 0) {
        r.receiver = decode_key_frame(p, zm, snr_est);
        r.emulated = decode_key_frame(p, zm, snr_est);
        return r;
    }
    Tensor zn = power_normalize_t(zm, ch.power);
    auto mask = block_mask(zn->numel(), p.cfg.blocks, v);
    r.receiver =
        decode_key_frame(p, transmit_awgn_t(zn, ch.sigma2, mask, chan_rng), snr_est);
    r.emulated =
        decode_key_frame(p, transmit_awgn_t(zn, ch.sigma2_est, mask, emul_rng), snr_est);
    return r;
}

GopResult transmit_gop(const ModelParams& p, const Tensor& ref0_tx, const Tensor& ref0_rx,
                       const std::vector<Tensor>& frames, const std::vector<int>& alloc,
                       const ChannelModel& ch, Rng& chan_rng, Rng& emul_rng) {
    ch.validate();
    int N = p.cfg.gop;
    if ((int)frames.size() != N || (int)alloc.size() != N)
        throw std::invalid_argument("group needs one frame and one allocation per slot");
    float snr_est = (float)cond_snr_db(ch.power, ch.sigma2_est);
    auto sched = interpolation_schedule(N);

    std::vector<Tensor> tx_ref(N + 1), rx_ref(N + 1);
    tx_ref[0] = ref0_tx;
    rx_ref[0] = ref0_rx;
    std::vector<char> tx_needed(N + 1, 0);
    tx_needed[N] = 1;  // carried into the next group
    for (auto [i, t] : sched) tx_needed[i - t] = tx_needed[i + t] = 1;

    GopResult out;
    out.receiver.resize(N);
    out.emulated.resize(N);
    auto kr = transmit_key_frame(p, frames[N - 1], alloc[N - 1], ch, chan_rng, emul_rng);
    rx_ref[N] = out.receiver[N - 1] = kr.receiver;
    tx_ref[N] = out.emulated[N - 1] = kr.emulated;

    std::vector<std::vector<Tensor>> tx_vol(N + 1), rx_vol(N + 1);
    auto vol_of = [&](std::vector<std::vector<Tensor>>& cache, std::vector<Tensor>& refs,
                      int i) -> const std::vector<Tensor>& {
        if (cache[i].empty())
            cache[i] = build_volume(refs[i], p.cfg.ssf_sigma0, p.cfg.ssf_levels);
        return cache[i];
    };

    for (auto [i, t] : sched) {
        const Tensor& x = frames[i - 1];
        Tensor rm = tx_ref[i - t], rp = tx_ref[i + t];
        Tensor f_m = estimate_ssf(p, rm, x);
        Tensor f_p = estimate_ssf(p, rp, x);
        Tensor res_m = warp_residual(x, ssw_sample(vol_of(tx_vol, tx_ref, i - t), f_m));
        Tensor res_p = warp_residual(x, ssw_sample(vol_of(tx_vol, tx_ref, i + t), f_p));
        Tensor z = encode_interp(p, x, rm, rp, res_m, res_p, f_m, f_p, snr_est);

        int v = alloc[i - 1];
        Tensor zm = mask_blocks(z, p.cfg.blocks, v);
        Tensor y_rx = zm, zn;
        std::vector<float> mask;
        if (v > 0) {
            zn = power_normalize_t(zm, ch.power);
            mask = block_mask(zn->numel(), p.cfg.blocks, v);
            y_rx = transmit_awgn_t(zn, ch.sigma2, mask, chan_rng);
        }
        InterpBundle brx = decode_interp(p, y_rx, snr_est);
        rx_ref[i] = out.receiver[i - 1] =
            fuse_interp(brx, vol_of(rx_vol, rx_ref, i - t), vol_of(rx_vol, rx_ref, i + t));

        if (tx_needed[i]) {
            Tensor y_tx =
                v > 0 ? transmit_awgn_t(zn, ch.sigma2_est, mask, emul_rng) : zm;
            InterpBundle btx = decode_interp(p, y_tx, snr_est);
            tx_ref[i] = out.emulated[i - 1] = fuse_interp(
                btx, vol_of(tx_vol, tx_ref, i - t), vol_of(tx_vol, tx_ref, i + t));
        }
    }
    return out;
}

}  // namespace wirevid
