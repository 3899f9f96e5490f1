#include "wirevid/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace wirevid {

void ChannelModel::validate() const {
    if (!(power > 0.0)) throw std::invalid_argument("channel power must be positive");
    if (!(sigma2 >= 0.0)) throw std::invalid_argument("noise power must be non-negative");
    if (!(sigma2_est >= 0.0))
        throw std::invalid_argument("noise power estimate must be non-negative");
}

double snr_db(double power, double sigma2) {
    if (!(power > 0.0) || !(sigma2 > 0.0))
        throw std::invalid_argument("snr needs positive power and noise");
    return 10.0 * std::log10(power / sigma2);
}

double noise_power_for_snr(double power, double snr) {
    if (!(power > 0.0)) throw std::invalid_argument("snr needs positive power");
    return power / std::pow(10.0, snr / 10.0);
}

double cond_snr_db(double power, double sigma2_est) {
    // the gated modules take the estimate as a dB scalar; saturate it so a
    // perfect-channel estimate stays finite
    return snr_db(power, std::max(sigma2_est, power * 1e-6));
}

LatentCode pair_real_to_complex(const std::vector<float>& reals, int V, int v) {
    if (reals.size() % 2 != 0) throw std::invalid_argument("odd number of reals");
    LatentCode z;
    z.k = (int)reals.size() / 2;
    z.V = V;
    z.v = v;
    if (V < 1 || z.k % V != 0)
        throw std::invalid_argument("symbol count not divisible into blocks");
    if (v < 0 || v > V) throw std::invalid_argument("refinement level out of range");
    z.sym.resize(z.k);
    for (int j = 0; j < z.k; j++) z.sym[j] = {reals[2 * j], reals[2 * j + 1]};
    return z;
}

std::vector<float> unpair_to_reals(const LatentCode& z) {
    std::vector<float> reals(2 * z.k);
    for (int j = 0; j < z.k; j++) {
        reals[2 * j] = z.sym[j].real();
        reals[2 * j + 1] = z.sym[j].imag();
    }
    return reals;
}

double mean_symbol_power(const LatentCode& z) {
    double acc = 0.0;
    for (const auto& s : z.sym)
        acc += (double)s.real() * s.real() + (double)s.imag() * s.imag();
    return acc / (double)z.k;
}

void power_normalize(LatentCode& z, double power) {
    double ss = 0.0;
    for (const auto& s : z.sym)
        ss += (double)s.real() * s.real() + (double)s.imag() * s.imag();
    if (ss == 0.0) throw std::domain_error("cannot normalize an all-zero latent");
    double scale = std::sqrt((double)z.k * power / ss);
    for (auto& s : z.sym) s = {(float)(s.real() * scale), (float)(s.imag() * scale)};
}

std::vector<float> block_mask(int n_reals, int V, int v) {
    if (V < 1) throw std::invalid_argument("need at least one block");
    if (v < 0 || v > V) throw std::invalid_argument("block count out of range");
    if (n_reals % (2 * V) != 0) throw std::invalid_argument("reals not divisible into blocks");
    std::vector<float> m(n_reals, 0.0f);
    int per_block = n_reals / V;
    std::fill(m.begin(), m.begin() + (size_t)v * per_block, 1.0f);
    return m;
}

std::vector<float> draw_awgn(int n_reals, double sigma2, const std::vector<float>& mask,
                             Rng& rng) {
    std::vector<float> n(n_reals, 0.0f);
    if (sigma2 == 0.0) return n;
    float s = (float)std::sqrt(sigma2 / 2.0);
    for (int i = 0; i < n_reals; i++)
        if (mask.empty() || mask[i] != 0.0f) n[i] = s * rng.normal();
    return n;
}

void transmit_awgn(LatentCode& z, double sigma2, Rng& rng) {
    if (sigma2 == 0.0) return;
    auto mask = block_mask(2 * z.k, z.V, z.v);
    auto n = draw_awgn(2 * z.k, sigma2, mask, rng);
    for (int j = 0; j < z.k; j++)
        z.sym[j] += std::complex<float>(n[2 * j], n[2 * j + 1]);
}

Tensor power_normalize_t(const Tensor& z, double power) {
    if (z->numel() % 2 != 0) throw std::invalid_argument("odd number of latent reals");
    int k = z->numel() / 2;
    Tensor ss = sum_squares(z);
    if (ss->val[0] == 0.0f) throw std::domain_error("cannot normalize an all-zero latent");
    Tensor inv = mul_k(pow_k(ss, -0.5f), (float)std::sqrt((double)k * power));
    return scale_by(z, inv);
}

Tensor transmit_awgn_t(const Tensor& z, double sigma2, const std::vector<float>& mask,
                       Rng& rng) {
    if (sigma2 == 0.0) return z;
    auto n = draw_awgn(z->numel(), sigma2, mask, rng);
    return add(z, constant(z->shape, std::move(n)));
}

}  // namespace wirevid
