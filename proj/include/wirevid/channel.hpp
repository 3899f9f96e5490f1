#pragma once

#include <complex>
#include <vector>

#include "wirevid/nn.hpp"
#include "wirevid/tensor.hpp"

namespace wirevid {

// Complex AWGN channel with an average power constraint. sigma2 is the true
// noise power, sigma2_est what the transmitter believes it to be.
struct ChannelModel {
    double power = 1.0;
    double sigma2 = 0.0;
    double sigma2_est = 1.0;
    void validate() const;
};

double snr_db(double power, double sigma2);
double noise_power_for_snr(double power, double snr_db);

// dB scalar fed to the SNR-conditioned modules, saturating at 60 dB so a
// zero noise estimate stays finite
double cond_snr_db(double power, double sigma2_est);

// k complex symbols in V contiguous blocks of k/V; with refinement level v,
// blocks v+1..V are exactly zero.
struct LatentCode {
    int k = 0, V = 1, v = 1;
    std::vector<std::complex<float>> sym;

    int block_len() const { return k / V; }
};

// symbol j = reals[2j] + i*reals[2j+1]
LatentCode pair_real_to_complex(const std::vector<float>& reals, int V, int v);
std::vector<float> unpair_to_reals(const LatentCode& z);

// zhat = sqrt(k*power) * z / ||z||, norm taken over all k symbols (zeros
// included). Throws on an all-zero latent.
void power_normalize(LatentCode& z, double power);

// 1.0 over reals belonging to blocks 1..v, 0.0 elsewhere (n_reals = 2k)
std::vector<float> block_mask(int n_reals, int V, int v);

// per-real noise, sigma2/2 per quadrature, drawn in ascending real index over
// active positions only so the symbol and tensor paths consume the generator
// identically. Empty mask means all positions are active.
std::vector<float> draw_awgn(int n_reals, double sigma2, const std::vector<float>& mask,
                             Rng& rng);

// sigma2 == 0 is an identity
void transmit_awgn(LatentCode& z, double sigma2, Rng& rng);

// graph-path twins used during training; gradients flow through the
// normalization and straight through the noise addition
Tensor power_normalize_t(const Tensor& z, double power);
Tensor transmit_awgn_t(const Tensor& z, double sigma2, const std::vector<float>& mask,
                       Rng& rng);

double mean_symbol_power(const LatentCode& z);  // (1/k) * ||z||^2

}  // namespace wirevid
