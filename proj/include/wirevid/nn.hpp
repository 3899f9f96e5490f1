#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wirevid/tensor.hpp"

namespace wirevid {

// Deterministic RNG: all randomness derives from a base seed plus a stream
// name, so runs are reproducible regardless of call interleaving elsewhere.
// Normal/uniform are hand-rolled (Box-Muller over 53-bit uniforms) to avoid
// libstdc++ distribution differences.
struct Rng {
    uint64_t seed = 0;
    uint64_t state[2] = {0, 0};  // xoshiro-style splitmix init over mt19937_64

    explicit Rng(uint64_t s);
    uint64_t next_u64();
    double uniform();  // [0,1)
    float uniform(float a, float b);
    float normal();
    int randint(int n);  // [0,n)
    Rng stream(const std::string& name) const;
};

std::vector<float> gaussian_kernel(float sigma, int radius);  // normalized, length 2r+1

struct Conv2d {
    Tensor w, b;
    int stride = 1, pad = 0;
    Conv2d() = default;
    Conv2d(int cin, int cout, int k, int stride_, Rng& rng, bool bias = true);
    Tensor operator()(const Tensor& x) const { return conv2d(x, w, b, stride, pad); }
    void collect(std::vector<Tensor>& out) const;
};

struct Dense {
    Tensor w, b;
    Dense() = default;
    Dense(int n_in, int n_out, Rng& rng);
    Tensor operator()(const Tensor& x) const { return linear(x, w, b); }
    void collect(std::vector<Tensor>& out) const;
};

// Generalized divisive normalization: y_i = x_i / sqrt(beta_i + sum_j gamma_ij x_j^2),
// with the inverse form multiplying instead. beta/gamma are squares of the stored
// parameters so they stay positive; off-diagonal gamma starts near zero but not at
// zero so those couplings still receive gradient.
struct Gdn {
    Tensor beta_raw, gamma_raw;  // (C), (C,C,1,1)
    bool inverse = false;
    Gdn() = default;
    Gdn(int C, bool inverse_);
    Tensor operator()(const Tensor& x) const;
    void collect(std::vector<Tensor>& out) const;
};

// Bottleneck residual unit: 1x1 down, 3x3, 1x1 up around a skip.
struct ResUnit {
    Conv2d c1, c2, c3;
    ResUnit() = default;
    ResUnit(int C, Rng& rng);
    Tensor operator()(const Tensor& x) const;
    void collect(std::vector<Tensor>& out) const;
};

// Simplified spatial attention: out = x + trunk(x) * sigmoid(mask(x)).
struct AttentionBlock {
    ResUnit t1, t2, t3, m1, m2, m3;
    Conv2d mask_out;
    AttentionBlock() = default;
    AttentionBlock(int C, Rng& rng);
    Tensor operator()(const Tensor& x) const;
    void collect(std::vector<Tensor>& out) const;
};

// Channel gating conditioned on the channel state: pooled features are
// concatenated with the SNR estimate (dB / 20) and mapped through two dense
// layers to per-channel sigmoid scales.
struct AFModule {
    Dense fc1, fc2;
    AFModule() = default;
    AFModule(int C, Rng& rng);
    Tensor operator()(const Tensor& x, float snr_db) const;
    void collect(std::vector<Tensor>& out) const;
};

// conv 3x3 to 4*cout channels followed by depth-to-space, doubling H and W.
struct UpConv {
    Conv2d conv;
    UpConv() = default;
    UpConv(int cin, int cout, Rng& rng);
    Tensor operator()(const Tensor& x) const { return pixel_shuffle2(conv(x)); }
    void collect(std::vector<Tensor>& out) const;
};

}  // namespace wirevid
