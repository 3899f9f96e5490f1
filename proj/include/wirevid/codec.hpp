#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "wirevid/channel.hpp"
#include "wirevid/nn.hpp"
#include "wirevid/tensor.hpp"

namespace wirevid {

// Two codecs share one latent budget: a key-frame codec and an interpolation
// codec that predicts a frame from two already-received references via
// scale-space warping. Latents are ordered refinement blocks, so truncating
// to the first v of V blocks trades bandwidth for quality.
struct CodecConfig {
    int channels = 48;  // latent channels
    int gop = 4;        // frames per group, power of two
    int blocks = 20;    // refinement blocks per latent
    int hidden = 64;    // feature width of the conv stages
    float ssf_sigma0 = 1.5f;
    int ssf_levels = 5;
    static constexpr int down = 16;  // four stride-2 stages

    int latent_symbols(int h, int w) const;       // complex symbols per frame
    double bandwidth_ratio(int h, int w) const;   // symbols per source value per group
    void validate(int h, int w) const;
};

// four stride-2 conv stages with divisive normalization and channel gating,
// spatial attention after stages 2 and 4
struct Encoder {
    Conv2d c1, c2, c3, c4;
    Gdn g1, g2, g3, g4;
    AFModule a1, a2, a3, a4;
    AttentionBlock at2, at4;
    Encoder() = default;
    Encoder(int cin, int hidden, int cout, Rng& rng);
    Tensor operator()(const Tensor& x, float snr_db) const;
    void collect(std::vector<Tensor>& out) const;
};

// mirror of the encoder: attention on the latent and mid features, pixel
// shuffle upsampling, no normalization or gating on the output stage
struct Decoder {
    AttentionBlock at0, at2;
    UpConv u1, u2, u3, u4;
    Gdn g1, g2, g3;
    AFModule a1, a2, a3;
    Decoder() = default;
    Decoder(int cin, int hidden, int cout, Rng& rng);
    Tensor operator()(const Tensor& z, float snr_db) const;
    void collect(std::vector<Tensor>& out) const;
};

// small two-level U-Net from (reference, target) to a scale-space flow field
struct SsfNet {
    Conv2d d0, d1, d1b, d2, d2b, u1, u0, head;
    SsfNet() = default;
    SsfNet(int hidden, Rng& rng);
    Tensor operator()(const Tensor& ref, const Tensor& target) const;
    void collect(std::vector<Tensor>& out) const;
};

struct InterpBundle {
    Tensor flow_minus, flow_plus;  // (3,H,W) scale-space flows, unconstrained
    Tensor residual;               // (3,H,W) in [-255,255]
    Tensor mask;                   // (3,H,W), softmax over channels
};

struct ModelParams {
    static constexpr uint32_t kVersion = 1;
    CodecConfig cfg;
    Encoder key_enc, interp_enc;
    Decoder key_dec, interp_dec;
    SsfNet ssf;

    ModelParams() = default;
    ModelParams(const CodecConfig& c, Rng& rng);
    std::vector<std::pair<std::string, std::vector<Tensor>>> groups() const;
    std::vector<Tensor> all_params() const;
};

Tensor encode_key_frame(const ModelParams& p, const Tensor& x, float snr_db);
Tensor decode_key_frame(const ModelParams& p, const Tensor& z, float snr_db);
Tensor estimate_ssf(const ModelParams& p, const Tensor& ref, const Tensor& target);
Tensor encode_interp(const ModelParams& p, const Tensor& x, const Tensor& ref_m,
                     const Tensor& ref_p, const Tensor& res_m, const Tensor& res_p,
                     const Tensor& flow_m, const Tensor& flow_p, float snr_db);
InterpBundle decode_interp(const ModelParams& p, const Tensor& z, float snr_db);
Tensor fuse_interp(const InterpBundle& b, const std::vector<Tensor>& vol_m,
                   const std::vector<Tensor>& vol_p);

// zeroes blocks v+1..V of the flattened latent
Tensor mask_blocks(const Tensor& z, int V, int v);

// the transmitter's local estimate of what the receiver will reconstruct:
// encode, truncate, normalize, pass through a noise draw at the estimated
// power, decode. v == 0 sends nothing and decodes an all-zero latent.
Tensor emulate_reference(const ModelParams& p, const Tensor& x, int v,
                         const ChannelModel& ch, Rng& emul_rng);

struct KeyTransmitResult {
    Tensor receiver;  // decoded from the true-noise draw
    Tensor emulated;  // decoded from the transmitter's estimate draw
};
KeyTransmitResult transmit_key_frame(const ModelParams& p, const Tensor& x, int v,
                                     const ChannelModel& ch, Rng& chan_rng,
                                     Rng& emul_rng);

struct GopResult {
    std::vector<Tensor> receiver;  // x_1..x_N as reconstructed at the receiver
    std::vector<Tensor> emulated;  // transmitter-side estimates (empty where unused)
};

// Transmits one group: the key frame first, then the interpolated frames in
// schedule order, each encoded against transmitter-side emulated references
// and fused at the receiver against its own reconstructions. alloc[i] is the
// block count for frame i+1 (alloc.back() is the key's).
GopResult transmit_gop(const ModelParams& p, const Tensor& ref0_tx, const Tensor& ref0_rx,
                       const std::vector<Tensor>& frames, const std::vector<int>& alloc,
                       const ChannelModel& ch, Rng& chan_rng, Rng& emul_rng);

}  // namespace wirevid
