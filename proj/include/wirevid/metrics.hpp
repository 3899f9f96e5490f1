#pragma once

#include <string>
#include <vector>

#include "wirevid/tensor.hpp"
#include "wirevid/video.hpp"

namespace wirevid {

enum class Metric { psnr, ms_ssim };
Metric parse_metric(const std::string& s);  // "psnr" | "ms-ssim"
const char* metric_name(Metric m);

// mean squared error over all channels and pixels, peak 255
Tensor mse_loss(const Tensor& x, const Tensor& xhat);
double mse_value(const Frame& x, const Frame& xhat);
double psnr_db(double mse);  // capped at 100 dB

// Multi-scale structural similarity on [0,255] inputs, computed per channel
// and averaged. 11x11 Gaussian window (sigma 1.5), valid convolution, 2x2
// mean-pool between scales; the published scale weights are truncated to
// `levels` and renormalized to sum to one. Requires min(H,W) >= 11*2^(levels-1).
Tensor ms_ssim(const Tensor& x, const Tensor& xhat, int levels = 5);
Tensor msssim_loss(const Tensor& x, const Tensor& xhat, int levels = 5);
double ms_ssim_value(const Frame& x, const Frame& xhat, int levels = 5);

int max_msssim_levels(int h, int w);  // largest usable level count, capped at 5

std::vector<double> msssim_weights(int levels);

// mean per-frame quality across a reconstructed sequence; PSNR averages the
// per-frame dB values
double sequence_quality(const std::vector<Frame>& ref, const std::vector<Frame>& rec,
                        Metric metric, int msssim_levels = 5);

}  // namespace wirevid
