#include "wirevid/ssw.hpp"

#include <cmath>
#include <stdexcept>

#include "wirevid/nn.hpp"

namespace wirevid {

Tensor gaussian_blur(const Tensor& x, float sigma) {
    int r = (int)std::ceil(3.0f * sigma);
    auto kernel = gaussian_kernel(sigma, r);
    return conv1d_v_const(conv1d_h_const(reflect_pad2d(x, r), kernel), kernel);
}

std::vector<Tensor> build_volume(const Tensor& x, float sigma0, int levels) {
    if (levels < 1) throw std::invalid_argument("volume needs at least one blur level");
    std::vector<Tensor> vol;
    vol.reserve(levels + 1);
    vol.push_back(x);
    for (int j = 1; j <= levels; j++)
        vol.push_back(gaussian_blur(x, std::ldexp(sigma0, j - 1)));
    return vol;
}

Tensor ssw_sample(const std::vector<Tensor>& volume, const Tensor& flow) {
    return ssw_sample_op(volume, flow);
}

Tensor warp_residual(const Tensor& x, const Tensor& warped) { return sub(x, warped); }

}  // namespace wirevid
