#pragma once

#include <vector>

#include "wirevid/tensor.hpp"

namespace wirevid {

// Warping against a stack of progressively blurred copies of the reference:
// the flow's third channel picks the blur level, so the estimator can fall
// back to smooth content where motion is unreliable.

// levels+1 tensors; level 0 is x itself, level j blurs x with std
// 2^(j-1)*sigma0 (reflect padding, kernel radius ceil(3*std)).
std::vector<Tensor> build_volume(const Tensor& x, float sigma0, int levels);

Tensor gaussian_blur(const Tensor& x, float sigma);

// trilinear lookup of the volume at (x+dx, y+dy, z); spatial coordinates are
// clamped to the borders, z to [0, levels]. flow channels: dx, dy, z.
Tensor ssw_sample(const std::vector<Tensor>& volume, const Tensor& flow);

Tensor warp_residual(const Tensor& x, const Tensor& warped);  // x - warped

}  // namespace wirevid
