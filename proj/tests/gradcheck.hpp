#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "doctest.h"
#include "wirevid/tensor.hpp"

namespace testutil {

// Central-difference check of d(loss)/d(leaf) for every element of every
// leaf. `build` must assemble a fresh scalar graph from the leaves' current
// values on each call.
inline void gradcheck(const std::function<wirevid::Tensor()>& build,
                      const std::vector<wirevid::Tensor>& leaves, float h = 1e-2f,
                      float tol = 1e-2f) {
    using namespace wirevid;
    Tensor loss = build();
    REQUIRE(loss->numel() == 1);
    for (const auto& l : leaves) l->grad.clear();
    backward(loss);
    for (size_t li = 0; li < leaves.size(); li++) {
        const Tensor& leaf = leaves[li];
        REQUIRE(!leaf->grad.empty());
        for (int i = 0; i < leaf->numel(); i++) {
            float keep = leaf->val[i];
            leaf->val[i] = keep + h;
            double up = build()->val[0];
            leaf->val[i] = keep - h;
            double dn = build()->val[0];
            leaf->val[i] = keep;
            double fd = (up - dn) / (2.0 * h);
            double g = leaf->grad[i];
            double err = std::fabs(g - fd);
            double scale = std::max({1.0, std::fabs(g), std::fabs(fd)});
            INFO("leaf ", li, " elem ", i, " analytic ", g, " numeric ", fd);
            CHECK(err <= tol * scale);
        }
    }
}

}  // namespace testutil
