#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace wirevid {

// Reverse-mode autodiff over dense float tensors. Tensors are immutable graph
// nodes built per forward pass; backward() walks the tape once. Shapes are
// (C,H,W) for feature maps, (Cout,Cin,kh,kw) for conv weights, (m,n) for
// linear weights, (n) for vectors. Reductions accumulate in double.

struct TensorNode;
using Tensor = std::shared_ptr<TensorNode>;

struct TensorNode {
    std::vector<int> shape;
    std::vector<float> val;
    std::vector<float> grad;
    bool needs_grad = false;
    std::vector<Tensor> parents;
    std::function<void(TensorNode&)> back;

    int numel() const {
        int n = 1;
        for (int d : shape) n *= d;
        return n;
    }
    void ensure_grad() {
        if (grad.empty()) grad.assign(val.size(), 0.0f);
    }
    float scalar() const { return val[0]; }
};

Tensor constant(std::vector<int> shape, std::vector<float> data);
Tensor constant(std::vector<int> shape, float fill);
Tensor leaf(std::vector<int> shape, std::vector<float> data);  // needs_grad=true
Tensor zeros_like(const Tensor& x);
Tensor detach(const Tensor& x);  // same values, cut from the graph

void backward(const Tensor& root);

// elementwise
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add_k(const Tensor& x, float k);
Tensor mul_k(const Tensor& x, float k);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh_op(const Tensor& x);
Tensor square(const Tensor& x);
Tensor pow_k(const Tensor& x, float p);  // x > 0 for fractional p
Tensor clamp(const Tensor& x, float lo, float hi);

// scalar-tensor broadcast: y = x * s[0], s is a 1-element tensor
Tensor scale_by(const Tensor& x, const Tensor& s);

// shape ops
Tensor concat_ch(const std::vector<Tensor>& xs);
Tensor slice_ch(const Tensor& x, int c0, int len);
Tensor pick(const Tensor& x, int i);  // one element as a (1) tensor

// reductions (double accumulation)
Tensor mean_all(const Tensor& x);
Tensor sum_all(const Tensor& x);
Tensor sum_squares(const Tensor& x);
Tensor global_avg_pool(const Tensor& x);  // (C,H,W) -> (C)

// NN structure ops
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad);
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor pixel_shuffle2(const Tensor& x);     // (4C,H,W) -> (C,2H,2W)
Tensor upsample_nearest2(const Tensor& x);  // (C,H,W) -> (C,2H,2W)
Tensor avg_pool2(const Tensor& x);          // floor dims
Tensor channel_scale(const Tensor& x, const Tensor& s);  // s: (C)
Tensor softmax_ch(const Tensor& x);

// border/filter ops with fixed (non-learned) kernels
Tensor reflect_pad2d(const Tensor& x, int r);
Tensor conv1d_h_const(const Tensor& x, const std::vector<float>& kernel);  // valid
Tensor conv1d_v_const(const Tensor& x, const std::vector<float>& kernel);  // valid

// trilinear sampling of a blurred level stack at (x+dx, y+dy, z), clamped to
// borders and to [0, n_levels-1] in z. flow channels: 0=dx, 1=dy, 2=z.
Tensor ssw_sample_op(const std::vector<Tensor>& levels, const Tensor& flow);

struct Adam {
    float lr = 1e-4f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
    int64_t t = 0;
    std::vector<Tensor> params;
    std::vector<std::vector<float>> m, v;

    explicit Adam(std::vector<Tensor> ps, float lr_ = 1e-4f);
    void step();
    void zero_grad();
};

}  // namespace wirevid
