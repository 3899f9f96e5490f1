#include "wirevid/tensor.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace wirevid {

using MatRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

namespace {

Tensor make_node(std::vector<int> shape, std::vector<float> val,
                 std::vector<Tensor> parents, std::function<void(TensorNode&)> back) {
    auto t = std::make_shared<TensorNode>();
    t->shape = std::move(shape);
    t->val = std::move(val);
    t->parents = std::move(parents);
    for (const auto& p : t->parents)
        if (p->needs_grad) t->needs_grad = true;
    if (t->needs_grad) t->back = std::move(back);
    return t;
}

void check_same_shape(const Tensor& a, const Tensor& b) {
    if (a->shape != b->shape) throw std::invalid_argument("tensor shape mismatch");
}

}  // namespace

Tensor constant(std::vector<int> shape, std::vector<float> data) {
    auto t = std::make_shared<TensorNode>();
    t->shape = std::move(shape);
    t->val = std::move(data);
    assert((int)t->val.size() == t->numel());
    return t;
}

Tensor constant(std::vector<int> shape, float fill) {
    auto t = std::make_shared<TensorNode>();
    t->shape = std::move(shape);
    int n = t->numel();
    t->val.assign(n, fill);
    return t;
}

Tensor leaf(std::vector<int> shape, std::vector<float> data) {
    auto t = constant(std::move(shape), std::move(data));
    t->needs_grad = true;
    return t;
}

Tensor zeros_like(const Tensor& x) { return constant(x->shape, 0.0f); }

Tensor detach(const Tensor& x) { return constant(x->shape, x->val); }

void backward(const Tensor& root) {
    if (root->numel() != 1) throw std::invalid_argument("backward needs a scalar root");
    if (!root->needs_grad) return;
    // iterative post-order over the DAG
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> seen;
    std::vector<std::pair<TensorNode*, size_t>> stack;
    stack.push_back({root.get(), 0});
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            TensorNode* p = node->parents[idx++].get();
            if (p->needs_grad && !seen.count(p)) {
                seen.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    root->ensure_grad();
    root->grad[0] += 1.0f;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* n = *it;
        if (n->back && !n->grad.empty()) n->back(*n);
    }
}

// ---- elementwise ----

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b);
    int n = a->numel();
    std::vector<float> v(n);
    for (int i = 0; i < n; i++) v[i] = a->val[i] + b->val[i];
    return make_node(a->shape, std::move(v), {a, b}, [](TensorNode& t) {
        for (int k = 0; k < 2; k++) {
            auto& p = t.parents[k];
            if (!p->needs_grad) continue;
            p->ensure_grad();
            for (size_t i = 0; i < t.grad.size(); i++) p->grad[i] += t.grad[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b);
    int n = a->numel();
    std::vector<float> v(n);
    for (int i = 0; i < n; i++) v[i] = a->val[i] - b->val[i];
    return make_node(a->shape, std::move(v), {a, b}, [](TensorNode& t) {
        auto& a = t.parents[0];
        auto& b = t.parents[1];
        if (a->needs_grad) {
            a->ensure_grad();
            for (size_t i = 0; i < t.grad.size(); i++) a->grad[i] += t.grad[i];
        }
        if (b->needs_grad) {
            b->ensure_grad();
            for (size_t i = 0; i < t.grad.size(); i++) b->grad[i] -= t.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b);
    int n = a->numel();
    std::vector<float> v(n);
    for (int i = 0; i < n; i++) v[i] = a->val[i] * b->val[i];
    return make_node(a->shape, std::move(v), {a, b}, [](TensorNode& t) {
        auto& a = t.parents[0];
        auto& b = t.parents[1];
        if (a->needs_grad) {
            a->ensure_grad();
            for (size_t i = 0; i < t.grad.size(); i++) a->grad[i] += t.grad[i] * b->val[i];
        }
        if (b->needs_grad) {
            b->ensure_grad();
            for (size_t i = 0; i < t.grad.size(); i++) b->grad[i] += t.grad[i] * a->val[i];
        }
    });
}

Tensor div(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b);
    int n = a->numel();
    std::vector<float> v(n);
    for (int i = 0; i < n; i++) v[i] = a->val[i] / b->val[i];
    return make_node(a->shape, std::move(v), {a, b}, [](TensorNode& t) {
        auto& a = t.parents[0];
        auto& b = t.parents[1];
        if (a->needs_grad) {
            a->ensure_grad();
            for (size_t i = 0; i < t.grad.size(); i++) a->grad[i] += t.grad[i] / b->val[i];
        }
        if (b->needs_grad) {
            b->ensure_grad();
            for (size_t i = 0; i < t.grad.size(); i++)
                b->grad[i] -= t.grad[i] * t.val[i] / b->val[i];
        }
    });
}

Tensor add_k(const Tensor& x, float k) {
    int n = x->numel();
    std::vector<float> v(n);
    for (int i = 0; i < n; i++) v[i] = x->val[i] + k;
    return make_node(x->shape, std::move(v), {x}, [](TensorNode& t) {
        auto& p = t.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < t.grad.size(); i++) p->grad[i] += t.grad[i];
    });
}

Tensor mul_k(const Tensor& x, float k) {
    int n = x->numel();
    std::vector<float> v(n);
    for (int i = 0; i < n; i++) v[i] = x->val[i] * k;
    return make_node(x->shape, std::move(v), {x}, [k](TensorNode& t) {
        auto& p = t.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < t.grad.size(); i++) p->grad[i] += t.grad[i] * k;
    });
}

Tensor relu(const Tensor& x) {
    int n = x->numel();
    std::vector<float> v(n);
    for (int i = 0; i < n; i++) v[i] = x->val[i] > 0.0f ? x->val[i] : 0.0f;
    return make_node(x->shape, std::move(v), {x}, [](TensorNode& t) {
        auto& p = t.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < t.grad.size(); i++)
            if (p->val[i] > 0.0f) p->grad[i] += t.grad[i];
    });
}

Tensor sigmoid(const Tensor& x) {
    int n = x->numel();
    std::vector<float> v(n);
    for (int i = 0; i < n; i++) v[i] = 1.0f / (1.0f + std::exp(-x->val[i]));
    return make_node(x->shape, std::move(v), {x}, [](TensorNode& t) {
        auto& p = t.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < t.grad.size(); i++) {
            float y = t.val[i];
            p->grad[i] += t.grad[i] * y * (1.0f - y);
        }
    });
}

Tensor tanh_op(const Tensor& x) {
    int n = x->numel();
    std::vector<float> v(n);
    for (int i = 0; i < n; i++) v[i] = std::tanh(x->val[i]);
    return make_node(x->shape, std::move(v), {x}, [](TensorNode& t) {
        auto& p = t.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < t.grad.size(); i++) {
            float y = t.val[i];
            p->grad[i] += t.grad[i] * (1.0f - y * y);
        }
    });
}

Tensor square(const Tensor& x) {
    int n = x->numel();
    std::vector<float> v(n);
    for (int i = 0; i < n; i++) v[i] = x->val[i] * x->val[i];
    return make_node(x->shape, std::move(v), {x}, [](TensorNode& t) {
        auto& p = t.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < t.grad.size(); i++)
            p->grad[i] += t.grad[i] * 2.0f * p->val[i];
    });
}

Tensor pow_k(const Tensor& x, float p) {
    int n = x->numel();
    std::vector<float> v(n);
    for (int i = 0; i < n; i++) v[i] = std::pow(x->val[i], p);
    return make_node(x->shape, std::move(v), {x}, [p](TensorNode& t) {
        auto& par = t.parents[0];
        par->ensure_grad();
        for (size_t i = 0; i < t.grad.size(); i++)
            par->grad[i] += t.grad[i] * p * std::pow(par->val[i], p - 1.0f);
    });
}

Tensor clamp(const Tensor& x, float lo, float hi) {
    int n = x->numel();
    std::vector<float> v(n);
    for (int i = 0; i < n; i++) v[i] = std::min(hi, std::max(lo, x->val[i]));
    return make_node(x->shape, std::move(v), {x}, [lo, hi](TensorNode& t) {
        auto& p = t.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < t.grad.size(); i++)
            if (p->val[i] > lo && p->val[i] < hi) p->grad[i] += t.grad[i];
    });
}

Tensor scale_by(const Tensor& x, const Tensor& s) {
    if (s->numel() != 1) throw std::invalid_argument("scale_by expects a 1-element scale");
    int n = x->numel();
    float k = s->val[0];
    std::vector<float> v(n);
    for (int i = 0; i < n; i++) v[i] = x->val[i] * k;
    return make_node(x->shape, std::move(v), {x, s}, [](TensorNode& t) {
        auto& x = t.parents[0];
        auto& s = t.parents[1];
        float k = s->val[0];
        if (x->needs_grad) {
            x->ensure_grad();
            for (size_t i = 0; i < t.grad.size(); i++) x->grad[i] += t.grad[i] * k;
        }
        if (s->needs_grad) {
            s->ensure_grad();
            double acc = 0.0;
            for (size_t i = 0; i < t.grad.size(); i++)
                acc += (double)t.grad[i] * (double)x->val[i];
            s->grad[0] += (float)acc;
        }
    });
}

// ---- shape ops ----

Tensor concat_ch(const std::vector<Tensor>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat_ch on empty list");
    bool vec = xs[0]->shape.size() == 1;
    int H = vec ? 1 : xs[0]->shape[1], W = vec ? 1 : xs[0]->shape[2];
    int C = 0;
    for (const auto& x : xs) {
        if (vec) {
            if (x->shape.size() != 1) throw std::invalid_argument("concat_ch rank mismatch");
            C += x->shape[0];
        } else {
            if (x->shape.size() != 3 || x->shape[1] != H || x->shape[2] != W)
                throw std::invalid_argument("concat_ch spatial mismatch");
            C += x->shape[0];
        }
    }
    std::vector<float> v;
    v.reserve((size_t)C * H * W);
    for (const auto& x : xs) v.insert(v.end(), x->val.begin(), x->val.end());
    std::vector<int> shape = vec ? std::vector<int>{C} : std::vector<int>{C, H, W};
    return make_node(std::move(shape), std::move(v), xs, [](TensorNode& t) {
        size_t off = 0;
        for (auto& p : t.parents) {
            size_t n = p->val.size();
            if (p->needs_grad) {
                p->ensure_grad();
                for (size_t i = 0; i < n; i++) p->grad[i] += t.grad[off + i];
            }
            off += n;
        }
    });
}

Tensor slice_ch(const Tensor& x, int c0, int len) {
    if (x->shape.size() != 3) throw std::invalid_argument("slice_ch expects (C,H,W)");
    int C = x->shape[0], H = x->shape[1], W = x->shape[2];
    if (c0 < 0 || c0 + len > C) throw std::out_of_range("slice_ch range");
    size_t plane = (size_t)H * W;
    std::vector<float> v(x->val.begin() + c0 * plane, x->val.begin() + (c0 + len) * plane);
    return make_node({len, H, W}, std::move(v), {x}, [c0, plane](TensorNode& t) {
        auto& p = t.parents[0];
        p->ensure_grad();
        size_t off = c0 * plane;
        for (size_t i = 0; i < t.grad.size(); i++) p->grad[off + i] += t.grad[i];
    });
}

Tensor pick(const Tensor& x, int i) {
    if (i < 0 || i >= x->numel()) throw std::out_of_range("pick index");
    return make_node({1}, {x->val[i]}, {x}, [i](TensorNode& t) {
        auto& p = t.parents[0];
        p->ensure_grad();
        p->grad[i] += t.grad[0];
    });
}

// ---- reductions ----

Tensor mean_all(const Tensor& x) {
    int n = x->numel();
    double acc = 0.0;
    for (int i = 0; i < n; i++) acc += x->val[i];
    float m = (float)(acc / n);
    return make_node({1}, {m}, {x}, [n](TensorNode& t) {
        auto& p = t.parents[0];
        p->ensure_grad();
        float g = t.grad[0] / (float)n;
        for (int i = 0; i < n; i++) p->grad[i] += g;
    });
}

Tensor sum_all(const Tensor& x) {
    int n = x->numel();
    double acc = 0.0;
    for (int i = 0; i < n; i++) acc += x->val[i];
    return make_node({1}, {(float)acc}, {x}, [n](TensorNode& t) {
        auto& p = t.parents[0];
        p->ensure_grad();
        float g = t.grad[0];
        for (int i = 0; i < n; i++) p->grad[i] += g;
    });
}

Tensor sum_squares(const Tensor& x) {
    int n = x->numel();
    double acc = 0.0;
    for (int i = 0; i < n; i++) acc += (double)x->val[i] * (double)x->val[i];
    return make_node({1}, {(float)acc}, {x}, [n](TensorNode& t) {
        auto& p = t.parents[0];
        p->ensure_grad();
        float g = t.grad[0];
        for (int i = 0; i < n; i++) p->grad[i] += g * 2.0f * p->val[i];
    });
}

Tensor global_avg_pool(const Tensor& x) {
    if (x->shape.size() != 3) throw std::invalid_argument("global_avg_pool expects (C,H,W)");
    int C = x->shape[0], H = x->shape[1], W = x->shape[2];
    size_t plane = (size_t)H * W;
    std::vector<float> v(C);
    for (int c = 0; c < C; c++) {
        double acc = 0.0;
        for (size_t i = 0; i < plane; i++) acc += x->val[c * plane + i];
        v[c] = (float)(acc / (double)plane);
    }
    return make_node({C}, std::move(v), {x}, [C, plane](TensorNode& t) {
        auto& p = t.parents[0];
        p->ensure_grad();
        for (int c = 0; c < C; c++) {
            float g = t.grad[c] / (float)plane;
            for (size_t i = 0; i < plane; i++) p->grad[c * plane + i] += g;
        }
    });
}

// ---- conv and friends ----

namespace {

// col is (K, P) row-major with K = Ci*kh*kw, P = Ho*Wo
void im2col(const float* x, int Ci, int H, int W, int kh, int kw, int stride,
            int pad, int Ho, int Wo, float* col) {
    int P = Ho * Wo;
    for (int ci = 0; ci < Ci; ci++) {
        for (int ky = 0; ky < kh; ky++) {
            for (int kx = 0; kx < kw; kx++) {
                int krow = (ci * kh + ky) * kw + kx;
                float* dst = col + (size_t)krow * P;
                for (int oy = 0; oy < Ho; oy++) {
                    int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= H) {
                        std::fill(dst + oy * Wo, dst + (oy + 1) * Wo, 0.0f);
                        continue;
                    }
                    const float* src = x + ((size_t)ci * H + iy) * W;
                    for (int ox = 0; ox < Wo; ox++) {
                        int ix = ox * stride - pad + kx;
                        dst[oy * Wo + ox] = (ix >= 0 && ix < W) ? src[ix] : 0.0f;
                    }
                }
            }
        }
    }
}

void col2im_add(const float* col, int Ci, int H, int W, int kh, int kw, int stride,
                int pad, int Ho, int Wo, float* gx) {
    int P = Ho * Wo;
    for (int ci = 0; ci < Ci; ci++) {
        for (int ky = 0; ky < kh; ky++) {
            for (int kx = 0; kx < kw; kx++) {
                int krow = (ci * kh + ky) * kw + kx;
                const float* src = col + (size_t)krow * P;
                for (int oy = 0; oy < Ho; oy++) {
                    int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= H) continue;
                    float* dst = gx + ((size_t)ci * H + iy) * W;
                    for (int ox = 0; ox < Wo; ox++) {
                        int ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < W) dst[ix] += src[oy * Wo + ox];
                    }
                }
            }
        }
    }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
    if (x->shape.size() != 3 || w->shape.size() != 4)
        throw std::invalid_argument("conv2d shapes");
    int Ci = x->shape[0], H = x->shape[1], W = x->shape[2];
    int Co = w->shape[0], kh = w->shape[2], kw = w->shape[3];
    if (w->shape[1] != Ci) throw std::invalid_argument("conv2d channel mismatch");
    int Ho = (H + 2 * pad - kh) / stride + 1;
    int Wo = (W + 2 * pad - kw) / stride + 1;
    if (Ho <= 0 || Wo <= 0) throw std::invalid_argument("conv2d output empty");
    int K = Ci * kh * kw, P = Ho * Wo;

    std::vector<float> col((size_t)K * P);
    im2col(x->val.data(), Ci, H, W, kh, kw, stride, pad, Ho, Wo, col.data());
    std::vector<float> out((size_t)Co * P);
    {
        CMapRM Wm(w->val.data(), Co, K);
        CMapRM Colm(col.data(), K, P);
        MapRM Om(out.data(), Co, P);
        Om.noalias() = Wm * Colm;
    }
    if (b) {
        if (b->shape.size() != 1 || b->shape[0] != Co)
            throw std::invalid_argument("conv2d bias shape");
        for (int co = 0; co < Co; co++) {
            float bv = b->val[co];
            for (int p = 0; p < P; p++) out[(size_t)co * P + p] += bv;
        }
    }
    std::vector<Tensor> parents = b ? std::vector<Tensor>{x, w, b} : std::vector<Tensor>{x, w};
    auto back = [Ci, H, W, Co, kh, kw, stride, pad, Ho, Wo, K, P](TensorNode& t) {
        auto& x = t.parents[0];
        auto& w = t.parents[1];
        Tensor b = t.parents.size() > 2 ? t.parents[2] : nullptr;
        CMapRM dYm(t.grad.data(), Co, P);
        if (w->needs_grad || x->needs_grad) {
            std::vector<float> col((size_t)K * P);
            im2col(x->val.data(), Ci, H, W, kh, kw, stride, pad, Ho, Wo, col.data());
            CMapRM Colm(col.data(), K, P);
            if (w->needs_grad) {
                w->ensure_grad();
                MapRM dWm(w->grad.data(), Co, K);
                dWm.noalias() += dYm * Colm.transpose();
            }
            if (x->needs_grad) {
                x->ensure_grad();
                std::vector<float> dcol((size_t)K * P);
                MapRM dColm(dcol.data(), K, P);
                CMapRM Wm(w->val.data(), Co, K);
                dColm.noalias() = Wm.transpose() * dYm;
                col2im_add(dcol.data(), Ci, H, W, kh, kw, stride, pad, Ho, Wo,
                           x->grad.data());
            }
        }
        if (b && b->needs_grad) {
            b->ensure_grad();
            for (int co = 0; co < Co; co++) {
                double acc = 0.0;
                for (int p = 0; p < P; p++) acc += t.grad[(size_t)co * P + p];
                b->grad[co] += (float)acc;
            }
        }
    };
    return make_node({Co, Ho, Wo}, std::move(out), std::move(parents), std::move(back));
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (w->shape.size() != 2) throw std::invalid_argument("linear weight shape");
    int m = w->shape[0], n = w->shape[1];
    if (x->numel() != n) throw std::invalid_argument("linear input size");
    std::vector<float> out(m);
    for (int i = 0; i < m; i++) {
        double acc = b ? (double)b->val[i] : 0.0;
        const float* wr = w->val.data() + (size_t)i * n;
        for (int j = 0; j < n; j++) acc += (double)wr[j] * (double)x->val[j];
        out[i] = (float)acc;
    }
    std::vector<Tensor> parents = b ? std::vector<Tensor>{x, w, b} : std::vector<Tensor>{x, w};
    auto back = [m, n](TensorNode& t) {
        auto& x = t.parents[0];
        auto& w = t.parents[1];
        Tensor b = t.parents.size() > 2 ? t.parents[2] : nullptr;
        if (x->needs_grad) {
            x->ensure_grad();
            for (int j = 0; j < n; j++) {
                double acc = 0.0;
                for (int i = 0; i < m; i++)
                    acc += (double)t.grad[i] * (double)w->val[(size_t)i * n + j];
                x->grad[j] += (float)acc;
            }
        }
        if (w->needs_grad) {
            w->ensure_grad();
            for (int i = 0; i < m; i++) {
                float g = t.grad[i];
                float* wr = w->grad.data() + (size_t)i * n;
                for (int j = 0; j < n; j++) wr[j] += g * x->val[j];
            }
        }
        if (b && b->needs_grad) {
            b->ensure_grad();
            for (int i = 0; i < m; i++) b->grad[i] += t.grad[i];
        }
    };
    return make_node({m}, std::move(out), std::move(parents), std::move(back));
}

Tensor pixel_shuffle2(const Tensor& x) {
    if (x->shape.size() != 3 || x->shape[0] % 4 != 0)
        throw std::invalid_argument("pixel_shuffle2 expects (4C,H,W)");
    int C = x->shape[0] / 4, H = x->shape[1], W = x->shape[2];
    std::vector<float> v((size_t)C * 4 * H * W);
    // input channel c*4 + 2*sy + sx -> output (c, 2y+sy, 2x+sx)
    for (int c = 0; c < C; c++)
        for (int sy = 0; sy < 2; sy++)
            for (int sx = 0; sx < 2; sx++) {
                const float* src = x->val.data() + ((size_t)(c * 4 + sy * 2 + sx)) * H * W;
                for (int y = 0; y < H; y++)
                    for (int xx = 0; xx < W; xx++)
                        v[((size_t)c * 2 * H + (2 * y + sy)) * 2 * W + (2 * xx + sx)] =
                            src[y * W + xx];
            }
    return make_node({C, 2 * H, 2 * W}, std::move(v), {x}, [C, H, W](TensorNode& t) {
        auto& p = t.parents[0];
        p->ensure_grad();
        for (int c = 0; c < C; c++)
            for (int sy = 0; sy < 2; sy++)
                for (int sx = 0; sx < 2; sx++) {
                    float* dst = p->grad.data() + ((size_t)(c * 4 + sy * 2 + sx)) * H * W;
                    for (int y = 0; y < H; y++)
                        for (int xx = 0; xx < W; xx++)
                            dst[y * W + xx] +=
                                t.grad[((size_t)c * 2 * H + (2 * y + sy)) * 2 * W +
                                       (2 * xx + sx)];
                }
    });
}

Tensor upsample_nearest2(const Tensor& x) {
    if (x->shape.size() != 3) throw std::invalid_argument("upsample expects (C,H,W)");
    int C = x->shape[0], H = x->shape[1], W = x->shape[2];
    std::vector<float> v((size_t)C * 4 * H * W);
    for (int c = 0; c < C; c++)
        for (int y = 0; y < 2 * H; y++)
            for (int xx = 0; xx < 2 * W; xx++)
                v[((size_t)c * 2 * H + y) * 2 * W + xx] =
                    x->val[((size_t)c * H + y / 2) * W + xx / 2];
    return make_node({C, 2 * H, 2 * W}, std::move(v), {x}, [C, H, W](TensorNode& t) {
        auto& p = t.parents[0];
        p->ensure_grad();
        for (int c = 0; c < C; c++)
            for (int y = 0; y < 2 * H; y++)
                for (int xx = 0; xx < 2 * W; xx++)
                    p->grad[((size_t)c * H + y / 2) * W + xx / 2] +=
                        t.grad[((size_t)c * 2 * H + y) * 2 * W + xx];
    });
}

Tensor avg_pool2(const Tensor& x) {
    if (x->shape.size() != 3) throw std::invalid_argument("avg_pool2 expects (C,H,W)");
    int C = x->shape[0], H = x->shape[1], W = x->shape[2];
    int Ho = H / 2, Wo = W / 2;
    if (Ho == 0 || Wo == 0) throw std::invalid_argument("avg_pool2 input too small");
    std::vector<float> v((size_t)C * Ho * Wo);
    for (int c = 0; c < C; c++)
        for (int y = 0; y < Ho; y++)
            for (int xx = 0; xx < Wo; xx++) {
                const float* base = x->val.data() + ((size_t)c * H + 2 * y) * W + 2 * xx;
                v[((size_t)c * Ho + y) * Wo + xx] =
                    0.25f * (base[0] + base[1] + base[W] + base[W + 1]);
            }
    return make_node({C, Ho, Wo}, std::move(v), {x}, [C, H, W, Ho, Wo](TensorNode& t) {
        auto& p = t.parents[0];
        p->ensure_grad();
        for (int c = 0; c < C; c++)
            for (int y = 0; y < Ho; y++)
                for (int xx = 0; xx < Wo; xx++) {
                    float g = 0.25f * t.grad[((size_t)c * Ho + y) * Wo + xx];
                    float* base = p->grad.data() + ((size_t)c * H + 2 * y) * W + 2 * xx;
                    base[0] += g;
                    base[1] += g;
                    base[W] += g;
                    base[W + 1] += g;
                }
    });
}

Tensor channel_scale(const Tensor& x, const Tensor& s) {
    if (x->shape.size() != 3 || s->shape.size() != 1 || s->shape[0] != x->shape[0])
        throw std::invalid_argument("channel_scale shapes");
    int C = x->shape[0];
    size_t plane = (size_t)x->shape[1] * x->shape[2];
    std::vector<float> v(x->val.size());
    for (int c = 0; c < C; c++) {
        float k = s->val[c];
        for (size_t i = 0; i < plane; i++) v[c * plane + i] = x->val[c * plane + i] * k;
    }
    return make_node(x->shape, std::move(v), {x, s}, [C, plane](TensorNode& t) {
        auto& x = t.parents[0];
        auto& s = t.parents[1];
        if (x->needs_grad) {
            x->ensure_grad();
            for (int c = 0; c < C; c++) {
                float k = s->val[c];
                for (size_t i = 0; i < plane; i++)
                    x->grad[c * plane + i] += t.grad[c * plane + i] * k;
            }
        }
        if (s->needs_grad) {
            s->ensure_grad();
            for (int c = 0; c < C; c++) {
                double acc = 0.0;
                for (size_t i = 0; i < plane; i++)
                    acc += (double)t.grad[c * plane + i] * (double)x->val[c * plane + i];
                s->grad[c] += (float)acc;
            }
        }
    });
}

Tensor softmax_ch(const Tensor& x) {
    if (x->shape.size() != 3) throw std::invalid_argument("softmax_ch expects (C,H,W)");
    int C = x->shape[0];
    size_t plane = (size_t)x->shape[1] * x->shape[2];
    std::vector<float> v(x->val.size());
    for (size_t i = 0; i < plane; i++) {
        float m = x->val[i];
        for (int c = 1; c < C; c++) m = std::max(m, x->val[c * plane + i]);
        double sum = 0.0;
        for (int c = 0; c < C; c++) {
            float e = std::exp(x->val[c * plane + i] - m);
            v[c * plane + i] = e;
            sum += e;
        }
        for (int c = 0; c < C; c++) v[c * plane + i] = (float)(v[c * plane + i] / sum);
    }
    return make_node(x->shape, std::move(v), {x}, [C, plane](TensorNode& t) {
        auto& p = t.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < plane; i++) {
            double dot = 0.0;
            for (int c = 0; c < C; c++)
                dot += (double)t.grad[c * plane + i] * (double)t.val[c * plane + i];
            for (int c = 0; c < C; c++)
                p->grad[c * plane + i] +=
                    t.val[c * plane + i] * (t.grad[c * plane + i] - (float)dot);
        }
    });
}

// ---- padding and fixed filters ----

namespace {

// mirror without edge repetition, generalized so the pad may exceed the size
inline int reflect_index(int j, int n) {
    if (n == 1) return 0;
    int period = 2 * n - 2;
    j %= period;
    if (j < 0) j += period;
    return j < n ? j : period - j;
}

}  // namespace

Tensor reflect_pad2d(const Tensor& x, int r) {
    if (x->shape.size() != 3) throw std::invalid_argument("reflect_pad2d expects (C,H,W)");
    if (r < 0) throw std::invalid_argument("reflect_pad2d negative pad");
    int C = x->shape[0], H = x->shape[1], W = x->shape[2];
    int Ho = H + 2 * r, Wo = W + 2 * r;
    std::vector<float> v((size_t)C * Ho * Wo);
    std::vector<int> ymap(Ho), xmap(Wo);
    for (int y = 0; y < Ho; y++) ymap[y] = reflect_index(y - r, H);
    for (int xx = 0; xx < Wo; xx++) xmap[xx] = reflect_index(xx - r, W);
    for (int c = 0; c < C; c++)
        for (int y = 0; y < Ho; y++) {
            const float* src = x->val.data() + ((size_t)c * H + ymap[y]) * W;
            float* dst = v.data() + ((size_t)c * Ho + y) * Wo;
            for (int xx = 0; xx < Wo; xx++) dst[xx] = src[xmap[xx]];
        }
    return make_node({C, Ho, Wo}, std::move(v), {x},
                     [C, H, W, Ho, Wo, ymap, xmap](TensorNode& t) {
                         auto& p = t.parents[0];
                         p->ensure_grad();
                         for (int c = 0; c < C; c++)
                             for (int y = 0; y < Ho; y++) {
                                 float* dst = p->grad.data() + ((size_t)c * H + ymap[y]) * W;
                                 const float* src = t.grad.data() + ((size_t)c * Ho + y) * Wo;
                                 for (int xx = 0; xx < Wo; xx++) dst[xmap[xx]] += src[xx];
                             }
                     });
}

Tensor conv1d_h_const(const Tensor& x, const std::vector<float>& kernel) {
    if (x->shape.size() != 3) throw std::invalid_argument("conv1d_h expects (C,H,W)");
    int C = x->shape[0], H = x->shape[1], W = x->shape[2];
    int L = (int)kernel.size();
    int Wo = W - L + 1;
    if (Wo <= 0) throw std::invalid_argument("conv1d_h kernel wider than input");
    std::vector<float> v((size_t)C * H * Wo);
    for (int c = 0; c < C; c++)
        for (int y = 0; y < H; y++) {
            const float* src = x->val.data() + ((size_t)c * H + y) * W;
            float* dst = v.data() + ((size_t)c * H + y) * Wo;
            for (int xx = 0; xx < Wo; xx++) {
                double acc = 0.0;
                for (int t = 0; t < L; t++) acc += (double)kernel[t] * (double)src[xx + t];
                dst[xx] = (float)acc;
            }
        }
    return make_node({C, H, Wo}, std::move(v), {x}, [C, H, W, Wo, kernel](TensorNode& t) {
        auto& p = t.parents[0];
        p->ensure_grad();
        int L = (int)kernel.size();
        for (int c = 0; c < C; c++)
            for (int y = 0; y < H; y++) {
                float* dst = p->grad.data() + ((size_t)c * H + y) * W;
                const float* src = t.grad.data() + ((size_t)c * H + y) * Wo;
                for (int xx = 0; xx < Wo; xx++)
                    for (int k = 0; k < L; k++) dst[xx + k] += kernel[k] * src[xx];
            }
    });
}

Tensor conv1d_v_const(const Tensor& x, const std::vector<float>& kernel) {
    if (x->shape.size() != 3) throw std::invalid_argument("conv1d_v expects (C,H,W)");
    int C = x->shape[0], H = x->shape[1], W = x->shape[2];
    int L = (int)kernel.size();
    int Ho = H - L + 1;
    if (Ho <= 0) throw std::invalid_argument("conv1d_v kernel taller than input");
    std::vector<float> v((size_t)C * Ho * W);
    for (int c = 0; c < C; c++)
        for (int y = 0; y < Ho; y++) {
            float* dst = v.data() + ((size_t)c * Ho + y) * W;
            for (int xx = 0; xx < W; xx++) {
                double acc = 0.0;
                for (int t = 0; t < L; t++)
                    acc += (double)kernel[t] * (double)x->val[((size_t)c * H + y + t) * W + xx];
                dst[xx] = (float)acc;
            }
        }
    return make_node({C, Ho, W}, std::move(v), {x}, [C, H, W, Ho, kernel](TensorNode& t) {
        auto& p = t.parents[0];
        p->ensure_grad();
        int L = (int)kernel.size();
        for (int c = 0; c < C; c++)
            for (int y = 0; y < Ho; y++)
                for (int xx = 0; xx < W; xx++) {
                    float g = t.grad[((size_t)c * Ho + y) * W + xx];
                    for (int k = 0; k < L; k++)
                        p->grad[((size_t)c * H + y + k) * W + xx] += kernel[k] * g;
                }
    });
}

// ---- scale-space sampling ----

Tensor ssw_sample_op(const std::vector<Tensor>& levels, const Tensor& flow) {
    if (levels.empty()) throw std::invalid_argument("ssw_sample needs levels");
    int C = levels[0]->shape[0], H = levels[0]->shape[1], W = levels[0]->shape[2];
    for (const auto& l : levels)
        if (l->shape != levels[0]->shape) throw std::invalid_argument("ssw level shapes");
    if (flow->shape != std::vector<int>{3, H, W})
        throw std::invalid_argument("ssw flow shape");
    int M = (int)levels.size() - 1;
    size_t plane = (size_t)H * W;
    std::vector<float> v((size_t)C * plane);

    auto clampf = [](float a, float lo, float hi) { return std::min(hi, std::max(lo, a)); };
    for (int y = 0; y < H; y++)
        for (int xx = 0; xx < W; xx++) {
            size_t pi = (size_t)y * W + xx;
            float sx = clampf((float)xx + flow->val[pi], 0.0f, (float)(W - 1));
            float sy = clampf((float)y + flow->val[plane + pi], 0.0f, (float)(H - 1));
            float sz = clampf(flow->val[2 * plane + pi], 0.0f, (float)M);
            int x0 = (int)std::floor(sx), y0 = (int)std::floor(sy), z0 = (int)std::floor(sz);
            int x1 = std::min(x0 + 1, W - 1), y1 = std::min(y0 + 1, H - 1),
                z1 = std::min(z0 + 1, M);
            float fx = sx - x0, fy = sy - y0, fz = sz - z0;
            for (int c = 0; c < C; c++) {
                const float* l0 = levels[z0]->val.data() + c * plane;
                const float* l1 = levels[z1]->val.data() + c * plane;
                float v00 = l0[y0 * W + x0], v01 = l0[y0 * W + x1];
                float v10 = l0[y1 * W + x0], v11 = l0[y1 * W + x1];
                float a0 = (v00 * (1 - fx) + v01 * fx) * (1 - fy) +
                           (v10 * (1 - fx) + v11 * fx) * fy;
                v00 = l1[y0 * W + x0];
                v01 = l1[y0 * W + x1];
                v10 = l1[y1 * W + x0];
                v11 = l1[y1 * W + x1];
                float a1 = (v00 * (1 - fx) + v01 * fx) * (1 - fy) +
                           (v10 * (1 - fx) + v11 * fx) * fy;
                v[c * plane + pi] = a0 * (1 - fz) + a1 * fz;
            }
        }

    std::vector<Tensor> parents = levels;
    parents.push_back(flow);
    auto back = [C, H, W, M, plane](TensorNode& t) {
        auto& flow = t.parents.back();
        bool fl = flow->needs_grad;
        if (fl) flow->ensure_grad();
        int nl = (int)t.parents.size() - 1;
        for (int i = 0; i < nl; i++)
            if (t.parents[i]->needs_grad) t.parents[i]->ensure_grad();
        auto clampf = [](float a, float lo, float hi) {
            return std::min(hi, std::max(lo, a));
        };
        for (int y = 0; y < H; y++)
            for (int xx = 0; xx < W; xx++) {
                size_t pi = (size_t)y * W + xx;
                float rx = (float)xx + flow->val[pi];
                float ry = (float)y + flow->val[plane + pi];
                float rz = flow->val[2 * plane + pi];
                float sx = clampf(rx, 0.0f, (float)(W - 1));
                float sy = clampf(ry, 0.0f, (float)(H - 1));
                float sz = clampf(rz, 0.0f, (float)M);
                bool inx = rx > 0.0f && rx < (float)(W - 1);
                bool iny = ry > 0.0f && ry < (float)(H - 1);
                bool inz = rz > 0.0f && rz < (float)M;
                int x0 = (int)std::floor(sx), y0 = (int)std::floor(sy),
                    z0 = (int)std::floor(sz);
                int x1 = std::min(x0 + 1, W - 1), y1 = std::min(y0 + 1, H - 1),
                    z1 = std::min(z0 + 1, M);
                float fx = sx - x0, fy = sy - y0, fz = sz - z0;
                float wx0 = 1 - fx, wy0 = 1 - fy, wz0 = 1 - fz;
                for (int c = 0; c < C; c++) {
                    float g = t.grad[c * plane + pi];
                    if (g == 0.0f) continue;
                    const float* l0 = t.parents[z0]->val.data() + c * plane;
                    const float* l1 = t.parents[z1]->val.data() + c * plane;
                    float v000 = l0[y0 * W + x0], v001 = l0[y0 * W + x1];
                    float v010 = l0[y1 * W + x0], v011 = l0[y1 * W + x1];
                    float v100 = l1[y0 * W + x0], v101 = l1[y0 * W + x1];
                    float v110 = l1[y1 * W + x0], v111 = l1[y1 * W + x1];
                    if (t.parents[z0]->needs_grad) {
                        float* g0 = t.parents[z0]->grad.data() + c * plane;
                        g0[y0 * W + x0] += g * wz0 * wy0 * wx0;
                        g0[y0 * W + x1] += g * wz0 * wy0 * fx;
                        g0[y1 * W + x0] += g * wz0 * fy * wx0;
                        g0[y1 * W + x1] += g * wz0 * fy * fx;
                    }
                    if (t.parents[z1]->needs_grad) {
                        float* g1 = t.parents[z1]->grad.data() + c * plane;
                        g1[y0 * W + x0] += g * fz * wy0 * wx0;
                        g1[y0 * W + x1] += g * fz * wy0 * fx;
                        g1[y1 * W + x0] += g * fz * fy * wx0;
                        g1[y1 * W + x1] += g * fz * fy * fx;
                    }
                    if (fl) {
                        if (inx) {
                            float dAdx0 = (v001 - v000) * wy0 + (v011 - v010) * fy;
                            float dAdx1 = (v101 - v100) * wy0 + (v111 - v110) * fy;
                            flow->grad[pi] += g * (dAdx0 * wz0 + dAdx1 * fz);
                        }
                        if (iny) {
                            float dAdy0 = (v010 - v000) * wx0 + (v011 - v001) * fx;
                            float dAdy1 = (v110 - v100) * wx0 + (v111 - v101) * fx;
                            flow->grad[plane + pi] += g * (dAdy0 * wz0 + dAdy1 * fz);
                        }
                        if (inz) {
                            float a0 = (v000 * wx0 + v001 * fx) * wy0 +
                                       (v010 * wx0 + v011 * fx) * fy;
                            float a1 = (v100 * wx0 + v101 * fx) * wy0 +
                                       (v110 * wx0 + v111 * fx) * fy;
                            flow->grad[2 * plane + pi] += g * (a1 - a0);
                        }
                    }
                }
            }
    };
    return make_node({C, H, W}, std::move(v), std::move(parents), std::move(back));
}

// ---- optimizer ----

Adam::Adam(std::vector<Tensor> ps, float lr_) : lr(lr_), params(std::move(ps)) {
    m.resize(params.size());
    v.resize(params.size());
    for (size_t i = 0; i < params.size(); i++) {
        m[i].assign(params[i]->val.size(), 0.0f);
        v[i].assign(params[i]->val.size(), 0.0f);
    }
}

void Adam::step() {
    t++;
    float bc1 = 1.0f - std::pow(beta1, (float)t);
    float bc2 = 1.0f - std::pow(beta2, (float)t);
    for (size_t i = 0; i < params.size(); i++) {
        auto& p = *params[i];
        if (p.grad.empty()) continue;
        for (size_t j = 0; j < p.val.size(); j++) {
            float g = p.grad[j];
            m[i][j] = beta1 * m[i][j] + (1.0f - beta1) * g;
            v[i][j] = beta2 * v[i][j] + (1.0f - beta2) * g * g;
            float mh = m[i][j] / bc1;
            float vh = v[i][j] / bc2;
            p.val[j] -= lr * mh / (std::sqrt(vh) + eps);
        }
    }
}

void Adam::zero_grad() {
    for (auto& p : params) p->grad.clear();
}

}  // namespace wirevid
