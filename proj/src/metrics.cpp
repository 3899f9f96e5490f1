#include "wirevid/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "wirevid/nn.hpp"

namespace wirevid {

namespace {

constexpr double kC1 = 6.5025;    // (0.01 * 255)^2
constexpr double kC2 = 58.5225;   // (0.03 * 255)^2
constexpr double kMsSsimFloor = 1e-6;
const double kRawWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

Tensor blur11(const Tensor& x) {
    static const std::vector<float> kWin = gaussian_kernel(1.5f, 5);
    return conv1d_v_const(conv1d_h_const(x, kWin), kWin);
}

// mean over one channel, clamped positive, raised to weight w
Tensor scale_term(const Tensor& map, int c, double w) {
    Tensor m = mean_all(slice_ch(map, c, 1));
    return pow_k(clamp(m, (float)kMsSsimFloor, 1e30f), (float)w);
}

}  // namespace

Metric parse_metric(const std::string& s) {
    if (s == "psnr") return Metric::psnr;
    if (s == "ms-ssim") return Metric::ms_ssim;
    throw std::invalid_argument("unknown metric: " + s);
}

const char* metric_name(Metric m) { return m == Metric::psnr ? "psnr" : "ms-ssim"; }

Tensor mse_loss(const Tensor& x, const Tensor& xhat) {
    return mean_all(square(sub(x, xhat)));
}

double mse_value(const Frame& x, const Frame& xhat) {
    if (x.h != xhat.h || x.w != xhat.w) throw std::invalid_argument("frame size mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < x.chw.size(); i++) {
        double d = (double)x.chw[i] - (double)xhat.chw[i];
        acc += d * d;
    }
    return acc / (double)x.chw.size();
}

double psnr_db(double mse) {
    if (mse <= 0.0) return 100.0;
    return std::min(100.0, 10.0 * std::log10(255.0 * 255.0 / mse));
}

int max_msssim_levels(int h, int w) {
    int m = 0;
    while (m < 5 && std::min(h, w) >= 11 * (1 << m)) m++;
    return m;
}

std::vector<double> msssim_weights(int levels) {
    if (levels < 1 || levels > 5) throw std::invalid_argument("levels must be in 1..5");
    std::vector<double> w(kRawWeights, kRawWeights + levels);
    double sum = 0.0;
    for (double v : w) sum += v;
    for (double& v : w) v /= sum;
    return w;
}

Tensor ms_ssim(const Tensor& x, const Tensor& xhat, int levels) {
    if (x->shape != xhat->shape || x->shape.size() != 3)
        throw std::invalid_argument("ms_ssim expects matching (C,H,W)");
    if (std::min(x->shape[1], x->shape[2]) < 11 * (1 << (levels - 1)))
        throw std::invalid_argument("input too small for requested scale count");
    auto w = msssim_weights(levels);
    int C = x->shape[0];

    Tensor a = x, b = xhat;
    std::vector<Tensor> per_channel(C);
    for (int s = 0; s < levels; s++) {
        Tensor mu_a = blur11(a), mu_b = blur11(b);
        Tensor mu_aa = mul(mu_a, mu_a), mu_bb = mul(mu_b, mu_b), mu_ab = mul(mu_a, mu_b);
        Tensor var_a = sub(blur11(mul(a, a)), mu_aa);
        Tensor var_b = sub(blur11(mul(b, b)), mu_bb);
        Tensor cov = sub(blur11(mul(a, b)), mu_ab);
        // contrast-structure term; at the coarsest scale also the luminance term
        Tensor cs = div(add_k(mul_k(cov, 2.0f), (float)kC2),
                        add_k(add(var_a, var_b), (float)kC2));
        for (int c = 0; c < C; c++) {
            Tensor term = scale_term(cs, c, w[s]);
            per_channel[c] = per_channel[c] ? mul(per_channel[c], term) : term;
        }
        if (s == levels - 1) {
            Tensor lum = div(add_k(mul_k(mu_ab, 2.0f), (float)kC1),
                             add_k(add(mu_aa, mu_bb), (float)kC1));
            for (int c = 0; c < C; c++)
                per_channel[c] = mul(per_channel[c], scale_term(lum, c, w[s]));
        } else {
            a = avg_pool2(a);
            b = avg_pool2(b);
        }
    }
    Tensor total = per_channel[0];
    for (int c = 1; c < C; c++) total = add(total, per_channel[c]);
    return mul_k(total, 1.0f / (float)C);
}

Tensor msssim_loss(const Tensor& x, const Tensor& xhat, int levels) {
    return add_k(mul_k(ms_ssim(x, xhat, levels), -1.0f), 1.0f);
}

double ms_ssim_value(const Frame& x, const Frame& xhat, int levels) {
    return ms_ssim(frame_tensor(x), frame_tensor(xhat), levels)->scalar();
}

double sequence_quality(const std::vector<Frame>& ref, const std::vector<Frame>& rec,
                        Metric metric, int msssim_levels) {
    if (ref.size() != rec.size() || ref.empty())
        throw std::invalid_argument("sequence length mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < ref.size(); i++)
        acc += metric == Metric::psnr ? psnr_db(mse_value(ref[i], rec[i]))
                                      : ms_ssim_value(ref[i], rec[i], msssim_levels);
    return acc / (double)ref.size();
}

}  // namespace wirevid
