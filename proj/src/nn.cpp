#include "wirevid/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace wirevid {

namespace {

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

uint64_t splitmix(uint64_t& x) {
    x += 0x9e3779b97f4a7c15ull;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(uint64_t s) : seed(s) {
    uint64_t x = s;
    state[0] = splitmix(x);
    state[1] = splitmix(x);
}

uint64_t Rng::next_u64() {
    // xoroshiro128+ step
    uint64_t s0 = state[0], s1 = state[1];
    uint64_t r = s0 + s1;
    s1 ^= s0;
    state[0] = ((s0 << 55) | (s0 >> 9)) ^ s1 ^ (s1 << 14);
    state[1] = (s1 << 36) | (s1 >> 28);
    return r;
}

double Rng::uniform() { return (double)(next_u64() >> 11) * 0x1.0p-53; }

float Rng::uniform(float a, float b) { return a + (float)uniform() * (b - a); }

float Rng::normal() {
    // Box-Muller; u strictly inside (0,1]
    double u = 1.0 - uniform();
    double v = uniform();
    return (float)(std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * M_PI * v));
}

int Rng::randint(int n) {
    if (n <= 0) throw std::invalid_argument("randint needs n > 0");
    int r = (int)(uniform() * n);
    return r < n ? r : n - 1;
}

Rng Rng::stream(const std::string& name) const {
    return Rng(seed * 0x9e3779b97f4a7c15ull + fnv1a(name));
}

std::vector<float> gaussian_kernel(float sigma, int radius) {
    std::vector<float> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; i++) {
        double v = std::exp(-(double)i * i / (2.0 * sigma * sigma));
        k[i + radius] = (float)v;
        sum += v;
    }
    for (auto& v : k) v = (float)(v / sum);
    return k;
}

namespace {

Tensor glorot(std::vector<int> shape, int fan_in, int fan_out, Rng& rng) {
    float limit = std::sqrt(6.0f / (float)(fan_in + fan_out));
    int n = 1;
    for (int d : shape) n *= d;
    std::vector<float> data(n);
    for (int i = 0; i < n; i++) data[i] = rng.uniform(-limit, limit);
    return leaf(std::move(shape), std::move(data));
}

}  // namespace

Conv2d::Conv2d(int cin, int cout, int k, int stride_, Rng& rng, bool bias)
    : stride(stride_), pad(k / 2) {
    w = glorot({cout, cin, k, k}, cin * k * k, cout * k * k, rng);
    if (bias) b = leaf({cout}, std::vector<float>(cout, 0.0f));
}

void Conv2d::collect(std::vector<Tensor>& out) const {
    out.push_back(w);
    if (b) out.push_back(b);
}

Dense::Dense(int n_in, int n_out, Rng& rng) {
    w = glorot({n_out, n_in}, n_in, n_out, rng);
    b = leaf({n_out}, std::vector<float>(n_out, 0.0f));
}

void Dense::collect(std::vector<Tensor>& out) const {
    out.push_back(w);
    out.push_back(b);
}

Gdn::Gdn(int C, bool inverse_) : inverse(inverse_) {
    beta_raw = leaf({C}, std::vector<float>(C, 1.0f));
    std::vector<float> g((size_t)C * C);
    for (int i = 0; i < C; i++)
        for (int j = 0; j < C; j++)
            g[(size_t)i * C + j] = std::sqrt((i == j ? 0.1f : 0.0f) + 1e-3f);
    gamma_raw = leaf({C, C, 1, 1}, std::move(g));
}

Tensor Gdn::operator()(const Tensor& x) const {
    Tensor norm = conv2d(square(x), square(gamma_raw), square(beta_raw), 1, 0);
    Tensor root = pow_k(norm, 0.5f);
    return inverse ? mul(x, root) : div(x, root);
}

void Gdn::collect(std::vector<Tensor>& out) const {
    out.push_back(beta_raw);
    out.push_back(gamma_raw);
}

ResUnit::ResUnit(int C, Rng& rng)
    : c1(C, C / 2, 1, 1, rng), c2(C / 2, C / 2, 3, 1, rng), c3(C / 2, C, 1, 1, rng) {}

Tensor ResUnit::operator()(const Tensor& x) const {
    return add(x, c3(relu(c2(relu(c1(x))))));
}

void ResUnit::collect(std::vector<Tensor>& out) const {
    c1.collect(out);
    c2.collect(out);
    c3.collect(out);
}

AttentionBlock::AttentionBlock(int C, Rng& rng)
    : t1(C, rng), t2(C, rng), t3(C, rng), m1(C, rng), m2(C, rng), m3(C, rng),
      mask_out(C, C, 1, 1, rng) {}

Tensor AttentionBlock::operator()(const Tensor& x) const {
    Tensor trunk = t3(t2(t1(x)));
    Tensor mask = sigmoid(mask_out(m3(m2(m1(x)))));
    return add(x, mul(trunk, mask));
}

void AttentionBlock::collect(std::vector<Tensor>& out) const {
    t1.collect(out);
    t2.collect(out);
    t3.collect(out);
    m1.collect(out);
    m2.collect(out);
    m3.collect(out);
    mask_out.collect(out);
}

AFModule::AFModule(int C, Rng& rng) : fc1(C + 1, C, rng), fc2(C, C, rng) {}

Tensor AFModule::operator()(const Tensor& x, float snr_db) const {
    Tensor pooled = global_avg_pool(x);
    Tensor snr = constant({1}, snr_db / 20.0f);
    Tensor h = relu(fc1(concat_ch({pooled, snr})));
    Tensor s = sigmoid(fc2(h));
    return channel_scale(x, s);
}

void AFModule::collect(std::vector<Tensor>& out) const {
    fc1.collect(out);
    fc2.collect(out);
}

UpConv::UpConv(int cin, int cout, Rng& rng) : conv(cin, 4 * cout, 3, 1, rng) {}

void UpConv::collect(std::vector<Tensor>& out) const { conv.collect(out); }

}  // namespace wirevid
