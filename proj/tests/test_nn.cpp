#include <cmath>
#include <set>

#include "doctest.h"
#include "gradcheck.hpp"
#include "wirevid/nn.hpp"

using namespace wirevid;
using testutil::gradcheck;

TEST_CASE("rng streams are deterministic and independent") {
    Rng a = Rng(42).stream("alpha");
    Rng b = Rng(42).stream("alpha");
    for (int i = 0; i < 16; i++) CHECK(a.next_u64() == b.next_u64());

    Rng c = Rng(42).stream("beta");
    Rng d = Rng(42).stream("alpha");
    bool differs = false;
    for (int i = 0; i < 16; i++) differs |= c.next_u64() != d.next_u64();
    CHECK(differs);

    Rng e = Rng(43).stream("alpha");
    Rng f = Rng(42).stream("alpha");
    bool seed_differs = false;
    for (int i = 0; i < 16; i++) seed_differs |= e.next_u64() != f.next_u64();
    CHECK(seed_differs);
}

TEST_CASE("rng ranges and moments") {
    Rng rng = Rng(7).stream("mom");
    for (int i = 0; i < 1000; i++) {
        double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        float v = rng.uniform(-2.0f, 3.0f);
        CHECK(v >= -2.0f);
        CHECK(v <= 3.0f);
        int k = rng.randint(5);
        CHECK(k >= 0);
        CHECK(k < 5);
    }
    double s = 0, s2 = 0;
    const int n = 100000;
    for (int i = 0; i < n; i++) {
        double z = rng.normal();
        s += z;
        s2 += z * z;
    }
    CHECK(std::fabs(s / n) < 0.02);
    CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("randint covers all buckets") {
    Rng rng = Rng(9).stream("buck");
    std::set<int> seen;
    for (int i = 0; i < 200; i++) seen.insert(rng.randint(7));
    CHECK(seen.size() == 7);
    CHECK(rng.randint(1) == 0);
}

TEST_CASE("gaussian kernel") {
    auto k = gaussian_kernel(1.5f, 5);
    CHECK(k.size() == 11);
    double s = 0;
    for (float v : k) s += v;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    for (int i = 0; i < 5; i++) CHECK(k[i] == doctest::Approx(k[10 - i]).epsilon(1e-6));
    for (int i = 0; i < 5; i++) CHECK(k[i] < k[i + 1]);
    auto tight = gaussian_kernel(0.5f, 2);
    CHECK(tight[2] > 0.7f);
}

TEST_CASE("conv layer shapes and same-padding") {
    Rng rng = Rng(3).stream("cv");
    Conv2d c(3, 8, 5, 1, rng);
    CHECK(c.w->shape == std::vector<int>{8, 3, 5, 5});
    CHECK(c.b->shape == std::vector<int>{8});
    Tensor x = constant({3, 12, 12}, 0.1f);
    CHECK(c(x)->shape == std::vector<int>{8, 12, 12});

    Conv2d down(3, 8, 3, 2, rng);
    CHECK(down(x)->shape == std::vector<int>{8, 6, 6});

    std::vector<Tensor> ps;
    c.collect(ps);
    CHECK(ps.size() == 2);

    Conv2d nb(2, 2, 3, 1, rng, false);
    CHECK(!nb.b);
    std::vector<Tensor> nps;
    nb.collect(nps);
    CHECK(nps.size() == 1);
    CHECK(nb(constant({2, 4, 4}, 0.5f))->shape == std::vector<int>{2, 4, 4});
}

TEST_CASE("init scale tracks fan-in") {
    Rng rng = Rng(4).stream("init");
    Conv2d small(2, 2, 3, 1, rng);
    Conv2d big(64, 64, 3, 1, rng);
    auto spread = [](const Tensor& t) {
        double s2 = 0;
        for (float v : t->val) s2 += double(v) * v;
        return std::sqrt(s2 / t->numel());
    };
    CHECK(spread(small.w) > 2.0 * spread(big.w));
}

TEST_CASE("dense layer") {
    Rng rng = Rng(5).stream("d");
    Dense d(6, 4, rng);
    CHECK(d.w->shape == std::vector<int>{4, 6});
    Tensor y = d(constant({6}, 0.5f));
    CHECK(y->shape == std::vector<int>{4});
    std::vector<Tensor> ps;
    d.collect(ps);
    CHECK(ps.size() == 2);
}

TEST_CASE("gdn stays finite and igdn differs") {
    Gdn g(4, false), ig(4, true);
    Tensor x = constant({4, 3, 3}, 0.0f);
    for (int i = 0; i < x->numel(); i++) x->val[i] = ((i % 7) - 3) * 2.0f;
    Tensor y = g(x), z = ig(x);
    CHECK(y->shape == x->shape);
    for (float v : y->val) CHECK(std::isfinite(v));
    // forward divides, inverse multiplies: they bracket the input
    bool shrank = false, grew = false;
    for (int i = 0; i < x->numel(); i++) {
        if (std::fabs(y->val[i]) < std::fabs(x->val[i]) - 1e-4f) shrank = true;
        if (std::fabs(z->val[i]) > std::fabs(x->val[i]) + 1e-4f) grew = true;
    }
    CHECK(shrank);
    CHECK(grew);
    std::vector<Tensor> ps;
    g.collect(ps);
    CHECK(ps.size() == 2);
}

TEST_CASE("gdn gradients") {
    Rng rng = Rng(6).stream("gdn");
    Gdn g(3, false);
    Tensor x = leaf({3, 2, 2}, std::vector<float>(12, 0.0f));
    for (auto& v : x->val) v = rng.uniform(-1.0f, 1.0f);
    std::vector<float> cw(x->numel());
    for (auto& v : cw) v = rng.uniform(-1.0f, 1.0f);
    Tensor c = constant({3, 2, 2}, cw);
    std::vector<Tensor> leaves = {x, g.beta_raw, g.gamma_raw};
    gradcheck([&] { return sum_all(mul(g(x), c)); }, leaves, 5e-3f, 2e-2f);
}

TEST_CASE("residual and attention blocks preserve shape") {
    Rng rng = Rng(8).stream("blk");
    ResUnit r(8, rng);
    Tensor x = constant({8, 6, 6}, 0.0f);
    for (int i = 0; i < x->numel(); i++) x->val[i] = 0.01f * ((i % 11) - 5);
    CHECK(r(x)->shape == x->shape);

    AttentionBlock a(8, rng);
    Tensor y = a(x);
    CHECK(y->shape == x->shape);
    // residual form: the block starts close to identity for small trunk outputs
    std::vector<Tensor> ps;
    a.collect(ps);
    std::set<const float*> uniq;
    for (auto& t : ps) uniq.insert(t->val.data());
    CHECK(uniq.size() == ps.size());
    CHECK(ps.size() > 12);
}

TEST_CASE("af module gates on the channel state") {
    Rng rng = Rng(9).stream("af");
    AFModule af(8, rng);
    Tensor x = constant({8, 4, 4}, 0.0f);
    for (int i = 0; i < x->numel(); i++) x->val[i] = 0.5f + 0.01f * (i % 13);
    Tensor lo = af(x, -5.0f), hi = af(x, 20.0f);
    CHECK(lo->shape == x->shape);
    double diff = 0;
    for (int i = 0; i < x->numel(); i++) diff += std::fabs(lo->val[i] - hi->val[i]);
    CHECK(diff / x->numel() > 1e-5);
    // sigmoid gates only attenuate
    for (int i = 0; i < x->numel(); i++)
        CHECK(std::fabs(lo->val[i]) <= std::fabs(x->val[i]) + 1e-6f);
}

TEST_CASE("upconv doubles resolution") {
    Rng rng = Rng(10).stream("up");
    UpConv u(6, 3, rng);
    Tensor x = constant({6, 5, 5}, 0.3f);
    CHECK(u(x)->shape == std::vector<int>{3, 10, 10});
}
