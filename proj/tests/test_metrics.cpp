#include <cmath>

#include "doctest.h"
#include "gradcheck.hpp"
#include "msssim_ref.hpp"
#include "wirevid/metrics.hpp"
#include "wirevid/nn.hpp"
#include "wirevid/video.hpp"

using namespace wirevid;

namespace {

Frame noisy(int h, int w, uint64_t seed, float lo = 0.0f, float hi = 255.0f) {
    Rng rng = Rng(seed).stream("img");
    Frame f = make_frame(h, w);
    for (auto& v : f.chw) v = rng.uniform(lo, hi);
    return f;
}

Frame perturb(const Frame& f, float amp, uint64_t seed) {
    Rng rng = Rng(seed).stream("per");
    Frame g = f;
    for (auto& v : g.chw) {
        v += amp * rng.normal();
        v = std::min(255.0f, std::max(0.0f, v));
    }
    return g;
}

Frame smooth(int h, int w, uint64_t seed) {
    Rng rng = Rng(seed).stream("sm");
    Frame f = make_frame(h, w);
    float ax = rng.uniform(0.05f, 0.2f), ay = rng.uniform(0.05f, 0.2f);
    float px = rng.uniform(0.0f, 6.0f), py = rng.uniform(0.0f, 6.0f);
    for (int c = 0; c < 3; c++)
        for (int y = 0; y < h; y++)
            for (int x = 0; x < w; x++)
                f.at(c, y, x) =
                    127.5f + 120.0f * std::sin(ax * x + px + c) * std::cos(ay * y + py);
    return f;
}

}  // namespace

TEST_CASE("metric names parse") {
    CHECK(parse_metric("psnr") == Metric::psnr);
    CHECK(parse_metric("ms-ssim") == Metric::ms_ssim);
    CHECK(metric_name(Metric::ms_ssim) == std::string("ms-ssim"));
    CHECK_THROWS(parse_metric("ssim"));
}

TEST_CASE("mse and psnr examples") {
    Frame a = make_frame(4, 4, 100.0f);
    Frame b = make_frame(4, 4, 116.0f);
    CHECK(mse_value(a, b) == doctest::Approx(256.0));
    CHECK(psnr_db(256.0) == doctest::Approx(10.0 * std::log10(255.0 * 255.0 / 256.0)).epsilon(1e-9));
    CHECK(psnr_db(0.0) == doctest::Approx(100.0));
    CHECK(psnr_db(1e-12) == doctest::Approx(100.0));  // cap, not formula
    CHECK(mse_value(a, a) == 0.0);

    Tensor t = mse_loss(frame_tensor(a), frame_tensor(b));
    CHECK(t->numel() == 1);
    CHECK(t->val[0] == doctest::Approx(256.0));
}

TEST_CASE("msssim weights truncate and renormalize") {
    auto w5 = msssim_weights(5);
    REQUIRE(w5.size() == 5);
    double raw5 = 0.0448 + 0.2856 + 0.3001 + 0.2363 + 0.1333;
    CHECK(w5[0] == doctest::Approx(0.0448 / raw5).epsilon(1e-6));
    CHECK(w5[4] == doctest::Approx(0.1333 / raw5).epsilon(1e-6));
    auto w3 = msssim_weights(3);
    REQUIRE(w3.size() == 3);
    double s = w3[0] + w3[1] + w3[2];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    double raw = 0.0448 + 0.2856 + 0.3001;
    CHECK(w3[1] == doctest::Approx(0.2856 / raw).epsilon(1e-6));
}

TEST_CASE("usable level count tracks resolution") {
    CHECK(max_msssim_levels(64, 64) == 3);
    CHECK(max_msssim_levels(32, 32) == 2);
    CHECK(max_msssim_levels(176, 176) == 5);
    CHECK(max_msssim_levels(1024, 1024) == 5);  // capped
    CHECK(max_msssim_levels(11, 11) == 1);
    CHECK(max_msssim_levels(64, 32) == 2);      // limited by the smaller side
    CHECK(max_msssim_levels(10, 64) == 0);
}

TEST_CASE("identical frames score one") {
    Frame f = noisy(48, 48, 31);
    CHECK(ms_ssim_value(f, f, 3) == doctest::Approx(1.0).epsilon(1e-6));
    Frame g = smooth(96, 96, 32);
    CHECK(ms_ssim_value(g, g, 4) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("msssim is symmetric and bounded") {
    Frame a = smooth(48, 48, 33);
    Frame b = perturb(a, 20.0f, 34);
    double ab = ms_ssim_value(a, b, 3);
    double ba = ms_ssim_value(b, a, 3);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-6));
    CHECK(ab > 0.0);
    CHECK(ab <= 1.0 + 1e-6);
    CHECK(ab < 1.0 - 1e-4);
}

TEST_CASE("msssim matches the independent reference") {
    for (uint64_t s = 0; s < 10; s++) {
        Frame a = smooth(64, 64, 100 + s);
        Frame b = perturb(a, 5.0f + 4.0f * s, 200 + s);
        int lv = 3;
        double got = ms_ssim_value(a, b, lv);
        double want = msref::ms_ssim(a, b, lv);
        INFO("pair ", s, " got ", got, " want ", want);
        CHECK(std::fabs(got - want) <= 1e-4);
    }
    // and at the deeper scale counts
    Frame a = smooth(176, 176, 300);
    Frame b = perturb(a, 12.0f, 301);
    CHECK(std::fabs(ms_ssim_value(a, b, 5) - msref::ms_ssim(a, b, 5)) <= 1e-4);
}

TEST_CASE("msssim orders degradations") {
    Frame a = smooth(64, 64, 40);
    double mild = ms_ssim_value(a, perturb(a, 5.0f, 41), 3);
    double heavy = ms_ssim_value(a, perturb(a, 40.0f, 41), 3);
    CHECK(mild > heavy);
}

TEST_CASE("msssim tensor path agrees with the frame path") {
    Frame a = smooth(48, 48, 50);
    Frame b = perturb(a, 15.0f, 51);
    Tensor s = ms_ssim(frame_tensor(a), frame_tensor(b), 3);
    CHECK(s->numel() == 1);
    CHECK(s->val[0] == doctest::Approx(ms_ssim_value(a, b, 3)).epsilon(1e-6));
    Tensor l = msssim_loss(frame_tensor(a), frame_tensor(b), 3);
    CHECK(l->val[0] == doctest::Approx(1.0 - s->val[0]).epsilon(1e-6));
}

TEST_CASE("metric losses are differentiable") {
    Frame a = smooth(32, 32, 60);
    Frame b = perturb(a, 10.0f, 61);
    Tensor xa = frame_tensor(a);
    Tensor xb = leaf({3, 32, 32}, b.chw);
    testutil::gradcheck([&] { return mse_loss(xa, xb); }, {xb}, 1e-1f, 2e-2f);
    testutil::gradcheck([&] { return msssim_loss(xa, xb, 2); }, {xb}, 1e-1f, 5e-2f);
}

TEST_CASE("sequence quality averages per-frame scores") {
    Frame a = make_frame(8, 8, 100.0f);
    Frame b = make_frame(8, 8, 116.0f);
    std::vector<Frame> ref = {a, a};
    std::vector<Frame> perfect = {a, a};
    std::vector<Frame> mixed = {a, b};
    CHECK(sequence_quality(ref, perfect, Metric::psnr) == doctest::Approx(100.0));
    // PSNR averages in dB, so one perfect frame contributes the 100 dB cap
    double want = 0.5 * (100.0 + psnr_db(256.0));
    CHECK(sequence_quality(ref, mixed, Metric::psnr) == doctest::Approx(want).epsilon(1e-9));

    Frame s = smooth(48, 48, 70);
    Frame sp = perturb(s, 20.0f, 71);
    std::vector<Frame> r2 = {s, s};
    std::vector<Frame> m2 = {s, sp};
    double one = ms_ssim_value(s, sp, 3);
    CHECK(sequence_quality(r2, m2, Metric::ms_ssim, 3) ==
          doctest::Approx(0.5 * (1.0 + one)).epsilon(1e-6));
}
