#include "wirevid/synth.hpp"

#include <cmath>
#include <filesystem>

#include "wirevid/image_io.hpp"
#include "wirevid/nn.hpp"

namespace fs = std::filesystem;

namespace wirevid {

namespace {

struct Shape {
    bool circular = false;
    float cx = 0, cy = 0, vx = 0, vy = 0;
    float half = 4;       // half size in px
    float rgb[3] = {0, 0, 0};
};

// bounce inside [lo, hi] by folding the unbounded coordinate
float bounce(float p, float lo, float hi) {
    float span = hi - lo;
    float q = std::fmod(p - lo, 2.0f * span);
    if (q < 0) q += 2.0f * span;
    return lo + (q <= span ? q : 2.0f * span - q);
}

float smoothstep01(float t) {
    t = std::min(1.0f, std::max(0.0f, t));
    return t * t * (3.0f - 2.0f * t);
}

}  // namespace

std::vector<Frame> synth_clip(uint64_t seed, int frames, int h, int w) {
    Rng rng = Rng(seed).stream("clip");
    float base[3], gx[3], gy[3], amp[3], fx, fy, phase;
    for (int c = 0; c < 3; c++) {
        base[c] = rng.uniform(60.0f, 180.0f);
        gx[c] = rng.uniform(-60.0f, 60.0f);
        gy[c] = rng.uniform(-60.0f, 60.0f);
        amp[c] = rng.uniform(8.0f, 28.0f);
    }
    fx = rng.uniform(1.5f, 4.0f);
    fy = rng.uniform(1.5f, 4.0f);
    phase = rng.uniform(0.0f, 6.2831853f);

    int n_shapes = 2 + rng.randint(2);
    std::vector<Shape> shapes(n_shapes);
    for (auto& s : shapes) {
        s.circular = rng.uniform() < 0.5;
        s.half = rng.uniform(0.1f, 0.2f) * (float)std::min(h, w);
        s.cx = rng.uniform(s.half, (float)w - s.half);
        s.cy = rng.uniform(s.half, (float)h - s.half);
        s.vx = rng.uniform(-2.5f, 2.5f);
        s.vy = rng.uniform(-2.5f, 2.5f);
        for (int c = 0; c < 3; c++) s.rgb[c] = rng.uniform(20.0f, 235.0f);
    }
    float drift_x = rng.uniform(-0.4f, 0.4f), drift_y = rng.uniform(-0.4f, 0.4f);

    std::vector<Frame> out;
    for (int t = 0; t < frames; t++) {
        Frame f = make_frame(h, w);
        for (int y = 0; y < h; y++)
            for (int x = 0; x < w; x++) {
                float u = ((float)x + drift_x * t) / (float)w;
                float v = ((float)y + drift_y * t) / (float)h;
                float tex = std::sin(6.2831853f * (fx * u + fy * v) + phase);
                for (int c = 0; c < 3; c++) {
                    float val = base[c] + gx[c] * u + gy[c] * v + amp[c] * tex;
                    f.at(c, y, x) = std::min(255.0f, std::max(0.0f, val));
                }
            }
        for (const auto& s : shapes) {
            float cx = bounce(s.cx + s.vx * t, s.half, (float)w - s.half);
            float cy = bounce(s.cy + s.vy * t, s.half, (float)h - s.half);
            int x0 = std::max(0, (int)std::floor(cx - s.half - 2));
            int x1 = std::min(w - 1, (int)std::ceil(cx + s.half + 2));
            int y0 = std::max(0, (int)std::floor(cy - s.half - 2));
            int y1 = std::min(h - 1, (int)std::ceil(cy + s.half + 2));
            for (int y = y0; y <= y1; y++)
                for (int x = x0; x <= x1; x++) {
                    float dx = (float)x - cx, dy = (float)y - cy;
                    float d = s.circular ? std::sqrt(dx * dx + dy * dy)
                                         : std::max(std::fabs(dx), std::fabs(dy));
                    float a = smoothstep01((s.half - d) * 0.7f + 0.5f);
                    if (a <= 0.0f) continue;
                    for (int c = 0; c < 3; c++)
                        f.at(c, y, x) = (1.0f - a) * f.at(c, y, x) + a * s.rgb[c];
                }
        }
        out.push_back(std::move(f));
    }
    return out;
}

std::vector<ClipEntry> generate_corpus(const std::string& out_dir, const SynthSpec& spec) {
    fs::create_directories(out_dir);
    std::vector<ClipEntry> entries;
    for (int i = 0; i < spec.n_clips; i++) {
        char name[32];
        std::snprintf(name, sizeof(name), "clip_%03d", i);
        fs::path dir = fs::path(out_dir) / name;
        fs::create_directories(dir);
        auto frames = synth_clip(spec.seed + (uint64_t)i * 1000003ull, spec.frames, spec.h,
                                 spec.w);
        for (size_t t = 0; t < frames.size(); t++) {
            char fname[32];
            std::snprintf(fname, sizeof(fname), "frame_%03d.ppm", (int)t);
            write_ppm(frames[t], (dir / fname).string());
        }
        entries.push_back({dir.string(), (int)frames.size(), Split::train});
    }
    return entries;
}

}  // namespace wirevid
