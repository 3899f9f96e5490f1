#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wirevid/video.hpp"

namespace wirevid {

// Procedural clips for smoke tests and desk-scale training: soft shapes with
// constant velocities bouncing over a textured gradient background, so there
// is real motion for the flow estimator and enough structure to compress.

struct SynthSpec {
    int n_clips = 12;
    int frames = 17;
    int h = 64, w = 64;
    uint64_t seed = 7;
};

std::vector<Frame> synth_clip(uint64_t seed, int frames, int h, int w);

// writes clip_###/frame_###.ppm under out_dir; returns one entry per clip
std::vector<ClipEntry> generate_corpus(const std::string& out_dir, const SynthSpec& spec);

}  // namespace wirevid
