#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "wirevid/tensor.hpp"

namespace wirevid {

// Planar RGB, values in [0,255] (float to keep reconstructions unquantized).
struct Frame {
    int h = 0, w = 0;
    std::vector<float> chw;  // 3*h*w

    float& at(int c, int y, int x) { return chw[((size_t)c * h + y) * w + x]; }
    float at(int c, int y, int x) const { return chw[((size_t)c * h + y) * w + x]; }
};

Frame make_frame(int h, int w, float fill = 0.0f);
Tensor frame_tensor(const Frame& f);          // constant (3,h,w)
Frame tensor_frame(const Tensor& t);          // copies values, no clamping
Frame crop_frame(const Frame& f, int y0, int x0, int ch, int cw);

// N consecutive frames; the last one is the key frame, the rest are
// interpolated between the preceding key and it.
struct GoP {
    std::vector<Frame> frames;
    const Frame& key() const { return frames.back(); }
};

// bootstrap frame (the key reference for the first group) plus T groups.
struct VideoSequence {
    Frame bootstrap;
    std::vector<GoP> gops;
};

enum class Split { train, val, test };
const char* split_name(Split s);
Split parse_split(const std::string& s);

struct ClipEntry {
    std::string dir;
    int num_frames = 0;
    Split split = Split::train;
};

struct DatasetManifest {
    std::vector<ClipEntry> clips;
    std::vector<ClipEntry> of(Split s) const;
};

// Dyadic interpolation order as (frame index, reference offset) pairs,
// coarsest first: each frame i is predicted from frames i-t and i+t, which
// are already available by the time it is visited. N must be a power of two.
std::vector<std::pair<int, int>> interpolation_schedule(int N);

std::vector<std::string> list_clip_files(const std::string& dir);  // lexicographic *.ppm

// First frame bootstraps, the rest are grouped into GoPs of gop_size; a
// trailing remainder is dropped. Throws unless at least gop_size+1 frames.
VideoSequence load_clip(const std::string& dir, int gop_size);

VideoSequence crop_sequence(const VideoSequence& seq, int y0, int x0, int ch, int cw);

// 0.8 / 0.1 / 0.1 split (within one clip), deterministic in the seed.
// Needs at least 10 clips so every split is non-empty.
DatasetManifest split_dataset(std::vector<ClipEntry> clips, uint64_t seed);

DatasetManifest read_manifest(const std::string& path);
void write_manifest(const DatasetManifest& m, const std::string& path);

}  // namespace wirevid
