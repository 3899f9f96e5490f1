#include "wirevid/video.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "wirevid/image_io.hpp"
#include "wirevid/nn.hpp"

namespace fs = std::filesystem;

namespace wirevid {

Frame make_frame(int h, int w, float fill) {
    Frame f;
    f.h = h;
    f.w = w;
    f.chw.assign((size_t)3 * h * w, fill);
    return f;
}

Tensor frame_tensor(const Frame& f) { return constant({3, f.h, f.w}, f.chw); }

Frame tensor_frame(const Tensor& t) {
    if (t->shape.size() != 3 || t->shape[0] != 3)
        throw std::invalid_argument("tensor_frame expects (3,H,W)");
    Frame f;
    f.h = t->shape[1];
    f.w = t->shape[2];
    f.chw = t->val;
    return f;
}

Frame crop_frame(const Frame& f, int y0, int x0, int ch, int cw) {
    if (y0 < 0 || x0 < 0 || y0 + ch > f.h || x0 + cw > f.w)
        throw std::out_of_range("crop outside frame");
    Frame out = make_frame(ch, cw);
    for (int c = 0; c < 3; c++)
        for (int y = 0; y < ch; y++)
            for (int x = 0; x < cw; x++) out.at(c, y, x) = f.at(c, y0 + y, x0 + x);
    return out;
}

const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "?";
}

Split parse_split(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw std::invalid_argument("unknown split: " + s);
}

std::vector<ClipEntry> DatasetManifest::of(Split s) const {
    std::vector<ClipEntry> out;
    for (const auto& c : clips)
        if (c.split == s) out.push_back(c);
    return out;
}

std::vector<std::pair<int, int>> interpolation_schedule(int N) {
    if (N < 1 || (N & (N - 1)) != 0)
        throw std::invalid_argument("group size must be a power of two");
    std::vector<std::pair<int, int>> order;
    for (int t = N / 2; t >= 1; t /= 2)
        for (int i = t; i < N; i += 2 * t) order.push_back({i, t});
    return order;
}

std::vector<std::string> list_clip_files(const std::string& dir) {
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        if (e.path().extension() == ".ppm") files.push_back(e.path().string());
    }
    std::sort(files.begin(), files.end());
    return files;
}

VideoSequence load_clip(const std::string& dir, int gop_size) {
    auto files = list_clip_files(dir);
    if ((int)files.size() < gop_size + 1)
        throw std::runtime_error("clip " + dir + " has " + std::to_string(files.size()) +
                                 " frames, needs at least " + std::to_string(gop_size + 1));
    VideoSequence seq;
    seq.bootstrap = read_ppm(files[0]);
    int usable = ((int)files.size() - 1) / gop_size * gop_size;
    for (int g = 0; g < usable / gop_size; g++) {
        GoP gop;
        for (int i = 0; i < gop_size; i++)
            gop.frames.push_back(read_ppm(files[1 + g * gop_size + i]));
        seq.gops.push_back(std::move(gop));
    }
    return seq;
}

VideoSequence crop_sequence(const VideoSequence& seq, int y0, int x0, int ch, int cw) {
    VideoSequence out;
    out.bootstrap = crop_frame(seq.bootstrap, y0, x0, ch, cw);
    for (const auto& g : seq.gops) {
        GoP gop;
        for (const auto& f : g.frames) gop.frames.push_back(crop_frame(f, y0, x0, ch, cw));
        out.gops.push_back(std::move(gop));
    }
    return out;
}

DatasetManifest split_dataset(std::vector<ClipEntry> clips, uint64_t seed) {
    int n = (int)clips.size();
    if (n < 10) throw std::invalid_argument("need at least 10 clips to split");
    std::sort(clips.begin(), clips.end(),
              [](const ClipEntry& a, const ClipEntry& b) { return a.dir < b.dir; });
    Rng rng = Rng(seed).stream("split");
    for (int i = n - 1; i > 0; i--) std::swap(clips[i], clips[rng.randint(i + 1)]);
    int n_train = (int)std::llround(0.8 * n);
    int n_val = std::max(1, (n - n_train) / 2);
    for (int i = 0; i < n; i++)
        clips[i].split = i < n_train          ? Split::train
                         : i < n_train + n_val ? Split::val
                                               : Split::test;
    DatasetManifest m;
    m.clips = std::move(clips);
    return m;
}

DatasetManifest read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest " + path);
    DatasetManifest m;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        ClipEntry e;
        std::string split;
        if (!(ls >> e.dir >> e.num_frames >> split))
            throw std::runtime_error("bad manifest line: " + line);
        e.split = parse_split(split);
        // relative entries are relative to the manifest itself
        fs::path d(e.dir);
        if (d.is_relative()) e.dir = (fs::path(path).parent_path() / d).string();
        m.clips.push_back(std::move(e));
    }
    return m;
}

void write_manifest(const DatasetManifest& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest " + path);
    for (const auto& c : m.clips)
        out << c.dir << " " << c.num_frames << " " << split_name(c.split) << "\n";
}

}  // namespace wirevid
