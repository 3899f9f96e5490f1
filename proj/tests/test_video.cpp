#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "wirevid/image_io.hpp"
#include "wirevid/nn.hpp"
#include "wirevid/synth.hpp"
#include "wirevid/video.hpp"

using namespace wirevid;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("wirevid_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

Frame noise_frame(int h, int w, uint64_t seed) {
    Rng rng = Rng(seed).stream("frame");
    Frame f = make_frame(h, w);
    for (auto& v : f.chw) v = float(rng.randint(256));
    return f;
}

void write_clip(const fs::path& dir, int n, int h, int w, uint64_t seed) {
    fs::create_directories(dir);
    char name[32];
    for (int i = 0; i < n; i++) {
        std::snprintf(name, sizeof name, "frame_%03d.ppm", i);
        write_ppm(noise_frame(h, w, seed * 1000 + i), (dir / name).string());
    }
}

}  // namespace

TEST_CASE("ppm round trip") {
    fs::path dir = fresh_dir("ppm");
    Frame f = noise_frame(9, 13, 5);
    write_ppm(f, (dir / "x.ppm").string());
    Frame g = read_ppm((dir / "x.ppm").string());
    REQUIRE(g.h == 9);
    REQUIRE(g.w == 13);
    for (size_t i = 0; i < f.chw.size(); i++) CHECK(g.chw[i] == f.chw[i]);
    CHECK_THROWS(read_ppm((dir / "missing.ppm").string()));
}

TEST_CASE("frame tensor round trip and crop") {
    Frame f = noise_frame(8, 8, 6);
    Tensor t = frame_tensor(f);
    CHECK(t->shape == std::vector<int>{3, 8, 8});
    Frame g = tensor_frame(t);
    CHECK(g.at(2, 3, 4) == f.at(2, 3, 4));
    Frame c = crop_frame(f, 2, 3, 4, 5);
    CHECK(c.h == 4);
    CHECK(c.w == 5);
    CHECK(c.at(1, 0, 0) == f.at(1, 2, 3));
    CHECK(c.at(0, 3, 4) == f.at(0, 5, 7));
}

TEST_CASE("interpolation schedule visits coarse to fine") {
    auto s2 = interpolation_schedule(2);
    REQUIRE(s2.size() == 1);
    CHECK(s2[0] == std::pair<int, int>{1, 1});

    auto s4 = interpolation_schedule(4);
    REQUIRE(s4.size() == 3);
    CHECK(s4[0] == std::pair<int, int>{2, 2});
    CHECK(s4[1] == std::pair<int, int>{1, 1});
    CHECK(s4[2] == std::pair<int, int>{3, 1});

    auto s8 = interpolation_schedule(8);
    REQUIRE(s8.size() == 7);
    CHECK(s8[0] == std::pair<int, int>{4, 4});
    CHECK(s8[1] == std::pair<int, int>{2, 2});
    CHECK(s8[2] == std::pair<int, int>{6, 2});
    CHECK(s8[3] == std::pair<int, int>{1, 1});
    CHECK(s8[6] == std::pair<int, int>{7, 1});

    // every interpolated frame appears exactly once, references stay in range
    std::set<int> seen;
    for (auto [i, t] : s8) {
        CHECK(i - t >= 0);
        CHECK(i + t <= 8);
        seen.insert(i);
    }
    CHECK(seen.size() == 7);

    CHECK(interpolation_schedule(1).empty());
    CHECK_THROWS(interpolation_schedule(3));
    CHECK_THROWS(interpolation_schedule(0));
}

TEST_CASE("clip loading groups frames and drops the remainder") {
    fs::path dir = fresh_dir("clips");
    write_clip(dir / "a", 9, 8, 8, 1);
    VideoSequence a = load_clip((dir / "a").string(), 4);
    CHECK(a.gops.size() == 2);  // 1 bootstrap + 2 full groups, nothing left over
    CHECK(a.gops[0].frames.size() == 4);

    write_clip(dir / "b", 10, 8, 8, 2);
    VideoSequence b = load_clip((dir / "b").string(), 4);
    CHECK(b.gops.size() == 2);  // trailing frame dropped

    write_clip(dir / "c", 4, 8, 8, 3);
    CHECK_THROWS(load_clip((dir / "c").string(), 4));  // no room for a full group

    // bootstrap is the first frame, key of group g is frame 4(g+1)
    Frame f0 = noise_frame(8, 8, 1 * 1000 + 0);
    Frame f4 = noise_frame(8, 8, 1 * 1000 + 4);
    CHECK(a.bootstrap.chw == f0.chw);
    CHECK(a.gops[0].key().chw == f4.chw);
}

TEST_CASE("clip files come back sorted") {
    fs::path dir = fresh_dir("sorted");
    fs::create_directories(dir / "z");
    write_ppm(noise_frame(4, 4, 1), (dir / "z" / "frame_002.ppm").string());
    write_ppm(noise_frame(4, 4, 2), (dir / "z" / "frame_000.ppm").string());
    write_ppm(noise_frame(4, 4, 3), (dir / "z" / "frame_001.ppm").string());
    auto files = list_clip_files((dir / "z").string());
    REQUIRE(files.size() == 3);
    CHECK(files[0] < files[1]);
    CHECK(files[1] < files[2]);
}

TEST_CASE("crop_sequence crops every frame") {
    fs::path dir = fresh_dir("cropseq");
    write_clip(dir / "a", 9, 16, 16, 4);
    VideoSequence s = load_clip((dir / "a").string(), 4);
    VideoSequence c = crop_sequence(s, 4, 4, 8, 8);
    CHECK(c.bootstrap.h == 8);
    CHECK(c.gops.size() == s.gops.size());
    CHECK(c.gops[1].frames[2].w == 8);
    CHECK(c.gops[0].frames[0].at(0, 0, 0) == s.gops[0].frames[0].at(0, 4, 4));
}

TEST_CASE("dataset split proportions and determinism") {
    std::vector<ClipEntry> clips;
    for (int i = 0; i < 10; i++) clips.push_back({"clip_" + std::to_string(i), 17, Split::train});
    DatasetManifest m = split_dataset(clips, 99);
    CHECK(m.of(Split::train).size() == 8);
    CHECK(m.of(Split::val).size() == 1);
    CHECK(m.of(Split::test).size() == 1);

    DatasetManifest m2 = split_dataset(clips, 99);
    for (size_t i = 0; i < m.clips.size(); i++) {
        CHECK(m.clips[i].dir == m2.clips[i].dir);
        CHECK(m.clips[i].split == m2.clips[i].split);
    }

    std::vector<ClipEntry> big;
    for (int i = 0; i < 25; i++) big.push_back({"c" + std::to_string(i), 17, Split::train});
    DatasetManifest mb = split_dataset(big, 1);
    CHECK(mb.of(Split::train).size() + mb.of(Split::val).size() + mb.of(Split::test).size() == 25);
    CHECK(mb.of(Split::val).size() >= 2);
    CHECK(mb.of(Split::test).size() >= 2);

    // splits are disjoint by construction: every clip keeps exactly one tag
    std::set<std::string> names;
    for (auto& e : mb.clips) names.insert(e.dir);
    CHECK(names.size() == 25);

    std::vector<ClipEntry> few(9, {"x", 17, Split::train});
    CHECK_THROWS(split_dataset(few, 1));
}

TEST_CASE("manifest round trip resolves relative dirs") {
    fs::path dir = fresh_dir("manifest");
    write_clip(dir / "clip_000", 9, 8, 8, 7);
    DatasetManifest m;
    m.clips.push_back({"clip_000", 9, Split::val});
    write_manifest(m, (dir / "index.txt").string());

    DatasetManifest r = read_manifest((dir / "index.txt").string());
    REQUIRE(r.clips.size() == 1);
    CHECK(r.clips[0].num_frames == 9);
    CHECK(r.clips[0].split == Split::val);
    // dir resolved against the manifest location, so loading works from anywhere
    VideoSequence s = load_clip(r.clips[0].dir, 4);
    CHECK(s.gops.size() == 2);

    CHECK_THROWS(read_manifest((dir / "nope.txt").string()));
}

TEST_CASE("split names parse both ways") {
    CHECK(parse_split("train") == Split::train);
    CHECK(parse_split("val") == Split::val);
    CHECK(parse_split("test") == Split::test);
    CHECK(split_name(Split::test) == std::string("test"));
    CHECK_THROWS(parse_split("dev"));
}

TEST_CASE("synthetic corpus is loadable and deterministic") {
    fs::path dir = fresh_dir("synth");
    SynthSpec spec;
    spec.n_clips = 2;
    spec.frames = 9;
    spec.h = 16;
    spec.w = 16;
    spec.seed = 5;
    auto entries = generate_corpus(dir.string(), spec);
    REQUIRE(entries.size() == 2);
    VideoSequence s = load_clip(entries[0].dir, 4);
    CHECK(s.gops.size() == 2);
    CHECK(s.bootstrap.h == 16);

    // same seed, same pixels
    fs::path dir2 = fresh_dir("synth2");
    auto entries2 = generate_corpus(dir2.string(), spec);
    VideoSequence s2 = load_clip(entries2[0].dir, 4);
    CHECK(s.bootstrap.chw == s2.bootstrap.chw);
    CHECK(s.gops[1].key().chw == s2.gops[1].key().chw);

    // consecutive frames are related but not identical (it is video, not noise)
    double d01 = 0, d0 = 0;
    const Frame& f0 = s.gops[0].frames[0];
    const Frame& f1 = s.gops[0].frames[1];
    for (size_t i = 0; i < f0.chw.size(); i++) {
        d01 += std::fabs(f0.chw[i] - f1.chw[i]);
        d0 += std::fabs(f0.chw[i] - 128.0f);
    }
    CHECK(d01 > 0);
    CHECK(d01 < d0);
}
