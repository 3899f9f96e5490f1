#include "wirevid/image_io.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace wirevid {

namespace {

// skips whitespace and '#' comment lines between header tokens
int read_header_int(std::istream& in) {
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {}
        } else if (!std::isspace(c)) {
            in.unget();
            break;
        }
    }
    int v;
    if (!(in >> v)) throw std::runtime_error("ppm: bad header");
    return v;
}

}  // namespace

Frame read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("ppm: cannot open " + path);
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (m0 != 'P' || m1 != '6') throw std::runtime_error("ppm: not P6: " + path);
    int w = read_header_int(in);
    int h = read_header_int(in);
    int maxval = read_header_int(in);
    if (maxval != 255) throw std::runtime_error("ppm: only maxval 255 supported: " + path);
    in.get();  // single whitespace byte before pixel data
    std::vector<unsigned char> raw((size_t)w * h * 3);
    in.read(reinterpret_cast<char*>(raw.data()), (std::streamsize)raw.size());
    if ((size_t)in.gcount() != raw.size())
        throw std::runtime_error("ppm: truncated pixel data: " + path);
    Frame f = make_frame(h, w);
    for (int y = 0; y < h; y++)
        for (int x = 0; x < w; x++)
            for (int c = 0; c < 3; c++)
                f.at(c, y, x) = (float)raw[((size_t)y * w + x) * 3 + c];
    return f;
}

void write_ppm(const Frame& f, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("ppm: cannot write " + path);
    out << "P6\n" << f.w << " " << f.h << "\n255\n";
    std::vector<unsigned char> raw((size_t)f.w * f.h * 3);
    for (int y = 0; y < f.h; y++)
        for (int x = 0; x < f.w; x++)
            for (int c = 0; c < 3; c++) {
                float v = std::round(f.at(c, y, x));
                v = std::min(255.0f, std::max(0.0f, v));
                raw[((size_t)y * f.w + x) * 3 + c] = (unsigned char)v;
            }
    out.write(reinterpret_cast<const char*>(raw.data()), (std::streamsize)raw.size());
    if (!out) throw std::runtime_error("ppm: write failed: " + path);
}

}  // namespace wirevid
