#pragma once

#include <string>

#include "wirevid/video.hpp"

namespace wirevid {

// Binary PPM (P6), maxval 255. Writing rounds and clamps to [0,255].
Frame read_ppm(const std::string& path);
void write_ppm(const Frame& f, const std::string& path);

}  // namespace wirevid
