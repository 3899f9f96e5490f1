#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "wirevid/tensor.hpp"

namespace wirevid {

// Binary parameter snapshots: magic, format version, an embedded key=value
// text block describing the model, then named groups of raw float tensors.
// Raw bytes in and out, so save/load round-trips are bitwise.

using ParamGroups = std::vector<std::pair<std::string, std::vector<Tensor>>>;

void save_checkpoint(const std::string& path, uint32_t version, const std::string& meta,
                     const ParamGroups& groups);

struct CheckpointInfo {
    uint32_t version = 0;
    std::string meta;
};
CheckpointInfo read_checkpoint_header(const std::string& path);

// verifies version, group names and shapes, then fills the tensors in place
void load_checkpoint_into(const std::string& path, uint32_t expected_version,
                          const ParamGroups& groups);

}  // namespace wirevid
