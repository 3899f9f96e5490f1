#include "wirevid/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace wirevid {

namespace {

constexpr char kMagic[4] = {'W', 'V', 'C', 'K'};

void put_u32(std::ostream& out, uint32_t v) {
    char b[4] = {(char)(v & 0xff), (char)((v >> 8) & 0xff), (char)((v >> 16) & 0xff),
                 (char)((v >> 24) & 0xff)};
    out.write(b, 4);
}

uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("checkpoint: truncated");
    return (uint32_t)b[0] | ((uint32_t)b[1] << 8) | ((uint32_t)b[2] << 16) |
           ((uint32_t)b[3] << 24);
}

void put_str(std::ostream& out, const std::string& s) {
    put_u32(out, (uint32_t)s.size());
    out.write(s.data(), (std::streamsize)s.size());
}

std::string get_str(std::istream& in) {
    uint32_t n = get_u32(in);
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) throw std::runtime_error("checkpoint: truncated");
    return s;
}

}  // namespace

void save_checkpoint(const std::string& path, uint32_t version, const std::string& meta,
                     const ParamGroups& groups) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path);
    out.write(kMagic, 4);
    put_u32(out, version);
    put_str(out, meta);
    put_u32(out, (uint32_t)groups.size());
    for (const auto& [name, tensors] : groups) {
        put_str(out, name);
        put_u32(out, (uint32_t)tensors.size());
        for (const auto& t : tensors) {
            put_u32(out, (uint32_t)t->shape.size());
            for (int d : t->shape) put_u32(out, (uint32_t)d);
            out.write(reinterpret_cast<const char*>(t->val.data()),
                      (std::streamsize)(t->val.size() * sizeof(float)));
        }
    }
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

namespace {

std::ifstream open_and_check(const std::string& path, uint32_t* version,
                             std::string* meta) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("not a checkpoint: " + path);
    *version = get_u32(in);
    *meta = get_str(in);
    return in;
}

}  // namespace

CheckpointInfo read_checkpoint_header(const std::string& path) {
    CheckpointInfo info;
    open_and_check(path, &info.version, &info.meta);
    return info;
}

void load_checkpoint_into(const std::string& path, uint32_t expected_version,
                          const ParamGroups& groups) {
    uint32_t version;
    std::string meta;
    std::ifstream in = open_and_check(path, &version, &meta);
    if (version != expected_version)
        throw std::runtime_error("checkpoint " + path + " has version " +
                                 std::to_string(version) + ", expected " +
                                 std::to_string(expected_version));
    uint32_t n_groups = get_u32(in);
    if (n_groups != groups.size())
        throw std::runtime_error("checkpoint group count mismatch in " + path);
    for (const auto& [name, tensors] : groups) {
        std::string got = get_str(in);
        if (got != name)
            throw std::runtime_error("checkpoint group '" + got + "' where '" + name +
                                     "' expected in " + path);
        uint32_t n_tensors = get_u32(in);
        if (n_tensors != tensors.size())
            throw std::runtime_error("checkpoint tensor count mismatch in group " + name);
        for (const auto& t : tensors) {
            uint32_t rank = get_u32(in);
            std::vector<int> shape(rank);
            for (auto& d : shape) d = (int)get_u32(in);
            if (shape != t->shape)
                throw std::runtime_error("checkpoint shape mismatch in group " + name);
            in.read(reinterpret_cast<char*>(t->val.data()),
                    (std::streamsize)(t->val.size() * sizeof(float)));
            if (!in) throw std::runtime_error("checkpoint: truncated in group " + name);
        }
    }
}

}  // namespace wirevid
