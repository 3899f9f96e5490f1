#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace wirevid {

// Flat key=value files; '#' starts a comment, blank lines ignored.
// Lists are comma separated.
struct Config {
    std::map<std::string, std::string> kv;

    static Config load(const std::string& path);
    static Config parse(const std::string& text, const std::string& origin = "<string>");
    void save(const std::string& path) const;
    std::string to_text() const;

    bool has(const std::string& k) const { return kv.count(k) != 0; }
    void set(const std::string& k, const std::string& v) { kv[k] = v; }

    std::string str(const std::string& k, const std::string& dflt) const;
    int geti(const std::string& k, int dflt) const;
    int64_t geti64(const std::string& k, int64_t dflt) const;
    double getd(const std::string& k, double dflt) const;
    std::vector<double> list(const std::string& k, std::vector<double> dflt) const;
};

}  // namespace wirevid
