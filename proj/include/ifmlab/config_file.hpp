#pragma once

// Flat key-value run configuration (TOML syntax: `key = value` lines,
// optional [section] headers flattened to "section.key", # comments).

#include <cstdint>
#include <map>
#include <string>

namespace ifm {

class ConfigFile {
public:
    static ConfigFile parse_file(const std::string& path);
    static ConfigFile parse_string(const std::string& text);

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    std::string get_string(const std::string& key, const std::string& fallback) const;
    int64_t get_int(const std::string& key, int64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    const std::map<std::string, std::string>& raw() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

}  // namespace ifm
