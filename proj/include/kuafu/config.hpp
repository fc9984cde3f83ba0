#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace kuafu {

// Minimal TOML-like key/value file: `[section]` headers prefix keys with
// `section.`, values are scalars or comma-separated lists, `#` starts a
// comment. Quoted strings keep commas and hashes verbatim.
class Config {
public:
    static Config parse(const std::string& text);
    static Config load(const std::string& path);

    bool has(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    std::string require_string(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<std::string> get_list(const std::string& key) const; // empty when absent

    const std::map<std::string, std::string>& values() const { return values_; }

    // Canonical text form (sorted dotted keys) recorded in run manifests.
    std::string canonical_text() const;

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

private:
    std::map<std::string, std::string> values_;
};

} // namespace kuafu
