#include "kuafu/config.hpp"

#include <sstream>

#include "kuafu/error.hpp"
#include "kuafu/io_util.hpp"

namespace kuafu {

Config Config::parse(const std::string& text) {
    Config config;
    std::istringstream in(text);
    std::string line;
    std::string section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        if (stripped.front() == '[') {
            if (stripped.back() != ']') throw ParseError("unterminated section header", line_no);
            section = trim(stripped.substr(1, stripped.size() - 2));
            if (section.empty()) throw ParseError("empty section name", line_no);
            continue;
        }
        std::size_t eq = stripped.find('=');
        if (eq == std::string::npos) throw ParseError("expected `key = value`", line_no);
        std::string key = trim(stripped.substr(0, eq));
        std::string value = trim(stripped.substr(eq + 1));
        if (key.empty()) throw ParseError("empty key", line_no);
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
            value = value.substr(1, value.size() - 2);
        } else {
            // strip a trailing comment on unquoted values
            std::size_t hash = value.find('#');
            if (hash != std::string::npos) value = trim(value.substr(0, hash));
        }
        std::string full = section.empty() ? key : section + "." + key;
        config.values_[full] = value;
    }
    return config;
}

Config Config::load(const std::string& path) { return parse(read_file(path)); }

bool Config::has(const std::string& key) const { return values_.count(key) > 0; }

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

std::string Config::require_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ValidationError("config key missing: " + key);
    return it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        std::size_t used = 0;
        double v = std::stod(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument(it->second);
        return v;
    } catch (const std::exception&) {
        throw ValidationError("config key " + key + " is not a number: " + it->second);
    }
}

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        std::size_t used = 0;
        long long v = std::stoll(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument(it->second);
        return v;
    } catch (const std::exception&) {
        throw ValidationError("config key " + key + " is not an integer: " + it->second);
    }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
    if (it->second == "false" || it->second == "0" || it->second == "no") return false;
    throw ValidationError("config key " + key + " is not a boolean: " + it->second);
}

std::vector<std::string> Config::get_list(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return {};
    std::vector<std::string> out;
    for (const auto& item : split(it->second, ',')) {
        std::string s = trim(item);
        if (!s.empty()) out.push_back(s);
    }
    return out;
}

std::string Config::canonical_text() const {
    std::ostringstream out;
    for (const auto& [key, value] : values_) out << key << " = " << value << '\n';
    return out.str();
}

} // namespace kuafu
