#include "sepsearch/config.hpp"

#include "sepsearch/error.hpp"
#include "sepsearch/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>

namespace sepsearch {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_commas(std::string_view s) {
    std::vector<std::string_view> out;
    while (true) {
        const auto comma = s.find(',');
        out.push_back(trim(s.substr(0, comma)));
        if (comma == std::string_view::npos) break;
        s = s.substr(comma + 1);
    }
    return out;
}

std::uint64_t to_u64(std::string_view key, std::string_view text) {
    std::uint64_t v = 0;
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || end != text.data() + text.size()) {
        throw Error(ErrorCode::ParseError, std::string(key) + ": expected non-negative integer, got '" +
                                               std::string(text) + "'");
    }
    return v;
}

double to_double(std::string_view key, std::string_view text) {
    const std::string owned(text);
    char* end = nullptr;
    const double v = std::strtod(owned.c_str(), &end);
    if (owned.empty() || end != owned.c_str() + owned.size() || !std::isfinite(v)) {
        throw Error(ErrorCode::ParseError, std::string(key) + ": expected number, got '" + owned + "'");
    }
    return v;
}

} // namespace

KeyValueConfig KeyValueConfig::parse(std::string_view text) {
    KeyValueConfig cfg;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = trim(text.substr(0, nl));
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected key=value");
        }
        const auto key = trim(line.substr(0, eq));
        if (key.empty()) throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": empty key");
        if (!cfg.values_.emplace(std::string(key), std::string(trim(line.substr(eq + 1)))).second) {
            throw Error(ErrorCode::ParseError, "duplicate key '" + std::string(key) + "'");
        }
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) { return parse(read_file(path)); }

std::string KeyValueConfig::get_string(std::string_view key, std::string_view fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? std::string(fallback) : it->second;
}

std::uint64_t KeyValueConfig::get_u64(std::string_view key, std::uint64_t fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : to_u64(key, it->second);
}

double KeyValueConfig::get_double(std::string_view key, double fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : to_double(key, it->second);
}

bool KeyValueConfig::get_bool(std::string_view key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const auto& v = it->second;
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw Error(ErrorCode::ParseError, std::string(key) + ": expected boolean, got '" + v + "'");
}

std::vector<std::size_t> KeyValueConfig::get_size_list(std::string_view key) const {
    std::vector<std::size_t> out;
    auto it = values_.find(key);
    if (it == values_.end() || it->second.empty()) return out;
    for (auto part : split_commas(it->second)) out.push_back(static_cast<std::size_t>(to_u64(key, part)));
    return out;
}

std::vector<double> KeyValueConfig::get_double_list(std::string_view key) const {
    std::vector<double> out;
    auto it = values_.find(key);
    if (it == values_.end() || it->second.empty()) return out;
    for (auto part : split_commas(it->second)) out.push_back(to_double(key, part));
    return out;
}

void KeyValueConfig::require_known(const std::set<std::string, std::less<>>& allowed) const {
    for (const auto& [key, _] : values_) {
        if (!allowed.contains(key)) throw Error(ErrorCode::ParseError, "unknown config key '" + key + "'");
    }
}

} // namespace sepsearch
