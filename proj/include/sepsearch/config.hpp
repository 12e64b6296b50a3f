#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace sepsearch {

/// Parsed `key=value` lines. Blank lines and lines starting with '#' are
/// skipped; whitespace around keys and values is trimmed.
class KeyValueConfig {
  public:
    static KeyValueConfig parse(std::string_view text);
    static KeyValueConfig load(const std::filesystem::path& path);

    bool has(std::string_view key) const { return values_.find(key) != values_.end(); }
    const std::map<std::string, std::string, std::less<>>& values() const noexcept { return values_; }

    std::string get_string(std::string_view key, std::string_view fallback) const;
    std::uint64_t get_u64(std::string_view key, std::uint64_t fallback) const;
    double get_double(std::string_view key, double fallback) const;
    bool get_bool(std::string_view key, bool fallback) const;
    std::vector<std::size_t> get_size_list(std::string_view key) const;
    std::vector<double> get_double_list(std::string_view key) const;

    /// Throws ParseError naming the first key outside `allowed`.
    void require_known(const std::set<std::string, std::less<>>& allowed) const;

  private:
    std::map<std::string, std::string, std::less<>> values_;
};

} // namespace sepsearch
