#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace vellum {

/// `key = value` lines, `#` comments, `[name]` opening a new section.
/// Keys before the first header belong to an unnamed root section.
struct KeyValueSection {
    std::string name;
    int line = 0;
    std::vector<std::pair<std::string, std::string>> entries;

    std::optional<std::string> get(std::string_view key) const;
    bool has(std::string_view key) const { return get(key).has_value(); }
};

struct KeyValueDocument {
    KeyValueSection root;
    std::vector<KeyValueSection> sections;
};

/// Throws InvalidInput (with the line number) on malformed lines and on a
/// key repeated within one section.
KeyValueDocument parse_keyvalue(std::string_view text);

double parse_number(std::string_view value, std::string_view what);
std::int64_t parse_integer(std::string_view value, std::string_view what);
std::uint64_t parse_unsigned(std::string_view value, std::string_view what);
/// Comma-separated numbers.
std::vector<double> parse_numbers(std::string_view value, std::string_view what);

} // namespace vellum
