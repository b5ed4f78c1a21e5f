#include "vellum/keyvalue.hpp"

#include <charconv>
#include <string>

#include "vellum/error.hpp"

namespace vellum {
namespace {

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

template <typename T>
T parse_as(std::string_view value, std::string_view what)
{
    const std::string_view v = trim(value);
    T out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size()) {
        throw InvalidInput(std::string(what) + ": cannot parse '" + std::string(value) + "'");
    }
    return out;
}

} // namespace

std::optional<std::string> KeyValueSection::get(std::string_view key) const
{
    for (const auto& [k, v] : entries) {
        if (k == key) {
            return v;
        }
    }
    return std::nullopt;
}

KeyValueDocument parse_keyvalue(std::string_view text)
{
    KeyValueDocument doc;
    KeyValueSection* current = &doc.root;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t end = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            if (end == text.size()) {
                break;
            }
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) {
                throw InvalidInput("line " + std::to_string(line_no) + ": malformed section header");
            }
            doc.sections.push_back({std::string(trim(line.substr(1, line.size() - 2))), line_no, {}});
            current = &doc.sections.back();
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw InvalidInput("line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        const std::string key(trim(line.substr(0, eq)));
        if (key.empty()) {
            throw InvalidInput("line " + std::to_string(line_no) + ": empty key");
        }
        if (current->has(key)) {
            throw InvalidInput("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
        }
        current->entries.emplace_back(key, std::string(trim(line.substr(eq + 1))));
        if (end == text.size()) {
            break;
        }
    }
    return doc;
}

double parse_number(std::string_view value, std::string_view what)
{
    // from_chars for double is available in libstdc++ 11.
    return parse_as<double>(value, what);
}

std::int64_t parse_integer(std::string_view value, std::string_view what)
{
    return parse_as<std::int64_t>(value, what);
}

std::uint64_t parse_unsigned(std::string_view value, std::string_view what)
{
    return parse_as<std::uint64_t>(value, what);
}

std::vector<double> parse_numbers(std::string_view value, std::string_view what)
{
    std::vector<double> out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t comma = value.find(',', pos);
        out.push_back(parse_number(value.substr(pos, comma == std::string_view::npos ? value.npos : comma - pos), what));
        if (comma == std::string_view::npos) {
            break;
        }
        pos = comma + 1;
    }
    return out;
}

} // namespace vellum
