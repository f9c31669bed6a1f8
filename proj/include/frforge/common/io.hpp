#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

#include <json.hpp>

namespace frforge {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

// Reads a JSON Lines file, invoking `visit` with each parsed object and its
// 1-based line number. Blank lines are skipped. A missing file is a ConfigError;
// a malformed line is a ParseError naming the line.
void read_jsonl(const std::filesystem::path& path,
                const std::function<void(const Json&, std::size_t)>& visit);

// Throws ParseError naming `key` if `obj` has a field outside `allowed`.
void require_known_fields(const Json& obj, std::initializer_list<std::string_view> allowed,
                          const std::string& path, std::size_t line);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view contents);

// Formats with 9 significant digits ("%.9g").
std::string format_sig9(double value);
// Rounds through the 9-significant-digit decimal form so that serialization
// round-trips bit-exactly.
double quantize_sig9(double value);

std::string hex_digest(std::uint64_t digest);

}  // namespace frforge
