#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace audmem::csv {

using Row = std::vector<std::string>;

/// RFC 4180 reader: quoted fields, doubled quotes, CRLF or LF line endings.
/// Blank lines are skipped.
std::vector<Row> parse(std::string_view text);
std::vector<Row> read_file(const std::filesystem::path& path);

std::string escape(std::string_view field);
std::string join(const Row& row);

/// Shortest round-trip decimal representation; "NA" for NaN.
std::string format_number(double v);

/// Parses a finite double, or "NA"/"" as NaN. Returns nullopt when the text
/// is not a number.
std::optional<double> parse_number(std::string_view text);

}  // namespace audmem::csv
