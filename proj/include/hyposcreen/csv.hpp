#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hyposcreen::csv {

// Splits one line on commas. Double-quoted fields may contain commas and ""
// escapes. Surrounding whitespace is trimmed from unquoted fields.
std::vector<std::string> split_line(std::string_view line);

std::string quote_if_needed(std::string_view field);

// Shortest decimal text that round-trips to the same double.
std::string format_double(double value);

std::optional<double> parse_double(std::string_view text);

std::string trim(std::string_view text);

// Reads a whole file into lines, stripping trailing '\r'. Throws MissingFile.
std::vector<std::string> read_lines(const std::filesystem::path& path);

// Reads a whole file. Throws MissingFile.
std::string read_text(const std::filesystem::path& path);

// Writes text to a file, throwing IoError on failure.
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace hyposcreen::csv
