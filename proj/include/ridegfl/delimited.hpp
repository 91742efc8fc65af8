#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ridegfl {

/// Splits one line of delimited text. Double-quoted fields may contain the
/// delimiter and `""` escapes; embedded newlines are not supported.
std::vector<std::string> split_record(std::string_view line, char delim);

/// Reads the next non-empty record. A trailing '\r' is stripped.
bool read_record(std::istream& in, char delim, std::vector<std::string>& fields);

/// Quotes a field only when it needs it.
std::string quote_field(std::string_view field, char delim);

/// Fixed-point text with `digits` decimals; negative zero prints as zero.
std::string format_fixed(double v, int digits = 6);

std::optional<double> parse_double(std::string_view s);

std::string_view trim(std::string_view s);

/// Writes `content` to `path` through a temporary file and rename.
void write_file_atomic(const std::string& path, const std::string& content);

} // namespace ridegfl
