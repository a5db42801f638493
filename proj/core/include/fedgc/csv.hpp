#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace fedgc {

using CsvRow = std::vector<std::string>;

/// Shortest decimal that reads back to the same double ("nan", "inf", "-inf"
/// for non-finite values).
std::string format_double(double x);

/// Parses what format_double writes. Throws std::invalid_argument.
double parse_double(std::string_view text);

/// Quotes a field when it contains a comma, quote, CR or LF.
std::string csv_escape(std::string_view field);

void write_csv_row(std::ostream& out, const CsvRow& row);

/// Parses an RFC-4180 document (quoted fields may span lines). Rows end in
/// LF or CRLF; a trailing line break does not produce an empty row.
std::vector<CsvRow> parse_csv(std::string_view text);

}  // namespace fedgc
