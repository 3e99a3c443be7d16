#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace fnd::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    // 1-based physical line on which each row starts (header is line 1).
    std::vector<std::size_t> row_lines;

    // Index of `name` in the header, or -1.
    int column(std::string_view name) const;
};

// RFC-4180 reader: comma-delimited, double-quote quoting with "" escapes,
// CRLF or LF line endings, embedded newlines inside quoted fields. A header
// row is required and every record must have the header's field count.
// Throws ParseError naming the offending row.
Table parse(std::string_view content);

std::string quote_field(std::string_view field);

} // namespace fnd::csv
