#include "fnd/csv.hpp"

#include "fnd/error.hpp"

namespace fnd::csv {

int Table::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    return -1;
}

Table parse(std::string_view content) {
    if (content.starts_with("\xEF\xBB\xBF")) content.remove_prefix(3);

    Table table;
    std::vector<std::string> record;
    std::string field;
    std::size_t line = 1;
    std::size_t record_start_line = 1;
    std::size_t record_no = 0; // 0 = header
    bool in_quotes = false;
    bool field_was_quoted = false;
    bool after_closing_quote = false;

    auto fail = [&](const std::string& what) -> void {
        throw ParseError("CSV row " + std::to_string(record_no) + " (line " +
                         std::to_string(record_start_line) + "): " + what);
    };

    auto end_record = [&] {
        record.push_back(std::move(field));
        field.clear();
        if (record_no == 0) {
            table.header = std::move(record);
        } else if (!(record.size() == 1 && record[0].empty() && !field_was_quoted)) {
            if (record.size() != table.header.size())
                fail("expected " + std::to_string(table.header.size()) + " fields, found " +
                     std::to_string(record.size()));
            table.rows.push_back(std::move(record));
            table.row_lines.push_back(record_start_line);
        }
        record.clear();
        field_was_quoted = false;
        after_closing_quote = false;
        ++record_no;
    };

    for (std::size_t i = 0; i < content.size(); ++i) {
        const char c = content[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < content.size() && content[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                    after_closing_quote = true;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        if (c == ',') {
            record.push_back(std::move(field));
            field.clear();
            field_was_quoted = false;
            after_closing_quote = false;
        } else if (c == '\r' || c == '\n') {
            if (c == '\r' && i + 1 < content.size() && content[i + 1] == '\n') ++i;
            end_record();
            ++line;
            record_start_line = line;
        } else if (c == '"') {
            if (!field.empty() || after_closing_quote) fail("unexpected quote inside field");
            in_quotes = true;
            field_was_quoted = true;
        } else {
            if (after_closing_quote) fail("characters after closing quote");
            field.push_back(c);
        }
    }
    if (in_quotes) fail("unterminated quoted field");
    if (!field.empty() || !record.empty() || field_was_quoted) end_record();
    if (table.header.empty() || (table.header.size() == 1 && table.header[0].empty()))
        throw ParseError("CSV has no header row");
    return table;
}

std::string quote_field(std::string_view field) {
    const bool needs = field.find_first_of(",\"\r\n") != std::string_view::npos;
    if (!needs) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

} // namespace fnd::csv
