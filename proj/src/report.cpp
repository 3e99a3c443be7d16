#include "fnd/report.hpp"

#include "fnd/csv.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace fnd {

const ScoreSheet* ReportTable::cell(std::size_t row, std::size_t col) const {
    const auto it = cells.find({row, col});
    return it == cells.end() ? nullptr : &it->second;
}

std::string format_score(double v) {
    std::string s = fmt::format("{:.3f}", v);
    if (s.starts_with("0.")) s.erase(0, 1);
    return s;
}

std::vector<std::size_t> dominated_methods(const ReportTable& table, std::size_t row, std::size_t col) {
    std::vector<std::size_t> out;
    const ScoreSheet* self = table.cell(row, col);
    if (!self) return out;
    for (std::size_t other = 0; other < table.columns.size(); ++other) {
        if (other == col) continue;
        const ScoreSheet* rival = table.cell(row, other);
        if (!rival) continue;
        const auto test = combined_f_test(*self, *rival);
        if (is_significant(test.verdict) && self->mean() > rival->mean()) out.push_back(other + 1);
    }
    return out;
}

namespace {

std::string join(const std::vector<std::size_t>& v) {
    if (v.empty()) return "---";
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(v[i]);
    }
    return s;
}

std::string pad(const std::string& s, std::size_t width) {
    // display width by code points
    std::size_t cps = 0;
    for (unsigned char c : s)
        if ((c & 0xC0) != 0x80) ++cps;
    return s + std::string(width > cps ? width - cps : 0, ' ');
}

} // namespace

RenderedReport render_report(const std::vector<ReportTable>& tables,
                             const std::vector<std::string>& footer) {
    RenderedReport out;
    out.csv = "table,dataset,index,method,mean,dominates,r1f1,r1f2,r2f1,r2f2,r3f1,r3f2,r4f1,r4f2,r5f1,r5f2\n";
    out.significance = {{"tables", nlohmann::json::array()}};

    for (const auto& t : tables) {
        std::size_t label_w = std::string("dataset").size();
        for (const auto& r : t.rows) label_w = std::max(label_w, r.size());
        std::vector<std::size_t> col_w;
        for (std::size_t c = 0; c < t.columns.size(); ++c) {
            std::size_t w = std::max<std::size_t>(t.columns[c].size(), 5);
            for (std::size_t r = 0; r < t.rows.size(); ++r) w = std::max(w, join(dominated_methods(t, r, c)).size());
            col_w.push_back(w);
        }
        auto line = [&](const std::string& label, auto&& cell_text) {
            std::string s = pad(label, label_w);
            for (std::size_t c = 0; c < t.columns.size(); ++c) s += " | " + pad(cell_text(c), col_w[c]);
            while (!s.empty() && s.back() == ' ') s.pop_back();
            return s + "\n";
        };

        out.text += t.title + "\n";
        out.text += line("dataset", [&](std::size_t c) { return t.columns[c]; });
        out.text += line("", [&](std::size_t c) { return std::to_string(c + 1); });
        std::size_t rule = label_w;
        for (auto w : col_w) rule += 3 + w;
        out.text += std::string(rule, '-') + "\n";

        nlohmann::json sig_rows = nlohmann::json::array();
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            out.text += line(t.rows[r], [&](std::size_t c) {
                const auto* s = t.cell(r, c);
                return s ? format_score(s->mean()) : std::string("---");
            });
            out.text += line("", [&](std::size_t c) { return join(dominated_methods(t, r, c)); });

            std::vector<ScoreSheet> present;
            for (std::size_t c = 0; c < t.columns.size(); ++c) {
                const auto* s = t.cell(r, c);
                std::string row_csv = csv::quote_field(t.title) + "," + csv::quote_field(t.rows[r]) + "," +
                                      std::to_string(c + 1) + "," + csv::quote_field(t.columns[c]) + ",";
                if (!s) {
                    row_csv += "---,---";
                    for (int k = 0; k < kRepetitions * kFolds; ++k) row_csv += ",";
                } else {
                    present.push_back(*s);
                    present.back().method = t.columns[c];
                    row_csv += format_score(s->mean()) + "," + csv::quote_field(join(dominated_methods(t, r, c)));
                    for (const auto& rep : s->scores)
                        for (double v : rep) row_csv += fmt::format(",{:.6f}", v);
                }
                out.csv += row_csv + "\n";
            }
            sig_rows.push_back({{"dataset", t.rows[r]}, {"significance", significance_matrix(present).to_json()}});
        }
        out.text += "\n";
        out.significance["tables"].push_back({{"title", t.title}, {"rows", sig_rows}});
    }
    for (const auto& f : footer) out.text += f + "\n";
    return out;
}

} // namespace fnd
