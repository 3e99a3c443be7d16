#pragma once

#include "fnd/evaluation.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fnd {

struct ReportTable {
    std::string title;
    std::vector<std::string> rows;    // datasets
    std::vector<std::string> columns; // methods, numbered 1.. in rendering
    std::map<std::pair<std::size_t, std::size_t>, ScoreSheet> cells;

    const ScoreSheet* cell(std::size_t row, std::size_t col) const;
};

struct RenderedReport {
    std::string text;
    std::string csv;
    nlohmann::json significance;
};

// ".751"-style three-decimal value.
std::string format_score(double v);

// For each cell, the 1-based indices of methods in the same row that it
// significantly outperforms (combined F test, higher mean). Missing cells
// render as "---".
std::vector<std::size_t> dominated_methods(const ReportTable& table, std::size_t row, std::size_t col);

RenderedReport render_report(const std::vector<ReportTable>& tables,
                             const std::vector<std::string>& footer);

} // namespace fnd
