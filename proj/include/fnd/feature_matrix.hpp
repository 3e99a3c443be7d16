#pragma once

#include "fnd/types.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fnd {

using MatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Where a feature matrix came from. Keys beyond the six core ones live in
// `extra` and are written to / read from the same metadata object.
struct Provenance {
    std::string extractor;
    std::string train_corpus;
    std::string eval_corpus;
    std::string attribute;
    int repetition = 0;
    int fold = 0;
    nlohmann::json extra = nlohmann::json::object();

    nlohmann::json to_json() const;
    static Provenance from_json(const nlohmann::json& j);

    friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct FeatureMatrix {
    MatrixF values;
    Provenance meta;

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }
    bool all_finite() const { return values.allFinite(); }
};

// FMX1 (little-endian): "FMX1", u32 version=1, u32 rows, u32 cols,
// u32 metadata_len, metadata JSON, rows*cols f32 row-major.
std::string encode_fmx1(const FeatureMatrix& m);
FeatureMatrix decode_fmx1(std::string_view bytes);

// Refuses matrices containing non-finite values.
void save_matrix(const FeatureMatrix& m, const std::filesystem::path& path);
FeatureMatrix load_matrix(const std::filesystem::path& path);

// The slot a caller expects an embedding file to fill. Unset fields are not checked.
struct EmbeddingSlot {
    std::optional<std::string> extractor;
    std::optional<std::string> train_corpus;
    std::optional<std::string> eval_corpus;
    std::optional<std::string> attribute;
    std::optional<int> repetition;
    std::optional<int> fold;
    std::optional<Eigen::Index> rows;
};

// Loads an FMX1 file produced outside this library and checks it against
// the expected slot; throws LoadError on any mismatch.
FeatureMatrix load_embeddings(const std::filesystem::path& path, const EmbeddingSlot& expected = {});

// LBL1: "LBL1", u32 rows, then per row u8 class, u8 language.
struct LabelRow {
    Label label;
    Language language;
    friend bool operator==(const LabelRow&, const LabelRow&) = default;
};
void save_labels(const std::vector<LabelRow>& rows, const std::filesystem::path& path);
std::vector<LabelRow> load_labels(const std::filesystem::path& path);

// Column-wise concatenation; all inputs must describe the same rows.
FeatureMatrix hconcat(const std::vector<const FeatureMatrix*>& parts);

} // namespace fnd
