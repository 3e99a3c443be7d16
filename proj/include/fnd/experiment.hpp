#pragma once

#include "fnd/corpus.hpp"
#include "fnd/error.hpp"
#include "fnd/ensemble.hpp"
#include "fnd/evaluation.hpp"
#include "fnd/lda.hpp"
#include "fnd/mlp.hpp"
#include "fnd/report.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fnd {

enum class ExperimentKind { E1, E2, E3, E4, HEATMAP };
enum class Integration { SIS_SA, ERS_MINFO, ERS_ANOVA, ERS_PCA };
// How the SA column of E3 is built: a support-accumulation pool over the
// per-source classifiers, or a single classifier on the un-reduced concatenation.
enum class SaMode { POOL, CONCAT };

std::string_view to_string(ExperimentKind k);
std::string_view to_string(Integration i);
std::string_view column_label(Integration i); // "sa", "minfo", ...

struct ExperimentPaths {
    std::filesystem::path workspace;
    std::filesystem::path esp_fake_csv;
    std::filesystem::path kaggle_csv;
    std::filesystem::path embeddings;
    std::filesystem::path output;
};

struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::E1;
    std::vector<CorpusName> datasets;
    Attribute attribute = Attribute::TEXT;
    std::vector<ExtractorId> extractors;
    std::vector<Integration> integration;
    std::uint64_t seed = 0;
    int target_dim = 100;
    ExperimentPaths paths;
    MlpConfig mlp;
    LdaConfig lda;
    std::size_t tfidf_features = 100;
    SaMode e3_sa_mode = SaMode::POOL;

    // Normalized configuration (defaults filled in, paths as given); its
    // serialization keys the run directory.
    nlohmann::json canonical() const;
    std::string hash() const;
    std::filesystem::path run_dir() const;
};

// Problems in a configuration document. Never throws; an empty list means
// the configuration can run. `base_dir` resolves a relative workspace.
std::vector<std::string> validate(const nlohmann::json& config, const std::filesystem::path& base_dir);

// Parses and validates; throws ConfigError listing all problems.
ExperimentConfig parse_config(const nlohmann::json& config, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);

// A pipeline stage failed; names the stage and the artifact it was handling.
class StageError : public Error {
public:
    StageError(std::string stage, std::string artifact, const std::string& what);
    const std::string& stage() const { return stage_; }
    const std::string& artifact() const { return artifact_; }

private:
    std::string stage_;
    std::string artifact_;
};

struct RunResult {
    std::filesystem::path run_dir;
    std::vector<ReportTable> tables;
    RenderedReport report;
    bool replayed = false; // every score sheet came from disk
};

// Full pipeline: ingest, split, extract, reduce, train, integrate, evaluate,
// report. Artifacts land under config.run_dir(); an existing run directory
// is replayed from its persisted score sheets.
RunResult run(const ExperimentConfig& config);

// Re-renders the report of an existing run directory.
RunResult report_run(const std::filesystem::path& run_dir);

// Writes heatmap_<extractor>_<train>_<eval>.csv files from a HEATMAP run.
std::vector<std::filesystem::path> emit_heatmaps(const std::filesystem::path& run_dir);

// Path of the FMX1 file holding `eval` corpus fold `fold` rows, embedded by
// `extractor` fine-tuned on `train` corpus fold `train_fold` of `repetition`.
std::filesystem::path embedding_path(const std::filesystem::path& root, ExtractorId extractor,
                                     Attribute attribute, CorpusName train, CorpusName eval,
                                     int repetition, int train_fold, int fold);

// Expected embedding files for a configuration plus the fold plans they
// follow; written under <output>/plans/.
std::filesystem::path write_embedding_manifest(const ExperimentConfig& config);

// Loads and normalizes the corpora a configuration needs.
struct CorpusSet {
    std::optional<Corpus> esp_fake;
    std::optional<Corpus> kaggle;
    std::optional<Corpus> mixed;
    nlohmann::json ingest_report = nlohmann::json::object();

    const Corpus& get(CorpusName name) const;
};
CorpusSet load_corpora(const ExperimentConfig& config, const std::vector<CorpusName>& needed);

// Corpora a configuration touches as evaluation targets or extractor sources.
std::vector<CorpusName> required_corpora(const ExperimentConfig& config);

// Class decision used for scoring: single-language corpora marginalize an
// extended support over languages.
Label scored_label(const Decision& d);

} // namespace fnd
