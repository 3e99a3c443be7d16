#pragma once

#include "fnd/types.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fnd {

struct Document {
    std::string id;
    Language language = Language::ENG;
    std::string title;
    std::string text;
    Label label = Label::LEGIT;

    const std::string& attribute(Attribute a) const { return a == Attribute::TEXT ? text : title; }
};

struct Corpus {
    CorpusName name = CorpusName::ESP_FAKE;
    std::vector<Document> documents;

    std::size_t size() const { return documents.size(); }
    std::size_t count(Label l) const;
    std::size_t count(Language l) const;
    std::vector<int> labels() const;
};

enum class CsvSource { ESP_FAKE_CSV, KAGGLE_CSV };

struct IngestReport {
    std::size_t rows_read = 0;
    std::size_t kept = 0;
    // 1-based data row numbers dropped for empty/missing text.
    std::vector<std::size_t> dropped_rows;
};

struct Ingested {
    Corpus corpus;
    IngestReport report;
};

// Spanish corpus columns: Headline, Text, Category (Fake/True), optional Id.
// Kaggle columns: title, text, label (1 = fake, 0 = legit), optional id.
Ingested ingest(const std::filesystem::path& path, CsvSource source);
Ingested ingest_csv_text(std::string_view content, CsvSource source);

// MIXED corpus: a's documents then b's, ids prefixed with "<corpus>:".
Corpus mix(const Corpus& a, const Corpus& b);

// Ratio majority:minority language count, e.g. 20800/676 for the mixed set.
double language_imbalance_ratio(const Corpus& c);

Document normalize(Document doc);
Corpus normalize(Corpus corpus);

inline constexpr int kRepetitions = 5;
inline constexpr int kFolds = 2;

struct FoldPlan {
    CorpusName corpus = CorpusName::ESP_FAKE;
    std::uint64_t seed = 0;
    // repetitions[r][f] = ascending document indices of fold f in repetition r
    std::array<std::array<std::vector<std::size_t>, kFolds>, kRepetitions> repetitions;

    const std::vector<std::size_t>& fold(int repetition, int f) const {
        return repetitions[static_cast<std::size_t>(repetition)][static_cast<std::size_t>(f)];
    }

    friend bool operator==(const FoldPlan&, const FoldPlan&) = default;
};

// Five independent stratified 2-fold partitions. Strata are (language,
// label); for single-language corpora this is stratification on label.
// Each stratum is shuffled with a seed derived from (seed + repetition,
// stratum), so a MIXED plan restricted to one language reproduces that
// language's own plan.
FoldPlan make_fold_plan(const Corpus& corpus, std::uint64_t seed);

// JSON: {corpus, seed, repetitions: [[fold1_ids],[fold2_ids]] x5}
nlohmann::json to_json(const FoldPlan& plan, const Corpus& corpus);
FoldPlan fold_plan_from_json(const nlohmann::json& j, const Corpus& corpus);

// Order-sensitive checksum of the ids at `indices`.
std::string id_checksum(const Corpus& corpus, std::span<const std::size_t> indices);

} // namespace fnd
