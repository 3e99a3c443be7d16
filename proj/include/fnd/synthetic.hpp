#pragma once

#include "fnd/experiment.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace fnd::synthetic {

struct CorpusSpec {
    std::size_t esp_fake_docs = 240;
    std::size_t kaggle_docs = 300;
    double fake_fraction = 0.5;
    // Probability that a token is drawn from its class' word list.
    double signal = 0.15;
    int min_text_tokens = 40;
    int max_text_tokens = 80;
    // Rows written with an empty text field (dropped at ingestion).
    std::size_t empty_text_rows = 0;
    std::uint64_t seed = 1;
};

// CSV text in the Spanish-corpus and Kaggle schemas.
std::string esp_fake_csv(const CorpusSpec& spec);
std::string kaggle_csv(const CorpusSpec& spec);

struct DatasetPaths {
    std::filesystem::path esp_fake_csv;
    std::filesystem::path kaggle_csv;
};
DatasetPaths write_dataset(const std::filesystem::path& dir, const CorpusSpec& spec);

struct EmbeddingSpec {
    int width = 768;
    // Class separation along a per-extractor direction; scaled down for
    // documents outside the extractor's language coverage.
    double signal = 0.05;
    std::uint64_t seed = 1;
};

// Writes one FMX1 file per slot in the configuration's embedding manifest.
// Returns the number of files written.
std::size_t write_embeddings(const ExperimentConfig& config, const EmbeddingSpec& spec);

} // namespace fnd::synthetic
