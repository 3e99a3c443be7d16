#pragma once

#include "fnd/corpus.hpp"
#include "fnd/feature_matrix.hpp"

#include <nlohmann/json.hpp>

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace fnd {

inline constexpr std::size_t kDefaultFeatureCap = 100;

struct TfidfModel {
    std::vector<std::string> vocabulary;
    std::vector<double> idf;
    std::size_t n_train_docs = 0;

    // Column of `term`, or -1.
    int column(const std::string& term) const;
    void rebuild_index();

    nlohmann::json to_json() const;
    static TfidfModel from_json(const nlohmann::json& j);

private:
    std::unordered_map<std::string, int> index_;
};

// Vocabulary: the `max_features` most frequent unigrams over the training
// documents (total occurrences; ties broken lexicographically).
// idf_t = ln((1 + n) / (1 + df_t)) + 1.
TfidfModel fit_tfidf(std::span<const Document> train_docs, Attribute attribute,
                     std::size_t max_features = kDefaultFeatureCap);

// count(t, d) * idf_t, rows L2-normalized; all-zero rows stay zero.
FeatureMatrix transform_tfidf(const TfidfModel& model, std::span<const Document> docs,
                              Attribute attribute);

} // namespace fnd
