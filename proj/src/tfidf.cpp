#include "fnd/tfidf.hpp"

#include "fnd/error.hpp"
#include "fnd/text.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace fnd {

int TfidfModel::column(const std::string& term) const {
    const auto it = index_.find(term);
    return it == index_.end() ? -1 : it->second;
}

void TfidfModel::rebuild_index() {
    index_.clear();
    for (std::size_t i = 0; i < vocabulary.size(); ++i)
        index_.emplace(vocabulary[i], static_cast<int>(i));
}

nlohmann::json TfidfModel::to_json() const {
    return {{"vocabulary", vocabulary}, {"idf", idf}, {"n_train_docs", n_train_docs}};
}

TfidfModel TfidfModel::from_json(const nlohmann::json& j) {
    TfidfModel m;
    m.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
    m.idf = j.at("idf").get<std::vector<double>>();
    m.n_train_docs = j.at("n_train_docs").get<std::size_t>();
    if (m.idf.size() != m.vocabulary.size()) throw ParseError("tfidf model: idf/vocabulary size mismatch");
    m.rebuild_index();
    return m;
}

TfidfModel fit_tfidf(std::span<const Document> train_docs, Attribute attribute,
                     std::size_t max_features) {
    if (train_docs.empty()) throw ValidationError("fit_tfidf: no training documents");
    std::unordered_map<std::string, std::pair<std::size_t, std::size_t>> stats; // total, df
    for (const auto& doc : train_docs) {
        std::unordered_set<std::string> in_doc;
        for (auto& tok : text::tokenize(doc.attribute(attribute))) {
            auto& s = stats[tok];
            ++s.first;
            if (in_doc.insert(std::move(tok)).second) ++s.second;
        }
    }
    if (stats.empty()) throw ValidationError("fit_tfidf: training documents contain no tokens");

    std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> ranked(stats.begin(),
                                                                                    stats.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second.first != b.second.first) return a.second.first > b.second.first;
        return a.first < b.first;
    });
    if (ranked.size() > max_features) ranked.resize(max_features);

    TfidfModel model;
    model.n_train_docs = train_docs.size();
    const double n = static_cast<double>(train_docs.size());
    for (auto& [term, s] : ranked) {
        model.vocabulary.push_back(term);
        model.idf.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(s.second))) + 1.0);
    }
    model.rebuild_index();
    return model;
}

FeatureMatrix transform_tfidf(const TfidfModel& model, std::span<const Document> docs,
                              Attribute attribute) {
    FeatureMatrix out;
    out.values = MatrixF::Zero(static_cast<Eigen::Index>(docs.size()),
                               static_cast<Eigen::Index>(model.vocabulary.size()));
    std::vector<double> row(model.vocabulary.size());
    for (std::size_t d = 0; d < docs.size(); ++d) {
        std::fill(row.begin(), row.end(), 0.0);
        for (const auto& tok : text::tokenize(docs[d].attribute(attribute))) {
            const int c = model.column(tok);
            if (c >= 0) row[static_cast<std::size_t>(c)] += 1.0;
        }
        double norm2 = 0.0;
        for (std::size_t c = 0; c < row.size(); ++c) {
            row[c] *= model.idf[c];
            norm2 += row[c] * row[c];
        }
        if (norm2 == 0.0) continue;
        const double inv = 1.0 / std::sqrt(norm2);
        for (std::size_t c = 0; c < row.size(); ++c)
            out.values(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(c)) =
                static_cast<float>(row[c] * inv);
    }
    out.meta.extractor = "tfidf";
    out.meta.attribute = std::string(to_string(attribute));
    return out;
}

} // namespace fnd
