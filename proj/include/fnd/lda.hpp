#pragma once

#include "fnd/corpus.hpp"
#include "fnd/feature_matrix.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace fnd {

struct LdaConfig {
    int topics = 100;
    int chunk_size = 2000;
    int passes = 20;
    int max_iterations = 400;     // per-document E-step bound
    double gamma_threshold = 1e-3; // mean |Δγ| stopping rule
    std::size_t min_df = 20;
    double max_df_fraction = 0.5;
    // Robbins-Monro step: rho = (offset + pass + docs_seen / chunk_size)^-decay
    double decay = 0.5;
    double offset = 1.0;
    std::uint64_t seed = 0;
    // Symmetric Dirichlet priors; <= 0 means 1 / topics.
    double alpha = -1.0;
    double eta = -1.0;
};

struct BagOfWords {
    std::vector<int> ids;
    std::vector<double> counts;
    double total() const;
};

class LdaModel {
public:
    LdaModel() = default;
    LdaModel(std::vector<std::string> vocabulary, Eigen::MatrixXd lambda, double alpha, double eta);

    int topics() const { return static_cast<int>(lambda_.rows()); }
    const std::vector<std::string>& vocabulary() const { return vocabulary_; }
    const Eigen::MatrixXd& lambda() const { return lambda_; }
    double alpha() const { return alpha_; }
    double eta() const { return eta_; }

    // Rows of lambda normalized to probability distributions over words.
    Eigen::MatrixXd topic_word() const;

    BagOfWords bag_of_words(const std::string& text) const;

    // Variational posterior Dirichlet parameters for one document.
    Eigen::VectorXd infer_gamma(const BagOfWords& bow, int max_iterations = 400,
                                double gamma_threshold = 1e-3) const;

    // Per-document variational lower bound on log p(w) given the topics.
    double document_bound(const BagOfWords& bow, const Eigen::VectorXd& gamma) const;

    const Eigen::MatrixXd& exp_elog_beta() const { return exp_elog_beta_; }
    const Eigen::MatrixXd& elog_beta() const { return elog_beta_; }

    nlohmann::json to_json() const;
    static LdaModel from_json(const nlohmann::json& j);

private:
    std::vector<std::string> vocabulary_;
    std::unordered_map<std::string, int> index_;
    Eigen::MatrixXd lambda_;
    Eigen::MatrixXd elog_beta_;
    Eigen::MatrixXd exp_elog_beta_;
    double alpha_ = 0.01;
    double eta_ = 0.01;
};

// Terms appearing in >= min_df documents and <= max_df_fraction of them,
// sorted lexicographically.
std::vector<std::string> lda_vocabulary(std::span<const Document> docs, Attribute attribute,
                                        std::size_t min_df, double max_df_fraction);

using LdaPassCallback = std::function<void(int pass, const LdaModel& model)>;

// Online variational Bayes. Mini-batches follow document order; pass
// callbacks fire after every full pass over the corpus.
LdaModel fit_lda(std::span<const Document> train_docs, Attribute attribute, const LdaConfig& cfg,
                 const LdaPassCallback& on_pass = {});

// Row d = gamma_d / sum(gamma_d).
FeatureMatrix transform_lda(const LdaModel& model, std::span<const Document> docs,
                            Attribute attribute, const LdaConfig& cfg = {});

// exp(-sum of document bounds / number of in-vocabulary tokens).
double perplexity(const LdaModel& model, std::span<const Document> docs, Attribute attribute,
                  const LdaConfig& cfg = {});

// E[log theta] for theta ~ Dir(gamma).
Eigen::VectorXd dirichlet_expectation(const Eigen::VectorXd& gamma);

} // namespace fnd
