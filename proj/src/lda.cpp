#include "fnd/lda.hpp"

#include "fnd/error.hpp"
#include "fnd/text.hpp"

#include <boost/math/special_functions/digamma.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <unordered_set>

namespace fnd {

namespace {

double digamma(double x) { return boost::math::digamma(x); }

Eigen::MatrixXd dirichlet_expectation_rows(const Eigen::MatrixXd& m) {
    Eigen::MatrixXd out(m.rows(), m.cols());
    for (Eigen::Index k = 0; k < m.rows(); ++k) {
        const double dsum = digamma(m.row(k).sum());
        for (Eigen::Index w = 0; w < m.cols(); ++w) out(k, w) = digamma(m(k, w)) - dsum;
    }
    return out;
}

double resolve_prior(double v, int topics) { return v > 0.0 ? v : 1.0 / topics; }

// One document's E-step; returns gamma and writes exp(E[log theta]) and the
// normalizer phinorm used for sufficient statistics.
struct EStep {
    Eigen::VectorXd gamma;
    Eigen::VectorXd exp_elog_theta;
    Eigen::VectorXd phinorm;
    Eigen::MatrixXd beta_cols; // K x n gathered exp(E[log beta]) columns
};

EStep run_estep(const Eigen::MatrixXd& exp_elog_beta, double alpha, const BagOfWords& bow,
                int max_iterations, double threshold) {
    const auto K = exp_elog_beta.rows();
    const auto n = static_cast<Eigen::Index>(bow.ids.size());
    EStep s;
    s.beta_cols.resize(K, n);
    for (Eigen::Index j = 0; j < n; ++j) s.beta_cols.col(j) = exp_elog_beta.col(bow.ids[static_cast<std::size_t>(j)]);
    const Eigen::Map<const Eigen::VectorXd> cts(bow.counts.data(), n);

    s.gamma = Eigen::VectorXd::Ones(K);
    s.exp_elog_theta = dirichlet_expectation(s.gamma).array().exp();
    s.phinorm = (s.beta_cols.transpose() * s.exp_elog_theta).array() + 1e-100;
    for (int it = 0; it < max_iterations; ++it) {
        const Eigen::VectorXd last = s.gamma;
        const Eigen::VectorXd ratio = cts.array() / s.phinorm.array();
        s.gamma = alpha + s.exp_elog_theta.array() * (s.beta_cols * ratio).array();
        s.exp_elog_theta = dirichlet_expectation(s.gamma).array().exp();
        s.phinorm = (s.beta_cols.transpose() * s.exp_elog_theta).array() + 1e-100;
        if ((s.gamma - last).cwiseAbs().mean() < threshold) break;
    }
    return s;
}

} // namespace

double BagOfWords::total() const {
    double t = 0.0;
    for (double c : counts) t += c;
    return t;
}

Eigen::VectorXd dirichlet_expectation(const Eigen::VectorXd& gamma) {
    const double dsum = digamma(gamma.sum());
    Eigen::VectorXd out(gamma.size());
    for (Eigen::Index k = 0; k < gamma.size(); ++k) out(k) = digamma(gamma(k)) - dsum;
    return out;
}

LdaModel::LdaModel(std::vector<std::string> vocabulary, Eigen::MatrixXd lambda, double alpha,
                   double eta)
    : vocabulary_(std::move(vocabulary)), lambda_(std::move(lambda)), alpha_(alpha), eta_(eta) {
    if (static_cast<Eigen::Index>(vocabulary_.size()) != lambda_.cols())
        throw ValidationError("LdaModel: vocabulary size does not match lambda columns");
    for (std::size_t i = 0; i < vocabulary_.size(); ++i)
        index_.emplace(vocabulary_[i], static_cast<int>(i));
    elog_beta_ = dirichlet_expectation_rows(lambda_);
    exp_elog_beta_ = elog_beta_.array().exp();
}

Eigen::MatrixXd LdaModel::topic_word() const {
    Eigen::MatrixXd tw = lambda_;
    for (Eigen::Index k = 0; k < tw.rows(); ++k) tw.row(k) /= tw.row(k).sum();
    return tw;
}

BagOfWords LdaModel::bag_of_words(const std::string& content) const {
    std::map<int, double> counts;
    for (const auto& tok : text::tokenize(content)) {
        const auto it = index_.find(tok);
        if (it != index_.end()) counts[it->second] += 1.0;
    }
    BagOfWords bow;
    for (auto [id, c] : counts) {
        bow.ids.push_back(id);
        bow.counts.push_back(c);
    }
    return bow;
}

Eigen::VectorXd LdaModel::infer_gamma(const BagOfWords& bow, int max_iterations,
                                      double gamma_threshold) const {
    return run_estep(exp_elog_beta_, alpha_, bow, max_iterations, gamma_threshold).gamma;
}

double LdaModel::document_bound(const BagOfWords& bow, const Eigen::VectorXd& gamma) const {
    const Eigen::VectorXd elog_theta = dirichlet_expectation(gamma);
    const auto K = static_cast<double>(topics());
    double bound = 0.0;
    for (std::size_t j = 0; j < bow.ids.size(); ++j) {
        const Eigen::VectorXd terms = elog_theta + elog_beta_.col(bow.ids[j]);
        const double mx = terms.maxCoeff();
        bound += bow.counts[j] * (mx + std::log((terms.array() - mx).exp().sum()));
    }
    bound += ((alpha_ - gamma.array()) * elog_theta.array()).sum();
    for (Eigen::Index k = 0; k < gamma.size(); ++k) bound += std::lgamma(gamma(k)) - std::lgamma(alpha_);
    bound += std::lgamma(alpha_ * K) - std::lgamma(gamma.sum());
    return bound;
}

nlohmann::json LdaModel::to_json() const {
    nlohmann::json lam = nlohmann::json::array();
    for (Eigen::Index k = 0; k < lambda_.rows(); ++k) {
        std::vector<double> row(lambda_.row(k).begin(), lambda_.row(k).end());
        lam.push_back(row);
    }
    return {{"vocabulary", vocabulary_}, {"alpha", alpha_}, {"eta", eta_}, {"lambda", lam}};
}

LdaModel LdaModel::from_json(const nlohmann::json& j) {
    auto vocab = j.at("vocabulary").get<std::vector<std::string>>();
    const auto& lam = j.at("lambda");
    Eigen::MatrixXd lambda(static_cast<Eigen::Index>(lam.size()),
                           static_cast<Eigen::Index>(vocab.size()));
    for (std::size_t k = 0; k < lam.size(); ++k) {
        const auto row = lam[k].get<std::vector<double>>();
        if (row.size() != vocab.size()) throw ParseError("lda model: lambda row width mismatch");
        for (std::size_t w = 0; w < row.size(); ++w)
            lambda(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(w)) = row[w];
    }
    return LdaModel(std::move(vocab), std::move(lambda), j.at("alpha").get<double>(),
                    j.at("eta").get<double>());
}

std::vector<std::string> lda_vocabulary(std::span<const Document> docs, Attribute attribute,
                                        std::size_t min_df, double max_df_fraction) {
    std::unordered_map<std::string, std::size_t> df;
    for (const auto& d : docs) {
        std::unordered_set<std::string> seen;
        for (auto& tok : text::tokenize(d.attribute(attribute)))
            if (seen.insert(tok).second) ++df[tok];
    }
    const double max_df = max_df_fraction * static_cast<double>(docs.size());
    std::vector<std::string> vocab;
    for (const auto& [term, count] : df)
        if (count >= min_df && static_cast<double>(count) <= max_df) vocab.push_back(term);
    std::sort(vocab.begin(), vocab.end());
    return vocab;
}

LdaModel fit_lda(std::span<const Document> train_docs, Attribute attribute, const LdaConfig& cfg,
                 const LdaPassCallback& on_pass) {
    if (cfg.topics <= 0 || cfg.chunk_size <= 0 || cfg.passes <= 0 || cfg.max_iterations <= 0)
        throw ValidationError("fit_lda: topics, chunk_size, passes, max_iterations must be positive");
    auto vocab = lda_vocabulary(train_docs, attribute, cfg.min_df, cfg.max_df_fraction);
    if (vocab.empty())
        throw ValidationError("fit_lda: empty vocabulary after min-df/max-df filtering");

    const int K = cfg.topics;
    const auto V = static_cast<Eigen::Index>(vocab.size());
    const double alpha = resolve_prior(cfg.alpha, K);
    const double eta = resolve_prior(cfg.eta, K);

    std::mt19937_64 rng(cfg.seed);
    std::gamma_distribution<double> gamma_init(100.0, 1.0 / 100.0);
    Eigen::MatrixXd lambda(K, V);
    for (Eigen::Index k = 0; k < K; ++k)
        for (Eigen::Index w = 0; w < V; ++w) lambda(k, w) = gamma_init(rng);

    LdaModel model(vocab, lambda, alpha, eta);
    std::vector<BagOfWords> bows;
    bows.reserve(train_docs.size());
    for (const auto& d : train_docs) bows.push_back(model.bag_of_words(d.attribute(attribute)));

    const auto D = static_cast<double>(bows.size());
    const auto chunk = static_cast<std::size_t>(cfg.chunk_size);
    double docs_seen = 0.0;
    for (int pass = 0; pass < cfg.passes; ++pass) {
        for (std::size_t start = 0; start < bows.size(); start += chunk) {
            const std::size_t end = std::min(bows.size(), start + chunk);
            Eigen::MatrixXd sstats = Eigen::MatrixXd::Zero(K, V);
            for (std::size_t d = start; d < end; ++d) {
                const auto& bow = bows[d];
                if (bow.ids.empty()) continue;
                const EStep s = run_estep(model.exp_elog_beta(), alpha, bow, cfg.max_iterations,
                                          cfg.gamma_threshold);
                for (std::size_t j = 0; j < bow.ids.size(); ++j)
                    sstats.col(bow.ids[j]) +=
                        s.exp_elog_theta * (bow.counts[j] / s.phinorm(static_cast<Eigen::Index>(j)));
            }
            sstats.array() *= model.exp_elog_beta().array();
            const double batch = static_cast<double>(end - start);
            const double rho = std::pow(cfg.offset + pass + docs_seen / cfg.chunk_size, -cfg.decay);
            Eigen::MatrixXd lambda_hat = (eta + (D / batch) * sstats.array()).matrix();
            lambda = (1.0 - rho) * model.lambda() + rho * lambda_hat;
            model = LdaModel(vocab, lambda, alpha, eta);
            docs_seen += batch;
        }
        if (on_pass) on_pass(pass + 1, model);
    }
    return model;
}

FeatureMatrix transform_lda(const LdaModel& model, std::span<const Document> docs,
                            Attribute attribute, const LdaConfig& cfg) {
    FeatureMatrix out;
    out.values.resize(static_cast<Eigen::Index>(docs.size()), model.topics());
    for (std::size_t d = 0; d < docs.size(); ++d) {
        const auto bow = model.bag_of_words(docs[d].attribute(attribute));
        const Eigen::VectorXd gamma = model.infer_gamma(bow, cfg.max_iterations, cfg.gamma_threshold);
        out.values.row(static_cast<Eigen::Index>(d)) = (gamma / gamma.sum()).cast<float>().transpose();
    }
    out.meta.extractor = "lda";
    out.meta.attribute = std::string(to_string(attribute));
    return out;
}

double perplexity(const LdaModel& model, std::span<const Document> docs, Attribute attribute,
                  const LdaConfig& cfg) {
    double bound = 0.0;
    double words = 0.0;
    for (const auto& d : docs) {
        const auto bow = model.bag_of_words(d.attribute(attribute));
        const auto gamma = model.infer_gamma(bow, cfg.max_iterations, cfg.gamma_threshold);
        bound += model.document_bound(bow, gamma);
        words += bow.total();
    }
    if (words == 0.0) throw ValidationError("perplexity: no in-vocabulary tokens");
    return std::exp(-bound / words);
}

} // namespace fnd
