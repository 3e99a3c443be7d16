#include "fnd/ensemble.hpp"

#include "fnd/error.hpp"
#include "fnd/io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fnd {

std::string_view to_string(Policy p) { return p == Policy::SIS ? "SIS" : "ERS"; }

double SupportVector::sum() const { return std::accumulate(values.begin(), values.end(), 0.0); }

bool is_valid_support(const SupportVector& s) {
    const std::size_t width = s.scope == SupportScope::BASE ? kNumClasses : kExtendedWidth;
    if (s.values.size() != width) return false;
    for (double v : s.values)
        if (!(v >= 0.0) || !std::isfinite(v)) return false;
    return std::abs(s.sum() - 1.0) <= kSupportTolerance;
}

SupportVector accumulate_internal(std::span<const SupportVector> supports) {
    if (supports.empty()) throw ValidationError("accumulate_internal: empty support list");
    SupportVector out;
    out.scope = SupportScope::BASE;
    out.source = supports.front().source;
    out.source.model_id = "internal";
    out.values.assign(supports.front().values.size(), 0.0);
    for (const auto& s : supports) {
        if (s.scope != SupportScope::BASE || s.values.size() != out.values.size())
            throw ValidationError("accumulate_internal: supports must be BASE with equal width");
        for (std::size_t i = 0; i < s.values.size(); ++i) out.values[i] += s.values[i];
    }
    for (auto& v : out.values) v /= static_cast<double>(supports.size());
    return out;
}

SupportVector extend_support(const SupportVector& s) {
    if (s.scope != SupportScope::BASE || s.values.size() != kNumClasses)
        throw ValidationError("extend_support: expected a BASE support over 2 classes");
    SupportVector out;
    out.scope = SupportScope::EXTENDED;
    out.source = s.source;
    out.values.assign(kExtendedWidth, 0.0);
    const Coverage cov = s.source.coverage;
    if (cov.kind == Coverage::Kind::MULTI) {
        for (int l = 0; l < kNumLanguages; ++l)
            for (int c = 0; c < kNumClasses; ++c)
                out.values[static_cast<std::size_t>(l * kNumClasses + c)] =
                    s.values[static_cast<std::size_t>(c)] / kNumLanguages;
    } else if (cov.kind == Coverage::Kind::MONO &&
               (cov.language == Language::ENG || cov.language == Language::SPA)) {
        const int block = static_cast<int>(cov.language);
        for (int c = 0; c < kNumClasses; ++c)
            out.values[static_cast<std::size_t>(block * kNumClasses + c)] = s.values[static_cast<std::size_t>(c)];
    } else {
        throw ValidationError("extend_support: unknown language coverage");
    }
    return out;
}

SupportVector marginalize(const SupportVector& extended) {
    if (extended.scope != SupportScope::EXTENDED || extended.values.size() != kExtendedWidth)
        throw ValidationError("marginalize: expected an EXTENDED support");
    SupportVector out;
    out.scope = SupportScope::BASE;
    out.source = extended.source;
    out.values.assign(kNumClasses, 0.0);
    for (int l = 0; l < kNumLanguages; ++l)
        for (int c = 0; c < kNumClasses; ++c)
            out.values[static_cast<std::size_t>(c)] += extended.values[static_cast<std::size_t>(l * kNumClasses + c)];
    return out;
}

bool EnsemblePool::homogeneous() const {
    return std::all_of(members.begin(), members.end(),
                       [&](const PoolMember& m) { return m.coverage == members.front().coverage; });
}

namespace {
std::size_t argmax_lowest(const std::vector<double>& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}
} // namespace

ExternalDecision accumulate_external(const EnsemblePool& pool,
                                     std::span<const SupportVector> doc_supports) {
    if (pool.members.empty() || doc_supports.empty())
        throw ValidationError("accumulate_external: empty pool");
    SupportVector mean;
    mean.scope = SupportScope::EXTENDED;
    mean.source = {"external", pool.eval_corpus, Coverage::multi()};
    mean.values.assign(kExtendedWidth, 0.0);
    for (const auto& s : doc_supports) {
        if (s.scope != SupportScope::EXTENDED || s.values.size() != kExtendedWidth)
            throw ValidationError("accumulate_external: supports must be EXTENDED");
        for (std::size_t i = 0; i < kExtendedWidth; ++i) mean.values[i] += s.values[i];
    }
    for (auto& v : mean.values) v /= static_cast<double>(doc_supports.size());
    const auto best = static_cast<int>(argmax_lowest(mean.values));
    return {static_cast<Language>(best / kNumClasses), static_cast<Label>(best % kNumClasses),
            std::move(mean)};
}

Decision decide(const EnsemblePool& pool, std::span<const SupportVector> member_supports) {
    if (pool.homogeneous()) {
        auto s = accumulate_internal(member_supports);
        const auto label = static_cast<Label>(argmax_lowest(s.values));
        return {label, std::nullopt, std::move(s)};
    }
    std::vector<SupportVector> extended;
    extended.reserve(member_supports.size());
    for (const auto& s : member_supports) extended.push_back(extend_support(s));
    auto ext = accumulate_external(pool, extended);
    return {ext.label, ext.language, std::move(ext.support)};
}

namespace {

void check_inputs(std::span<const MemberInput> inputs, CorpusName eval_corpus,
                  std::span<const int> train_labels) {
    if (inputs.empty()) throw ConfigError("ensemble: no member inputs");
    for (const auto& in : inputs) {
        if (!in.train) throw ConfigError("ensemble: missing training features");
        if (!extractor_available(in.extractor, eval_corpus) ||
            !extractor_available(in.extractor, in.source_corpus))
            throw ConfigError("extractor " + std::string(to_string(in.extractor)) +
                              " unavailable for corpus " +
                              std::string(to_string(extractor_available(in.extractor, eval_corpus)
                                                        ? in.source_corpus
                                                        : eval_corpus)));
        if (in.train->rows() != static_cast<Eigen::Index>(train_labels.size()))
            throw ValidationError("ensemble: feature rows do not match label count");
    }
}

std::string member_id(const MemberInput& in) {
    return std::string(to_string(in.extractor)) + "@" + std::string(to_string(in.source_corpus));
}

} // namespace

EnsemblePool build_sis(std::span<const MemberInput> inputs, CorpusName eval_corpus,
                       std::span<const int> train_labels, const MlpConfig& cfg) {
    check_inputs(inputs, eval_corpus, train_labels);
    EnsemblePool pool;
    pool.policy = Policy::SIS;
    pool.eval_corpus = std::string(to_string(eval_corpus));
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const auto& in = inputs[i];
        MlpConfig member_cfg = cfg;
        member_cfg.seed = io::derive_seed(cfg.seed, {i});
        PoolMember m;
        m.id = member_id(in);
        m.extractor = std::string(to_string(in.extractor));
        m.training_corpus = std::string(to_string(in.source_corpus));
        m.coverage = extractor_coverage(in.extractor, in.source_corpus);
        const Eigen::MatrixXd X = in.train->values.cast<double>();
        m.model = std::make_shared<const MlpModel>(train_mlp(X, train_labels, member_cfg));
        pool.members.push_back(std::move(m));
    }
    return pool;
}

EnsemblePool build_ers(std::span<const MemberInput> inputs, CorpusName eval_corpus,
                       std::span<const int> train_labels, ReducerKind kind, int target_dim,
                       const MlpConfig& cfg) {
    check_inputs(inputs, eval_corpus, train_labels);
    std::vector<const FeatureMatrix*> parts;
    std::string sources;
    for (const auto& in : inputs) {
        parts.push_back(in.train);
        if (!sources.empty()) sources += "+";
        sources += member_id(in);
    }
    const FeatureMatrix wide = hconcat(parts);
    const Eigen::MatrixXd X = wide.values.cast<double>();
    Reducer reducer = fit_reducer(kind, X, train_labels, target_dim);
    const Eigen::MatrixXd reduced = apply(reducer, X);

    EnsemblePool pool;
    pool.policy = Policy::ERS;
    pool.eval_corpus = std::string(to_string(eval_corpus));
    PoolMember m;
    m.id = "ers-" + std::string(to_string(kind)) + "[" + sources + "]";
    m.extractor = "concat";
    m.training_corpus = pool.eval_corpus;
    m.coverage = corpus_coverage(eval_corpus);
    m.model = std::make_shared<const MlpModel>(train_mlp(reduced, train_labels, cfg));
    m.reducer = std::move(reducer);
    pool.members.push_back(std::move(m));
    return pool;
}

std::vector<Decision> predict(const EnsemblePool& pool,
                              std::span<const FeatureMatrix* const> eval_features) {
    if (pool.members.empty()) throw ValidationError("predict: empty pool");
    std::vector<Eigen::MatrixXd> member_probs;
    if (pool.policy == Policy::SIS) {
        if (eval_features.size() != pool.members.size())
            throw ValidationError("predict: one feature matrix per SIS member required");
        for (std::size_t i = 0; i < pool.members.size(); ++i)
            member_probs.push_back(
                predict_support(*pool.members[i].model, eval_features[i]->values.cast<double>()));
    } else {
        std::vector<const FeatureMatrix*> parts(eval_features.begin(), eval_features.end());
        const FeatureMatrix wide = hconcat(parts);
        for (const auto& m : pool.members) {
            const Eigen::MatrixXd X = wide.values.cast<double>();
            member_probs.push_back(predict_support(*m.model, m.reducer ? apply(*m.reducer, X) : X));
        }
    }
    const auto rows = member_probs.front().rows();
    for (const auto& p : member_probs)
        if (p.rows() != rows) throw ValidationError("predict: row-order mismatch across members");

    std::vector<Decision> out;
    out.reserve(static_cast<std::size_t>(rows));
    std::vector<SupportVector> supports(pool.members.size());
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < pool.members.size(); ++i) {
            auto& s = supports[i];
            s.scope = SupportScope::BASE;
            s.source = {pool.members[i].id, pool.members[i].training_corpus, pool.members[i].coverage};
            s.values.assign(member_probs[i].row(r).begin(), member_probs[i].row(r).end());
        }
        out.push_back(decide(pool, supports));
    }
    return out;
}

nlohmann::json pool_manifest(const EnsemblePool& pool, const std::vector<std::string>& model_paths,
                             const std::optional<std::string>& reducer_path) {
    nlohmann::json members = nlohmann::json::array();
    for (std::size_t i = 0; i < pool.members.size(); ++i) {
        const auto& m = pool.members[i];
        members.push_back({{"id", m.id},
                           {"extractor", m.extractor},
                           {"training_corpus", m.training_corpus},
                           {"coverage", to_string(m.coverage)},
                           {"model", i < model_paths.size() ? model_paths[i] : ""}});
    }
    nlohmann::json j{{"policy", to_string(pool.policy)},
                     {"eval_corpus", pool.eval_corpus},
                     {"homogeneous", pool.homogeneous()},
                     {"extended_order", {"ENG-LEGIT", "ENG-FAKE", "SPA-LEGIT", "SPA-FAKE"}},
                     {"members", members}};
    j["reducer"] = reducer_path ? nlohmann::json(*reducer_path) : nlohmann::json(nullptr);
    return j;
}

} // namespace fnd
