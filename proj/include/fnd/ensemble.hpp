#pragma once

#include "fnd/feature_matrix.hpp"
#include "fnd/mlp.hpp"
#include "fnd/reduction.hpp"
#include "fnd/types.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fnd {

enum class SupportScope { BASE, EXTENDED };

struct SupportSource {
    std::string model_id;
    std::string training_corpus;
    Coverage coverage;
};

struct SupportVector {
    std::vector<double> values;
    SupportScope scope = SupportScope::BASE;
    SupportSource source;

    double sum() const;
};

inline constexpr double kSupportTolerance = 1e-6;

// Nonnegative and summing to 1 within kSupportTolerance, with the width
// implied by the scope.
bool is_valid_support(const SupportVector& s);

// Mean of BASE supports.
SupportVector accumulate_internal(std::span<const SupportVector> supports);

// Rule (b): MONO supports land in their language block, zeros elsewhere.
// Rule (c): MULTI supports are divided by the number of languages and
// replicated into every block. Ordering: [ENG-LEGIT, ENG-FAKE, SPA-LEGIT, SPA-FAKE].
SupportVector extend_support(const SupportVector& s);

// Sum over language blocks per class.
SupportVector marginalize(const SupportVector& extended);

enum class Policy { SIS, ERS };

struct PoolMember {
    std::string id;
    std::string extractor; // extractor id, or "concat" for ERS members
    std::string training_corpus;
    Coverage coverage;
    std::shared_ptr<const MlpModel> model;
    std::optional<Reducer> reducer; // ERS members only
};

struct EnsemblePool {
    Policy policy = Policy::SIS;
    std::vector<PoolMember> members;
    std::string eval_corpus;

    // All members share one coverage: support accumulates unmodified.
    bool homogeneous() const;
};

struct ExternalDecision {
    Language language;
    Label label;
    SupportVector support; // EXTENDED
};

// Mean of EXTENDED supports, argmax decoded to (language, class); ties go
// to the lower index.
ExternalDecision accumulate_external(const EnsemblePool& pool,
                                     std::span<const SupportVector> doc_supports);

// Final decision for one document from its per-member BASE supports.
struct Decision {
    Label label;
    std::optional<Language> language; // set when integration ran in the extended space
    SupportVector support;            // BASE for homogeneous pools, EXTENDED otherwise
};

Decision decide(const EnsemblePool& pool, std::span<const SupportVector> member_supports);

// Training data for one pool member: features of the evaluation corpus'
// training fold, produced by `extractor` fitted on `source_corpus`.
struct MemberInput {
    ExtractorId extractor;
    CorpusName source_corpus;
    const FeatureMatrix* train = nullptr;
};

// One MLP per input. Member coverage follows extractor_coverage().
EnsemblePool build_sis(std::span<const MemberInput> inputs, CorpusName eval_corpus,
                       std::span<const int> train_labels, const MlpConfig& cfg);

// Concatenate inputs, fit `kind` on the training rows, train a single MLP on
// the reduced space. The member's coverage is the evaluation corpus'.
EnsemblePool build_ers(std::span<const MemberInput> inputs, CorpusName eval_corpus,
                       std::span<const int> train_labels, ReducerKind kind, int target_dim,
                       const MlpConfig& cfg);

// Per-document decisions. `eval_features[i]` feeds member i for SIS; for ERS
// the features are concatenated in input order and passed through the
// member's reducer.
std::vector<Decision> predict(const EnsemblePool& pool,
                              std::span<const FeatureMatrix* const> eval_features);

nlohmann::json pool_manifest(const EnsemblePool& pool, const std::vector<std::string>& model_paths,
                             const std::optional<std::string>& reducer_path);

std::string_view to_string(Policy p);

} // namespace fnd
