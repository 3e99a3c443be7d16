#pragma once

#include "fnd/corpus.hpp"
#include "fnd/feature_matrix.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <array>
#include <span>
#include <string>
#include <vector>

namespace fnd {

// Mean per-class recall over classes [0, n_classes) present in y_true.
// Classes absent from y_true are skipped with a warning.
double balanced_accuracy(std::span<const int> y_true, std::span<const int> y_pred, int n_classes);

// Balanced accuracy over the four (language, class) strata; a prediction
// counts only when both language and class are right.
double mixed_balanced_accuracy(std::span<const int> y_true_class, std::span<const int> y_true_lang,
                               std::span<const int> y_pred_extended);

struct ScoreSheet {
    std::string method;
    // scores[r][f]: repetition r, trained on fold f, tested on the other fold.
    std::array<std::array<double, kFolds>, kRepetitions> scores{};

    double mean() const;
    nlohmann::json to_json() const;
    static ScoreSheet from_json(const nlohmann::json& j);
};

enum class Verdict { NO_DIFFERENCE, NOT_SIGNIFICANT, SIGNIFICANT, SIGNIFICANT_DEGENERATE };

std::string_view to_string(Verdict v);
inline bool is_significant(Verdict v) {
    return v == Verdict::SIGNIFICANT || v == Verdict::SIGNIFICANT_DEGENERATE;
}

struct FTestResult {
    double f = 0.0;
    double p = 1.0;
    Verdict verdict = Verdict::NO_DIFFERENCE;
};

inline constexpr double kSignificanceLevel = 0.05;

// Combined 5x2cv F test, referred to F(10, 5).
FTestResult combined_f_test(const ScoreSheet& a, const ScoreSheet& b, double alpha = kSignificanceLevel);

// Regularized incomplete beta I_x(a, b) via Lentz continued fraction.
double regularized_incomplete_beta(double a, double b, double x);

// P(F > f) for F ~ F(d1, d2).
double f_survival(double f, double d1, double d2);

struct SignificanceMatrix {
    std::vector<std::string> methods;
    // results[i][j] for i != j; diagonal left default.
    std::vector<std::vector<FTestResult>> results;

    nlohmann::json to_json() const;
};

SignificanceMatrix significance_matrix(std::span<const ScoreSheet> sheets);

// Column-wise mean.
Eigen::VectorXd average_feature_vector(const FeatureMatrix& X);

} // namespace fnd
