#pragma once

#include "fnd/feature_matrix.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <span>
#include <string_view>
#include <vector>

namespace fnd {

enum class ReducerKind { MINFO, ANOVA, PCA, SA_PASSTHROUGH };

std::string_view to_string(ReducerKind k);
std::optional<ReducerKind> parse_reducer_kind(std::string_view s);

inline constexpr int kMiBins = 20;

struct Reducer {
    ReducerKind kind = ReducerKind::SA_PASSTHROUGH;
    int target_dim = 100;
    Eigen::Index input_cols = 0;

    // MINFO / ANOVA
    std::vector<Eigen::Index> selected;
    std::vector<double> scores; // per input column

    // PCA
    Eigen::VectorXd mean;
    Eigen::MatrixXd components; // output_dim x input_cols, orthonormal rows
    Eigen::VectorXd explained_variance;

    Eigen::Index output_cols() const;

    nlohmann::json to_json() const;
    static Reducer from_json(const nlohmann::json& j);
};

// Discrete mutual information (nats) between a column discretized into
// `bins` equal-frequency bins and integer labels. Tied values share a bin.
double mutual_information(std::span<const double> column, std::span<const int> labels,
                          int bins = kMiBins);

// One-way ANOVA F statistic. 0/0 -> 0, positive/0 -> +inf.
double anova_f(std::span<const double> column, std::span<const int> labels);

Reducer fit_minfo(const Eigen::MatrixXd& X, std::span<const int> y, int target_dim);
Reducer fit_anova(const Eigen::MatrixXd& X, std::span<const int> y, int target_dim);
Reducer fit_pca(const Eigen::MatrixXd& X, int target_dim);
Reducer passthrough(Eigen::Index input_cols);

Reducer fit_reducer(ReducerKind kind, const Eigen::MatrixXd& X, std::span<const int> y, int target_dim);

Eigen::MatrixXd apply(const Reducer& r, const Eigen::MatrixXd& X);
FeatureMatrix apply(const Reducer& r, const FeatureMatrix& X);

} // namespace fnd
