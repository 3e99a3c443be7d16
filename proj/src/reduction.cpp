#include "fnd/reduction.hpp"

#include "fnd/error.hpp"

#include <spdlog/spdlog.h>

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace fnd {

std::string_view to_string(ReducerKind k) {
    switch (k) {
    case ReducerKind::MINFO: return "minfo";
    case ReducerKind::ANOVA: return "anova";
    case ReducerKind::PCA: return "pca";
    case ReducerKind::SA_PASSTHROUGH: return "sa";
    }
    return "?";
}

std::optional<ReducerKind> parse_reducer_kind(std::string_view s) {
    for (auto k : {ReducerKind::MINFO, ReducerKind::ANOVA, ReducerKind::PCA, ReducerKind::SA_PASSTHROUGH})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

Eigen::Index Reducer::output_cols() const {
    switch (kind) {
    case ReducerKind::MINFO:
    case ReducerKind::ANOVA: return static_cast<Eigen::Index>(selected.size());
    case ReducerKind::PCA: return components.rows();
    case ReducerKind::SA_PASSTHROUGH: return input_cols;
    }
    return 0;
}

namespace {

void check_labels(Eigen::Index rows, std::span<const int> y) {
    if (rows != static_cast<Eigen::Index>(y.size()))
        throw ValidationError("reducer: X rows do not match label count");
    if (y.size() < 2) throw ValidationError("reducer: need at least 2 samples");
    if (std::all_of(y.begin(), y.end(), [&](int v) { return v == y.front(); }))
        throw ValidationError("reducer: single-class labels");
}

// Descending by score; +inf first; ties by lower index.
std::vector<Eigen::Index> top_columns(const std::vector<double>& scores, int target_dim) {
    std::vector<Eigen::Index> order(scores.size());
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
    });
    order.resize(std::min(order.size(), static_cast<std::size_t>(std::max(target_dim, 0))));
    return order;
}

std::vector<double> column_values(const Eigen::MatrixXd& X, Eigen::Index c) {
    return {X.col(c).data(), X.col(c).data() + X.rows()};
}

} // namespace

double mutual_information(std::span<const double> column, std::span<const int> labels, int bins) {
    const std::size_t n = column.size();
    if (n == 0 || n != labels.size()) throw ValidationError("mutual_information: size mismatch");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return column[a] < column[b]; });
    std::vector<int> bin(n);
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t i = order[r];
        if (r > 0 && column[i] == column[order[r - 1]]) {
            bin[i] = bin[order[r - 1]];
        } else {
            bin[i] = static_cast<int>(r * static_cast<std::size_t>(bins) / n);
        }
    }
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> px, py;
    for (std::size_t i = 0; i < n; ++i) {
        joint[{bin[i], labels[i]}] += 1.0;
        px[bin[i]] += 1.0;
        py[labels[i]] += 1.0;
    }
    const double N = static_cast<double>(n);
    double mi = 0.0;
    for (const auto& [key, count] : joint) {
        const double pxy = count / N;
        mi += pxy * std::log(pxy / ((px[key.first] / N) * (py[key.second] / N)));
    }
    return std::max(mi, 0.0);
}

double anova_f(std::span<const double> column, std::span<const int> labels) {
    const std::size_t n = column.size();
    if (n != labels.size()) throw ValidationError("anova_f: size mismatch");
    std::map<int, std::pair<double, double>> groups; // label -> (sum, count)
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        auto& g = groups[labels[i]];
        g.first += column[i];
        g.second += 1.0;
        total += column[i];
    }
    const double k = static_cast<double>(groups.size());
    const double N = static_cast<double>(n);
    if (k < 2 || N <= k) throw ValidationError("anova_f: need >= 2 classes and more samples than classes");
    const double grand = total / N;
    double between = 0.0;
    for (const auto& [label, g] : groups) {
        const double m = g.first / g.second;
        between += g.second * (m - grand) * (m - grand);
    }
    double within = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& g = groups[labels[i]];
        const double d = column[i] - g.first / g.second;
        within += d * d;
    }
    const double msb = between / (k - 1.0);
    const double msw = within / (N - k);
    // Sums of squares below rounding noise of the data count as exact zeros.
    double sum_sq = 0.0;
    for (double v : column) sum_sq += v * v;
    const double eps = 1e-20 * sum_sq;
    const bool zero_between = between <= eps;
    const bool zero_within = within <= eps;
    if (zero_within) return zero_between ? 0.0 : std::numeric_limits<double>::infinity();
    if (zero_between) return 0.0;
    return msb / msw;
}

Reducer fit_minfo(const Eigen::MatrixXd& X, std::span<const int> y, int target_dim) {
    check_labels(X.rows(), y);
    Reducer r;
    r.kind = ReducerKind::MINFO;
    r.target_dim = target_dim;
    r.input_cols = X.cols();
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
        const auto col = column_values(X, c);
        r.scores.push_back(mutual_information(col, y));
    }
    r.selected = top_columns(r.scores, target_dim);
    return r;
}

Reducer fit_anova(const Eigen::MatrixXd& X, std::span<const int> y, int target_dim) {
    check_labels(X.rows(), y);
    std::map<int, int> per_class;
    for (int v : y) ++per_class[v];
    for (auto [label, count] : per_class)
        if (count < 2) throw ValidationError("fit_anova: each class needs >= 2 samples");
    Reducer r;
    r.kind = ReducerKind::ANOVA;
    r.target_dim = target_dim;
    r.input_cols = X.cols();
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
        const auto col = column_values(X, c);
        r.scores.push_back(anova_f(col, y));
    }
    r.selected = top_columns(r.scores, target_dim);
    return r;
}

Reducer fit_pca(const Eigen::MatrixXd& X, int target_dim) {
    if (X.rows() < 2) throw ValidationError("fit_pca: need at least 2 rows");
    const Eigen::Index limit = std::min(X.rows() - 1, X.cols());
    Eigen::Index k = target_dim;
    if (k > limit) {
        spdlog::warn("fit_pca: target_dim {} exceeds min(rows-1, cols) = {}; clamping", target_dim, limit);
        k = limit;
    }
    Reducer r;
    r.kind = ReducerKind::PCA;
    r.target_dim = target_dim;
    r.input_cols = X.cols();
    r.mean = X.colwise().mean().transpose();
    const Eigen::MatrixXd centered = X.rowwise() - r.mean.transpose();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
    const auto& V = svd.matrixV();
    const auto& s = svd.singularValues();
    r.components.resize(k, X.cols());
    r.explained_variance.resize(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        Eigen::VectorXd v = V.col(i);
        Eigen::Index arg;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0) v = -v;
        r.components.row(i) = v.transpose();
        r.explained_variance(i) = s(i) * s(i) / static_cast<double>(X.rows() - 1);
    }
    return r;
}

Reducer passthrough(Eigen::Index input_cols) {
    Reducer r;
    r.kind = ReducerKind::SA_PASSTHROUGH;
    r.input_cols = input_cols;
    r.target_dim = static_cast<int>(input_cols);
    return r;
}

Reducer fit_reducer(ReducerKind kind, const Eigen::MatrixXd& X, std::span<const int> y, int target_dim) {
    switch (kind) {
    case ReducerKind::MINFO: return fit_minfo(X, y, target_dim);
    case ReducerKind::ANOVA: return fit_anova(X, y, target_dim);
    case ReducerKind::PCA: return fit_pca(X, target_dim);
    case ReducerKind::SA_PASSTHROUGH: return passthrough(X.cols());
    }
    throw ValidationError("unknown reducer kind");
}

Eigen::MatrixXd apply(const Reducer& r, const Eigen::MatrixXd& X) {
    if (X.cols() != r.input_cols)
        throw ValidationError("reducer apply: expected " + std::to_string(r.input_cols) +
                              " columns, got " + std::to_string(X.cols()));
    switch (r.kind) {
    case ReducerKind::MINFO:
    case ReducerKind::ANOVA: {
        Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(r.selected.size()));
        for (std::size_t j = 0; j < r.selected.size(); ++j)
            out.col(static_cast<Eigen::Index>(j)) = X.col(r.selected[j]);
        return out;
    }
    case ReducerKind::PCA:
        return (X.rowwise() - r.mean.transpose()) * r.components.transpose();
    case ReducerKind::SA_PASSTHROUGH: return X;
    }
    return X;
}

FeatureMatrix apply(const Reducer& r, const FeatureMatrix& X) {
    FeatureMatrix out;
    out.meta = X.meta;
    if (r.kind == ReducerKind::MINFO || r.kind == ReducerKind::ANOVA ||
        r.kind == ReducerKind::SA_PASSTHROUGH) {
        // selection never touches values; keep floats exact
        if (X.cols() != r.input_cols)
            throw ValidationError("reducer apply: expected " + std::to_string(r.input_cols) +
                                  " columns, got " + std::to_string(X.cols()));
        if (r.kind == ReducerKind::SA_PASSTHROUGH) {
            out.values = X.values;
        } else {
            out.values.resize(X.rows(), static_cast<Eigen::Index>(r.selected.size()));
            for (std::size_t j = 0; j < r.selected.size(); ++j)
                out.values.col(static_cast<Eigen::Index>(j)) = X.values.col(r.selected[j]);
        }
    } else {
        out.values = apply(r, Eigen::MatrixXd(X.values.cast<double>())).cast<float>();
    }
    out.meta.extra["reducer"] = std::string(to_string(r.kind));
    out.meta.extra["target_dim"] = r.target_dim;
    return out;
}

namespace {
nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<double> row(m.row(i).begin(), m.row(i).end());
        rows.push_back(row);
    }
    return rows;
}
} // namespace

nlohmann::json Reducer::to_json() const {
    nlohmann::json j{{"kind", to_string(kind)},
                     {"target_dim", target_dim},
                     {"input_cols", input_cols},
                     {"selected", selected},
                     {"scores", nlohmann::json::array()}};
    for (double s : scores) j["scores"].push_back(std::isinf(s) ? nlohmann::json("inf") : nlohmann::json(s));
    if (kind == ReducerKind::PCA) {
        j["mean"] = std::vector<double>(mean.begin(), mean.end());
        j["components"] = matrix_json(components);
        j["explained_variance"] = std::vector<double>(explained_variance.begin(), explained_variance.end());
    }
    return j;
}

Reducer Reducer::from_json(const nlohmann::json& j) {
    Reducer r;
    const auto kind = parse_reducer_kind(j.at("kind").get<std::string>());
    if (!kind) throw ParseError("reducer: unknown kind");
    r.kind = *kind;
    r.target_dim = j.at("target_dim").get<int>();
    r.input_cols = j.at("input_cols").get<Eigen::Index>();
    r.selected = j.at("selected").get<std::vector<Eigen::Index>>();
    for (const auto& s : j.at("scores"))
        r.scores.push_back(s.is_string() ? std::numeric_limits<double>::infinity() : s.get<double>());
    if (r.kind == ReducerKind::PCA) {
        const auto mean = j.at("mean").get<std::vector<double>>();
        r.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
        const auto& comps = j.at("components");
        r.components.resize(static_cast<Eigen::Index>(comps.size()), r.input_cols);
        for (std::size_t i = 0; i < comps.size(); ++i) {
            const auto row = comps[i].get<std::vector<double>>();
            for (std::size_t c = 0; c < row.size(); ++c)
                r.components(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = row[c];
        }
        const auto ev = j.at("explained_variance").get<std::vector<double>>();
        r.explained_variance = Eigen::Map<const Eigen::VectorXd>(ev.data(), static_cast<Eigen::Index>(ev.size()));
    }
    return r;
}

} // namespace fnd
