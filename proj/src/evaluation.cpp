#include "fnd/evaluation.hpp"

#include "fnd/error.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <limits>

namespace fnd {

double balanced_accuracy(std::span<const int> y_true, std::span<const int> y_pred, int n_classes) {
    if (y_true.empty()) throw ValidationError("balanced_accuracy: empty input");
    if (y_true.size() != y_pred.size()) throw ValidationError("balanced_accuracy: length mismatch");
    std::vector<double> hits(static_cast<std::size_t>(n_classes), 0.0);
    std::vector<double> support(static_cast<std::size_t>(n_classes), 0.0);
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const int t = y_true[i];
        if (t < 0 || t >= n_classes)
            throw ValidationError("balanced_accuracy: true label " + std::to_string(t) + " outside classes");
        support[static_cast<std::size_t>(t)] += 1.0;
        if (y_pred[i] == t) hits[static_cast<std::size_t>(t)] += 1.0;
    }
    double sum = 0.0;
    int present = 0;
    for (int c = 0; c < n_classes; ++c) {
        if (support[static_cast<std::size_t>(c)] == 0.0) {
            spdlog::warn("balanced_accuracy: class {} absent from y_true; excluded", c);
            continue;
        }
        sum += hits[static_cast<std::size_t>(c)] / support[static_cast<std::size_t>(c)];
        ++present;
    }
    return sum / present;
}

double mixed_balanced_accuracy(std::span<const int> y_true_class, std::span<const int> y_true_lang,
                               std::span<const int> y_pred_extended) {
    if (y_true_class.size() != y_true_lang.size())
        throw ValidationError("mixed_balanced_accuracy: length mismatch");
    std::vector<int> truth(y_true_class.size());
    for (std::size_t i = 0; i < truth.size(); ++i)
        truth[i] = extended_index(static_cast<Language>(y_true_lang[i]), static_cast<Label>(y_true_class[i]));
    return balanced_accuracy(truth, y_pred_extended, kExtendedWidth);
}

double ScoreSheet::mean() const {
    double s = 0.0;
    for (const auto& r : scores)
        for (double v : r) s += v;
    return s / (kRepetitions * kFolds);
}

nlohmann::json ScoreSheet::to_json() const {
    nlohmann::json grid = nlohmann::json::array();
    for (const auto& r : scores) grid.push_back({r[0], r[1]});
    return {{"method", method}, {"scores", grid}, {"mean", mean()}};
}

ScoreSheet ScoreSheet::from_json(const nlohmann::json& j) {
    ScoreSheet s;
    s.method = j.at("method").get<std::string>();
    const auto& grid = j.at("scores");
    if (grid.size() != kRepetitions) throw ParseError("score sheet: expected 5 repetitions");
    for (std::size_t r = 0; r < kRepetitions; ++r) {
        if (grid[r].size() != kFolds) throw ParseError("score sheet: expected 2 folds");
        for (std::size_t f = 0; f < kFolds; ++f) {
            const double v = grid[r][f].get<double>();
            if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("score sheet: score outside [0,1]");
            s.scores[r][f] = v;
        }
    }
    return s;
}

std::string_view to_string(Verdict v) {
    switch (v) {
    case Verdict::NO_DIFFERENCE: return "no difference";
    case Verdict::NOT_SIGNIFICANT: return "not significant";
    case Verdict::SIGNIFICANT: return "significant";
    case Verdict::SIGNIFICANT_DEGENERATE: return "significant (degenerate)";
    }
    return "?";
}

namespace {

// Continued fraction for I_x(a,b) (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
    constexpr double tiny = 1e-300;
    constexpr double tol = 1e-12;
    constexpr int max_iter = 10000;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < tol) return h;
    }
    throw Error("regularized_incomplete_beta: continued fraction did not converge");
}

} // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (a <= 0.0 || b <= 0.0) throw ValidationError("incomplete beta: a, b must be positive");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                             b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double f_survival(double f, double d1, double d2) {
    if (f <= 0.0) return 1.0;
    if (std::isinf(f)) return 0.0;
    return regularized_incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f));
}

FTestResult combined_f_test(const ScoreSheet& a, const ScoreSheet& b, double alpha) {
    double numerator = 0.0;
    double variance_sum = 0.0;
    for (std::size_t r = 0; r < kRepetitions; ++r) {
        const double p1 = a.scores[r][0] - b.scores[r][0];
        const double p2 = a.scores[r][1] - b.scores[r][1];
        const double mean = (p1 + p2) / 2.0;
        numerator += p1 * p1 + p2 * p2;
        variance_sum += (p1 - mean) * (p1 - mean) + (p2 - mean) * (p2 - mean);
    }
    FTestResult out;
    if (variance_sum == 0.0) {
        if (numerator == 0.0) {
            out = {0.0, 1.0, Verdict::NO_DIFFERENCE};
        } else {
            out = {std::numeric_limits<double>::infinity(), 0.0, Verdict::SIGNIFICANT_DEGENERATE};
        }
        return out;
    }
    out.f = numerator / (2.0 * variance_sum);
    out.p = f_survival(out.f, 10.0, 5.0);
    out.verdict = out.p < alpha ? Verdict::SIGNIFICANT : Verdict::NOT_SIGNIFICANT;
    return out;
}

nlohmann::json SignificanceMatrix::to_json() const {
    nlohmann::json pairs = nlohmann::json::array();
    for (std::size_t i = 0; i < methods.size(); ++i) {
        for (std::size_t j = i + 1; j < methods.size(); ++j) {
            const auto& r = results[i][j];
            pairs.push_back({{"a", methods[i]},
                             {"b", methods[j]},
                             {"f", std::isinf(r.f) ? nlohmann::json("inf") : nlohmann::json(r.f)},
                             {"p", r.p},
                             {"verdict", to_string(r.verdict)}});
        }
    }
    return {{"methods", methods}, {"alpha", kSignificanceLevel}, {"pairs", pairs}};
}

SignificanceMatrix significance_matrix(std::span<const ScoreSheet> sheets) {
    SignificanceMatrix m;
    for (const auto& s : sheets) m.methods.push_back(s.method);
    m.results.assign(sheets.size(), std::vector<FTestResult>(sheets.size()));
    for (std::size_t i = 0; i < sheets.size(); ++i)
        for (std::size_t j = i + 1; j < sheets.size(); ++j) {
            m.results[i][j] = combined_f_test(sheets[i], sheets[j]);
            m.results[j][i] = m.results[i][j];
        }
    return m;
}

Eigen::VectorXd average_feature_vector(const FeatureMatrix& X) {
    if (X.rows() == 0) throw ValidationError("average_feature_vector: empty matrix");
    return X.values.cast<double>().colwise().mean().transpose();
}

} // namespace fnd
