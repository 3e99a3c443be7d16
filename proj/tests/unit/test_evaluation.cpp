#include "fnd/error.hpp"
#include "fnd/evaluation.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace fnd;

namespace {

// Direct formula, written independently of the library.
double f_oracle(const ScoreSheet& a, const ScoreSheet& b) {
    double num = 0.0, den = 0.0;
    for (int i = 0; i < 5; ++i) {
        const double p1 = a.scores[i][0] - b.scores[i][0];
        const double p2 = a.scores[i][1] - b.scores[i][1];
        const double mean = 0.5 * (p1 + p2);
        num += p1 * p1 + p2 * p2;
        den += (p1 - mean) * (p1 - mean) + (p2 - mean) * (p2 - mean);
    }
    return num / (2.0 * den);
}

// I_x(a, b) by the power series x^a / (a B(a,b)) * sum_n (1-b)_n / n! * a / (a+n) * x^n.
double ibeta_series(double a, double b, double x) {
    const double log_beta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    double sum = 0.0;
    double coef = 1.0;
    for (int n = 0; n < 20000; ++n) {
        const double term = coef * a / (a + n) * std::pow(x, n);
        sum += term;
        if (n > 10 && std::abs(term) < 1e-18) break;
        coef *= (n + 1 - b) / (n + 1);
    }
    return std::exp(a * std::log(x) - log_beta) / a * sum;
}

// P(F > f) for F(10, 5): I_{5/(5+10f)}(2.5, 5), where the series terminates.
double f_survival_oracle(double f) { return ibeta_series(2.5, 5.0, 5.0 / (5.0 + 10.0 * f)); }

ScoreSheet random_sheet(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.4, 1.0);
    ScoreSheet s;
    for (auto& rep : s.scores)
        for (auto& v : rep) v = u(rng);
    return s;
}

} // namespace

TEST_CASE("balanced accuracy") {
    const std::vector<int> perfect{0, 1, 1, 0};
    CHECK(balanced_accuracy(perfect, perfect, 2) == 1.0);
    // confusion rows = true class: [[3,1],[2,4]]
    const std::vector<int> t{0, 0, 0, 0, 1, 1, 1, 1, 1, 1};
    const std::vector<int> p{0, 0, 0, 1, 0, 0, 1, 1, 1, 1};
    CHECK(balanced_accuracy(t, p, 2) == doctest::Approx((0.75 + 4.0 / 6.0) / 2).epsilon(1e-4));
    const std::vector<int> constant(10, 1);
    const std::vector<int> balanced{0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
    CHECK(balanced_accuracy(balanced, constant, 2) == 0.5);
    std::vector<int> tp(t.size()), pp(p.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        tp[i] = 1 - t[i];
        pp[i] = 1 - p[i];
    }
    CHECK(balanced_accuracy(tp, pp, 2) == doctest::Approx(balanced_accuracy(t, p, 2)));
    const std::vector<int> one_class{1, 1, 1};
    CHECK(balanced_accuracy(one_class, std::vector<int>{1, 0, 1}, 2) == doctest::Approx(2.0 / 3.0));
    CHECK_THROWS_AS(balanced_accuracy(std::vector<int>{}, std::vector<int>{}, 2), ValidationError);
}

TEST_CASE("mixed balanced accuracy over language and class strata") {
    const std::vector<int> cls{0, 1, 0, 1, 0, 1, 0, 1};
    const std::vector<int> lang{0, 0, 0, 0, 1, 1, 1, 1};
    std::vector<int> perfect;
    for (std::size_t i = 0; i < 8; ++i) perfect.push_back(lang[i] * 2 + cls[i]);
    CHECK(mixed_balanced_accuracy(cls, lang, perfect) == 1.0);

    std::vector<int> eng_only;
    for (std::size_t i = 0; i < 8; ++i) eng_only.push_back(cls[i]);
    CHECK(mixed_balanced_accuracy(cls, lang, eng_only) <= 0.5);

    const std::vector<int> pred{0, 1, 1, 1, 2, 3, 0, 2};
    double recall_sum = 0.0;
    for (int stratum = 0; stratum < 4; ++stratum) {
        int hit = 0, total = 0;
        for (std::size_t i = 0; i < 8; ++i) {
            if (lang[i] * 2 + cls[i] != stratum) continue;
            ++total;
            hit += pred[i] == stratum;
        }
        recall_sum += static_cast<double>(hit) / total;
    }
    CHECK(mixed_balanced_accuracy(cls, lang, pred) == doctest::Approx(recall_sum / 4));
}

TEST_CASE("incomplete beta agrees with the series expansion") {
    for (double a : {0.5, 2.5, 5.0})
        for (double b : {1.0, 2.5, 5.0})
            for (double x : {0.05, 0.3, 0.6, 0.9})
                CHECK(regularized_incomplete_beta(a, b, x) == doctest::Approx(ibeta_series(a, b, x)).epsilon(1e-10));
    CHECK(regularized_incomplete_beta(2, 3, 0.0) == 0.0);
    CHECK(regularized_incomplete_beta(2, 3, 1.0) == 1.0);
}

TEST_CASE("F survival function") {
    CHECK(f_survival(0.0, 10, 5) == 1.0);
    double prev = 1.0;
    for (double f : {0.5, 1.0, 2.0, 4.735, 10.0}) {
        const double p = f_survival(f, 10, 5);
        CHECK(p == doctest::Approx(f_survival_oracle(f)).epsilon(1e-10));
        CHECK(p < prev);
        prev = p;
    }
    // Tabulated upper 5% point of F(10, 5).
    CHECK(f_survival(4.735, 10, 5) == doctest::Approx(0.05).epsilon(1e-3));
}

TEST_CASE("combined F test against the direct formula") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const auto a = random_sheet(rng);
        const auto b = random_sheet(rng);
        const auto r = combined_f_test(a, b);
        const double f = f_oracle(a, b);
        CHECK(std::abs(r.f - f) <= 1e-10 * std::max(1.0, std::abs(f)));
        CHECK(std::abs(r.p - f_survival_oracle(f)) <= 1e-10);
        CHECK(r.verdict == (r.p < 0.05 ? Verdict::SIGNIFICANT : Verdict::NOT_SIGNIFICANT));
        const auto s = combined_f_test(b, a);
        CHECK(s.f == r.f);
        CHECK(s.p == r.p);
    }
}

TEST_CASE("combined F test degenerate cases") {
    std::mt19937_64 rng(8);
    const auto a = random_sheet(rng);
    const auto same = combined_f_test(a, a);
    CHECK(same.verdict == Verdict::NO_DIFFERENCE);
    CHECK(same.p == 1.0);
    auto shifted = a;
    for (auto& rep : shifted.scores)
        for (auto& v : rep) v -= 0.1;
    const auto deg = combined_f_test(a, shifted);
    CHECK(deg.verdict == Verdict::SIGNIFICANT_DEGENERATE);
    CHECK(std::isinf(deg.f));
    CHECK(deg.p == 0.0);
}

TEST_CASE("significance matrix is symmetric with an empty diagonal") {
    std::mt19937_64 rng(9);
    std::vector<ScoreSheet> sheets{random_sheet(rng), random_sheet(rng), random_sheet(rng)};
    for (std::size_t i = 0; i < 3; ++i) sheets[i].method = "m" + std::to_string(i);
    const auto m = significance_matrix(sheets);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            if (i != j) {
                CHECK(m.results[i][j].verdict == m.results[j][i].verdict);
                CHECK(m.results[i][j].f == m.results[j][i].f);
            }
    const auto j = m.to_json();
    CHECK(j.at("methods").size() == 3);
}

TEST_CASE("score sheet JSON round-trip") {
    std::mt19937_64 rng(10);
    auto s = random_sheet(rng);
    s.method = "tfidf";
    const auto back = ScoreSheet::from_json(s.to_json());
    CHECK(back.method == "tfidf");
    CHECK(back.scores == s.scores);
    CHECK(back.mean() == s.mean());
}

TEST_CASE("average feature vector") {
    FeatureMatrix one;
    one.values.resize(1, 3);
    one.values << 1, 2, 3;
    CHECK(average_feature_vector(one).isApprox(Eigen::Vector3d(1, 2, 3)));
    FeatureMatrix sym;
    sym.values.resize(2, 3);
    sym.values << 1, -2, 3, -1, 2, -3;
    CHECK(average_feature_vector(sym).norm() == 0.0);
    FeatureMatrix probs;
    probs.values.resize(3, 2);
    probs.values << 0.2f, 0.8f, 0.5f, 0.5f, 0.9f, 0.1f;
    CHECK(average_feature_vector(probs).sum() == doctest::Approx(1.0).epsilon(1e-6));
}
