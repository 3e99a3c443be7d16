#include "fnd/error.hpp"
#include "fnd/reduction.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <map>
#include <random>

using namespace fnd;

namespace {

// Textbook one-way ANOVA from group sums.
double anova_oracle(const std::vector<double>& x, const std::vector<int>& y) {
    std::map<int, std::vector<double>> groups;
    for (std::size_t i = 0; i < x.size(); ++i) groups[y[i]].push_back(x[i]);
    double grand = 0.0;
    for (double v : x) grand += v;
    grand /= static_cast<double>(x.size());
    double ssb = 0.0, ssw = 0.0;
    for (const auto& [_, g] : groups) {
        double m = 0.0;
        for (double v : g) m += v;
        m /= static_cast<double>(g.size());
        ssb += static_cast<double>(g.size()) * (m - grand) * (m - grand);
        for (double v : g) ssw += (v - m) * (v - m);
    }
    const double k = static_cast<double>(groups.size());
    const double n = static_cast<double>(x.size());
    return (ssb / (k - 1)) / (ssw / (n - k));
}

// Discrete MI from a joint count table.
double mi_oracle(const std::vector<int>& a, const std::vector<int>& b) {
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> pa, pb;
    const double n = static_cast<double>(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        joint[{a[i], b[i]}] += 1.0 / n;
        pa[a[i]] += 1.0 / n;
        pb[b[i]] += 1.0 / n;
    }
    double mi = 0.0;
    for (const auto& [k, p] : joint) mi += p * std::log(p / (pa[k.first] * pb[k.second]));
    return mi;
}

Eigen::MatrixXd random_matrix(int rows, int cols, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Eigen::MatrixXd X(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) X(r, c) = g(rng);
    return X;
}

} // namespace

TEST_CASE("ANOVA F matches the textbook computation on random matrices") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 6 + static_cast<int>(rng() % 20);
        Eigen::MatrixXd X = random_matrix(n, 4, rng);
        std::vector<int> y(n);
        for (int i = 0; i < n; ++i) y[i] = i % 2;
        for (int c = 0; c < 4; ++c) {
            std::vector<double> col(X.col(c).data(), X.col(c).data() + n);
            CHECK(anova_f(col, y) == doctest::Approx(anova_oracle(col, y)).epsilon(1e-8));
        }
    }
}

TEST_CASE("ANOVA degenerate columns") {
    const std::vector<int> y{0, 0, 0, 1, 1, 1};
    const std::vector<double> same_means{1, 2, 3, 3, 2, 1};
    CHECK(anova_f(same_means, y) == doctest::Approx(0.0).epsilon(1e-12));
    const std::vector<double> constant{4, 4, 4, 4, 4, 4};
    CHECK(anova_f(constant, y) == 0.0);
    const std::vector<double> disjoint{1, 1, 1, 2, 2, 2};
    CHECK(std::isinf(anova_f(disjoint, y)));
    const std::vector<double> six{1.0, 2.0, 4.0, 3.0, 5.0, 7.0};
    CHECK(anova_f(six, y) == doctest::Approx(anova_oracle(six, y)));
}

TEST_CASE("ANOVA ranking puts infinities first, lower index on ties") {
    Eigen::MatrixXd X(6, 4);
    X << 0, 1, 1, 5,
         1, 1, 2, 5,
         0, 1, 3, 5,
         5, 2, 4, 6,
         6, 2, 5, 6,
         5, 2, 6, 6;
    const std::vector<int> y{0, 0, 0, 1, 1, 1};
    const auto r = fit_anova(X, y, 3);
    CHECK(r.selected == std::vector<Eigen::Index>{1, 3, 0});
    CHECK_THROWS_AS(fit_anova(X, std::vector<int>(6, 1), 2), ValidationError);
}

TEST_CASE("mutual information") {
    std::vector<int> y(400);
    std::vector<double> copy(400), noise(400);
    std::mt19937_64 rng(5);
    for (int i = 0; i < 400; ++i) {
        y[i] = i % 2;
        copy[i] = y[i];
        noise[i] = std::uniform_real_distribution<double>(0, 1)(rng);
    }
    CHECK(mutual_information(copy, y) == doctest::Approx(std::log(2.0)).epsilon(0.02));
    CHECK(mutual_information(noise, y) < 0.05);

    // Four distinct values: each is its own bin, so the estimate is the plug-in MI.
    const std::vector<double> x4{0, 0, 1, 1, 2, 2, 3, 3, 0, 1};
    const std::vector<int> y4{0, 0, 0, 1, 1, 1, 1, 1, 1, 0};
    std::vector<int> xi(x4.begin(), x4.end());
    CHECK(mutual_information(x4, y4) == doctest::Approx(mi_oracle(xi, y4)).epsilon(1e-12));

    Eigen::MatrixXd X(400, 2);
    for (int i = 0; i < 400; ++i) {
        X(i, 0) = noise[i];
        X(i, 1) = copy[i];
    }
    const auto r = fit_minfo(X, y, 1);
    CHECK(r.selected == std::vector<Eigen::Index>{1});
}

TEST_CASE("PCA projections match the covariance eigendecomposition") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::MatrixXd X = random_matrix(10, 6, rng);
        const auto r = fit_pca(X, 4);
        REQUIRE(r.components.rows() == 4);
        const Eigen::RowVectorXd mean = X.colwise().mean();
        const Eigen::MatrixXd C = X.rowwise() - mean;
        const Eigen::MatrixXd cov = C.transpose() * C / 9.0;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
        const Eigen::MatrixXd proj = apply(r, X);
        for (int k = 0; k < 4; ++k) {
            const Eigen::VectorXd v = es.eigenvectors().col(5 - k);
            CHECK(r.explained_variance[k] == doctest::Approx(es.eigenvalues()[5 - k]).epsilon(1e-6));
            const Eigen::VectorXd oracle = C * v;
            const double sign = (oracle.dot(proj.col(k)) >= 0) ? 1.0 : -1.0;
            CHECK((proj.col(k) - sign * oracle).cwiseAbs().maxCoeff() < 1e-6);
        }
        const Eigen::MatrixXd gram = r.components * r.components.transpose();
        CHECK((gram - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-5);
        for (int k = 0; k < 4; ++k) {
            Eigen::Index arg;
            r.components.row(k).cwiseAbs().maxCoeff(&arg);
            CHECK(r.components(k, arg) > 0);
            if (k > 0) CHECK(r.explained_variance[k] <= r.explained_variance[k - 1]);
            const double var = (proj.col(k).array() - proj.col(k).mean()).square().sum() / 9.0;
            CHECK(var == doctest::Approx(r.explained_variance[k]).epsilon(1e-9));
        }
    }
}

TEST_CASE("PCA on collinear points and clamping") {
    Eigen::MatrixXd X(5, 2);
    for (int i = 0; i < 5; ++i) X.row(i) << i, 2.0 * i;
    const auto r = fit_pca(X, 5);
    CHECK(r.components.rows() == 2);
    const double total = r.explained_variance.sum();
    CHECK(r.explained_variance[0] / total == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("apply: selection order, passthrough identity, width check") {
    FeatureMatrix X;
    X.values.resize(3, 4);
    X.values << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12;
    Reducer r;
    r.kind = ReducerKind::MINFO;
    r.input_cols = 4;
    r.target_dim = 2;
    r.selected = {3, 1};
    const auto out = apply(r, X);
    CHECK(out.cols() == 2);
    CHECK(out.values(2, 0) == 12.0f);
    CHECK(out.values(2, 1) == 10.0f);
    CHECK(out.meta.extra.at("reducer") == "minfo");

    const auto p = apply(passthrough(4), X);
    CHECK(p.values == X.values);

    FeatureMatrix narrow;
    narrow.values.resize(3, 3);
    narrow.values.setZero();
    CHECK_THROWS_AS(apply(r, narrow), ValidationError);
}

TEST_CASE("reducer JSON round-trip keeps infinite scores") {
    Eigen::MatrixXd X(6, 2);
    X << 1, 0.1, 1, 0.5, 1, 0.2, 2, 0.3, 2, 0.9, 2, 0.4;
    const std::vector<int> y{0, 0, 0, 1, 1, 1};
    const auto r = fit_anova(X, y, 2);
    const auto back = Reducer::from_json(r.to_json());
    CHECK(std::isinf(back.scores[0]));
    CHECK(back.selected == r.selected);
    const auto pca = fit_pca(X, 2);
    const auto pback = Reducer::from_json(pca.to_json());
    CHECK((apply(pback, X) - apply(pca, X)).cwiseAbs().maxCoeff() < 1e-12);
}
