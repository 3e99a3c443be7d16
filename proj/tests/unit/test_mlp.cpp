#include "fnd/error.hpp"
#include "fnd/mlp.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

using namespace fnd;

namespace {

// Largest relative error between analytic and central-difference gradients.
double gradient_check(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const int in = 2 + static_cast<int>(rng() % 4);
    const std::vector<int> hidden{2 + static_cast<int>(rng() % 5), 2 + static_cast<int>(rng() % 5)};
    const int classes = 2 + static_cast<int>(rng() % 2);
    auto layers = init_layers(in, hidden, classes, seed);
    std::normal_distribution<double> g;
    for (auto& l : layers)
        for (int i = 0; i < l.bias.size(); ++i) l.bias[i] = 0.1 * g(rng);
    Eigen::MatrixXd inputs(in, 5);
    for (int r = 0; r < in; ++r)
        for (int c = 0; c < 5; ++c) inputs(r, c) = g(rng);
    std::vector<int> labels(5);
    for (auto& y : labels) y = static_cast<int>(rng() % static_cast<std::uint64_t>(classes));

    std::vector<DenseLayer> grads;
    loss_and_gradients(layers, inputs, labels, &grads);
    const double h = 1e-6;
    double worst = 0.0;
    auto probe = [&](double& param, double analytic) {
        const double saved = param;
        param = saved + h;
        const double up = loss_and_gradients(layers, inputs, labels, nullptr);
        param = saved - h;
        const double down = loss_and_gradients(layers, inputs, labels, nullptr);
        param = saved;
        const double numeric = (up - down) / (2 * h);
        const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-7});
        worst = std::max(worst, std::abs(numeric - analytic) / denom);
    };
    for (std::size_t l = 0; l < layers.size(); ++l) {
        for (int r = 0; r < layers[l].weights.rows(); ++r)
            for (int c = 0; c < layers[l].weights.cols(); ++c) probe(layers[l].weights(r, c), grads[l].weights(r, c));
        for (int r = 0; r < layers[l].bias.size(); ++r) probe(layers[l].bias[r], grads[l].bias[r]);
    }
    return worst;
}

struct Toy {
    Eigen::MatrixXd X;
    std::vector<int> y;
};

Toy separable(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 0.3);
    Toy t;
    t.X.resize(n, 2);
    for (int i = 0; i < n; ++i) {
        const int label = i % 2;
        t.y.push_back(label);
        t.X(i, 0) = (label ? 1.5 : -1.5) + g(rng);
        t.X(i, 1) = g(rng);
    }
    return t;
}

MlpConfig small() {
    MlpConfig c;
    c.hidden = {16, 16};
    c.max_epochs = 200;
    c.batch_size = 8;
    c.learning_rate = 1e-2;
    c.patience = 200;
    c.seed = 3;
    return c;
}

} // namespace

TEST_CASE("analytic gradients match central differences") {
    for (std::uint64_t s = 0; s < 20; ++s) CHECK(gradient_check(100 + s) < 1e-4);
}

TEST_CASE("zero-weight network gives uniform supports") {
    MlpModel m;
    m.layers = init_layers(3, {4}, 2, 1);
    for (auto& l : m.layers) {
        l.weights.setZero();
        l.bias.setZero();
    }
    m.classes = 2;
    m.input_mean = Eigen::VectorXd::Zero(3);
    m.input_scale = Eigen::VectorXd::Ones(3);
    const auto s = predict_support(m, Eigen::MatrixXd::Random(5, 3));
    CHECK((s.array() - 0.5).abs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(predict_support(m, Eigen::MatrixXd::Zero(2, 4)), ValidationError);
}

TEST_CASE("overfits a 20-sample separable set") {
    const auto t = separable(20, 1);
    const auto m = train_mlp(t.X, t.y, small());
    const auto s = predict_support(m, t.X);
    for (int i = 0; i < 20; ++i) {
        CHECK(s.row(i).sum() == doctest::Approx(1.0).epsilon(1e-9));
        Eigen::Index arg;
        s.row(i).maxCoeff(&arg);
        CHECK(static_cast<int>(arg) == t.y[static_cast<std::size_t>(i)]);
    }
    CHECK(m.layers.back().weights.rows() == 2);
    CHECK(m.history.best_epoch >= 1);
    const double best = m.history.val_loss[static_cast<std::size_t>(m.history.best_epoch - 1)];
    CHECK(best <= m.history.val_loss.front());
}

TEST_CASE("training is deterministic and stops early") {
    const auto t = separable(80, 2);
    auto cfg = small();
    cfg.patience = 5;
    const auto a = train_mlp(t.X, t.y, cfg);
    const auto b = train_mlp(t.X, t.y, cfg);
    CHECK(a.history.best_epoch == b.history.best_epoch);
    CHECK(a.history.val_loss == b.history.val_loss);
    CHECK(a.history.train_loss.size() < 200);
    CHECK(static_cast<int>(a.history.train_loss.size()) <= a.history.best_epoch + cfg.patience);
}

TEST_CASE("training rejects bad inputs") {
    const auto t = separable(20, 3);
    CHECK_THROWS_AS(train_mlp(t.X, std::vector<int>(20, 1), small()), ValidationError);
    CHECK_THROWS_AS(train_mlp(t.X, std::vector<int>(19, 1), small()), ValidationError);
    auto huge = small();
    huge.learning_rate = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(train_mlp(t.X, t.y, huge), TrainingError);
}

TEST_CASE("model file round-trip") {
    const auto t = separable(40, 4);
    const auto m = train_mlp(t.X, t.y, small());
    const auto path = std::filesystem::temp_directory_path() / "fnd_unit_model.mlp";
    save_mlp(m, path);
    const auto back = load_mlp(path);
    CHECK(back.classes == 2);
    CHECK(back.config.hidden == m.config.hidden);
    CHECK(back.history.best_epoch == m.history.best_epoch);
    CHECK((predict_support(back, t.X) - predict_support(m, t.X)).cwiseAbs().maxCoeff() < 1e-4);
    save_mlp(back, path);
    CHECK((predict_support(load_mlp(path), t.X) - predict_support(back, t.X)).cwiseAbs().maxCoeff() == 0.0);
}
