#include "fnd/mlp.hpp"

#include "fnd/error.hpp"
#include "fnd/io.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

namespace fnd {

nlohmann::json MlpConfig::to_json() const {
    return {{"hidden", hidden},         {"learning_rate", learning_rate},
            {"max_epochs", max_epochs}, {"batch_size", batch_size},
            {"val_fraction", val_fraction}, {"patience", patience},
            {"min_delta", min_delta},   {"beta1", beta1},
            {"beta2", beta2},           {"epsilon", epsilon},
            {"seed", seed},             {"activation", "relu"}};
}

MlpConfig MlpConfig::from_json(const nlohmann::json& j) { return from_json(j, MlpConfig{}); }

MlpConfig MlpConfig::from_json(const nlohmann::json& j, MlpConfig c) {
    if (j.contains("hidden")) c.hidden = j["hidden"].get<std::vector<int>>();
    if (j.contains("learning_rate")) c.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("max_epochs")) c.max_epochs = j["max_epochs"].get<int>();
    if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<int>();
    if (j.contains("val_fraction")) c.val_fraction = j["val_fraction"].get<double>();
    if (j.contains("patience")) c.patience = j["patience"].get<int>();
    if (j.contains("min_delta")) c.min_delta = j["min_delta"].get<double>();
    if (j.contains("beta1")) c.beta1 = j["beta1"].get<double>();
    if (j.contains("beta2")) c.beta2 = j["beta2"].get<double>();
    if (j.contains("epsilon")) c.epsilon = j["epsilon"].get<double>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    return c;
}

namespace {

void softmax_columns(Eigen::MatrixXd& z) {
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
        auto col = z.col(c);
        col.array() -= col.maxCoeff();
        col = col.array().exp();
        col /= col.sum();
    }
}

Eigen::MatrixXd forward(const std::vector<DenseLayer>& layers, const Eigen::MatrixXd& inputs) {
    Eigen::MatrixXd a = inputs;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Eigen::MatrixXd z = layers[l].weights * a;
        z.colwise() += layers[l].bias;
        if (l + 1 < layers.size()) z = z.cwiseMax(0.0);
        a = std::move(z);
    }
    softmax_columns(a);
    return a;
}

double cross_entropy(const Eigen::MatrixXd& probs, std::span<const int> labels) {
    double loss = 0.0;
    for (Eigen::Index c = 0; c < probs.cols(); ++c)
        loss -= std::log(std::max(probs(labels[static_cast<std::size_t>(c)], c), 1e-300));
    return loss / static_cast<double>(probs.cols());
}

void validate_config(const MlpConfig& cfg) {
    if (cfg.learning_rate <= 0 || cfg.max_epochs <= 0 || cfg.batch_size <= 0 || cfg.patience <= 0)
        throw ValidationError("MlpConfig: learning_rate, max_epochs, batch_size, patience must be positive");
    if (!(cfg.val_fraction > 0.0 && cfg.val_fraction < 1.0))
        throw ValidationError("MlpConfig: val_fraction must be in (0, 1)");
    for (int h : cfg.hidden)
        if (h <= 0) throw ValidationError("MlpConfig: hidden widths must be positive");
}

Eigen::MatrixXd standardize_transposed(const Eigen::MatrixXd& X, const Eigen::VectorXd& mean,
                                       const Eigen::VectorXd& scale) {
    Eigen::MatrixXd t = X.transpose();
    t.colwise() -= mean;
    t.array().colwise() /= scale.array();
    return t;
}

struct AdamState {
    std::vector<DenseLayer> m, v;
    long step = 0;
};

DenseLayer zeros_like(const DenseLayer& l) {
    return {Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()),
            Eigen::VectorXd::Zero(l.bias.size())};
}

void adam_update(std::vector<DenseLayer>& params, const std::vector<DenseLayer>& grads,
                 AdamState& st, const MlpConfig& cfg) {
    ++st.step;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
    const double lr = cfg.learning_rate * std::sqrt(c2) / c1;
    const double eps_hat = cfg.epsilon * std::sqrt(c2);
    for (std::size_t l = 0; l < params.size(); ++l) {
        auto upd = [&](auto& p, const auto& g, auto& m, auto& v) {
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
            p.array() -= lr * m.array() / (v.array().sqrt() + eps_hat);
        };
        upd(params[l].weights, grads[l].weights, st.m[l].weights, st.v[l].weights);
        upd(params[l].bias, grads[l].bias, st.m[l].bias, st.v[l].bias);
    }
}

} // namespace

double loss_and_gradients(const std::vector<DenseLayer>& layers, const Eigen::MatrixXd& inputs,
                          std::span<const int> labels, std::vector<DenseLayer>* grads) {
    const auto B = inputs.cols();
    if (static_cast<std::size_t>(B) != labels.size())
        throw ValidationError("loss_and_gradients: batch/label size mismatch");
    std::vector<Eigen::MatrixXd> acts;
    acts.reserve(layers.size() + 1);
    acts.push_back(inputs);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Eigen::MatrixXd z = layers[l].weights * acts.back();
        z.colwise() += layers[l].bias;
        if (l + 1 < layers.size()) z = z.cwiseMax(0.0);
        acts.push_back(std::move(z));
    }
    Eigen::MatrixXd probs = acts.back();
    softmax_columns(probs);
    const double loss = cross_entropy(probs, labels);
    if (!grads) return loss;

    grads->resize(layers.size());
    Eigen::MatrixXd delta = probs;
    for (Eigen::Index c = 0; c < B; ++c) delta(labels[static_cast<std::size_t>(c)], c) -= 1.0;
    delta /= static_cast<double>(B);
    for (std::size_t l = layers.size(); l-- > 0;) {
        (*grads)[l].weights = delta * acts[l].transpose();
        (*grads)[l].bias = delta.rowwise().sum();
        if (l > 0) {
            Eigen::MatrixXd back = layers[l].weights.transpose() * delta;
            delta = (acts[l].array() > 0.0).select(back, 0.0);
        }
    }
    return loss;
}

std::vector<DenseLayer> init_layers(Eigen::Index input_width, const std::vector<int>& hidden,
                                    int classes, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<DenseLayer> layers;
    Eigen::Index fan_in = input_width;
    auto make = [&](Eigen::Index out) {
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
        DenseLayer l;
        l.weights.resize(out, fan_in);
        for (Eigen::Index i = 0; i < l.weights.size(); ++i) l.weights.data()[i] = dist(rng);
        l.bias = Eigen::VectorXd::Zero(out);
        layers.push_back(std::move(l));
        fan_in = out;
    };
    for (int h : hidden) make(h);
    make(classes);
    return layers;
}

MlpModel train_mlp(const Eigen::MatrixXd& X, std::span<const int> y, const MlpConfig& cfg) {
    validate_config(cfg);
    const auto n = X.rows();
    if (n != static_cast<Eigen::Index>(y.size())) throw ValidationError("train_mlp: X rows != |y|");
    if (n == 0 || X.cols() == 0) throw ValidationError("train_mlp: empty input");
    if (!X.allFinite()) throw ValidationError("train_mlp: non-finite input");
    std::map<int, std::vector<Eigen::Index>> by_class;
    for (Eigen::Index i = 0; i < n; ++i) {
        const int label = y[static_cast<std::size_t>(i)];
        if (label < 0) throw ValidationError("train_mlp: negative label");
        by_class[label].push_back(i);
    }
    if (by_class.size() < 2) throw ValidationError("train_mlp: single-class labels");
    const int classes = by_class.rbegin()->first + 1;

    MlpModel model;
    model.config = cfg;
    model.classes = classes;
    model.input_mean = X.colwise().mean().transpose();
    model.input_scale =
        ((X.rowwise() - model.input_mean.transpose()).array().square().colwise().mean().sqrt())
            .transpose();
    for (Eigen::Index c = 0; c < model.input_scale.size(); ++c)
        if (model.input_scale(c) < 1e-12) model.input_scale(c) = 1.0;
    const Eigen::MatrixXd data = standardize_transposed(X, model.input_mean, model.input_scale);

    // stratified validation hold-out
    std::mt19937_64 split_rng(io::derive_seed(cfg.seed, {0x5711u}));
    std::vector<Eigen::Index> train_idx, val_idx;
    for (auto& [label, members] : by_class) {
        auto shuffled = members;
        io::shuffle(shuffled, split_rng);
        auto n_val = static_cast<std::size_t>(std::lround(cfg.val_fraction * static_cast<double>(shuffled.size())));
        if (shuffled.size() >= 2) n_val = std::clamp<std::size_t>(n_val, 1, shuffled.size() - 1);
        else n_val = 0;
        val_idx.insert(val_idx.end(), shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_val));
        train_idx.insert(train_idx.end(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_val), shuffled.end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(val_idx.begin(), val_idx.end());

    auto gather = [&](const std::vector<Eigen::Index>& idx, Eigen::MatrixXd& cols, std::vector<int>& labels) {
        cols.resize(data.rows(), static_cast<Eigen::Index>(idx.size()));
        labels.resize(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) {
            cols.col(static_cast<Eigen::Index>(k)) = data.col(idx[k]);
            labels[k] = y[static_cast<std::size_t>(idx[k])];
        }
    };
    Eigen::MatrixXd val_x;
    std::vector<int> val_y;
    gather(val_idx, val_x, val_y);

    auto params = init_layers(X.cols(), cfg.hidden, classes, io::derive_seed(cfg.seed, {0x1417u}));
    AdamState adam;
    for (const auto& l : params) {
        adam.m.push_back(zeros_like(l));
        adam.v.push_back(zeros_like(l));
    }
    std::mt19937_64 order_rng(io::derive_seed(cfg.seed, {0x0bd3u}));
    std::vector<DenseLayer> grads;
    auto best = params;
    double best_loss = std::numeric_limits<double>::infinity();
    int since_best = 0;
    Eigen::MatrixXd batch_x;
    std::vector<int> batch_y;
    std::vector<Eigen::Index> order = train_idx;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        io::shuffle(order, order_rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<Eigen::Index> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                          order.begin() + static_cast<std::ptrdiff_t>(end));
            gather(idx, batch_x, batch_y);
            const double loss = loss_and_gradients(params, batch_x, batch_y, &grads);
            if (!std::isfinite(loss))
                throw TrainingError("train_mlp: non-finite loss at epoch " + std::to_string(epoch) +
                                    " (batch starting at " + std::to_string(start) + ")");
            epoch_loss += loss * static_cast<double>(end - start);
            adam_update(params, grads, adam, cfg);
        }
        epoch_loss /= static_cast<double>(order.size());
        model.history.train_loss.push_back(epoch_loss);
        // with no validation rows the training loss drives early stopping
        const double monitored = val_idx.empty() ? epoch_loss : cross_entropy(forward(params, val_x), val_y);
        if (!std::isfinite(monitored))
            throw TrainingError("train_mlp: non-finite validation loss at epoch " + std::to_string(epoch));
        model.history.val_loss.push_back(monitored);
        if (monitored < best_loss - cfg.min_delta) {
            best_loss = monitored;
            best = params;
            model.history.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    model.layers = std::move(best);
    return model;
}

Eigen::MatrixXd predict_support(const MlpModel& model, const Eigen::MatrixXd& X) {
    if (X.cols() != model.input_width())
        throw ValidationError("predict_support: expected " + std::to_string(model.input_width()) +
                              " columns, got " + std::to_string(X.cols()));
    return forward(model.layers, standardize_transposed(X, model.input_mean, model.input_scale)).transpose();
}

namespace {
constexpr std::string_view kMlpMagic = "MLP1";
}

void save_mlp(const MlpModel& model, const std::filesystem::path& path) {
    nlohmann::json shapes = nlohmann::json::array();
    for (const auto& l : model.layers) shapes.push_back({l.weights.rows(), l.weights.cols()});
    const nlohmann::json header{
        {"shapes", shapes},
        {"classes", model.classes},
        {"config", model.config.to_json()},
        {"input_mean", std::vector<double>(model.input_mean.begin(), model.input_mean.end())},
        {"input_scale", std::vector<double>(model.input_scale.begin(), model.input_scale.end())},
        {"train_loss", model.history.train_loss},
        {"val_loss", model.history.val_loss},
        {"best_epoch", model.history.best_epoch}};
    const std::string h = header.dump();
    std::string out;
    out.append(kMlpMagic);
    io::put_u32(out, static_cast<std::uint32_t>(h.size()));
    out.append(h);
    for (const auto& l : model.layers) {
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
            for (Eigen::Index c = 0; c < l.weights.cols(); ++c) io::put_f32(out, static_cast<float>(l.weights(r, c)));
        for (Eigen::Index r = 0; r < l.bias.size(); ++r) io::put_f32(out, static_cast<float>(l.bias(r)));
    }
    io::write_file_atomic(path, out);
}

MlpModel load_mlp(const std::filesystem::path& path) {
    const std::string bytes = io::read_file(path);
    io::ByteReader in(bytes);
    try {
        if (in.remaining() < 4 || in.bytes(4) != kMlpMagic) throw LoadError("bad magic (expected MLP1)");
        const auto hlen = in.u32();
        const auto header = nlohmann::json::parse(in.bytes(hlen));
        MlpModel m;
        m.classes = header.at("classes").get<int>();
        m.config = MlpConfig::from_json(header.at("config"));
        const auto mean = header.at("input_mean").get<std::vector<double>>();
        const auto scale = header.at("input_scale").get<std::vector<double>>();
        m.input_mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
        m.input_scale = Eigen::Map<const Eigen::VectorXd>(scale.data(), static_cast<Eigen::Index>(scale.size()));
        m.history.train_loss = header.at("train_loss").get<std::vector<double>>();
        m.history.val_loss = header.at("val_loss").get<std::vector<double>>();
        m.history.best_epoch = header.at("best_epoch").get<int>();
        for (const auto& s : header.at("shapes")) {
            DenseLayer l;
            l.weights.resize(s[0].get<Eigen::Index>(), s[1].get<Eigen::Index>());
            for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
                for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = in.f32();
            l.bias.resize(l.weights.rows());
            for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = in.f32();
            m.layers.push_back(std::move(l));
        }
        if (in.remaining() != 0) throw LoadError("trailing bytes after parameters");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(path.string() + ": header JSON: " + e.what());
    } catch (const LoadError& e) {
        throw LoadError(path.string() + ": " + e.what());
    }
}

} // namespace fnd
