#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace fnd {

struct MlpConfig {
    std::vector<int> hidden{500, 500};
    double learning_rate = 1e-3;
    int max_epochs = 200;
    int batch_size = 32;
    double val_fraction = 0.1;
    int patience = 10;
    // Validation loss must drop by more than this to count as an improvement.
    double min_delta = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 0;

    nlohmann::json to_json() const;
    static MlpConfig from_json(const nlohmann::json& j);
    static MlpConfig from_json(const nlohmann::json& j, MlpConfig base);
};

struct DenseLayer {
    Eigen::MatrixXd weights; // out x in
    Eigen::VectorXd bias;
};

struct TrainingHistory {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    int best_epoch = 0; // 1-based
};

struct MlpModel {
    std::vector<DenseLayer> layers;
    Eigen::VectorXd input_mean;
    Eigen::VectorXd input_scale;
    int classes = 0;
    TrainingHistory history;
    MlpConfig config;

    Eigen::Index input_width() const { return layers.empty() ? 0 : layers.front().weights.cols(); }
};

// Mean softmax cross-entropy of `inputs` (features x batch, already
// standardized). Fills `grads` (same shapes as `layers`) when non-null.
double loss_and_gradients(const std::vector<DenseLayer>& layers, const Eigen::MatrixXd& inputs,
                          std::span<const int> labels, std::vector<DenseLayer>* grads);

// Layers with He-normal weights and zero biases.
std::vector<DenseLayer> init_layers(Eigen::Index input_width, const std::vector<int>& hidden,
                                    int classes, std::uint64_t seed);

MlpModel train_mlp(const Eigen::MatrixXd& X, std::span<const int> y, const MlpConfig& cfg);

// One softmax row per input row.
Eigen::MatrixXd predict_support(const MlpModel& model, const Eigen::MatrixXd& X);

// JSON header (shapes, config, standardization stats) + little-endian f32 parameters.
void save_mlp(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_mlp(const std::filesystem::path& path);

} // namespace fnd
