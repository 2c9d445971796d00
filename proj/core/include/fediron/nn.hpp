#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fediron/dataset.hpp"
#include "fediron/matrix.hpp"

namespace fediron {

enum class Activation { relu, softmax, sigmoid, identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct LayerSpec {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    Activation activation = Activation::identity;

    bool operator==(const LayerSpec&) const = default;
};

struct Layer {
    Matrix weights;  // out x in
    Vector biases;   // out

    bool operator==(const Layer&) const = default;
};

/// Feedforward classifier parameters. The last layer is always softmax.
struct ModelParams {
    std::vector<LayerSpec> specs;
    std::vector<Layer> layers;

    std::size_t input_dim() const { return specs.empty() ? 0 : specs.front().in_dim; }
    std::size_t output_dim() const { return specs.empty() ? 0 : specs.back().out_dim; }
    std::size_t parameter_count() const;

    bool operator==(const ModelParams&) const = default;
};

/// Throws std::invalid_argument naming the first offending layer.
void validate_specs(std::span<const LayerSpec> specs);
/// Throws std::invalid_argument if the two models differ in any tensor shape.
void check_same_shape(const ModelParams& a, const ModelParams& b);

/// All weight and bias tensors in storage order: w0, b0, w1, b1, ...
std::vector<std::span<double>> tensors(ModelParams& m);
std::vector<std::span<const double>> tensors(const ModelParams& m);

ModelParams zeros_like(const ModelParams& m);
/// Builds a zero-initialized model with the given layout.
ModelParams make_model(std::vector<LayerSpec> specs);

/// Uniform(-a, a), a = sqrt(6 / (in + out)); zero biases.
ModelParams init_xavier(std::vector<LayerSpec> specs, std::uint64_t seed);

/// 38 -> 128 -> 128 -> 64 -> 10, ReLU hidden layers.
std::vector<LayerSpec> dnn_preset_specs(std::size_t n_features = 38, std::size_t n_classes = 10);

struct ForwardCache {
    /// activations[0] is the input batch; activations[k + 1] is layer k's output.
    std::vector<Matrix> activations;

    const Matrix& probs() const { return activations.back(); }
};

ForwardCache forward(const ModelParams& model, const Matrix& batch);

/// Class probabilities for arbitrarily many rows, evaluated in chunks.
Matrix predict_proba(const ModelParams& model, const Matrix& x);
std::vector<int> predict(const ModelParams& model, const Matrix& x);

/// Mean negative log-likelihood; probabilities are clamped below at 1e-12.
double cross_entropy(const Matrix& probs, std::span<const int> labels);

/// FedProx-style penalty (mu / 2) * ||w - anchor||^2 added to the local loss.
struct ProxTerm {
    double mu = 0.0;
    std::shared_ptr<const ModelParams> anchor;
};

/// Gradient of the mean cross-entropy (plus the proximal term, if given).
ModelParams backward(const ModelParams& model, const ForwardCache& cache, std::span<const int> labels,
                     const ProxTerm* prox = nullptr);

struct SgdConfig {
    double lr = 0.01;
    double momentum = 0.9;

    bool operator==(const SgdConfig&) const = default;
};

struct AdamConfig {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    bool operator==(const AdamConfig&) const = default;
};

using OptimizerConfig = std::variant<SgdConfig, AdamConfig>;

class Optimizer {
public:
    Optimizer(OptimizerConfig config, const ModelParams& shape);

    void step(ModelParams& params, const ModelParams& grads);
    std::int64_t steps() const noexcept { return t_; }

private:
    OptimizerConfig config_;
    ModelParams first_;   // SGD velocity / Adam first moment
    ModelParams second_;  // Adam second moment
    std::int64_t t_ = 0;
};

struct TrainConfig {
    OptimizerConfig optimizer = SgdConfig{};
    std::size_t batch_size = 128;
    std::size_t epochs = 1;
    std::uint64_t seed = 0;
    std::optional<ProxTerm> prox;
};

/// Throws std::invalid_argument when a hyperparameter is out of range.
void validate(const TrainConfig& config);

struct TrainResult {
    ModelParams model;
    /// Mean training loss of each epoch.
    std::vector<double> epoch_losses;
};

/// Mini-batch training over seeded shuffles; epochs * ceil(n / batch) steps.
TrainResult train_local(ModelParams model, const LabeledData& data, const TrainConfig& config);

}  // namespace fediron
