#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fediron/matrix.hpp"
#include "fediron/nn.hpp"

namespace fediron {

/// Gaussian visibles take real-valued (standardized) input with unit variance;
/// Bernoulli visibles take probabilities in [0, 1].
enum class VisibleKind { gaussian, bernoulli };

struct Rbm {
    Matrix weights;  // hidden x visible
    Vector visible_bias;
    Vector hidden_bias;
    VisibleKind visible_kind = VisibleKind::bernoulli;

    std::size_t n_visible() const noexcept { return weights.cols(); }
    std::size_t n_hidden() const noexcept { return weights.rows(); }

    bool operator==(const Rbm&) const = default;
};

/// Xavier-uniform weights, zero biases.
Rbm make_rbm(std::size_t n_visible, std::size_t n_hidden, VisibleKind kind, std::uint64_t seed);

/// p(h = 1 | v) = sigmoid(v W^T + b_h), one row per sample.
Matrix hidden_probs(const Rbm& rbm, const Matrix& v);

/// Mean of p(v | h): h W + b_v for Gaussian visibles, its sigmoid for Bernoulli.
Matrix visible_mean(const Rbm& rbm, const Matrix& h);

/// Positive-phase statistic <h v^T>_data / n using mean-field hidden probabilities.
Matrix positive_statistics(const Rbm& rbm, const Matrix& v);

struct RbmVelocity {
    Matrix weights;
    Vector visible_bias;
    Vector hidden_bias;
};

RbmVelocity zero_velocity(const Rbm& rbm);

struct CdConfig {
    double lr = 0.01;
    double momentum = 0.9;

    bool operator==(const CdConfig&) const = default;
};

struct CdStep {
    Rbm rbm;
    RbmVelocity velocity;
    /// Mean squared difference between the batch and its mean reconstruction.
    double reconstruction_error = 0.0;
};

/// One CD-1 update: velocity <- momentum * velocity + gradient, param += lr * velocity.
CdStep cd1_update(Rbm rbm, const Matrix& batch, const CdConfig& config, std::uint64_t seed, RbmVelocity velocity);

/// Mean squared error of a deterministic v -> p(h|v) -> E[v|h] pass.
double reconstruction_error(const Rbm& rbm, const Matrix& v);

struct DbnStack {
    std::vector<Rbm> rbms;

    /// Visible dims of each layer followed by the last hidden dim.
    std::vector<std::size_t> dims() const;
};

/// 38 -> 100 -> 150 -> 200 -> 50.
std::vector<std::size_t> dbn_preset_dims(std::size_t n_features = 38);
/// DBN classifier layout: sigmoid hidden layers, softmax head.
std::vector<LayerSpec> dbn_preset_specs(std::size_t n_features = 38, std::size_t n_classes = 10);

struct PretrainConfig {
    std::size_t epochs = 10;  // per layer
    std::size_t batch_size = 128;
    CdConfig cd;
    std::uint64_t seed = 0;
};

struct PretrainResult {
    DbnStack stack;
    /// Per layer, reconstruction error before training and after each epoch.
    std::vector<std::vector<double>> reconstruction;
};

/// Greedy layerwise CD-1 training. Layer k trains on the hidden probabilities
/// of layers 1..k-1; the first layer has Gaussian visibles.
PretrainResult pretrain_stack(const std::vector<std::size_t>& dims, const Matrix& data, const PretrainConfig& config);

/// Converts the stack into a feedforward classifier with a Xavier softmax head.
ModelParams to_classifier(const DbnStack& stack, std::size_t n_classes, std::uint64_t seed);

}  // namespace fediron
