#include "fediron/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fediron/rng.hpp"

namespace fediron {
namespace {

constexpr double kProbFloor = 1e-12;
constexpr std::size_t kPredictChunk = 4096;

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void apply_activation(Matrix& z, Activation act) {
    switch (act) {
        case Activation::identity:
            return;
        case Activation::relu:
            for (auto& v : z.values()) v = v > 0.0 ? v : 0.0;
            return;
        case Activation::sigmoid:
            for (auto& v : z.values()) v = sigmoid(v);
            return;
        case Activation::softmax:
            for (std::size_t r = 0; r < z.rows(); ++r) {
                auto row = z.row(r);
                const double mx = *std::max_element(row.begin(), row.end());
                double sum = 0.0;
                for (auto& v : row) {
                    v = std::exp(v - mx);
                    sum += v;
                }
                for (auto& v : row) v /= sum;
            }
            return;
    }
}

/// delta *= f'(z) expressed through the layer output a = f(z).
void multiply_derivative(Matrix& delta, const Matrix& out, Activation act) {
    auto d = delta.values();
    const auto a = out.values();
    switch (act) {
        case Activation::identity:
            return;
        case Activation::relu:
            for (std::size_t i = 0; i < d.size(); ++i)
                if (!(a[i] > 0.0)) d[i] = 0.0;
            return;
        case Activation::sigmoid:
            for (std::size_t i = 0; i < d.size(); ++i) d[i] *= a[i] * (1.0 - a[i]);
            return;
        case Activation::softmax:
            throw std::logic_error("softmax is only supported on the output layer");
    }
}

void check_labels(std::span<const int> labels, std::size_t n_classes) {
    for (auto y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= n_classes)
            throw std::invalid_argument("label " + std::to_string(y) + " outside [0, " + std::to_string(n_classes) +
                                        ")");
    }
}

}  // namespace

std::string to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::softmax: return "softmax";
        case Activation::sigmoid: return "sigmoid";
        case Activation::identity: return "identity";
    }
    return "?";
}

Activation activation_from_string(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "softmax") return Activation::softmax;
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "identity") return Activation::identity;
    throw std::invalid_argument("unknown activation '" + name + "'");
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& s : specs) n += s.out_dim * s.in_dim + s.out_dim;
    return n;
}

void validate_specs(std::span<const LayerSpec> specs) {
    if (specs.empty()) throw std::invalid_argument("model has no layers");
    for (std::size_t k = 0; k < specs.size(); ++k) {
        const auto& s = specs[k];
        const auto where = "layer " + std::to_string(k);
        if (s.in_dim == 0 || s.out_dim == 0) throw std::invalid_argument(where + ": zero dimension");
        if (k > 0 && s.in_dim != specs[k - 1].out_dim)
            throw std::invalid_argument(where + ": in_dim " + std::to_string(s.in_dim) + " does not match layer " +
                                        std::to_string(k - 1) + " out_dim " + std::to_string(specs[k - 1].out_dim));
        const bool last = k + 1 == specs.size();
        if (last && s.activation != Activation::softmax)
            throw std::invalid_argument(where + ": output layer must be softmax");
        if (!last && s.activation == Activation::softmax)
            throw std::invalid_argument(where + ": softmax is only allowed on the output layer");
    }
}

void check_same_shape(const ModelParams& a, const ModelParams& b) {
    if (a.specs.size() != b.specs.size())
        throw std::invalid_argument("model shape mismatch: " + std::to_string(a.specs.size()) + " vs " +
                                    std::to_string(b.specs.size()) + " layers");
    for (std::size_t k = 0; k < a.specs.size(); ++k) {
        if (a.specs[k].in_dim != b.specs[k].in_dim || a.specs[k].out_dim != b.specs[k].out_dim)
            throw std::invalid_argument("model shape mismatch at layer " + std::to_string(k));
    }
}

std::vector<std::span<double>> tensors(ModelParams& m) {
    std::vector<std::span<double>> out;
    out.reserve(m.layers.size() * 2);
    for (auto& l : m.layers) {
        out.push_back(l.weights.values());
        out.emplace_back(l.biases);
    }
    return out;
}

std::vector<std::span<const double>> tensors(const ModelParams& m) {
    std::vector<std::span<const double>> out;
    out.reserve(m.layers.size() * 2);
    for (const auto& l : m.layers) {
        out.push_back(l.weights.values());
        out.emplace_back(l.biases);
    }
    return out;
}

ModelParams make_model(std::vector<LayerSpec> specs) {
    validate_specs(specs);
    ModelParams m;
    m.specs = std::move(specs);
    for (const auto& s : m.specs) m.layers.push_back({Matrix(s.out_dim, s.in_dim), Vector(s.out_dim, 0.0)});
    return m;
}

ModelParams zeros_like(const ModelParams& m) {
    ModelParams z;
    z.specs = m.specs;
    for (const auto& l : m.layers) z.layers.push_back({Matrix(l.weights.rows(), l.weights.cols()), Vector(l.biases.size())});
    return z;
}

ModelParams init_xavier(std::vector<LayerSpec> specs, std::uint64_t seed) {
    ModelParams m = make_model(std::move(specs));
    Rng rng(seed);
    for (auto& l : m.layers) {
        const double a = std::sqrt(6.0 / static_cast<double>(l.weights.rows() + l.weights.cols()));
        for (auto& w : l.weights.values()) w = rng.uniform(-a, a);
    }
    return m;
}

std::vector<LayerSpec> dnn_preset_specs(std::size_t n_features, std::size_t n_classes) {
    return {{n_features, 128, Activation::relu},
            {128, 128, Activation::relu},
            {128, 64, Activation::relu},
            {64, n_classes, Activation::softmax}};
}

ForwardCache forward(const ModelParams& model, const Matrix& batch) {
    if (batch.cols() != model.input_dim())
        throw std::invalid_argument("forward: batch has " + std::to_string(batch.cols()) +
                                    " columns, model expects " + std::to_string(model.input_dim()));
    ForwardCache cache;
    cache.activations.reserve(model.layers.size() + 1);
    cache.activations.push_back(batch);
    for (std::size_t k = 0; k < model.layers.size(); ++k) {
        Matrix z = matmul_nt(cache.activations.back(), model.layers[k].weights);
        add_row_vector(z, model.layers[k].biases);
        apply_activation(z, model.specs[k].activation);
        cache.activations.push_back(std::move(z));
    }
    return cache;
}

Matrix predict_proba(const ModelParams& model, const Matrix& x) {
    if (x.rows() <= kPredictChunk) return forward(model, x).probs();
    Matrix out(x.rows(), model.output_dim());
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < x.rows(); start += kPredictChunk) {
        const std::size_t end = std::min(x.rows(), start + kPredictChunk);
        idx.resize(end - start);
        std::iota(idx.begin(), idx.end(), start);
        const Matrix p = forward(model, x.gather_rows(idx)).probs();
        std::copy(p.values().begin(), p.values().end(), out.row(start).begin());
    }
    return out;
}

std::vector<int> predict(const ModelParams& model, const Matrix& x) {
    const Matrix p = predict_proba(model, x);
    std::vector<int> out(p.rows());
    for (std::size_t r = 0; r < p.rows(); ++r) {
        const auto row = p.row(r);
        out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
}

double cross_entropy(const Matrix& probs, std::span<const int> labels) {
    if (labels.size() != probs.rows()) throw std::invalid_argument("cross_entropy: label count != rows");
    check_labels(labels, probs.cols());
    if (labels.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t r = 0; r < probs.rows(); ++r)
        total -= std::log(std::max(probs(r, static_cast<std::size_t>(labels[r])), kProbFloor));
    return total / static_cast<double>(labels.size());
}

ModelParams backward(const ModelParams& model, const ForwardCache& cache, std::span<const int> labels,
                     const ProxTerm* prox) {
    const std::size_t n_layers = model.layers.size();
    if (cache.activations.size() != n_layers + 1)
        throw std::invalid_argument("backward: activation cache does not match the model depth");
    for (std::size_t k = 0; k < n_layers; ++k) {
        if (cache.activations[k + 1].cols() != model.specs[k].out_dim ||
            cache.activations[k].cols() != model.specs[k].in_dim)
            throw std::invalid_argument("backward: stale activations at layer " + std::to_string(k));
    }
    const Matrix& probs = cache.probs();
    if (labels.size() != probs.rows()) throw std::invalid_argument("backward: label count != batch rows");
    check_labels(labels, probs.cols());

    ModelParams grads;
    grads.specs = model.specs;
    grads.layers.resize(n_layers);

    const double inv_n = 1.0 / static_cast<double>(labels.size());
    Matrix delta = probs;
    for (std::size_t r = 0; r < delta.rows(); ++r) delta(r, static_cast<std::size_t>(labels[r])) -= 1.0;
    for (auto& v : delta.values()) v *= inv_n;

    for (std::size_t k = n_layers; k-- > 0;) {
        const Matrix& input = cache.activations[k];
        grads.layers[k].weights = matmul_tn(delta, input);
        grads.layers[k].biases = column_sums(delta);
        if (k > 0) {
            Matrix prev = matmul(delta, model.layers[k].weights);
            multiply_derivative(prev, input, model.specs[k - 1].activation);
            delta = std::move(prev);
        }
    }

    if (prox && prox->mu != 0.0) {
        if (!prox->anchor) throw std::invalid_argument("backward: proximal term without an anchor model");
        check_same_shape(model, *prox->anchor);
        auto g = tensors(grads);
        const auto w = tensors(model);
        const auto a = tensors(*prox->anchor);
        for (std::size_t t = 0; t < g.size(); ++t)
            for (std::size_t i = 0; i < g[t].size(); ++i) g[t][i] += prox->mu * (w[t][i] - a[t][i]);
    }
    return grads;
}

Optimizer::Optimizer(OptimizerConfig config, const ModelParams& shape)
    : config_(config), first_(zeros_like(shape)) {
    if (std::holds_alternative<AdamConfig>(config_)) second_ = zeros_like(shape);
}

void Optimizer::step(ModelParams& params, const ModelParams& grads) {
    check_same_shape(params, grads);
    check_same_shape(params, first_);
    ++t_;
    auto w = tensors(params);
    const auto g = tensors(grads);
    auto m = tensors(first_);
    if (const auto* sgd = std::get_if<SgdConfig>(&config_)) {
        for (std::size_t t = 0; t < w.size(); ++t) {
            for (std::size_t i = 0; i < w[t].size(); ++i) {
                m[t][i] = sgd->momentum * m[t][i] + g[t][i];
                w[t][i] -= sgd->lr * m[t][i];
            }
        }
        return;
    }
    const auto& adam = std::get<AdamConfig>(config_);
    auto v = tensors(second_);
    const double c1 = 1.0 - std::pow(adam.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(adam.beta2, static_cast<double>(t_));
    for (std::size_t t = 0; t < w.size(); ++t) {
        for (std::size_t i = 0; i < w[t].size(); ++i) {
            const double gi = g[t][i];
            m[t][i] = adam.beta1 * m[t][i] + (1.0 - adam.beta1) * gi;
            v[t][i] = adam.beta2 * v[t][i] + (1.0 - adam.beta2) * gi * gi;
            const double m_hat = m[t][i] / c1;
            const double v_hat = v[t][i] / c2;
            w[t][i] -= adam.lr * m_hat / (std::sqrt(v_hat) + adam.eps);
        }
    }
}

void validate(const TrainConfig& config) {
    const double lr = std::visit([](const auto& o) { return o.lr; }, config.optimizer);
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw std::invalid_argument("learning rate must be finite and >= 0");
    if (config.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (config.prox && !(config.prox->mu >= 0.0)) throw std::invalid_argument("proximal mu must be >= 0");
}

TrainResult train_local(ModelParams model, const LabeledData& data, const TrainConfig& config) {
    validate(config);
    if (data.empty()) throw std::invalid_argument("train_local: empty dataset");
    if (data.features.rows() != data.labels.size())
        throw std::invalid_argument("train_local: feature rows != label count");
    validate_specs(model.specs);

    TrainResult result;
    if (config.epochs == 0) {
        result.model = std::move(model);
        return result;
    }

    Rng rng(config.seed);
    Optimizer opt(config.optimizer, model);
    const ProxTerm* prox = config.prox ? &*config.prox : nullptr;
    const std::size_t n = data.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<std::size_t> batch_idx;
    std::vector<int> batch_labels;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(std::span(order));
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t end = std::min(n, start + config.batch_size);
            batch_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
            batch_labels.resize(batch_idx.size());
            for (std::size_t i = 0; i < batch_idx.size(); ++i) batch_labels[i] = data.labels[batch_idx[i]];

            const ForwardCache cache = forward(model, data.features.gather_rows(batch_idx));
            loss_sum += cross_entropy(cache.probs(), batch_labels) * static_cast<double>(batch_idx.size());
            const ModelParams grads = backward(model, cache, batch_labels, prox);
            opt.step(model, grads);
        }
        result.epoch_losses.push_back(loss_sum / static_cast<double>(n));
    }
    result.model = std::move(model);
    return result;
}

}  // namespace fediron
