#include "fediron/dbn.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "fediron/rng.hpp"

namespace fediron {
namespace {

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void sample_bernoulli(Matrix& probs, Rng& rng) {
    for (auto& p : probs.values()) p = rng.bernoulli(p) ? 1.0 : 0.0;
}

double mean_squared_diff(const Matrix& a, const Matrix& b) {
    if (a.empty()) return 0.0;
    double s = 0.0;
    const auto x = a.values();
    const auto y = b.values();
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        s += d * d;
    }
    return s / static_cast<double>(x.size());
}

void check_visible(const Rbm& rbm, const Matrix& v, const char* op) {
    if (v.cols() != rbm.n_visible())
        throw std::invalid_argument(std::string(op) + ": input has " + std::to_string(v.cols()) +
                                    " columns, RBM has " + std::to_string(rbm.n_visible()) + " visible units");
}

// Seed layout for pretrain_stack: layer k initializes from {seed, k, 0},
// shuffles from {seed, k, 1}, and batch b of epoch e samples from {seed, k, 2, e, b}.
std::uint64_t layer_seed(std::uint64_t seed, std::size_t layer, std::uint64_t purpose) {
    return derive_seed({seed, layer, purpose});
}

}  // namespace

Rbm make_rbm(std::size_t n_visible, std::size_t n_hidden, VisibleKind kind, std::uint64_t seed) {
    if (n_visible == 0 || n_hidden == 0) throw std::invalid_argument("make_rbm: zero dimension");
    Rbm rbm{Matrix(n_hidden, n_visible), Vector(n_visible, 0.0), Vector(n_hidden, 0.0), kind};
    Rng rng(seed);
    const double a = std::sqrt(6.0 / static_cast<double>(n_visible + n_hidden));
    for (auto& w : rbm.weights.values()) w = rng.uniform(-a, a);
    return rbm;
}

Matrix hidden_probs(const Rbm& rbm, const Matrix& v) {
    check_visible(rbm, v, "hidden_probs");
    Matrix h = matmul_nt(v, rbm.weights);
    add_row_vector(h, rbm.hidden_bias);
    for (auto& x : h.values()) x = sigmoid(x);
    return h;
}

Matrix visible_mean(const Rbm& rbm, const Matrix& h) {
    if (h.cols() != rbm.n_hidden()) throw std::invalid_argument("visible_mean: hidden width mismatch");
    Matrix v = matmul(h, rbm.weights);
    add_row_vector(v, rbm.visible_bias);
    if (rbm.visible_kind == VisibleKind::bernoulli)
        for (auto& x : v.values()) x = sigmoid(x);
    return v;
}

Matrix positive_statistics(const Rbm& rbm, const Matrix& v) {
    Matrix stats = matmul_tn(hidden_probs(rbm, v), v);
    if (v.rows() > 0)
        for (auto& x : stats.values()) x /= static_cast<double>(v.rows());
    return stats;
}

RbmVelocity zero_velocity(const Rbm& rbm) {
    return {Matrix(rbm.n_hidden(), rbm.n_visible()), Vector(rbm.n_visible(), 0.0), Vector(rbm.n_hidden(), 0.0)};
}

CdStep cd1_update(Rbm rbm, const Matrix& batch, const CdConfig& config, std::uint64_t seed, RbmVelocity velocity) {
    check_visible(rbm, batch, "cd1_update");
    if (velocity.weights.rows() != rbm.n_hidden() || velocity.weights.cols() != rbm.n_visible())
        throw std::invalid_argument("cd1_update: velocity shape mismatch");
    if (batch.rows() == 0) return {std::move(rbm), std::move(velocity), 0.0};

    Rng rng(seed);
    const Matrix pos_h = hidden_probs(rbm, batch);
    Matrix h_sample = pos_h;
    sample_bernoulli(h_sample, rng);
    const Matrix recon_mean = visible_mean(rbm, h_sample);
    Matrix recon = recon_mean;
    if (rbm.visible_kind == VisibleKind::bernoulli) sample_bernoulli(recon, rng);
    const Matrix neg_h = hidden_probs(rbm, recon);

    const double inv_n = 1.0 / static_cast<double>(batch.rows());
    const Matrix pos = matmul_tn(pos_h, batch);
    const Matrix neg = matmul_tn(neg_h, recon);
    const Vector pos_v = column_sums(batch), neg_v = column_sums(recon);
    const Vector pos_hs = column_sums(pos_h), neg_hs = column_sums(neg_h);

    const double m = config.momentum;
    const double lr = config.lr;
    auto vw = velocity.weights.values();
    auto w = rbm.weights.values();
    const auto p = pos.values();
    const auto q = neg.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
        vw[i] = m * vw[i] + (p[i] - q[i]) * inv_n;
        w[i] += lr * vw[i];
    }
    for (std::size_t i = 0; i < rbm.visible_bias.size(); ++i) {
        velocity.visible_bias[i] = m * velocity.visible_bias[i] + (pos_v[i] - neg_v[i]) * inv_n;
        rbm.visible_bias[i] += lr * velocity.visible_bias[i];
    }
    for (std::size_t i = 0; i < rbm.hidden_bias.size(); ++i) {
        velocity.hidden_bias[i] = m * velocity.hidden_bias[i] + (pos_hs[i] - neg_hs[i]) * inv_n;
        rbm.hidden_bias[i] += lr * velocity.hidden_bias[i];
    }
    return {std::move(rbm), std::move(velocity), mean_squared_diff(batch, recon_mean)};
}

double reconstruction_error(const Rbm& rbm, const Matrix& v) {
    return mean_squared_diff(v, visible_mean(rbm, hidden_probs(rbm, v)));
}

std::vector<std::size_t> DbnStack::dims() const {
    std::vector<std::size_t> d;
    for (const auto& r : rbms) d.push_back(r.n_visible());
    if (!rbms.empty()) d.push_back(rbms.back().n_hidden());
    return d;
}

std::vector<std::size_t> dbn_preset_dims(std::size_t n_features) { return {n_features, 100, 150, 200, 50}; }

std::vector<LayerSpec> dbn_preset_specs(std::size_t n_features, std::size_t n_classes) {
    const auto dims = dbn_preset_dims(n_features);
    std::vector<LayerSpec> specs;
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) specs.push_back({dims[k], dims[k + 1], Activation::sigmoid});
    specs.push_back({dims.back(), n_classes, Activation::softmax});
    return specs;
}

PretrainResult pretrain_stack(const std::vector<std::size_t>& dims, const Matrix& data, const PretrainConfig& config) {
    if (dims.size() < 2) throw std::invalid_argument("pretrain_stack: need at least one visible and one hidden size");
    if (data.cols() != dims.front())
        throw std::invalid_argument("pretrain_stack: data has " + std::to_string(data.cols()) +
                                    " columns, first layer expects " + std::to_string(dims.front()));
    if (config.batch_size < 1) throw std::invalid_argument("pretrain_stack: batch_size must be >= 1");

    PretrainResult result;
    Matrix input = data;
    const std::size_t n = input.rows();
    std::vector<std::size_t> order(n);
    std::vector<std::size_t> batch_idx;

    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
        const auto kind = k == 0 ? VisibleKind::gaussian : VisibleKind::bernoulli;
        Rbm rbm = make_rbm(dims[k], dims[k + 1], kind, layer_seed(config.seed, k, 0));
        RbmVelocity vel = zero_velocity(rbm);
        Rng shuffler(layer_seed(config.seed, k, 1));
        std::iota(order.begin(), order.end(), 0);

        std::vector<double> curve{reconstruction_error(rbm, input)};
        for (std::size_t e = 0; e < config.epochs && n > 0; ++e) {
            shuffler.shuffle(std::span(order));
            std::size_t b = 0;
            for (std::size_t start = 0; start < n; start += config.batch_size, ++b) {
                const std::size_t end = std::min(n, start + config.batch_size);
                batch_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                                 order.begin() + static_cast<std::ptrdiff_t>(end));
                auto step = cd1_update(std::move(rbm), input.gather_rows(batch_idx), config.cd,
                                       derive_seed({config.seed, k, 2, e, b}), std::move(vel));
                rbm = std::move(step.rbm);
                vel = std::move(step.velocity);
            }
            curve.push_back(reconstruction_error(rbm, input));
        }
        input = hidden_probs(rbm, input);
        result.stack.rbms.push_back(std::move(rbm));
        result.reconstruction.push_back(std::move(curve));
    }
    return result;
}

ModelParams to_classifier(const DbnStack& stack, std::size_t n_classes, std::uint64_t seed) {
    if (stack.rbms.empty()) throw std::invalid_argument("to_classifier: empty stack");
    for (std::size_t k = 1; k < stack.rbms.size(); ++k) {
        if (stack.rbms[k].n_visible() != stack.rbms[k - 1].n_hidden())
            throw std::invalid_argument("to_classifier: RBM " + std::to_string(k) + " does not chain");
    }
    std::vector<LayerSpec> specs;
    for (const auto& r : stack.rbms) specs.push_back({r.n_visible(), r.n_hidden(), Activation::sigmoid});
    specs.push_back({stack.rbms.back().n_hidden(), n_classes, Activation::softmax});

    const ModelParams head = init_xavier({specs.back()}, seed);
    ModelParams model;
    model.specs = specs;
    for (const auto& r : stack.rbms) model.layers.push_back({r.weights, r.hidden_bias});
    model.layers.push_back(head.layers.front());
    return model;
}

}  // namespace fediron
