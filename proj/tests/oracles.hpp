#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance binary.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "fediron/dbn.hpp"
#include "fediron/metrics.hpp"
#include "fediron/nn.hpp"

namespace oracle {

/// Relative errors below this magnitude floor are measured against the floor.
/// Central differences at eps = 1e-6 carry roughly 1e-10 of absolute rounding
/// noise, so tiny gradients cannot be compared purely relatively.
inline constexpr double kGradFloor = 1e-4;

inline double relative_error(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), kGradFloor});
}

/// Loss the gradient is taken of: mean cross-entropy plus the proximal penalty.
inline double objective(const fediron::ModelParams& m, const fediron::Matrix& x, const std::vector<int>& y,
                        const fediron::ProxTerm* prox) {
    double loss = fediron::cross_entropy(fediron::forward(m, x).probs(), y);
    if (prox && prox->mu != 0.0) {
        const auto w = fediron::tensors(m);
        const auto a = fediron::tensors(*prox->anchor);
        double sq = 0.0;
        for (std::size_t t = 0; t < w.size(); ++t)
            for (std::size_t i = 0; i < w[t].size(); ++i) sq += (w[t][i] - a[t][i]) * (w[t][i] - a[t][i]);
        loss += 0.5 * prox->mu * sq;
    }
    return loss;
}

/// Max relative error between backward() and central finite differences.
inline double gradient_check(const fediron::ModelParams& model, const fediron::Matrix& x, const std::vector<int>& y,
                             const fediron::ProxTerm* prox = nullptr, double eps = 1e-6) {
    const auto grads = fediron::backward(model, fediron::forward(model, x), y, prox);
    const auto g = fediron::tensors(grads);
    fediron::ModelParams probe = model;
    auto p = fediron::tensors(probe);
    double worst = 0.0;
    for (std::size_t t = 0; t < p.size(); ++t) {
        for (std::size_t i = 0; i < p[t].size(); ++i) {
            const double orig = p[t][i];
            p[t][i] = orig + eps;
            const double up = objective(probe, x, y, prox);
            p[t][i] = orig - eps;
            const double down = objective(probe, x, y, prox);
            p[t][i] = orig;
            worst = std::max(worst, relative_error(g[t][i], (up - down) / (2.0 * eps)));
        }
    }
    return worst;
}

/// Random small model: dims <= 16, hidden activations drawn from relu/sigmoid/identity.
inline fediron::ModelParams random_model(std::mt19937_64& gen) {
    using fediron::Activation;
    const Activation hidden[] = {Activation::relu, Activation::sigmoid, Activation::identity};
    const std::size_t n_layers = 1 + gen() % 3;
    std::vector<fediron::LayerSpec> specs;
    std::size_t in = 1 + gen() % 16;
    for (std::size_t l = 0; l < n_layers; ++l) {
        const bool last = l + 1 == n_layers;
        const std::size_t out = last ? 2 + gen() % 15 : 1 + gen() % 16;
        specs.push_back({in, out, last ? Activation::softmax : hidden[gen() % 3]});
        in = out;
    }
    auto m = fediron::init_xavier(specs, gen());
    std::normal_distribution<double> nd(0.0, 0.1);
    for (auto& b : m.layers)
        for (auto& v : b.biases) v = nd(gen);
    return m;
}

struct BruteClass {
    double precision, recall, f1;
};

struct BruteMetrics {
    std::vector<BruteClass> classes;
    double precision, recall, f1, accuracy;
};

/// Metrics straight from TP / FP / FN sums over the raw count table.
inline BruteMetrics brute_metrics(const std::vector<std::vector<std::uint64_t>>& counts) {
    const std::size_t n = counts.size();
    BruteMetrics out{};
    double total = 0.0, correct = 0.0;
    std::vector<double> support(n, 0.0);
    for (std::size_t c = 0; c < n; ++c) {
        double tp = 0, fp = 0, fn = 0;
        for (std::size_t t = 0; t < n; ++t)
            for (std::size_t p = 0; p < n; ++p) {
                const double v = static_cast<double>(counts[t][p]);
                if (t == c && p == c) tp += v;
                if (t != c && p == c) fp += v;
                if (t == c && p != c) fn += v;
            }
        const double prec = tp + fp > 0 ? tp / (tp + fp) : 0.0;
        const double rec = tp + fn > 0 ? tp / (tp + fn) : 0.0;
        const double f1 = prec + rec > 0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
        out.classes.push_back({prec, rec, f1});
        support[c] = tp + fn;
        total += tp + fn;
        correct += tp;
    }
    for (std::size_t c = 0; c < n; ++c) {
        out.precision += support[c] / total * out.classes[c].precision;
        out.recall += support[c] / total * out.classes[c].recall;
        out.f1 += support[c] / total * out.classes[c].f1;
    }
    out.accuracy = correct / total;
    return out;
}

/// Worst absolute difference between evaluate() and brute_metrics() on one table.
inline double metrics_discrepancy(const std::vector<std::vector<std::uint64_t>>& counts) {
    const std::size_t n = counts.size();
    fediron::ConfusionMatrix cm(n);
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t p = 0; p < n; ++p) cm(t, p) = counts[t][p];
    const auto got = fediron::evaluate(cm);
    const auto want = brute_metrics(counts);
    double worst = std::abs(got.accuracy - want.accuracy);
    worst = std::max(worst, std::abs(got.weighted.precision - want.precision));
    worst = std::max(worst, std::abs(got.weighted.recall - want.recall));
    worst = std::max(worst, std::abs(got.weighted.f1 - want.f1));
    for (std::size_t c = 0; c < n; ++c) {
        worst = std::max(worst, std::abs(got.classes[c].precision - want.classes[c].precision));
        worst = std::max(worst, std::abs(got.classes[c].recall - want.classes[c].recall));
        worst = std::max(worst, std::abs(got.classes[c].f1 - want.classes[c].f1));
    }
    return worst;
}

/// Random count table, n_classes <= 10, with some empty rows and columns.
inline std::vector<std::vector<std::uint64_t>> random_counts(std::mt19937_64& gen) {
    const std::size_t n = 1 + gen() % 10;
    std::vector<std::vector<std::uint64_t>> counts(n, std::vector<std::uint64_t>(n, 0));
    for (auto& row : counts) {
        const bool empty = gen() % 6 == 0;
        for (auto& v : row) v = empty ? 0 : (gen() % 3 == 0 ? 0 : gen() % 50);
    }
    counts[gen() % n][gen() % n] += 1;  // never all zero
    return counts;
}

/// <h v^T> over the data, with the hidden expectation taken by summing over
/// every joint hidden state weighted by its normalized Boltzmann factor.
inline fediron::Matrix enumerated_positive_statistics(const fediron::Rbm& rbm, const fediron::Matrix& v) {
    const std::size_t nh = rbm.n_hidden(), nv = rbm.n_visible();
    fediron::Matrix stats(nh, nv);
    for (std::size_t r = 0; r < v.rows(); ++r) {
        std::vector<double> weight(std::size_t{1} << nh);
        double z = 0.0;
        for (std::size_t s = 0; s < weight.size(); ++s) {
            double energy = 0.0;  // negative energy terms involving h
            for (std::size_t j = 0; j < nh; ++j) {
                if (!((s >> j) & 1)) continue;
                energy += rbm.hidden_bias[j];
                for (std::size_t i = 0; i < nv; ++i) energy += rbm.weights(j, i) * v(r, i);
            }
            weight[s] = std::exp(energy);
            z += weight[s];
        }
        for (std::size_t s = 0; s < weight.size(); ++s)
            for (std::size_t j = 0; j < nh; ++j)
                if ((s >> j) & 1)
                    for (std::size_t i = 0; i < nv; ++i) stats(j, i) += weight[s] / z * v(r, i);
    }
    for (auto& x : stats.values()) x /= static_cast<double>(v.rows());
    return stats;
}

/// Eight binary patterns over 8 visibles, each repeated `copies` times.
inline fediron::Matrix eight_patterns(std::size_t copies) {
    static constexpr std::array<std::array<int, 8>, 8> kPatterns{{
        {1, 1, 1, 1, 0, 0, 0, 0},
        {0, 0, 0, 0, 1, 1, 1, 1},
        {1, 1, 0, 0, 1, 1, 0, 0},
        {0, 0, 1, 1, 0, 0, 1, 1},
        {1, 0, 1, 0, 1, 0, 1, 0},
        {0, 1, 0, 1, 0, 1, 0, 1},
        {1, 1, 1, 1, 1, 1, 1, 1},
        {0, 0, 0, 0, 0, 0, 0, 0},
    }};
    fediron::Matrix m(8 * copies, 8);
    for (std::size_t c = 0; c < copies; ++c)
        for (std::size_t p = 0; p < 8; ++p)
            for (std::size_t i = 0; i < 8; ++i) m(c * 8 + p, i) = kPatterns[p][i];
    return m;
}

}  // namespace oracle
