#include "fediron/metrics.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

namespace fediron {
namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

std::uint64_t ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0}); }

std::uint64_t ConfusionMatrix::false_positives(std::size_t c) const {
    std::uint64_t col = 0;
    for (std::size_t t = 0; t < n_; ++t) col += (*this)(t, c);
    return col - true_positives(c);
}

std::uint64_t ConfusionMatrix::false_negatives(std::size_t c) const { return support(c) - true_positives(c); }

std::uint64_t ConfusionMatrix::true_negatives(std::size_t c) const {
    return total() - true_positives(c) - false_positives(c) - false_negatives(c);
}

std::uint64_t ConfusionMatrix::support(std::size_t c) const {
    std::uint64_t row = 0;
    for (std::size_t p = 0; p < n_; ++p) row += (*this)(c, p);
    return row;
}

ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> labels, std::size_t n_classes) {
    if (preds.size() != labels.size())
        throw std::invalid_argument("confusion: " + std::to_string(preds.size()) + " predictions for " +
                                    std::to_string(labels.size()) + " labels");
    ConfusionMatrix cm(n_classes);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const int t = labels[i], p = preds[i];
        if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= n_classes || static_cast<std::size_t>(p) >= n_classes)
            throw std::invalid_argument("confusion: class id out of range at index " + std::to_string(i));
        ++cm(static_cast<std::size_t>(t), static_cast<std::size_t>(p));
    }
    return cm;
}

std::vector<ClassMetrics> per_class(const ConfusionMatrix& cm) {
    std::vector<ClassMetrics> out(cm.n_classes());
    for (std::size_t c = 0; c < cm.n_classes(); ++c) {
        const auto tp = cm.true_positives(c);
        auto& m = out[c];
        m.precision = ratio(tp, tp + cm.false_positives(c));
        m.recall = ratio(tp, tp + cm.false_negatives(c));
        const double pr = m.precision + m.recall;
        m.f1 = pr == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / pr;
        m.support = cm.support(c);
    }
    return out;
}

WeightedMetrics weighted(std::span<const ClassMetrics> classes) {
    std::uint64_t total = 0;
    WeightedMetrics w;
    for (const auto& c : classes) {
        const double s = static_cast<double>(c.support);
        w.precision += s * c.precision;
        w.recall += s * c.recall;
        w.f1 += s * c.f1;
        total += c.support;
    }
    if (total == 0) throw std::invalid_argument("weighted: total support is zero");
    const double t = static_cast<double>(total);
    w.precision /= t;
    w.recall /= t;
    w.f1 /= t;
    return w;
}

double accuracy(const ConfusionMatrix& cm) {
    const auto total = cm.total();
    if (total == 0) throw std::invalid_argument("accuracy: empty confusion matrix");
    std::uint64_t trace = 0;
    for (std::size_t c = 0; c < cm.n_classes(); ++c) trace += cm(c, c);
    return ratio(trace, total);
}

MetricsReport evaluate(const ConfusionMatrix& cm) {
    MetricsReport r;
    r.confusion = cm;
    r.classes = per_class(cm);
    r.weighted = weighted(r.classes);
    r.accuracy = accuracy(cm);
    return r;
}

MetricsReport evaluate(std::span<const int> preds, std::span<const int> labels, std::size_t n_classes) {
    return evaluate(confusion(preds, labels, n_classes));
}

}  // namespace fediron
