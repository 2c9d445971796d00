#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace fediron {

/// counts(t, p): samples of true class t predicted as p.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t n_classes) : n_(n_classes), counts_(n_classes * n_classes, 0) {}

    std::size_t n_classes() const noexcept { return n_; }
    std::uint64_t operator()(std::size_t truth, std::size_t pred) const { return counts_[truth * n_ + pred]; }
    std::uint64_t& operator()(std::size_t truth, std::size_t pred) { return counts_[truth * n_ + pred]; }

    std::uint64_t total() const;
    std::uint64_t true_positives(std::size_t c) const { return (*this)(c, c); }
    std::uint64_t false_positives(std::size_t c) const;
    std::uint64_t false_negatives(std::size_t c) const;
    std::uint64_t true_negatives(std::size_t c) const;
    /// Row sum: number of samples whose true class is c.
    std::uint64_t support(std::size_t c) const;

    bool operator==(const ConfusionMatrix&) const = default;

private:
    std::size_t n_;
    std::vector<std::uint64_t> counts_;
};

/// Throws std::invalid_argument on length mismatch or out-of-range ids.
ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> labels, std::size_t n_classes);

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::uint64_t support = 0;
};

/// Undefined ratios (0/0) are reported as 0.
std::vector<ClassMetrics> per_class(const ConfusionMatrix& cm);

struct WeightedMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Support-weighted means. Throws when the total support is zero.
WeightedMetrics weighted(std::span<const ClassMetrics> classes);

/// trace / total. Throws on an empty matrix.
double accuracy(const ConfusionMatrix& cm);

struct MetricsReport {
    ConfusionMatrix confusion{0};
    std::vector<ClassMetrics> classes;
    WeightedMetrics weighted;
    double accuracy = 0.0;
};

MetricsReport evaluate(const ConfusionMatrix& cm);
MetricsReport evaluate(std::span<const int> preds, std::span<const int> labels, std::size_t n_classes);

}  // namespace fediron
