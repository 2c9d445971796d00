#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fediron/flow_data.hpp"
#include "fediron/matrix.hpp"

namespace fediron {

using CountMatrix = std::vector<std::vector<std::size_t>>;

/// Class-conditional generator description plus per-client class counts.
///
/// Numeric features are Gaussian around a per-class mean (shared diagonal
/// variance) shifted by a per-client offset; categorical features are drawn
/// from per-class category weights.
struct SkewProfile {
    FeatureSchema schema = ton_iot_schema();
    LabelIndex labels = ton_iot_labels();
    CountMatrix counts;                  // clients x classes
    std::vector<std::size_t> residual;   // per class; server-side pool
    Matrix class_means;                  // classes x features (numeric columns used)
    double variance = 1.0;
    Matrix client_offsets;               // clients x features (numeric columns used)
    /// categories[f] lists the category names of categorical feature f (empty for numeric).
    std::vector<std::vector<std::string>> categories;
    /// weights[c][f][k]: probability of category k of feature f under class c.
    std::vector<std::vector<std::vector<double>>> category_weights;

    std::size_t n_clients() const noexcept { return counts.size(); }
    std::size_t n_classes() const noexcept { return labels.size(); }
};

/// Throws std::invalid_argument if dimensions disagree or a client row is empty.
void validate(const SkewProfile& profile);

/// Per-client class counts of the ten-client TON-IoT split, in LabelIndex order.
const CountMatrix& ton10_counts();
/// Original dataset class totals minus the ten clients' column sums.
const std::vector<std::size_t>& ton10_residual_counts();

/// Counts scaled by `scale` with round-half-up. scale must be > 0.
SkewProfile profile_ton10(double scale);

/// Exactly counts[i][c] records of class c for client i (dst_ip "10.0.0.<i+1>"),
/// deterministic given seed; each client draws from its own derived stream.
std::vector<ClientPartition> generate(const SkewProfile& profile, std::uint64_t seed);

/// The residual pool spread over several small destination IPs ("10.0.1.<j>"),
/// each holding fewer records than the smallest client.
RawDataset generate_residual(const SkewProfile& profile, std::uint64_t seed);

/// Writes records as a CSV with the profile's schema header. Dropped columns
/// receive placeholder values.
void write_flows_csv(const std::filesystem::path& path, const FeatureSchema& schema,
                     const std::vector<FlowRecord>& records);

}  // namespace fediron
