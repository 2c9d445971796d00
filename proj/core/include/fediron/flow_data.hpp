#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "fediron/dataset.hpp"
#include "fediron/matrix.hpp"

namespace fediron {

/// Raised for malformed input files and schema violations.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ColumnKind { numeric, categorical, label, drop };

struct Column {
    std::string name;
    ColumnKind kind;

    bool operator==(const Column&) const = default;
};

/// Ordered CSV column layout.
///
/// Feature columns are the numeric and categorical ones, in file order. The
/// partition key column (destination IP) must be of kind drop: it is kept as
/// record metadata but never becomes a feature.
class FeatureSchema {
public:
    explicit FeatureSchema(std::vector<Column> columns, std::string partition_key = "dst_ip");

    const std::vector<Column>& columns() const noexcept { return columns_; }
    const std::string& partition_key() const noexcept { return partition_key_; }
    const std::string& label_column() const { return columns_[label_pos_].name; }

    std::size_t n_features() const noexcept { return feature_pos_.size(); }
    /// Positions in columns() of the feature columns, in feature order.
    const std::vector<std::size_t>& feature_positions() const noexcept { return feature_pos_; }
    ColumnKind feature_kind(std::size_t feature) const { return columns_[feature_pos_[feature]].kind; }
    const std::string& feature_name(std::size_t feature) const { return columns_[feature_pos_[feature]].name; }

    bool operator==(const FeatureSchema&) const = default;

private:
    std::vector<Column> columns_;
    std::string partition_key_;
    std::size_t label_pos_ = 0;
    std::vector<std::size_t> feature_pos_;
};

/// Column layout of the TON-IoT network flow CSVs (45 columns, 38 features).
FeatureSchema ton_iot_schema();

/// Global class-name to index mapping shared by every client.
class LabelIndex {
public:
    explicit LabelIndex(std::vector<std::string> classes);

    const std::vector<std::string>& classes() const noexcept { return classes_; }
    std::size_t size() const noexcept { return classes_.size(); }
    std::optional<int> find(const std::string& name) const;
    /// Throws DataError for an unknown class.
    int at(const std::string& name) const;
    const std::string& name(int index) const { return classes_.at(static_cast<std::size_t>(index)); }

    bool operator==(const LabelIndex& other) const { return classes_ == other.classes_; }

private:
    std::vector<std::string> classes_;
    std::map<std::string, int> index_;
};

/// The ten TON-IoT classes, ordered as in the per-client distribution table
/// (scanning, ddos, xss, password, dos, normal, backdoor, injection,
/// ransomware, mitm).
LabelIndex ton_iot_labels();

/// Missing cells are std::monostate.
using FeatureValue = std::variant<std::monostate, double, std::string>;

struct FlowRecord {
    std::string dst_ip;
    std::vector<FeatureValue> features;
    std::string label;

    bool operator==(const FlowRecord&) const = default;
};

struct RawDataset {
    FeatureSchema schema;
    std::vector<FlowRecord> records;
};

/// Parses a flow CSV. Every schema column must appear in the header (any
/// order) and the header must not contain unknown columns.
RawDataset load_flows(const std::filesystem::path& path, const FeatureSchema& schema);
RawDataset parse_flows(std::istream& in, const FeatureSchema& schema);

/// Drops rows with missing or non-finite values, then removes duplicate
/// feature+label views keeping the first occurrence.
RawDataset clean(RawDataset raw);

struct ClientPartition {
    int client_id = 0;
    std::string dst_ip;
    std::vector<FlowRecord> records;
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

struct PartitionResult {
    std::vector<ClientPartition> clients;
    RawDataset residual;
};

/// Top-k destination IPs by sample count become clients 1..k (ties broken by
/// lexicographic IP); everything else is the residual.
PartitionResult partition_by_dst_ip(const RawDataset& data, std::size_t k);

/// Wraps a record pool (e.g. the residual) as a pseudo-client.
ClientPartition make_pool(int client_id, std::string name, std::vector<FlowRecord> records);

/// Per-class train count: round-half-up(train_fraction * n), all of the class
/// when n < 2.
std::size_t stratified_train_count(std::size_t n, double train_fraction);

ClientPartition stratified_split(ClientPartition partition, double train_fraction, std::uint64_t seed);

/// Ordinal encoding plus standardization, fitted on one client's train split.
struct FeatureCodec {
    std::vector<ColumnKind> kinds;
    /// Per feature; empty for numeric columns.
    std::vector<std::map<std::string, int>> categories;
    Vector mean;
    Vector stddev;

    /// Ordinal code (or raw value) before standardization. Unseen categories map to -1.
    double encode(std::size_t feature, const FeatureValue& value) const;
    double transform(std::size_t feature, const FeatureValue& value) const;
    Matrix transform(const std::vector<FlowRecord>& records, const std::vector<std::size_t>& rows) const;
};

FeatureCodec fit_codec(const ClientPartition& partition, const FeatureSchema& schema);

struct PreparedDataset {
    int client_id = 0;
    std::string dst_ip;
    LabeledData train;
    LabeledData test;
};

struct PreparedClient {
    PreparedDataset data;
    FeatureCodec codec;
};

PreparedClient fit_apply_codec(const ClientPartition& partition, const FeatureSchema& schema,
                               const LabelIndex& labels);

/// Per-class record counts in LabelIndex order.
std::vector<std::size_t> class_counts(const std::vector<FlowRecord>& records, const LabelIndex& labels);

}  // namespace fediron
