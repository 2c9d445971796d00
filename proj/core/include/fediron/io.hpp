#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fediron/fl.hpp"
#include "fediron/flow_data.hpp"
#include "fediron/metrics.hpp"
#include "fediron/nn.hpp"

namespace fediron {

/// Raised for unreadable or inconsistent files.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Checkpoints
//
//   bytes 0..5   "FLIDS1"
//   bytes 6..13  header length H, uint64 little-endian
//   next H bytes UTF-8 JSON header: layers (in, out, activation), classes,
//                metadata, payload_bytes
//   payload      per layer: weights (out x in, row-major) then biases, all
//                IEEE-754 binary64 little-endian
// ---------------------------------------------------------------------------

inline constexpr std::string_view kCheckpointMagic = "FLIDS1";

struct Checkpoint {
    ModelParams model;
    std::vector<std::string> classes;
    nlohmann::json metadata = nlohmann::json::object();

    bool operator==(const Checkpoint&) const = default;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Prepared client datasets
//
//   bytes 0..7   "FLIDSDS1"
//   bytes 8..15  header length H, uint64 little-endian
//   next H bytes UTF-8 JSON header: client_id, dst_ip, n_features, classes,
//                train_rows, test_rows, codec
//   payload      train features (train_rows x n_features binary64 LE),
//                train labels (int32 LE), test features, test labels
// ---------------------------------------------------------------------------

inline constexpr std::string_view kDatasetMagic = "FLIDSDS1";

struct PreparedFile {
    PreparedDataset data;
    std::vector<std::string> classes;
    nlohmann::json codec = nlohmann::json::object();
};

nlohmann::json codec_to_json(const FeatureCodec& codec, const FeatureSchema& schema);

std::string encode_prepared(const PreparedFile& file);
PreparedFile decode_prepared(std::string_view bytes);
void save_prepared(const std::filesystem::path& path, const PreparedFile& file);
PreparedFile load_prepared(const std::filesystem::path& path);

/// A prepared directory: manifest.json plus one file per client and an
/// optional residual file.
struct PreparedCorpus {
    nlohmann::json manifest;
    LabelIndex labels{std::vector<std::string>{}};
    std::vector<PreparedDataset> clients;
    std::optional<PreparedDataset> residual;
};

PreparedCorpus load_corpus(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// JSON reports
// ---------------------------------------------------------------------------

nlohmann::json to_json(const MetricsReport& report, const LabelIndex& labels);
nlohmann::json class_counts_json(const std::vector<std::size_t>& counts, const LabelIndex& labels);
nlohmann::json aggregation_json(const AggregationConfig& config);
AggregationConfig aggregation_from_json(const nlohmann::json& j);

/// Round history; wall times are omitted when `timestamps` is false.
nlohmann::json history_json(const std::vector<RoundReport>& history, const LabelIndex& labels, bool timestamps);

/// Byte-stable file helpers.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace fediron
