#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fediron/fl.hpp"

namespace fediron {

inline constexpr const char* kVersion = "0.1.0";

/// Everything a command needs. Defaults reproduce the reference setup:
/// 10 clients, 50 rounds of 2 local epochs.
struct ExperimentConfig {
    // Data source: a flow CSV for `partition`, or a synthetic profile for `synth`.
    std::string csv;
    std::string profile = "ton10";
    double scale = 0.001;
    std::size_t clients = 10;
    double train_fraction = 0.8;

    /// Prepared dataset directory read by the training commands.
    std::string data = "data";
    std::string out = "out";

    ModelPreset model = ModelPreset::dnn;
    AggregationConfig aggregation = FedAvg{};
    std::size_t rounds = 50;
    std::size_t local_epochs = 2;
    std::size_t central_epochs = 20;
    std::size_t pretrain_epochs = 40;
    std::size_t batch_size = 128;

    SgdConfig sgd;
    AdamConfig adam;
    std::size_t cd_epochs = 10;
    CdConfig cd;

    /// "random" or "pretrained"; the latter reads `pretrained` (a checkpoint path).
    std::string init = "random";
    std::string pretrained;
    /// Checkpoint read by `evaluate`.
    std::string checkpoint;
    /// "test" or "train".
    std::string split = "test";
    /// Run directories read by `report`.
    std::vector<std::string> runs;
    /// `synth` also writes the raw records to <out>/flows.csv.
    bool emit_csv = false;

    std::uint64_t seed = 0;
    std::size_t workers = 1;
    bool timestamps = true;

    bool operator==(const ExperimentConfig&) const = default;
};

nlohmann::json to_json(const ExperimentConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path);
void validate(const ExperimentConfig& config);

/// Supervised optimizer of a preset, with the configured learning rates.
OptimizerConfig optimizer_for(const ExperimentConfig& config);

// Seed streams derived from the master seed.
std::uint64_t split_seed(std::uint64_t seed, int client_id);
std::uint64_t synth_seed(std::uint64_t seed);
std::uint64_t central_seed(std::uint64_t seed);
std::uint64_t pretrain_seed(std::uint64_t seed);
std::uint64_t fl_seed(std::uint64_t seed);
std::uint64_t init_seed(std::uint64_t seed);

/// Writes manifest.json, client_NN.flds and residual.flds under config.out.
nlohmann::json cmd_partition(const ExperimentConfig& config);
/// Same outputs as cmd_partition, from a synthetic profile.
nlohmann::json cmd_synth(const ExperimentConfig& config);
/// model.flids + report.json; trains on all client train splits.
nlohmann::json cmd_train_central(const ExperimentConfig& config);
/// model.flids + report.json; trains on the residual.
nlohmann::json cmd_pretrain(const ExperimentConfig& config);
/// model.flids + report.json + history.json.
nlohmann::json cmd_train_fl(const ExperimentConfig& config);
/// evaluation.json for `checkpoint` on the pooled client split.
nlohmann::json cmd_evaluate(const ExperimentConfig& config);
/// rounds.csv, summary.csv and summary.json from finished run directories.
nlohmann::json cmd_report(const ExperimentConfig& config);

}  // namespace fediron
