#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fediron/dataset.hpp"
#include "fediron/dbn.hpp"
#include "fediron/metrics.hpp"
#include "fediron/nn.hpp"

namespace fediron {

struct FedAvg {
    bool operator==(const FedAvg&) const = default;
};

/// Clients minimize F_i(w) + (mu / 2) ||w - w_global||^2; the server averages.
struct FedProx {
    double mu = 0.01;

    bool operator==(const FedProx&) const = default;
};

/// Server-side Yogi step on the weighted mean client delta.
struct FedYogi {
    double eta = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double tau = 1e-3;

    bool operator==(const FedYogi&) const = default;
};

using AggregationConfig = std::variant<FedAvg, FedProx, FedYogi>;

std::string aggregation_name(const AggregationConfig& config);
void validate(const AggregationConfig& config);

struct ClientUpdate {
    int client_id = 0;
    ModelParams params;
    std::size_t n_samples = 0;
};

/// Sample-weighted elementwise mean, summed in client_id order so the result
/// does not depend on the order of `updates`.
ModelParams aggregate_fedavg(std::span<const ClientUpdate> updates);

struct YogiMoments {
    ModelParams m;
    ModelParams v;
};

struct ServerState {
    ModelParams global;
    std::optional<YogiMoments> yogi;  // present iff aggregating with FedYogi
    std::size_t round = 0;
};

/// Yogi moments start at m = 0, v = tau^2.
ServerState make_server_state(ModelParams global, const AggregationConfig& config);

ServerState aggregate_fedyogi(ServerState state, std::span<const ClientUpdate> updates, const FedYogi& config);

/// Dispatches on the aggregation kind and advances the round counter.
ServerState aggregate(ServerState state, std::span<const ClientUpdate> updates, const AggregationConfig& config);

/// Local training config for a FedProx client anchored at the current global model.
TrainConfig local_objective_prox(TrainConfig base, double mu, std::shared_ptr<const ModelParams> anchor);

struct FlClient {
    int client_id = 0;
    LabeledData train;
    LabeledData test;
};

struct ClientRoundStat {
    int client_id = 0;
    std::size_t n_samples = 0;
    /// Mean training loss of the client's final local epoch.
    double loss = 0.0;
};

struct RoundReport {
    std::size_t round = 0;  // 1-based
    std::vector<ClientRoundStat> clients;
    std::optional<MetricsReport> metrics;
    double wall_time_s = 0.0;
};

struct FlConfig {
    AggregationConfig aggregation = FedAvg{};
    std::size_t rounds = 50;
    /// Template for every client's local training; `seed` is replaced per client and round.
    TrainConfig local{SgdConfig{}, 128, 2, 0, std::nullopt};
    std::uint64_t master_seed = 0;
    bool eval_each_round = true;
    /// Clients trained concurrently per round. Output does not depend on it.
    std::size_t workers = 1;
};

struct FlResult {
    ModelParams global;
    std::vector<RoundReport> history;
};

std::uint64_t client_round_seed(std::uint64_t master_seed, int client_id, std::size_t round);

/// Federated training with full participation. Evaluation uses the pooled
/// test splits of all clients.
FlResult run_rounds(std::span<const FlClient> clients, ModelParams initial, const FlConfig& config);

MetricsReport evaluate_model(const ModelParams& model, const LabeledData& data);

enum class ModelPreset { dnn, dbn };

std::string to_string(ModelPreset preset);
ModelPreset preset_from_string(const std::string& name);
std::vector<LayerSpec> preset_specs(ModelPreset preset, std::size_t n_features = 38, std::size_t n_classes = 10);
/// DNN: SGD (lr 0.01, momentum 0.9). DBN fine-tuning: Adam (lr 0.001).
OptimizerConfig default_optimizer(ModelPreset preset);
ModelParams init_random(ModelPreset preset, std::size_t n_features, std::size_t n_classes, std::uint64_t seed);

struct CentralTrainingConfig {
    /// Supervised phase. For the DBN this is the fine-tuning after CD.
    TrainConfig supervised;
    /// Unsupervised CD phase; DBN only.
    PretrainConfig cd;
};

struct CentralTrainingResult {
    ModelParams model;
    std::vector<double> epoch_losses;
};

/// Trains a preset on one pooled dataset: DNN supervised only, DBN greedy CD
/// followed by supervised fine-tuning.
CentralTrainingResult train_preset(ModelPreset preset, const LabeledData& data, std::size_t n_classes,
                                   const CentralTrainingConfig& config);

/// Server-side initialization from the residual (non-client) data.
ModelParams pretrain_global(const LabeledData& residual, ModelPreset preset, std::size_t n_classes,
                            const CentralTrainingConfig& config);

}  // namespace fediron
