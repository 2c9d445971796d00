#include "fediron/fl.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <set>
#include <stdexcept>
#include <thread>

#include "fediron/rng.hpp"

namespace fediron {
namespace {

std::vector<const ClientUpdate*> sorted_updates(std::span<const ClientUpdate> updates) {
    if (updates.empty()) throw std::invalid_argument("aggregate: no client updates");
    std::vector<const ClientUpdate*> order;
    order.reserve(updates.size());
    for (const auto& u : updates) {
        if (u.n_samples == 0)
            throw std::invalid_argument("aggregate: client " + std::to_string(u.client_id) + " reported zero samples");
        check_same_shape(updates.front().params, u.params);
        order.push_back(&u);
    }
    std::stable_sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->client_id < b->client_id; });
    for (std::size_t i = 1; i < order.size(); ++i) {
        if (order[i]->client_id == order[i - 1]->client_id)
            throw std::invalid_argument("aggregate: duplicate client id " + std::to_string(order[i]->client_id));
    }
    return order;
}

std::vector<double> sample_weights(const std::vector<const ClientUpdate*>& order) {
    double total = 0.0;
    for (auto* u : order) total += static_cast<double>(u->n_samples);
    std::vector<double> w;
    w.reserve(order.size());
    for (auto* u : order) w.push_back(static_cast<double>(u->n_samples) / total);
    return w;
}

double sign(double x) { return static_cast<double>((x > 0.0) - (x < 0.0)); }

}  // namespace

std::string aggregation_name(const AggregationConfig& config) {
    struct {
        std::string operator()(const FedAvg&) const { return "fedavg"; }
        std::string operator()(const FedProx&) const { return "fedprox"; }
        std::string operator()(const FedYogi&) const { return "fedyogi"; }
    } name;
    return std::visit(name, config);
}

void validate(const AggregationConfig& config) {
    if (const auto* p = std::get_if<FedProx>(&config)) {
        if (!(p->mu >= 0.0) || !std::isfinite(p->mu)) throw std::invalid_argument("fedprox: mu must be finite and >= 0");
    } else if (const auto* y = std::get_if<FedYogi>(&config)) {
        for (double v : {y->eta, y->beta1, y->beta2, y->tau})
            if (!std::isfinite(v)) throw std::invalid_argument("fedyogi: hyperparameters must be finite");
        if (!(y->tau > 0.0)) throw std::invalid_argument("fedyogi: tau must be > 0");
    }
}

ModelParams aggregate_fedavg(std::span<const ClientUpdate> updates) {
    const auto order = sorted_updates(updates);
    const auto weights = sample_weights(order);

    ModelParams out = order.front()->params;
    auto acc = tensors(out);
    for (auto& t : acc)
        for (auto& x : t) x *= weights[0];
    for (std::size_t c = 1; c < order.size(); ++c) {
        const auto src = tensors(order[c]->params);
        for (std::size_t t = 0; t < acc.size(); ++t)
            for (std::size_t i = 0; i < acc[t].size(); ++i) acc[t][i] += weights[c] * src[t][i];
    }
    return out;
}

ServerState make_server_state(ModelParams global, const AggregationConfig& config) {
    validate(config);
    ServerState s;
    if (const auto* y = std::get_if<FedYogi>(&config)) {
        YogiMoments moments{zeros_like(global), zeros_like(global)};
        for (auto& t : tensors(moments.v)) std::fill(t.begin(), t.end(), y->tau * y->tau);
        s.yogi = std::move(moments);
    }
    s.global = std::move(global);
    return s;
}

ServerState aggregate_fedyogi(ServerState state, std::span<const ClientUpdate> updates, const FedYogi& config) {
    if (!state.yogi) throw std::invalid_argument("fedyogi: server state has no moment accumulators");
    const auto order = sorted_updates(updates);
    check_same_shape(state.global, order.front()->params);
    const auto weights = sample_weights(order);

    auto x = tensors(state.global);
    auto m = tensors(state.yogi->m);
    auto v = tensors(state.yogi->v);
    std::vector<std::vector<std::span<const double>>> client(order.size());
    for (std::size_t c = 0; c < order.size(); ++c) client[c] = tensors(order[c]->params);

    for (std::size_t t = 0; t < x.size(); ++t) {
        for (std::size_t i = 0; i < x[t].size(); ++i) {
            double delta = 0.0;
            for (std::size_t c = 0; c < order.size(); ++c) delta += weights[c] * (client[c][t][i] - x[t][i]);
            const double d2 = delta * delta;
            m[t][i] = config.beta1 * m[t][i] + (1.0 - config.beta1) * delta;
            v[t][i] = v[t][i] - (1.0 - config.beta2) * d2 * sign(v[t][i] - d2);
            x[t][i] += config.eta * m[t][i] / (std::sqrt(v[t][i]) + config.tau);
        }
    }
    return state;
}

ServerState aggregate(ServerState state, std::span<const ClientUpdate> updates, const AggregationConfig& config) {
    if (const auto* y = std::get_if<FedYogi>(&config)) {
        state = aggregate_fedyogi(std::move(state), updates, *y);
    } else {
        state.global = aggregate_fedavg(updates);
    }
    ++state.round;
    return state;
}

TrainConfig local_objective_prox(TrainConfig base, double mu, std::shared_ptr<const ModelParams> anchor) {
    if (!(mu >= 0.0)) throw std::invalid_argument("fedprox: mu must be >= 0");
    if (!anchor) throw std::invalid_argument("fedprox: missing anchor model");
    base.prox = ProxTerm{mu, std::move(anchor)};
    return base;
}

std::uint64_t client_round_seed(std::uint64_t master_seed, int client_id, std::size_t round) {
    return derive_seed({master_seed, static_cast<std::uint64_t>(static_cast<std::int64_t>(client_id)), round});
}

MetricsReport evaluate_model(const ModelParams& model, const LabeledData& data) {
    if (data.features.cols() != model.input_dim())
        throw std::invalid_argument("evaluate: data has " + std::to_string(data.features.cols()) +
                                    " features, model expects " + std::to_string(model.input_dim()));
    const auto preds = predict(model, data.features);
    return evaluate(preds, data.labels, model.output_dim());
}

FlResult run_rounds(std::span<const FlClient> clients, ModelParams initial, const FlConfig& config) {
    if (clients.empty()) throw std::invalid_argument("run_rounds: no clients");
    validate(config.aggregation);
    validate(config.local);
    validate_specs(initial.specs);
    std::set<int> ids;
    for (const auto& c : clients) {
        if (c.train.empty())
            throw std::invalid_argument("run_rounds: client " + std::to_string(c.client_id) + " has an empty training set");
        if (c.train.features.cols() != initial.input_dim())
            throw std::invalid_argument("run_rounds: client " + std::to_string(c.client_id) + " has " +
                                        std::to_string(c.train.features.cols()) + " features, model expects " +
                                        std::to_string(initial.input_dim()));
        if (!ids.insert(c.client_id).second)
            throw std::invalid_argument("run_rounds: duplicate client id " + std::to_string(c.client_id));
    }

    LabeledData pooled_test;
    if (config.eval_each_round) {
        std::vector<LabeledData> tests;
        for (const auto& c : clients) tests.push_back(c.test);
        pooled_test = concat(tests);
    }

    ServerState state = make_server_state(std::move(initial), config.aggregation);
    FlResult result;
    const std::size_t workers = std::clamp<std::size_t>(config.workers, 1, clients.size());

    for (std::size_t round = 1; round <= config.rounds; ++round) {
        const auto t0 = std::chrono::steady_clock::now();
        auto anchor = std::make_shared<const ModelParams>(state.global);
        std::vector<ClientUpdate> updates(clients.size());
        std::vector<double> losses(clients.size(), 0.0);

        auto train_client = [&](std::size_t i) {
            const auto& c = clients[i];
            TrainConfig local = config.local;
            local.seed = client_round_seed(config.master_seed, c.client_id, round);
            if (const auto* p = std::get_if<FedProx>(&config.aggregation)) local = local_objective_prox(local, p->mu, anchor);
            auto trained = train_local(*anchor, c.train, local);
            losses[i] = trained.epoch_losses.empty() ? 0.0 : trained.epoch_losses.back();
            updates[i] = {c.client_id, std::move(trained.model), c.train.size()};
        };

        if (workers == 1) {
            for (std::size_t i = 0; i < clients.size(); ++i) train_client(i);
        } else {
            std::atomic<std::size_t> next{0};
            std::vector<std::exception_ptr> errors(workers);
            std::vector<std::thread> pool;
            for (std::size_t w = 0; w < workers; ++w) {
                pool.emplace_back([&, w] {
                    try {
                        for (std::size_t i = next++; i < clients.size(); i = next++) train_client(i);
                    } catch (...) {
                        errors[w] = std::current_exception();
                    }
                });
            }
            for (auto& t : pool) t.join();
            for (auto& e : errors)
                if (e) std::rethrow_exception(e);
        }

        state = aggregate(std::move(state), updates, config.aggregation);

        RoundReport report;
        report.round = round;
        for (std::size_t i = 0; i < clients.size(); ++i)
            report.clients.push_back({clients[i].client_id, clients[i].train.size(), losses[i]});
        if (config.eval_each_round && !pooled_test.empty()) report.metrics = evaluate_model(state.global, pooled_test);
        report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.history.push_back(std::move(report));
    }
    result.global = std::move(state.global);
    return result;
}

std::string to_string(ModelPreset preset) { return preset == ModelPreset::dnn ? "dnn" : "dbn"; }

ModelPreset preset_from_string(const std::string& name) {
    if (name == "dnn") return ModelPreset::dnn;
    if (name == "dbn") return ModelPreset::dbn;
    throw std::invalid_argument("unknown model preset '" + name + "' (expected dnn or dbn)");
}

std::vector<LayerSpec> preset_specs(ModelPreset preset, std::size_t n_features, std::size_t n_classes) {
    return preset == ModelPreset::dnn ? dnn_preset_specs(n_features, n_classes) : dbn_preset_specs(n_features, n_classes);
}

OptimizerConfig default_optimizer(ModelPreset preset) {
    if (preset == ModelPreset::dnn) return SgdConfig{};
    return AdamConfig{};
}

ModelParams init_random(ModelPreset preset, std::size_t n_features, std::size_t n_classes, std::uint64_t seed) {
    return init_xavier(preset_specs(preset, n_features, n_classes), seed);
}

CentralTrainingResult train_preset(ModelPreset preset, const LabeledData& data, std::size_t n_classes,
                                   const CentralTrainingConfig& config) {
    if (data.empty()) throw std::invalid_argument("train_preset: empty dataset");
    const std::size_t nf = data.features.cols();
    const std::uint64_t init_seed = derive_seed({config.supervised.seed, 1});
    ModelParams model;
    if (preset == ModelPreset::dnn) {
        model = init_random(preset, nf, n_classes, init_seed);
    } else {
        const auto stack = pretrain_stack(dbn_preset_dims(nf), data.features, config.cd);
        model = to_classifier(stack.stack, n_classes, init_seed);
    }
    auto trained = train_local(std::move(model), data, config.supervised);
    return {std::move(trained.model), std::move(trained.epoch_losses)};
}

ModelParams pretrain_global(const LabeledData& residual, ModelPreset preset, std::size_t n_classes,
                            const CentralTrainingConfig& config) {
    if (residual.empty()) throw std::invalid_argument("pretrain_global: the residual dataset is empty");
    return train_preset(preset, residual, n_classes, config).model;
}

}  // namespace fediron
