#include "fediron/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include "fediron/io.hpp"
#include "fediron/rng.hpp"
#include "fediron/synthgen.hpp"

namespace fediron {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::uint64_t kSplitStream = 0x73706c6974ULL;
constexpr std::uint64_t kSynthStream = 0x73796e7468ULL;
constexpr std::uint64_t kCentralStream = 0x63656e7472ULL;
constexpr std::uint64_t kPretrainStream = 0x7072657472ULL;
constexpr std::uint64_t kFlStream = 0x666cULL;
constexpr std::uint64_t kInitStream = 0x696e6974ULL;
constexpr std::uint64_t kCdStream = 0x6364ULL;

// Removes the files a command wrote unless the command reaches commit().
class OutputGuard {
public:
    explicit OutputGuard(fs::path dir) : dir_(std::move(dir)) {
        created_dir_ = !fs::exists(dir_);
        fs::create_directories(dir_);
    }
    OutputGuard(const OutputGuard&) = delete;
    OutputGuard& operator=(const OutputGuard&) = delete;
    ~OutputGuard() {
        if (committed_) return;
        std::error_code ec;
        for (const auto& f : written_)
            if (fs::is_regular_file(f, ec)) fs::remove(f, ec);
        if (created_dir_ && fs::is_empty(dir_, ec)) fs::remove(dir_, ec);
    }

    fs::path path(const std::string& name) {
        if (fs::is_directory(dir_ / name))
            throw std::runtime_error("cannot write '" + (dir_ / name).string() + "': it is a directory");
        written_.push_back(dir_ / name);
        return written_.back();
    }
    void commit() { committed_ = true; }

private:
    fs::path dir_;
    std::vector<fs::path> written_;
    bool created_dir_ = false;
    bool committed_ = false;
};

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json run_metadata(const ExperimentConfig& c, const std::string& command) {
    json m = {{"tool", "fediron"}, {"version", kVersion}, {"command", command}, {"model", to_string(c.model)},
              {"seed", c.seed}};
    if (c.timestamps) m["created_at"] = utc_now();
    return m;
}

json report_config(const ExperimentConfig& c) {
    json j = to_json(c);
    j.erase("out");
    j.erase("runs");
    return j;
}

template <class T>
void read_key(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw std::invalid_argument(std::string("config: '") + key + "' has the wrong type");
    }
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
    if (!j.is_object()) throw std::invalid_argument("config: " + where + " must be an object");
    for (const auto& [k, _] : j.items()) {
        if (std::none_of(keys.begin(), keys.end(), [&](const char* x) { return k == x; }))
            throw std::invalid_argument("config: unknown key '" + k + "' in " + where);
    }
}

// ---- prepared directories ---------------------------------------------------

json write_prepared(OutputGuard& guard, const FeatureSchema& schema, const LabelIndex& labels,
                    std::vector<ClientPartition> clients, std::vector<FlowRecord> residual,
                    const ExperimentConfig& cfg, json source) {
    json manifest = {
        {"format", "fediron-manifest/1"},
        {"source", std::move(source)},
        {"seed", cfg.seed},
        {"train_fraction", cfg.train_fraction},
        {"n_features", schema.n_features()},
        {"classes", labels.classes()},
    };
    json entries = json::array();
    for (auto& part : clients) {
        const auto counts = class_counts(part.records, labels);
        const int id = part.client_id;
        auto split = stratified_split(std::move(part), cfg.train_fraction, split_seed(cfg.seed, id));
        auto prepared = fit_apply_codec(split, schema, labels);
        char name[32];
        std::snprintf(name, sizeof(name), "client_%02d.flds", prepared.data.client_id);
        save_prepared(guard.path(name), {prepared.data, labels.classes(), codec_to_json(prepared.codec, schema)});
        entries.push_back({
            {"client_id", prepared.data.client_id},
            {"dst_ip", prepared.data.dst_ip},
            {"file", name},
            {"n_samples", split.records.size()},
            {"n_train", prepared.data.train.size()},
            {"n_test", prepared.data.test.size()},
            {"class_counts", class_counts_json(counts, labels)},
        });
    }
    manifest["clients"] = std::move(entries);

    std::set<std::string> ips;
    for (const auto& r : residual) ips.insert(r.dst_ip);
    json res = {
        {"file", nullptr},
        {"n_samples", residual.size()},
        {"n_ips", ips.size()},
        {"class_counts", class_counts_json(class_counts(residual, labels), labels)},
    };
    if (!residual.empty()) {
        auto split = stratified_split(make_pool(0, "residual", std::move(residual)), cfg.train_fraction,
                                      split_seed(cfg.seed, 0));
        auto prepared = fit_apply_codec(split, schema, labels);
        save_prepared(guard.path("residual.flds"),
                      {prepared.data, labels.classes(), codec_to_json(prepared.codec, schema)});
        res["file"] = "residual.flds";
        res["n_train"] = prepared.data.train.size();
        res["n_test"] = prepared.data.test.size();
    }
    manifest["residual"] = std::move(res);
    return manifest;
}

// Per-client totals against the published ten-client split.
json reference_diff(const json& clients, const LabelIndex& labels) {
    json out = json::array();
    const auto& ref = ton10_counts();
    bool all_match = true;
    for (std::size_t i = 0; i < clients.size() && i < ref.size(); ++i) {
        std::int64_t expected = 0, actual = 0;
        json deltas = json::object();
        for (std::size_t c = 0; c < labels.size(); ++c) {
            const auto& name = labels.name(static_cast<int>(c));
            const auto got = clients[i]["class_counts"].value(name, std::int64_t{0});
            const auto want = static_cast<std::int64_t>(ref[i][c]);
            expected += want;
            actual += got;
            if (got != want) deltas[name] = got - want;
        }
        all_match = all_match && deltas.empty();
        out.push_back({{"client_id", clients[i]["client_id"]},
                       {"expected_total", expected},
                       {"actual_total", actual},
                       {"delta", actual - expected},
                       {"class_deltas", deltas}});
    }
    return {{"matches", all_match}, {"clients", out}};
}

// ---- training helpers -------------------------------------------------------

struct Pooled {
    LabeledData train;
    LabeledData test;
};

Pooled pool(const PreparedCorpus& corpus) {
    std::vector<LabeledData> tr, te;
    for (const auto& c : corpus.clients) {
        tr.push_back(c.train);
        te.push_back(c.test);
    }
    return {concat(tr), concat(te)};
}

std::size_t feature_width(const PreparedCorpus& corpus) {
    const auto& c = corpus.clients.front();
    return c.train.empty() ? c.test.features.cols() : c.train.features.cols();
}

CentralTrainingConfig central_config(const ExperimentConfig& cfg, std::size_t epochs, std::uint64_t seed) {
    CentralTrainingConfig cc;
    cc.supervised = TrainConfig{optimizer_for(cfg), cfg.batch_size, epochs, seed, std::nullopt};
    cc.cd = PretrainConfig{cfg.cd_epochs, cfg.batch_size, cfg.cd, derive_seed({seed, kCdStream})};
    return cc;
}

Checkpoint make_checkpoint(ModelParams model, const LabelIndex& labels, json metadata) {
    return {std::move(model), labels.classes(), std::move(metadata)};
}

void check_model_fits(const ModelParams& model, std::size_t n_features, std::size_t n_classes, const std::string& what) {
    if (model.input_dim() != n_features)
        throw std::invalid_argument(what + " expects " + std::to_string(model.input_dim()) +
                                    " input features, the dataset has " + std::to_string(n_features));
    if (model.output_dim() != n_classes)
        throw std::invalid_argument(what + " has " + std::to_string(model.output_dim()) +
                                    " outputs, the dataset has " + std::to_string(n_classes) + " classes");
}

std::string csv_number(double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
}

}  // namespace

// ---- config -----------------------------------------------------------------

json to_json(const ExperimentConfig& c) {
    return {
        {"csv", c.csv},
        {"profile", c.profile},
        {"scale", c.scale},
        {"clients", c.clients},
        {"train_fraction", c.train_fraction},
        {"data", c.data},
        {"out", c.out},
        {"model", to_string(c.model)},
        {"aggregation", aggregation_json(c.aggregation)},
        {"rounds", c.rounds},
        {"local_epochs", c.local_epochs},
        {"central_epochs", c.central_epochs},
        {"pretrain_epochs", c.pretrain_epochs},
        {"batch_size", c.batch_size},
        {"sgd", {{"lr", c.sgd.lr}, {"momentum", c.sgd.momentum}}},
        {"adam", {{"lr", c.adam.lr}, {"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps}}},
        {"cd", {{"epochs", c.cd_epochs}, {"lr", c.cd.lr}, {"momentum", c.cd.momentum}}},
        {"init", c.init},
        {"pretrained", c.pretrained},
        {"checkpoint", c.checkpoint},
        {"split", c.split},
        {"runs", c.runs},
        {"emit_csv", c.emit_csv},
        {"seed", c.seed},
        {"workers", c.workers},
        {"timestamps", c.timestamps},
    };
}

ExperimentConfig config_from_json(const json& j, ExperimentConfig c) {
    reject_unknown(j,
                   {"csv", "profile", "scale", "clients", "train_fraction", "data", "out", "model", "aggregation",
                    "rounds", "local_epochs", "central_epochs", "pretrain_epochs", "batch_size", "sgd", "adam", "cd",
                    "init", "pretrained", "checkpoint", "split", "runs", "emit_csv", "seed", "workers", "timestamps"},
                   "config");
    read_key(j, "csv", c.csv);
    read_key(j, "profile", c.profile);
    read_key(j, "scale", c.scale);
    read_key(j, "clients", c.clients);
    read_key(j, "train_fraction", c.train_fraction);
    read_key(j, "data", c.data);
    read_key(j, "out", c.out);
    if (j.contains("model")) c.model = preset_from_string(j["model"].get<std::string>());
    if (j.contains("aggregation")) {
        reject_unknown(j["aggregation"], {"kind", "mu", "eta", "beta1", "beta2", "tau"}, "aggregation");
        c.aggregation = aggregation_from_json(j["aggregation"]);
    }
    read_key(j, "rounds", c.rounds);
    read_key(j, "local_epochs", c.local_epochs);
    read_key(j, "central_epochs", c.central_epochs);
    read_key(j, "pretrain_epochs", c.pretrain_epochs);
    read_key(j, "batch_size", c.batch_size);
    if (j.contains("sgd")) {
        reject_unknown(j["sgd"], {"lr", "momentum"}, "sgd");
        read_key(j["sgd"], "lr", c.sgd.lr);
        read_key(j["sgd"], "momentum", c.sgd.momentum);
    }
    if (j.contains("adam")) {
        reject_unknown(j["adam"], {"lr", "beta1", "beta2", "eps"}, "adam");
        read_key(j["adam"], "lr", c.adam.lr);
        read_key(j["adam"], "beta1", c.adam.beta1);
        read_key(j["adam"], "beta2", c.adam.beta2);
        read_key(j["adam"], "eps", c.adam.eps);
    }
    if (j.contains("cd")) {
        reject_unknown(j["cd"], {"epochs", "lr", "momentum"}, "cd");
        read_key(j["cd"], "epochs", c.cd_epochs);
        read_key(j["cd"], "lr", c.cd.lr);
        read_key(j["cd"], "momentum", c.cd.momentum);
    }
    read_key(j, "init", c.init);
    read_key(j, "pretrained", c.pretrained);
    read_key(j, "checkpoint", c.checkpoint);
    read_key(j, "split", c.split);
    read_key(j, "runs", c.runs);
    read_key(j, "emit_csv", c.emit_csv);
    read_key(j, "seed", c.seed);
    read_key(j, "workers", c.workers);
    read_key(j, "timestamps", c.timestamps);
    return c;
}

ExperimentConfig load_config(const fs::path& path) { return config_from_json(read_json(path)); }

void validate(const ExperimentConfig& c) {
    if (!(c.scale > 0.0) || !std::isfinite(c.scale)) throw std::invalid_argument("config: scale must be > 0");
    if (c.clients == 0) throw std::invalid_argument("config: clients must be >= 1");
    if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0))
        throw std::invalid_argument("config: train_fraction must lie in (0, 1)");
    if (c.init != "random" && c.init != "pretrained")
        throw std::invalid_argument("config: init must be 'random' or 'pretrained', got '" + c.init + "'");
    if (c.split != "test" && c.split != "train")
        throw std::invalid_argument("config: split must be 'test' or 'train', got '" + c.split + "'");
    if (c.workers == 0) throw std::invalid_argument("config: workers must be >= 1");
    validate(c.aggregation);
    validate(TrainConfig{optimizer_for(c), c.batch_size, c.local_epochs, 0, std::nullopt});
    validate(TrainConfig{SgdConfig{c.cd.lr, c.cd.momentum}, c.batch_size, c.cd_epochs, 0, std::nullopt});
}

OptimizerConfig optimizer_for(const ExperimentConfig& c) {
    if (std::holds_alternative<SgdConfig>(default_optimizer(c.model))) return c.sgd;
    return c.adam;
}

std::uint64_t split_seed(std::uint64_t seed, int client_id) {
    return derive_seed({seed, kSplitStream, static_cast<std::uint64_t>(static_cast<std::int64_t>(client_id))});
}
std::uint64_t synth_seed(std::uint64_t seed) { return derive_seed({seed, kSynthStream}); }
std::uint64_t central_seed(std::uint64_t seed) { return derive_seed({seed, kCentralStream}); }
std::uint64_t pretrain_seed(std::uint64_t seed) { return derive_seed({seed, kPretrainStream}); }
std::uint64_t fl_seed(std::uint64_t seed) { return derive_seed({seed, kFlStream}); }
std::uint64_t init_seed(std::uint64_t seed) { return derive_seed({seed, kInitStream}); }

// ---- commands ---------------------------------------------------------------

json cmd_partition(const ExperimentConfig& cfg) {
    validate(cfg);
    if (cfg.csv.empty()) throw std::invalid_argument("partition: no input CSV given");
    if (!fs::exists(cfg.csv)) throw std::invalid_argument("partition: input CSV '" + cfg.csv + "' does not exist");
    const auto schema = ton_iot_schema();
    const auto labels = ton_iot_labels();
    auto raw = load_flows(cfg.csv, schema);
    const std::size_t rows_read = raw.records.size();
    auto cleaned = clean(std::move(raw));
    const std::size_t rows_kept = cleaned.records.size();
    for (const auto& r : cleaned.records) labels.at(r.label);
    auto parts = partition_by_dst_ip(cleaned, cfg.clients);

    OutputGuard guard(cfg.out);
    json source = {{"kind", "csv"}, {"path", cfg.csv}, {"rows_read", rows_read}, {"rows_kept", rows_kept}};
    json manifest = write_prepared(guard, schema, labels, std::move(parts.clients), std::move(parts.residual.records),
                                   cfg, std::move(source));
    if (cfg.clients == ton10_counts().size()) manifest["reference_diff"] = reference_diff(manifest["clients"], labels);
    write_json(guard.path("manifest.json"), manifest);
    guard.commit();
    return manifest;
}

json cmd_synth(const ExperimentConfig& cfg) {
    validate(cfg);
    if (cfg.profile != "ton10") throw std::invalid_argument("synth: unknown profile '" + cfg.profile + "'");
    const auto profile = profile_ton10(cfg.scale);
    if (cfg.clients != profile.n_clients())
        throw std::invalid_argument("synth: profile " + cfg.profile + " has " + std::to_string(profile.n_clients()) +
                                    " clients, config asks for " + std::to_string(cfg.clients));
    auto clients = generate(profile, synth_seed(cfg.seed));
    auto residual = generate_residual(profile, synth_seed(cfg.seed));

    OutputGuard guard(cfg.out);
    if (cfg.emit_csv) {
        std::vector<FlowRecord> all;
        for (const auto& c : clients) all.insert(all.end(), c.records.begin(), c.records.end());
        all.insert(all.end(), residual.records.begin(), residual.records.end());
        write_flows_csv(guard.path("flows.csv"), profile.schema, all);
    }
    json source = {{"kind", "synthetic"}, {"profile", cfg.profile}, {"scale", cfg.scale}};
    json manifest = write_prepared(guard, profile.schema, profile.labels, std::move(clients),
                                   std::move(residual.records), cfg, std::move(source));
    write_json(guard.path("manifest.json"), manifest);
    guard.commit();
    return manifest;
}

json cmd_train_central(const ExperimentConfig& cfg) {
    validate(cfg);
    const auto corpus = load_corpus(cfg.data);
    const auto data = pool(corpus);
    if (data.train.empty()) throw std::invalid_argument("train-central: the client training sets are empty");
    const std::size_t nc = corpus.labels.size();
    const auto seed = central_seed(cfg.seed);
    auto result = train_preset(cfg.model, data.train, nc, central_config(cfg, cfg.central_epochs, seed));

    json report = {{"format", "fediron-report/1"},
                   {"command", "train-central"},
                   {"model", to_string(cfg.model)},
                   {"config", report_config(cfg)},
                   {"n_train", data.train.size()},
                   {"n_test", data.test.size()},
                   {"loss_curve", result.epoch_losses}};
    if (!data.test.empty()) report["metrics"] = to_json(evaluate_model(result.model, data.test), corpus.labels);
    if (cfg.timestamps) report["created_at"] = utc_now();

    OutputGuard guard(cfg.out);
    save_checkpoint(guard.path("model.flids"),
                    make_checkpoint(std::move(result.model), corpus.labels, run_metadata(cfg, "train-central")));
    write_json(guard.path("report.json"), report);
    guard.commit();
    return report;
}

json cmd_pretrain(const ExperimentConfig& cfg) {
    validate(cfg);
    const auto corpus = load_corpus(cfg.data);
    if (!corpus.residual || corpus.residual->train.empty())
        throw std::invalid_argument("pretrain: the residual dataset is empty; nothing to pretrain on");
    const std::size_t nc = corpus.labels.size();
    const auto seed = pretrain_seed(cfg.seed);
    auto result = train_preset(cfg.model, corpus.residual->train, nc, central_config(cfg, cfg.pretrain_epochs, seed));

    const auto data = pool(corpus);
    json report = {{"format", "fediron-report/1"},
                   {"command", "pretrain"},
                   {"model", to_string(cfg.model)},
                   {"config", report_config(cfg)},
                   {"n_train", corpus.residual->train.size()},
                   {"n_test", data.test.size()},
                   {"loss_curve", result.epoch_losses}};
    if (!data.test.empty()) report["metrics"] = to_json(evaluate_model(result.model, data.test), corpus.labels);
    if (!corpus.residual->test.empty())
        report["residual_metrics"] = to_json(evaluate_model(result.model, corpus.residual->test), corpus.labels);
    if (cfg.timestamps) report["created_at"] = utc_now();

    OutputGuard guard(cfg.out);
    save_checkpoint(guard.path("model.flids"),
                    make_checkpoint(std::move(result.model), corpus.labels, run_metadata(cfg, "pretrain")));
    write_json(guard.path("report.json"), report);
    guard.commit();
    return report;
}

json cmd_train_fl(const ExperimentConfig& cfg) {
    validate(cfg);
    const auto corpus = load_corpus(cfg.data);
    const std::size_t nf = feature_width(corpus);
    const std::size_t nc = corpus.labels.size();

    ModelParams initial;
    if (cfg.init == "pretrained") {
        if (cfg.pretrained.empty()) throw std::invalid_argument("train-fl: init=pretrained needs a pretrained checkpoint");
        auto ckpt = load_checkpoint(cfg.pretrained);
        check_model_fits(ckpt.model, nf, nc, "pretrained checkpoint");
        if (ckpt.model.specs != preset_specs(cfg.model, nf, nc))
            throw std::invalid_argument("train-fl: pretrained checkpoint does not have the " + to_string(cfg.model) +
                                        " layout");
        initial = std::move(ckpt.model);
    } else {
        initial = init_random(cfg.model, nf, nc, init_seed(cfg.seed));
    }

    std::vector<FlClient> clients;
    for (const auto& c : corpus.clients) clients.push_back({c.client_id, c.train, c.test});
    FlConfig fc;
    fc.aggregation = cfg.aggregation;
    fc.rounds = cfg.rounds;
    fc.local = TrainConfig{optimizer_for(cfg), cfg.batch_size, cfg.local_epochs, 0, std::nullopt};
    fc.master_seed = fl_seed(cfg.seed);
    fc.workers = cfg.workers;
    auto result = run_rounds(clients, initial, fc);

    const auto history = history_json(result.history, corpus.labels, cfg.timestamps);
    json report = {{"format", "fediron-report/1"},
                   {"command", "train-fl"},
                   {"model", to_string(cfg.model)},
                   {"aggregation", aggregation_json(cfg.aggregation)},
                   {"init", cfg.init},
                   {"config", report_config(cfg)},
                   {"rounds", result.history.size()},
                   {"history_file", "history.json"}};
    const auto test = pool(corpus).test;
    if (!test.empty()) {
        const auto final_metrics = result.history.empty() ? evaluate_model(result.global, test)
                                                           : *result.history.back().metrics;
        report["metrics"] = to_json(final_metrics, corpus.labels);
        double best = final_metrics.weighted.f1;
        const std::size_t n = result.history.size();
        for (std::size_t i = n - std::min<std::size_t>(5, n); i < n; ++i)
            best = std::max(best, result.history[i].metrics->weighted.f1);
        report["best_last5_f1"] = best;
    }
    if (cfg.timestamps) report["created_at"] = utc_now();

    OutputGuard guard(cfg.out);
    save_checkpoint(guard.path("model.flids"),
                    make_checkpoint(std::move(result.global), corpus.labels, run_metadata(cfg, "train-fl")));
    write_json(guard.path("history.json"), history);
    write_json(guard.path("report.json"), report);
    guard.commit();
    return report;
}

json cmd_evaluate(const ExperimentConfig& cfg) {
    validate(cfg);
    if (cfg.checkpoint.empty()) throw std::invalid_argument("evaluate: no checkpoint given");
    const auto ckpt = load_checkpoint(cfg.checkpoint);
    const auto corpus = load_corpus(cfg.data);
    check_model_fits(ckpt.model, feature_width(corpus), corpus.labels.size(), "checkpoint");
    if (!ckpt.classes.empty() && ckpt.classes != corpus.labels.classes())
        throw std::invalid_argument("evaluate: checkpoint classes differ from the dataset classes");
    const auto data = pool(corpus);
    const auto& split = cfg.split == "train" ? data.train : data.test;
    if (split.empty()) throw std::invalid_argument("evaluate: the " + cfg.split + " split is empty");

    json report = {{"format", "fediron-report/1"},
                   {"command", "evaluate"},
                   {"model", ckpt.metadata.value("model", "")},
                   {"split", cfg.split},
                   {"n_samples", split.size()},
                   {"metrics", to_json(evaluate_model(ckpt.model, split), corpus.labels)}};
    if (cfg.timestamps) report["created_at"] = utc_now();

    OutputGuard guard(cfg.out);
    write_json(guard.path("evaluation.json"), report);
    guard.commit();
    return report;
}

json cmd_report(const ExperimentConfig& cfg) {
    if (cfg.runs.empty()) throw std::invalid_argument("report: no run directories given");
    std::ostringstream rounds_csv, summary_csv;
    rounds_csv << "run,round,accuracy,precision,recall,f1\n";
    summary_csv << "run,command,model,aggregation,init,rounds,accuracy,precision,recall,f1,best_last5_f1\n";
    json summary = json::array();

    for (const auto& dir : cfg.runs) {
        const fs::path run(dir);
        const auto report = read_json(run / "report.json");
        const std::string name = run.filename().empty() ? run.parent_path().filename().string() : run.filename().string();
        const std::string command = report.value("command", "");
        if (command == "train-fl" && fs::exists(run / "history.json")) {
            const auto history = read_json(run / "history.json");
            for (const auto& r : history.at("rounds")) {
                if (!r.contains("metrics")) continue;
                const auto& m = r["metrics"];
                rounds_csv << name << ',' << r["round"].get<std::size_t>() << ',' << csv_number(m["accuracy"]) << ','
                           << csv_number(m["weighted"]["precision"]) << ',' << csv_number(m["weighted"]["recall"])
                           << ',' << csv_number(m["weighted"]["f1"]) << '\n';
            }
        }
        json row = {{"run", name},
                    {"command", command},
                    {"model", report.value("model", "")},
                    {"aggregation", report.contains("aggregation") ? report["aggregation"]["kind"] : json("")},
                    {"init", report.value("init", "")},
                    {"rounds", report.value("rounds", std::size_t{0})}};
        if (report.contains("metrics")) {
            const auto& m = report["metrics"];
            row["accuracy"] = m["accuracy"];
            row["precision"] = m["weighted"]["precision"];
            row["recall"] = m["weighted"]["recall"];
            row["f1"] = m["weighted"]["f1"];
        }
        if (report.contains("best_last5_f1")) row["best_last5_f1"] = report["best_last5_f1"];
        summary_csv << name << ',' << command << ',' << row["model"].get<std::string>() << ','
                    << row["aggregation"].get<std::string>() << ',' << row["init"].get<std::string>() << ','
                    << row["rounds"].get<std::size_t>();
        for (const char* k : {"accuracy", "precision", "recall", "f1", "best_last5_f1"})
            summary_csv << ',' << (row.contains(k) ? csv_number(row[k].get<double>()) : "");
        summary_csv << '\n';
        summary.push_back(std::move(row));
    }

    OutputGuard guard(cfg.out);
    write_file(guard.path("rounds.csv"), rounds_csv.str());
    write_file(guard.path("summary.csv"), summary_csv.str());
    json out = {{"format", "fediron-summary/1"}, {"runs", summary}};
    write_json(guard.path("summary.json"), out);
    guard.commit();
    return out;
}

}  // namespace fediron
