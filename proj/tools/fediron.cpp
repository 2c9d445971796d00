// fediron: prepare flow datasets, train centralised / federated intrusion
// detection models, and evaluate them.

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fediron/experiment.hpp"
#include "fediron/io.hpp"

namespace {

using fediron::ExperimentConfig;
using nlohmann::json;

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out, data, model, agg, init, pretrained, checkpoint, split, csv, profile;
    std::optional<std::size_t> rounds, epochs, clients, workers, batch_size, cd_epochs;
    std::optional<double> scale, train_fraction, lr, mu, eta, beta1, beta2, tau;
    bool no_timestamps = false;
    bool emit_csv = false;
    std::vector<std::string> runs;
};

void add_common(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "JSON config file; flags given on the command line win")
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", f.seed, "Master seed");
    cmd->add_option("--out", f.out, "Output directory");
    cmd->add_flag("--no-timestamps", f.no_timestamps, "Omit wall-clock fields so outputs are byte-stable");
}

void add_training(CLI::App* cmd, Flags& f) {
    cmd->add_option("--data", f.data, "Prepared dataset directory");
    cmd->add_option("--model", f.model, "Model preset")->check(CLI::IsMember({"dnn", "dbn"}));
    cmd->add_option("--epochs", f.epochs, "Training epochs (local epochs per round for train-fl)");
    cmd->add_option("--batch-size", f.batch_size, "Mini-batch size");
    cmd->add_option("--lr", f.lr, "Learning rate of the preset's optimizer");
    cmd->add_option("--cd-epochs", f.cd_epochs, "Contrastive-divergence epochs per RBM (dbn)");
}

template <class T>
void set_if(const std::optional<T>& flag, T& field) {
    if (flag) field = *flag;
}

ExperimentConfig resolve(const Flags& f, const std::string& command) {
    ExperimentConfig c = f.config.empty() ? ExperimentConfig{} : fediron::load_config(f.config);
    set_if(f.seed, c.seed);
    set_if(f.out, c.out);
    set_if(f.data, c.data);
    set_if(f.init, c.init);
    set_if(f.pretrained, c.pretrained);
    set_if(f.checkpoint, c.checkpoint);
    set_if(f.split, c.split);
    set_if(f.csv, c.csv);
    set_if(f.profile, c.profile);
    set_if(f.rounds, c.rounds);
    set_if(f.clients, c.clients);
    set_if(f.workers, c.workers);
    set_if(f.batch_size, c.batch_size);
    set_if(f.cd_epochs, c.cd_epochs);
    set_if(f.scale, c.scale);
    set_if(f.train_fraction, c.train_fraction);
    if (f.model) c.model = fediron::preset_from_string(*f.model);
    if (f.epochs) {
        if (command == "train-central") c.central_epochs = *f.epochs;
        else if (command == "pretrain") c.pretrain_epochs = *f.epochs;
        else c.local_epochs = *f.epochs;
    }
    if (f.lr) {
        if (std::holds_alternative<fediron::SgdConfig>(fediron::default_optimizer(c.model))) c.sgd.lr = *f.lr;
        else c.adam.lr = *f.lr;
    }
    if (f.agg || f.mu || f.eta || f.beta1 || f.beta2 || f.tau) {
        json a = fediron::aggregation_json(c.aggregation);
        if (f.agg && *f.agg != a["kind"]) a = {{"kind", *f.agg}};
        if (f.mu) a["mu"] = *f.mu;
        if (f.eta) a["eta"] = *f.eta;
        if (f.beta1) a["beta1"] = *f.beta1;
        if (f.beta2) a["beta2"] = *f.beta2;
        if (f.tau) a["tau"] = *f.tau;
        c.aggregation = fediron::aggregation_from_json(a);
    }
    if (f.no_timestamps) c.timestamps = false;
    if (f.emit_csv) c.emit_csv = true;
    if (!f.runs.empty()) c.runs = f.runs;
    return c;
}

void print_metrics(const json& report) {
    if (!report.contains("metrics")) return;
    const auto& m = report["metrics"];
    std::printf("weighted precision %.4f  recall %.4f  F1 %.4f  accuracy %.4f\n",
                m["weighted"]["precision"].get<double>(), m["weighted"]["recall"].get<double>(),
                m["weighted"]["f1"].get<double>(), m["accuracy"].get<double>());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated intrusion detection on network flow records"};
    app.set_version_flag("--version", std::string(fediron::kVersion));
    app.require_subcommand(1);
    Flags f;

    auto* partition = app.add_subcommand("partition", "Clean a flow CSV and split it into per-destination clients");
    add_common(partition, f);
    partition->add_option("--csv", f.csv, "Input flow CSV")->required();
    partition->add_option("-k,--clients", f.clients, "Number of clients (largest destination IPs)");
    partition->add_option("--train-fraction", f.train_fraction, "Per-class training fraction");

    auto* synth = app.add_subcommand("synth", "Generate a synthetic prepared dataset");
    add_common(synth, f);
    synth->add_option("--profile", f.profile, "Skew profile")->check(CLI::IsMember({"ton10"}));
    synth->add_option("--scale", f.scale, "Count scale factor (e.g. 0.001)");
    synth->add_option("--train-fraction", f.train_fraction, "Per-class training fraction");
    synth->add_flag("--emit-csv", f.emit_csv, "Also write the raw records to <out>/flows.csv");

    auto* central = app.add_subcommand("train-central", "Train one model on the pooled client data");
    add_common(central, f);
    add_training(central, f);

    auto* pretrain = app.add_subcommand("pretrain", "Train the server-side initial model on the residual data");
    add_common(pretrain, f);
    add_training(pretrain, f);

    auto* train_fl = app.add_subcommand("train-fl", "Run federated training");
    add_common(train_fl, f);
    add_training(train_fl, f);
    train_fl->add_option("--agg", f.agg, "Aggregation")->check(CLI::IsMember({"fedavg", "fedprox", "fedyogi"}));
    train_fl->add_option("--rounds", f.rounds, "Communication rounds");
    train_fl->add_option("--init", f.init, "Initial global model")->check(CLI::IsMember({"random", "pretrained"}));
    train_fl->add_option("--pretrained", f.pretrained, "Checkpoint used when --init pretrained");
    train_fl->add_option("--workers", f.workers, "Clients trained concurrently");
    train_fl->add_option("--mu", f.mu, "FedProx proximal weight");
    train_fl->add_option("--eta", f.eta, "FedYogi server learning rate");
    train_fl->add_option("--beta1", f.beta1, "FedYogi first-moment decay");
    train_fl->add_option("--beta2", f.beta2, "FedYogi second-moment decay");
    train_fl->add_option("--tau", f.tau, "FedYogi adaptivity");

    auto* evaluate = app.add_subcommand("evaluate", "Evaluate a checkpoint on a prepared dataset");
    add_common(evaluate, f);
    evaluate->add_option("--checkpoint", f.checkpoint, "Model checkpoint")->required();
    evaluate->add_option("--data", f.data, "Prepared dataset directory");
    evaluate->add_option("--split", f.split, "Which split to score")->check(CLI::IsMember({"test", "train"}));

    auto* report = app.add_subcommand("report", "Collect finished runs into plot-ready CSV/JSON");
    add_common(report, f);
    report->add_option("runs", f.runs, "Run directories")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        const auto* cmd = app.get_subcommands().front();
        const std::string name = cmd->get_name();
        const ExperimentConfig cfg = resolve(f, name);
        if (name == "partition" || name == "synth") {
            const auto manifest = name == "partition" ? fediron::cmd_partition(cfg) : fediron::cmd_synth(cfg);
            std::printf("%zu clients, residual %zu samples -> %s/manifest.json\n", manifest["clients"].size(),
                        manifest["residual"]["n_samples"].get<std::size_t>(), cfg.out.c_str());
            if (manifest.contains("reference_diff") && !manifest["reference_diff"]["matches"].get<bool>())
                std::printf("client counts differ from the reference split; see reference_diff in the manifest\n");
        } else if (name == "train-central") {
            print_metrics(fediron::cmd_train_central(cfg));
        } else if (name == "pretrain") {
            print_metrics(fediron::cmd_pretrain(cfg));
        } else if (name == "train-fl") {
            print_metrics(fediron::cmd_train_fl(cfg));
        } else if (name == "evaluate") {
            print_metrics(fediron::cmd_evaluate(cfg));
        } else if (name == "report") {
            const auto summary = fediron::cmd_report(cfg);
            std::printf("%zu runs -> %s/summary.csv\n", summary["runs"].size(), cfg.out.c_str());
        }
    } catch (const std::exception& e) {
        std::cerr << "fediron: error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
