#include <doctest.h>

#include <filesystem>

#include "fediron/experiment.hpp"
#include "fediron/io.hpp"
#include "fediron/synthgen.hpp"
#include "support.hpp"

using namespace fediron;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

ExperimentConfig quiet() {
    ExperimentConfig c;
    c.timestamps = false;
    c.seed = 5;
    return c;
}

// Small synthetic corpus, shared by the training tests.
const fs::path& synth_corpus() {
    static testing::TempDir dir("expcorpus");
    static const bool made = [] {
        auto c = quiet();
        c.scale = 0.0002;
        c.out = (dir / "data").string();
        cmd_synth(c);
        return true;
    }();
    (void)made;
    static const fs::path path = dir / "data";
    return path;
}

// Flow CSV whose rows sit on three destination IPs with 50, 30 and 20 rows.
void write_three_ip_csv(const fs::path& path) {
    const auto p = profile_ton10(0.001);
    auto records = generate(p, 1)[1].records;
    records.resize(100);
    for (std::size_t i = 0; i < records.size(); ++i)
        records[i].dst_ip = i < 50 ? "10.1.1.1" : (i < 80 ? "10.1.1.2" : "10.1.1.3");
    write_flows_csv(path, p.schema, records);
}

// Two well separated classes in four dimensions.
void write_toy_corpus(const fs::path& dir, std::size_t n_features) {
    fs::create_directories(dir);
    PreparedFile f;
    f.data.client_id = 1;
    f.data.dst_ip = "toy";
    f.data.train = testing::blobs(20, 2, n_features, 6.0, 1);
    f.data.test = testing::blobs(5, 2, n_features, 6.0, 2);
    f.classes = {"neg", "pos"};
    save_prepared(dir / "client_01.flds", f);
    write_json(dir / "manifest.json", json{{"classes", f.classes},
                                           {"clients", json::array({json{{"client_id", 1}, {"file", "client_01.flds"}}})},
                                           {"residual", json{{"file", nullptr}}}});
}

}  // namespace

TEST_SUITE("config") {
    TEST_CASE("defaults follow the reference setup") {
        const ExperimentConfig c;
        CHECK(c.rounds == 50);
        CHECK(c.local_epochs == 2);
        CHECK(c.clients == 10);
        CHECK(c.batch_size == 128);
        CHECK(c.sgd.lr == 0.01);
        CHECK(c.adam.lr == 0.001);
        CHECK(c.cd.lr == 0.01);
        CHECK(c.cd.momentum == 0.9);
        CHECK(c.cd_epochs == 10);
        CHECK(std::holds_alternative<FedAvg>(c.aggregation));
        CHECK(c.model == ModelPreset::dnn);
        CHECK(c.init == "random");
    }

    TEST_CASE("lossless JSON round trip") {
        ExperimentConfig c;
        c.csv = "flows.csv";
        c.model = ModelPreset::dbn;
        c.aggregation = FedYogi{0.02, 0.8, 0.9, 0.01};
        c.rounds = 7;
        c.sgd.momentum = 0.5;
        c.adam.eps = 1e-7;
        c.cd.lr = 0.05;
        c.cd_epochs = 3;
        c.runs = {"a", "b"};
        c.seed = 0xFFFFFFFFFFFFFFFFull;
        c.timestamps = false;
        CHECK(config_from_json(to_json(c)) == c);
        CHECK(config_from_json(json::parse(to_json(c).dump())) == c);
    }

    TEST_CASE("missing keys keep defaults, unknown keys are rejected") {
        const auto c = config_from_json(json{{"rounds", 3}});
        CHECK(c.rounds == 3);
        CHECK(c.local_epochs == 2);
        CHECK_THROWS(config_from_json(json{{"round", 3}}));
        CHECK_THROWS(config_from_json(json{{"sgd", {{"learning_rate", 0.1}}}}));
        CHECK_THROWS(config_from_json(json{{"model", "cnn"}}));
    }

    TEST_CASE("validation") {
        auto c = quiet();
        c.init = "warm";
        CHECK_THROWS_AS(validate(c), std::invalid_argument);
        c = quiet();
        c.train_fraction = 1.0;
        CHECK_THROWS_AS(validate(c), std::invalid_argument);
        c = quiet();
        c.batch_size = 0;
        CHECK_THROWS_AS(validate(c), std::invalid_argument);
        c = quiet();
        c.model = ModelPreset::dbn;
        c.adam.lr = 0.5;
        CHECK(std::get<AdamConfig>(optimizer_for(c)).lr == 0.5);
    }

    TEST_CASE("seed streams are distinct") {
        const std::vector<std::uint64_t> s{split_seed(1, 0), split_seed(1, 1), synth_seed(1),
                                           central_seed(1),  pretrain_seed(1), fl_seed(1), init_seed(1)};
        for (std::size_t i = 0; i < s.size(); ++i)
            for (std::size_t j = i + 1; j < s.size(); ++j) CHECK(s[i] != s[j]);
    }
}

TEST_SUITE("partition") {
    TEST_CASE("three IPs, two clients") {
        testing::TempDir dir("part3");
        write_three_ip_csv(dir / "flows.csv");
        auto c = quiet();
        c.csv = (dir / "flows.csv").string();
        c.clients = 2;
        c.out = (dir / "out").string();
        const auto m = cmd_partition(c);
        REQUIRE(m["clients"].size() == 2);
        CHECK(m["clients"][0]["dst_ip"] == "10.1.1.1");
        CHECK(m["clients"][0]["n_samples"] == 50);
        CHECK(m["clients"][1]["n_samples"] == 30);
        CHECK(m["residual"]["n_samples"] == 20);
        CHECK(m["residual"]["n_ips"] == 1);
        CHECK_FALSE(m.contains("reference_diff"));
        CHECK(read_json(dir / "out" / "manifest.json") == m);
        const auto corpus = load_corpus(dir / "out");
        CHECK(corpus.clients.size() == 2);
        REQUIRE(corpus.residual.has_value());
        CHECK(corpus.residual->train.size() + corpus.residual->test.size() == 20);
        CHECK(corpus.clients[0].train.features.cols() == 38);
    }

    TEST_CASE("nonexistent input leaves nothing behind") {
        testing::TempDir dir("partmissing");
        auto c = quiet();
        c.csv = (dir / "nope.csv").string();
        c.out = (dir / "out").string();
        CHECK_THROWS(cmd_partition(c));
        CHECK_FALSE(fs::exists(dir / "out"));
    }

    TEST_CASE("a failed write removes the files already written") {
        testing::TempDir dir("guard");
        fs::create_directories(dir / "out" / "client_02.flds");
        auto c = quiet();
        c.scale = 0.0002;
        c.out = (dir / "out").string();
        CHECK_THROWS(cmd_synth(c));
        CHECK_FALSE(fs::exists(dir / "out" / "client_01.flds"));
        CHECK_FALSE(fs::exists(dir / "out" / "manifest.json"));
        CHECK(fs::exists(dir / "out" / "client_02.flds"));
    }

    TEST_CASE("synth manifest matches the scaled profile") {
        const auto m = read_json(synth_corpus() / "manifest.json");
        const auto p = profile_ton10(0.0002);
        REQUIRE(m["clients"].size() == 10);
        for (std::size_t i = 0; i < 10; ++i) {
            std::size_t n = 0;
            for (auto v : p.counts[i]) n += v;
            CHECK(m["clients"][i]["n_samples"] == n);
        }
        std::size_t r = 0;
        for (auto v : p.residual) r += v;
        CHECK(m["residual"]["n_samples"] == r);
    }
}

TEST_SUITE("training") {
    TEST_CASE("central, zero epochs, is near chance") {
        testing::TempDir out("central0");
        auto c = quiet();
        c.data = synth_corpus().string();
        c.out = out.path().string();
        c.central_epochs = 0;
        const auto r = cmd_train_central(c);
        CHECK(r["metrics"]["weighted"]["f1"].get<double>() < 0.4);
        c.central_epochs = 5;
        const auto trained = cmd_train_central(c);
        CHECK(trained["metrics"]["weighted"]["f1"].get<double>() > r["metrics"]["weighted"]["f1"].get<double>());
    }

    TEST_CASE("central DBN report fields lie in [0, 1]") {
        testing::TempDir out("centraldbn");
        auto c = quiet();
        c.data = synth_corpus().string();
        c.out = out.path().string();
        c.model = ModelPreset::dbn;
        c.central_epochs = 2;
        c.cd_epochs = 1;
        const auto r = cmd_train_central(c);
        const auto& m = r["metrics"];
        for (double v : {m["accuracy"].get<double>(), m["weighted"]["precision"].get<double>(),
                         m["weighted"]["recall"].get<double>(), m["weighted"]["f1"].get<double>()}) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        CHECK(r["model"] == "dbn");
        CHECK(load_checkpoint(out / "model.flids").model.specs == dbn_preset_specs());
        CHECK(read_json(out / "report.json") == r);
    }

    TEST_CASE("zero rounds: empty history, checkpoint is the initial model") {
        testing::TempDir out("fl0");
        auto c = quiet();
        c.data = synth_corpus().string();
        c.out = out.path().string();
        c.rounds = 0;
        cmd_train_fl(c);
        CHECK(read_json(out / "history.json")["rounds"].empty());
        CHECK(load_checkpoint(out / "model.flids").model == init_random(ModelPreset::dnn, 38, 10, init_seed(c.seed)));
    }

    TEST_CASE("FedProx with mu = 0 writes the same history as FedAvg") {
        testing::TempDir a("flavg"), b("flprox");
        auto c = quiet();
        c.data = synth_corpus().string();
        c.rounds = 2;
        c.out = a.path().string();
        cmd_train_fl(c);
        c.aggregation = FedProx{0.0};
        c.out = b.path().string();
        cmd_train_fl(c);
        CHECK(read_file(a / "history.json") == read_file(b / "history.json"));
        CHECK(read_file(a / "model.flids") == read_file(b / "model.flids"));
    }

    TEST_CASE("same seed, byte-identical outputs; workers do not matter") {
        testing::TempDir a("det1"), b("det2");
        auto c = quiet();
        c.data = synth_corpus().string();
        c.rounds = 2;
        c.aggregation = FedYogi{};
        c.out = a.path().string();
        cmd_train_fl(c);
        c.out = b.path().string();
        c.workers = 3;
        cmd_train_fl(c);
        CHECK(read_file(a / "history.json") == read_file(b / "history.json"));
        auto ra = read_json(a / "report.json"), rb = read_json(b / "report.json");
        ra["config"].erase("workers");
        rb["config"].erase("workers");
        CHECK(ra == rb);
    }

    TEST_CASE("pretraining and a pretrained start") {
        testing::TempDir pre("pre"), fl("flpre");
        auto c = quiet();
        c.data = synth_corpus().string();
        c.out = pre.path().string();
        c.pretrain_epochs = 2;
        const auto r = cmd_pretrain(c);
        CHECK(r["command"] == "pretrain");
        CHECK(r.contains("residual_metrics"));
        const auto ckpt = load_checkpoint(pre / "model.flids");
        CHECK(ckpt.model.specs == dnn_preset_specs());
        CHECK(ckpt.classes == ton_iot_labels().classes());

        c.out = fl.path().string();
        c.init = "pretrained";
        c.pretrained = (pre / "model.flids").string();
        c.rounds = 1;
        const auto f = cmd_train_fl(c);
        CHECK(f["init"] == "pretrained");
        CHECK(f["rounds"] == 1);

        c.model = ModelPreset::dbn;
        CHECK_THROWS_AS(cmd_train_fl(c), std::invalid_argument);
        c.model = ModelPreset::dnn;
        c.pretrained.clear();
        CHECK_THROWS_AS(cmd_train_fl(c), std::invalid_argument);
    }

    TEST_CASE("pretraining needs a residual") {
        testing::TempDir dir("nores");
        write_three_ip_csv(dir / "flows.csv");
        auto c = quiet();
        c.csv = (dir / "flows.csv").string();
        c.clients = 3;
        c.out = (dir / "data").string();
        const auto m = cmd_partition(c);
        CHECK(m["residual"]["file"].is_null());
        c.data = c.out;
        c.out = (dir / "pre").string();
        CHECK_THROWS_AS(cmd_pretrain(c), std::invalid_argument);
        CHECK_FALSE(fs::exists(dir / "pre"));
    }
}

TEST_SUITE("evaluate") {
    TEST_CASE("memorized toy set scores 1.0; wrong input width is an error") {
        testing::TempDir dir("evaltoy");
        write_toy_corpus(dir / "toy", 4);
        auto c = quiet();
        c.data = (dir / "toy").string();
        c.out = (dir / "central").string();
        c.central_epochs = 100;
        c.batch_size = 8;
        cmd_train_central(c);

        c.checkpoint = (dir / "central" / "model.flids").string();
        c.split = "train";
        c.out = (dir / "eval").string();
        const auto r = cmd_evaluate(c);
        CHECK(r["metrics"]["accuracy"] == 1.0);
        CHECK(r["n_samples"] == 40);
        CHECK(read_json(dir / "eval" / "evaluation.json") == r);

        write_toy_corpus(dir / "wide", 5);
        c.data = (dir / "wide").string();
        c.out = (dir / "eval2").string();
        try {
            cmd_evaluate(c);
            FAIL("expected an error");
        } catch (const std::exception& e) {
            const std::string msg = e.what();
            CHECK(msg.find('4') != std::string::npos);
            CHECK(msg.find('5') != std::string::npos);
        }
        CHECK_FALSE(fs::exists(dir / "eval2"));
    }
}

TEST_SUITE("report") {
    TEST_CASE("summaries from finished runs") {
        testing::TempDir dir("report");
        auto c = quiet();
        c.data = synth_corpus().string();
        c.rounds = 2;
        c.out = (dir / "fl").string();
        cmd_train_fl(c);
        c.central_epochs = 1;
        c.out = (dir / "central").string();
        cmd_train_central(c);

        c.runs = {(dir / "fl").string(), (dir / "central").string()};
        c.out = (dir / "summary").string();
        const auto s = cmd_report(c);
        REQUIRE(s["runs"].size() == 2);
        CHECK(s["runs"][0]["run"] == "fl");
        CHECK(s["runs"][0]["aggregation"] == "fedavg");
        CHECK(s["runs"][1]["command"] == "train-central");
        const auto rounds = read_file(dir / "summary" / "rounds.csv");
        CHECK(rounds.rfind("run,round,accuracy,precision,recall,f1\n", 0) == 0);
        CHECK(std::count(rounds.begin(), rounds.end(), '\n') == 3);
        CHECK(fs::exists(dir / "summary" / "summary.csv"));
        c.runs = {};
        CHECK_THROWS(cmd_report(c));
    }
}
