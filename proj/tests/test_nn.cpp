#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

#include "fediron/nn.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace fediron;

namespace {

ModelParams scalar_model(double w) {
    auto m = make_model({{1, 2, Activation::softmax}});
    m.layers[0].weights(0, 0) = w;
    return m;
}

}  // namespace

TEST_SUITE("init") {
    TEST_CASE("xavier bounds and zero biases") {
        const auto m = init_xavier({{2, 2, Activation::relu}, {2, 3, Activation::softmax}}, 4);
        for (double w : m.layers[0].weights.values()) {
            CHECK(w > -std::sqrt(1.5));
            CHECK(w < std::sqrt(1.5));
        }
        for (const auto& l : m.layers)
            for (double b : l.biases) CHECK(b == 0.0);
        const auto preset = init_xavier(dnn_preset_specs(), 1);
        for (const auto& l : preset.layers)
            for (double b : l.biases) CHECK(b == 0.0);
        CHECK(preset.parameter_count() == 38 * 128 + 128 + 128 * 128 + 128 + 128 * 64 + 64 + 64 * 10 + 10);
    }

    TEST_CASE("same seed, same parameters") {
        CHECK(init_xavier(dnn_preset_specs(), 9) == init_xavier(dnn_preset_specs(), 9));
        CHECK(init_xavier(dnn_preset_specs(), 9) != init_xavier(dnn_preset_specs(), 10));
    }

    TEST_CASE("broken dimension chain names the layer") {
        try {
            init_xavier({{4, 3, Activation::relu}, {5, 2, Activation::softmax}}, 0);
            FAIL("expected invalid_argument");
        } catch (const std::invalid_argument& e) {
            CHECK(std::string(e.what()).find("layer 1") != std::string::npos);
        }
        CHECK_THROWS_AS(validate_specs(std::vector<LayerSpec>{{4, 3, Activation::relu}}), std::invalid_argument);
    }
}

TEST_SUITE("forward") {
    TEST_CASE("zero network gives uniform probabilities") {
        const auto m = make_model(dnn_preset_specs());
        std::mt19937_64 gen(1);
        const auto probs = forward(m, testing::random_matrix(5, 38, gen)).probs();
        for (double p : probs.values()) CHECK(p == doctest::Approx(0.1).epsilon(1e-15));
    }

    TEST_CASE("softmax closed form") {
        auto m = make_model({{2, 2, Activation::softmax}});
        m.layers[0].weights(0, 0) = 1.0;
        m.layers[0].weights(1, 1) = 1.0;
        const auto probs = forward(m, Matrix{{std::log(2.0), std::log(1.0)}}).probs();
        CHECK(probs(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
        CHECK(probs(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    }

    TEST_CASE("rows sum to one and stay finite for large inputs") {
        const auto m = init_xavier({{38, 8, Activation::relu}, {8, 8, Activation::relu}, {8, 10, Activation::softmax}}, 3);
        std::mt19937_64 gen(2);
        for (double scale : {1.0, 1e3}) {
            auto x = testing::random_matrix(64, 38, gen, scale);
            for (auto& v : x.values()) v = std::clamp(v, -1e3, 1e3);
            const auto probs = forward(m, x).probs();
            for (std::size_t r = 0; r < probs.rows(); ++r) {
                double s = 0.0;
                for (std::size_t c = 0; c < probs.cols(); ++c) {
                    REQUIRE(std::isfinite(probs(r, c)));
                    s += probs(r, c);
                }
                CHECK(std::abs(s - 1.0) < 1e-12);
            }
        }
    }

    TEST_CASE("input width mismatch") {
        CHECK_THROWS_AS(forward(make_model(dnn_preset_specs()), Matrix(2, 37)), std::invalid_argument);
    }

    TEST_CASE("predict_proba matches forward across chunks") {
        const auto m = init_xavier(dnn_preset_specs(), 5);
        std::mt19937_64 gen(3);
        const auto x = testing::random_matrix(3000, 38, gen);
        CHECK(predict_proba(m, x) == forward(m, x).probs());
    }
}

TEST_SUITE("loss") {
    TEST_CASE("closed forms") {
        CHECK(cross_entropy(Matrix{{0.0, 1.0}}, std::vector<int>{1}) == 0.0);
        Matrix uniform(3, 10);
        for (auto& p : uniform.values()) p = 0.1;
        CHECK(cross_entropy(uniform, std::vector<int>{0, 4, 9}) == doctest::Approx(2.302585).epsilon(1e-6));
        CHECK(cross_entropy(Matrix{{0.25, 0.75}}, std::vector<int>{1}) == doctest::Approx(0.287682).epsilon(1e-6));
    }

    TEST_CASE("clamped at 1e-12 and never negative") {
        CHECK(cross_entropy(Matrix{{1.0, 0.0}}, std::vector<int>{1}) == doctest::Approx(-std::log(1e-12)));
        std::mt19937_64 gen(4);
        for (int t = 0; t < 50; ++t) {
            const auto m = oracle::random_model(gen);
            const auto x = testing::random_matrix(4, m.input_dim(), gen);
            std::vector<int> y(4);
            for (auto& v : y) v = static_cast<int>(gen() % m.output_dim());
            CHECK(cross_entropy(forward(m, x).probs(), y) >= 0.0);
        }
    }
}

TEST_SUITE("backward") {
    TEST_CASE("zero network, balanced labels: output bias gradient in closed form") {
        const auto m = make_model({{3, 2, Activation::softmax}});
        const Matrix x{{1, 2, 3}, {-1, 0, 4}};
        const std::vector<int> y{0, 1};
        const auto g = backward(m, forward(m, x), y);
        // mean(probs - onehot) = mean([0.5 - 1, 0.5 - 0], [0.5, -0.5]) = 0.
        CHECK(g.layers[0].biases[0] == doctest::Approx(0.0));
        CHECK(g.layers[0].biases[1] == doctest::Approx(0.0));
        const auto g1 = backward(m, forward(m, x), std::vector<int>{0, 0});
        CHECK(g1.layers[0].biases[0] == doctest::Approx(-0.5));
        CHECK(g1.layers[0].biases[1] == doctest::Approx(0.5));
    }

    TEST_CASE("finite-difference agreement on random models") {
        std::mt19937_64 gen(2025);
        double worst = 0.0;
        for (int trial = 0; trial < 100; ++trial) {
            const auto m = oracle::random_model(gen);
            const std::size_t n = 1 + gen() % 8;
            const auto x = testing::random_matrix(n, m.input_dim(), gen);
            std::vector<int> y(n);
            for (auto& v : y) v = static_cast<int>(gen() % m.output_dim());
            worst = std::max(worst, oracle::gradient_check(m, x, y));
        }
        CHECK(worst < 1e-5);
    }

    TEST_CASE("finite differences also hold with a proximal term") {
        std::mt19937_64 gen(6);
        for (int trial = 0; trial < 10; ++trial) {
            const auto m = oracle::random_model(gen);
            auto anchor = std::make_shared<ModelParams>(m);
            for (auto t : tensors(*anchor))
                for (auto& v : t) v += 0.3;
            const ProxTerm prox{0.7, anchor};
            const auto x = testing::random_matrix(3, m.input_dim(), gen);
            const std::vector<int> y{0, 1, 0};
            CHECK(oracle::gradient_check(m, x, y, &prox) < 1e-5);
        }
    }

    TEST_CASE("proximal increment") {
        const auto m = make_model({{1, 2, Activation::softmax}});
        auto anchor = std::make_shared<ModelParams>(m);
        anchor->layers[0].weights(0, 0) = -1.0;
        anchor->layers[0].weights(1, 0) = 1.0;
        const Matrix x{{0.5}};
        const std::vector<int> y{1};
        const auto cache = forward(m, x);
        const ProxTerm prox{0.1, anchor};
        const auto plain = backward(m, cache, y);
        const auto with = backward(m, cache, y, &prox);
        CHECK(with.layers[0].weights(0, 0) - plain.layers[0].weights(0, 0) == doctest::Approx(0.1));
        CHECK(with.layers[0].weights(1, 0) - plain.layers[0].weights(1, 0) == doctest::Approx(-0.1));
        CHECK(with.layers[0].biases == plain.layers[0].biases);
    }

    TEST_CASE("mu = 0 is bit-identical to no proximal term") {
        std::mt19937_64 gen(8);
        const auto m = oracle::random_model(gen);
        auto anchor = std::make_shared<ModelParams>(oracle::random_model(gen));
        *anchor = m;
        for (auto t : tensors(*anchor))
            for (auto& v : t) v += 1.0;
        const auto x = testing::random_matrix(5, m.input_dim(), gen);
        const std::vector<int> y{0, 1, 1, 0, 1};
        const auto cache = forward(m, x);
        const ProxTerm prox{0.0, anchor};
        CHECK(backward(m, cache, y, &prox) == backward(m, cache, y));
    }

    TEST_CASE("stale activations are rejected") {
        const auto m = make_model({{3, 2, Activation::softmax}});
        const auto other = make_model({{4, 2, Activation::softmax}});
        const auto cache = forward(other, Matrix(2, 4));
        CHECK_THROWS_AS(backward(m, cache, std::vector<int>{0, 1}), std::invalid_argument);
    }
}

TEST_SUITE("optimizer") {
    TEST_CASE("plain SGD step") {
        auto w = scalar_model(0.5);
        auto g = zeros_like(w);
        g.layers[0].weights(0, 0) = 1.0;
        Optimizer opt(SgdConfig{0.1, 0.0}, w);
        opt.step(w, g);
        CHECK(w.layers[0].weights(0, 0) == doctest::Approx(0.4));
    }

    TEST_CASE("momentum: second step moves by 0.19") {
        auto w = scalar_model(0.0);
        auto g = zeros_like(w);
        g.layers[0].weights(0, 0) = 1.0;
        Optimizer opt(SgdConfig{0.1, 0.9}, w);
        opt.step(w, g);
        const double after_one = w.layers[0].weights(0, 0);
        opt.step(w, g);
        CHECK(after_one == doctest::Approx(-0.1));
        CHECK(after_one - w.layers[0].weights(0, 0) == doctest::Approx(0.19));
    }

    TEST_CASE("Adam with zero gradients never moves") {
        std::mt19937_64 gen(1);
        auto w = oracle::random_model(gen);
        const auto start = w;
        Optimizer opt(AdamConfig{}, w);
        for (int i = 0; i < 10; ++i) opt.step(w, zeros_like(w));
        CHECK(w == start);
        CHECK(opt.steps() == 10);
    }

    TEST_CASE("Adam first step moves by lr in the gradient sign") {
        auto w = scalar_model(0.0);
        auto g = zeros_like(w);
        g.layers[0].weights(0, 0) = 3.0;
        Optimizer opt(AdamConfig{}, w);
        opt.step(w, g);
        CHECK(w.layers[0].weights(0, 0) == doctest::Approx(-0.001).epsilon(1e-6));
    }
}

TEST_SUITE("train_local") {
    TEST_CASE("zero epochs return the model unchanged") {
        const auto m = init_xavier(dnn_preset_specs(4, 2), 1);
        const auto data = testing::blobs(20, 2, 4, 3.0, 1);
        TrainConfig cfg;
        cfg.epochs = 0;
        const auto r = train_local(m, data, cfg);
        CHECK(r.model == m);
        CHECK(r.epoch_losses.empty());
    }

    TEST_CASE("separable toy set is learned") {
        const auto data = testing::blobs(50, 2, 4, 4.0, 2);
        TrainConfig cfg;
        cfg.epochs = 50;
        cfg.batch_size = 16;
        const auto r = train_local(init_xavier(dnn_preset_specs(4, 2), 3), data, cfg);
        REQUIRE(r.epoch_losses.size() == 50);
        CHECK(r.epoch_losses.back() < 0.1);
        CHECK(r.epoch_losses.back() < r.epoch_losses.front());
    }

    TEST_CASE("same seed, bit-identical result; other seed differs") {
        const auto data = testing::blobs(30, 3, 5, 2.0, 4);
        TrainConfig cfg;
        cfg.epochs = 3;
        cfg.batch_size = 8;
        cfg.seed = 11;
        const auto m = init_xavier(dnn_preset_specs(5, 3), 5);
        const auto a = train_local(m, data, cfg);
        const auto b = train_local(m, data, cfg);
        CHECK(a.model == b.model);
        CHECK(a.epoch_losses == b.epoch_losses);
        cfg.seed = 12;
        CHECK(train_local(m, data, cfg).model != a.model);
    }

    TEST_CASE("learning rate zero leaves parameters untouched") {
        const auto data = testing::blobs(10, 2, 3, 2.0, 6);
        const auto m = init_xavier(dnn_preset_specs(3, 2), 7);
        for (OptimizerConfig opt : {OptimizerConfig{SgdConfig{0.0, 0.9}}, OptimizerConfig{AdamConfig{0.0}}}) {
            TrainConfig cfg;
            cfg.optimizer = opt;
            cfg.epochs = 2;
            cfg.batch_size = 4;
            CHECK(train_local(m, data, cfg).model == m);
        }
    }

    TEST_CASE("invalid inputs") {
        const auto m = init_xavier(dnn_preset_specs(3, 2), 7);
        TrainConfig cfg;
        CHECK_THROWS_AS(train_local(m, LabeledData{Matrix(0, 3), {}}, cfg), std::invalid_argument);
        cfg.batch_size = 0;
        CHECK_THROWS_AS(train_local(m, testing::blobs(4, 2, 3, 1.0, 1), cfg), std::invalid_argument);
        TrainConfig neg;
        neg.optimizer = SgdConfig{-0.1, 0.9};
        CHECK_THROWS_AS(validate(neg), std::invalid_argument);
    }
}
