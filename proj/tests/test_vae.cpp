#include "doctest.h"

#include "faultbench/common.hpp"
#include "faultbench/rng.hpp"
#include "faultbench/tensor.hpp"
#include "faultbench/vae.hpp"

#include <cmath>
#include <vector>

namespace fb = faultbench;

namespace {

fb::VaeModel build_model(std::uint64_t seed, std::size_t input_dim = 5,
                         std::size_t h1 = 4, std::size_t h2 = 3, std::size_t latent = 2,
                         double l2 = 0.01, double klw = 0.7) {
    fb::VaeModel model = fb::make_vae(input_dim, h1, h2, latent, l2, klw);
    fb::RngStream rng(seed);
    fb::init_weights(model.encoder, rng);
    fb::init_weights(model.decoder, rng);
    return model;
}

fb::Vector random_unit_vector(std::uint64_t seed, std::size_t n) {
    fb::RngStream rng(seed);
    fb::Vector v(n);
    for (double& x : v) x = rng.uniform01();
    return v;
}

fb::Vector random_normal_vector(std::uint64_t seed, std::size_t n) {
    fb::RngStream rng(seed);
    fb::Vector v(n);
    for (double& x : v) x = rng.normal(0.0, 1.0);
    return v;
}

double relative_gap(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

// Central-difference derivative of the frozen-noise loss w.r.t. one scalar.
double fd_loss(fb::VaeModel& model, double& slot, const fb::Vector& input,
               const fb::Vector& eps) {
    const double h = 1e-5;
    double saved = slot;
    slot = saved + h;
    double up = fb::vae_forward_loss(model, input, eps).loss;
    slot = saved - h;
    double down = fb::vae_forward_loss(model, input, eps).loss;
    slot = saved;
    return (up - down) / (2.0 * h);
}

} // namespace

TEST_CASE("kl divergence closed forms") {
    CHECK(fb::kl_divergence({0.0}, {0.0}) == 0.0);
    CHECK(fb::kl_divergence({1.0}, {0.0}) == doctest::Approx(0.5).epsilon(1e-12));
    // 0.5 * (0.25 + 0.25 - 1 - ln 0.25)
    double want = 0.5 * (0.5 - 1.0 - std::log(0.25));
    CHECK(fb::kl_divergence({0.5}, {std::log(0.25)}) ==
          doctest::Approx(want).epsilon(1e-12));
    CHECK(want == doctest::Approx(0.4431).epsilon(1e-3));

    SUBCASE("additive across dimensions") {
        double left = fb::kl_divergence({0.3, -1.2}, {0.1, -0.4});
        double right = fb::kl_divergence({0.3}, {0.1}) + fb::kl_divergence({-1.2}, {-0.4});
        CHECK(left == doctest::Approx(right).epsilon(1e-12));
    }
    SUBCASE("standard normal is the unique zero") {
        CHECK(fb::kl_divergence({0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}) == 0.0);
        CHECK(fb::kl_divergence({0.1}, {0.0}) > 0.0);
        CHECK(fb::kl_divergence({0.0}, {0.3}) > 0.0);
        CHECK(fb::kl_divergence({0.0}, {-0.3}) > 0.0);
    }
    CHECK_THROWS_AS(fb::kl_divergence({0.0}, {0.0, 0.0}), fb::error);
}

TEST_CASE("architecture wiring of make_vae") {
    fb::VaeModel m = fb::make_vae(6, 5, 4, 3, 0.001, 2.0);
    REQUIRE(m.encoder.layers.size() == 3);
    CHECK(m.encoder.layers[0].in_dim() == 6);
    CHECK(m.encoder.layers[0].out_dim() == 5);
    CHECK(m.encoder.layers[0].activation == fb::Activation::relu);
    CHECK(m.encoder.layers[1].out_dim() == 4);
    CHECK(m.encoder.layers[1].activation == fb::Activation::relu);
    CHECK(m.encoder.layers[2].out_dim() == 6); // mu and log-variance stacked
    CHECK(m.encoder.layers[2].activation == fb::Activation::identity);

    REQUIRE(m.decoder.layers.size() == 2);
    CHECK(m.decoder.layers[0].in_dim() == 3);
    CHECK(m.decoder.layers[0].out_dim() == 4);
    CHECK(m.decoder.layers[0].activation == fb::Activation::relu);
    CHECK(m.decoder.layers[1].out_dim() == 6);
    CHECK(m.decoder.layers[1].activation == fb::Activation::sigmoid);

    CHECK(m.input_dim == 6);
    CHECK(m.latent_dim == 3);
    CHECK(m.kl_weight == 2.0);
    for (const auto& layer : m.encoder.layers) CHECK_FALSE(layer.dropout);
    for (const auto& layer : m.decoder.layers) CHECK_FALSE(layer.dropout);
}

TEST_CASE("forward pass composes the documented pieces") {
    fb::VaeModel model = build_model(42);
    fb::Vector input = random_unit_vector(1, 5);
    fb::Vector eps = random_normal_vector(2, 2);
    fb::VaeTape tape = fb::vae_forward_loss(model, input, eps);

    const fb::Vector& head = tape.encoder_tape.output();
    REQUIRE(head.size() == 4);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(tape.mu[i] == head[i]);
        CHECK(tape.log_var[i] == head[2 + i]);
        CHECK(tape.z[i] ==
              doctest::Approx(tape.mu[i] + std::exp(0.5 * tape.log_var[i]) * eps[i])
                  .epsilon(1e-15));
    }
    CHECK(tape.eps == eps);

    const fb::Vector& rec = tape.decoder_tape.output();
    CHECK(tape.reconstruction == doctest::Approx(fb::mse(input, rec)).epsilon(1e-15));
    CHECK(tape.kl == doctest::Approx(fb::kl_divergence(tape.mu, tape.log_var)).epsilon(1e-15));
    double want = tape.reconstruction + model.kl_weight * tape.kl +
                  fb::l2_penalty(model.encoder) + fb::l2_penalty(model.decoder);
    CHECK(tape.loss == doctest::Approx(want).epsilon(1e-12));

    SUBCASE("zero noise passes the latent mean through") {
        fb::VaeTape mean_tape = fb::vae_forward_loss(model, input, {0.0, 0.0});
        CHECK(mean_tape.z == mean_tape.mu);
        CHECK(fb::vae_score(model, input) ==
              doctest::Approx(mean_tape.reconstruction).epsilon(1e-15));
    }
}

TEST_CASE("backward matches central differences through the sampling path") {
    for (std::uint64_t seed : {11ull, 12ull, 13ull}) {
        fb::VaeModel model = build_model(seed);
        fb::Vector input = random_unit_vector(seed * 3 + 1, 5);
        fb::Vector eps = random_normal_vector(seed * 3 + 2, 2);

        fb::VaeTape tape = fb::vae_forward_loss(model, input, eps);
        fb::VaeGrads grads = fb::vae_backward(model, tape, input);

        REQUIRE(grads.encoder.weights.size() == model.encoder.layers.size());
        REQUIRE(grads.decoder.weights.size() == model.decoder.layers.size());

        auto check_net = [&](fb::DenseNet& net, fb::NetGrads& g) {
            for (std::size_t l = 0; l < net.layers.size(); ++l) {
                for (double* slot = net.layers[l].weights.data.data(), *grad =
                                        g.weights[l].data.data();
                     slot != net.layers[l].weights.data.data() +
                                 net.layers[l].weights.data.size();
                     ++slot, ++grad) {
                    double numeric = fd_loss(model, *slot, input, eps);
                    CHECK(relative_gap(*grad, numeric) < 1e-4);
                }
                for (std::size_t i = 0; i < net.layers[l].biases.size(); ++i) {
                    double numeric = fd_loss(model, net.layers[l].biases[i], input, eps);
                    CHECK(relative_gap(g.biases[l][i], numeric) < 1e-4);
                }
            }
        };
        check_net(model.encoder, grads.encoder);
        check_net(model.decoder, grads.decoder);
    }
}

TEST_CASE("elbo loss draws noise and enforces the input range") {
    fb::VaeModel model = build_model(5);
    fb::Vector input = random_unit_vector(6, 5);

    fb::RngStream a(77), b(77);
    fb::VaeTape ta = fb::elbo_loss(model, input, a);
    fb::VaeTape tb = fb::elbo_loss(model, input, b);
    CHECK(ta.loss == tb.loss);
    CHECK(ta.eps == tb.eps);

    fb::Vector bad = input;
    bad[2] = -0.1;
    fb::RngStream c(1);
    CHECK_THROWS_AS(fb::elbo_loss(model, bad, c), fb::error);
    CHECK_NOTHROW(fb::elbo_loss(model, bad, c, false));
    bad[2] = 1.5;
    CHECK_THROWS_AS(fb::elbo_loss(model, bad, c), fb::error);
}

TEST_CASE("training is deterministic and reduces the loss") {
    // Two noisy templates inside [0,1].
    std::vector<fb::Vector> windows;
    fb::RngStream rng(400);
    for (std::size_t i = 0; i < 60; ++i) {
        fb::Vector w(8);
        for (std::size_t j = 0; j < 8; ++j) {
            double base = (i % 2 == 0) ? 0.3 : 0.7;
            w[j] = base + 0.05 * std::sin(0.8 * static_cast<double>(j)) +
                   rng.uniform(-0.02, 0.02);
        }
        windows.push_back(w);
    }

    fb::VaeTrainConfig config;
    config.epochs = 40;
    config.batch_size = 16;
    config.learning_rate = 0.01;
    config.seed = 9;
    config.hidden1 = 8;
    config.hidden2 = 4;
    config.latent_dim = 2;
    config.kl_weight = 0.1;

    fb::VaeTrainResult run1 = fb::train_vae(windows, config);
    REQUIRE(run1.loss_history.size() == 40);
    for (double l : run1.loss_history) CHECK(std::isfinite(l));
    CHECK(run1.loss_history.back() < run1.loss_history.front());

    fb::VaeTrainResult run2 = fb::train_vae(windows, config);
    CHECK(run1.loss_history == run2.loss_history);
    for (std::size_t l = 0; l < run1.model.encoder.layers.size(); ++l)
        CHECK(run1.model.encoder.layers[l].weights.data ==
              run2.model.encoder.layers[l].weights.data);
    for (std::size_t l = 0; l < run1.model.decoder.layers.size(); ++l)
        CHECK(run1.model.decoder.layers[l].weights.data ==
              run2.model.decoder.layers[l].weights.data);

    SUBCASE("a different seed moves the parameters") {
        config.seed = 10;
        fb::VaeTrainResult other = fb::train_vae(windows, config);
        CHECK(other.model.encoder.layers[0].weights.data !=
              run1.model.encoder.layers[0].weights.data);
    }
    SUBCASE("scores are deterministic and track reconstruction quality") {
        double s1 = fb::vae_score(run1.model, windows[0]);
        double s2 = fb::vae_score(run1.model, windows[0]);
        CHECK(s1 == s2);
        CHECK(s1 >= 0.0);
        // A window far from both templates reconstructs worse than a
        // training window.
        fb::Vector odd(8, 1.0);
        CHECK(fb::vae_score(run1.model, odd) > s1);
    }
    SUBCASE("partial batches still train") {
        std::vector<fb::Vector> few(windows.begin(), windows.begin() + 10);
        config.epochs = 3;
        fb::VaeTrainResult small = fb::train_vae(few, config);
        CHECK(small.loss_history.size() == 3);
    }
}

TEST_CASE("training input validation") {
    fb::VaeTrainConfig config;
    config.epochs = 1;
    CHECK_THROWS_AS(fb::train_vae({}, config), fb::error);

    std::vector<fb::Vector> out_of_range = {{0.2, 1.5}};
    CHECK_THROWS_AS(fb::train_vae(out_of_range, config), fb::error);

    SUBCASE("strict range check can be disabled") {
        config.strict_input_range = false;
        config.epochs = 2;
        config.batch_size = 1;
        config.hidden1 = 3;
        config.hidden2 = 2;
        config.latent_dim = 1;
        CHECK_NOTHROW(fb::train_vae(out_of_range, config));
    }
    SUBCASE("inconsistent dimensions are rejected") {
        std::vector<fb::Vector> ragged = {{0.1, 0.2}, {0.3}};
        CHECK_THROWS_AS(fb::train_vae(ragged, config), fb::error);
    }
}
