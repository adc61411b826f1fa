#include "faultbench/gan.hpp"

#include "faultbench/common.hpp"

#include <algorithm>
#include <cmath>

namespace faultbench {

GanModel make_gan(std::size_t input_dim, std::size_t noise_dim, double leaky_alpha,
                  double dropout_rate) {
    require(input_dim >= 1 && noise_dim >= 1, "make_gan: dims must be >= 1");
    require(dropout_rate >= 0.0 && dropout_rate < 1.0, "make_gan: dropout_rate in [0,1)");

    GanModel m;
    m.input_dim = input_dim;
    m.noise_dim = noise_dim;
    m.leaky_alpha = leaky_alpha;
    m.dropout_rate = dropout_rate;

    m.generator.layers.push_back(make_layer(noise_dim, 256, Activation::leaky_relu, leaky_alpha));
    m.generator.layers.push_back(make_layer(256, 512, Activation::leaky_relu, leaky_alpha));
    m.generator.layers.push_back(make_layer(512, input_dim, Activation::sigmoid));

    m.discriminator.layers.push_back(
        make_layer(input_dim, 512, Activation::leaky_relu, leaky_alpha, 0.0, true));
    m.discriminator.layers.push_back(
        make_layer(512, 256, Activation::leaky_relu, leaky_alpha, 0.0, true));
    m.discriminator.layers.push_back(make_layer(256, 1, Activation::sigmoid));
    return m;
}

GanTrainResult train_gan(const std::vector<Vector>& windows, const GanTrainConfig& config) {
    require(!windows.empty(), "train_gan: no training windows");
    require(config.epochs >= 1, "train_gan: epochs must be >= 1");
    require(config.batch_size >= 1, "train_gan: batch_size must be >= 1");
    require(windows.size() >= config.batch_size,
            "train_gan: fewer windows than batch_size");
    std::size_t input_dim = windows.front().size();
    for (const auto& w : windows)
        require(w.size() == input_dim, "train_gan: inconsistent window dimensions");

    GanTrainResult result;
    result.model = make_gan(input_dim, config.noise_dim, config.leaky_alpha, config.dropout_rate);
    GanModel& model = result.model;

    RngStream rng(config.seed);
    init_weights(model.generator, rng);
    init_weights(model.discriminator, rng);

    AdamConfig adam_cfg;
    adam_cfg.learning_rate = config.learning_rate;
    adam_cfg.beta1 = config.beta1;
    adam_cfg.beta2 = config.beta2;
    AdamState g_state = AdamState::init(model.generator, adam_cfg);
    AdamState d_state = AdamState::init(model.discriminator, adam_cfg);

    std::vector<std::size_t> order(windows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    const Vector real_label{1.0};
    const Vector fake_label{0.0};
    std::size_t batches_per_epoch = windows.size() / config.batch_size;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        double d_loss_sum = 0.0, g_loss_sum = 0.0;

        for (std::size_t b = 0; b < batches_per_epoch; ++b) {
            std::size_t start = b * config.batch_size;
            double bn = static_cast<double>(config.batch_size);

            // Discriminator step: real batch labeled 1, generated batch
            // labeled 0, generator treated as a constant.
            NetGrads d_acc = NetGrads::zeros_like(model.discriminator);
            double d_loss = 0.0;
            for (std::size_t k = 0; k < config.batch_size; ++k) {
                const Vector& x = windows[order[start + k]];
                Tape tape = forward(model.discriminator, x, Mode::train, config.dropout_rate, &rng);
                d_loss += bce(tape.output()[0], 1.0);
                d_acc.add(backward(model.discriminator, tape,
                                   bce_grad(tape.output(), real_label)));
            }
            for (std::size_t k = 0; k < config.batch_size; ++k) {
                Vector z(model.noise_dim);
                for (double& v : z) v = rng.normal();
                Tape g_tape = forward(model.generator, z, Mode::eval, 0.0, nullptr);
                Tape tape = forward(model.discriminator, g_tape.output(), Mode::train,
                                    config.dropout_rate, &rng);
                d_loss += bce(tape.output()[0], 0.0);
                d_acc.add(backward(model.discriminator, tape,
                                   bce_grad(tape.output(), fake_label)));
            }
            d_acc.scale(0.5 / bn);
            adam_step(model.discriminator, d_acc, d_state);
            d_loss_sum += 0.5 * d_loss / bn;

            // Generator step: push D(G(z)) toward 1, discriminator frozen.
            NetGrads g_acc = NetGrads::zeros_like(model.generator);
            double g_loss = 0.0;
            for (std::size_t k = 0; k < config.batch_size; ++k) {
                Vector z(model.noise_dim);
                for (double& v : z) v = rng.normal();
                Tape g_tape = forward(model.generator, z, Mode::eval, 0.0, nullptr);
                Tape d_tape = forward(model.discriminator, g_tape.output(), Mode::train,
                                      config.dropout_rate, &rng);
                g_loss += bce(d_tape.output()[0], 1.0);
                NetGrads through_d =
                    backward(model.discriminator, d_tape, bce_grad(d_tape.output(), real_label));
                g_acc.add(backward(model.generator, g_tape, through_d.input));
            }
            g_acc.scale(1.0 / bn);
            adam_step(model.generator, g_acc, g_state);
            g_loss_sum += g_loss / bn;
        }
        result.d_loss_history.push_back(d_loss_sum / static_cast<double>(batches_per_epoch));
        result.g_loss_history.push_back(g_loss_sum / static_cast<double>(batches_per_epoch));
    }
    return result;
}

double gan_score_discriminator(const GanModel& model, const Vector& window) {
    require(window.size() == model.input_dim, "gan_score: dimension mismatch");
    Tape tape = forward(model.discriminator, window, Mode::eval, 0.0, nullptr);
    return 1.0 - tape.output()[0];
}

double gan_score_inversion_from(const GanModel& model, const Vector& window, Vector z,
                                const GanInversionConfig& config) {
    require(window.size() == model.input_dim, "gan_score_inversion: dimension mismatch");
    require(z.size() == model.noise_dim, "gan_score_inversion: latent dimension mismatch");
    require(config.n_steps >= 1, "gan_score_inversion: n_steps must be >= 1");

    auto objective = [&](const Vector& code, Tape* tape_out) {
        Tape tape = forward(model.generator, code, Mode::eval, 0.0, nullptr);
        double f = mse(window, tape.output());
        if (tape_out) *tape_out = std::move(tape);
        return f;
    };

    double lr = config.learning_rate;
    Tape tape;
    double f = objective(z, &tape);

    for (std::size_t step = 0; step < config.n_steps; ++step) {
        NetGrads g = backward(model.generator, tape, mse_grad(window, tape.output()));
        const Vector& dz = g.input;

        // Backtracking line search keeps the objective non-increasing.
        bool accepted = false;
        for (int tries = 0; tries < 40; ++tries) {
            Vector candidate(z.size());
            for (std::size_t j = 0; j < z.size(); ++j) candidate[j] = z[j] - lr * dz[j];
            Tape cand_tape;
            double fc = objective(candidate, &cand_tape);
            if (fc <= f) {
                z = std::move(candidate);
                f = fc;
                tape = std::move(cand_tape);
                accepted = true;
                break;
            }
            lr *= 0.5;
        }
        if (!accepted) break; // step size exhausted; z is (numerically) optimal
    }

    if (config.blend > 0.0)
        return (1.0 - config.blend) * f + config.blend * gan_score_discriminator(model, window);
    return f;
}

double gan_score_inversion(const GanModel& model, const Vector& window,
                           const GanInversionConfig& config) {
    RngStream rng(config.seed);
    Vector z(model.noise_dim);
    for (double& v : z) v = rng.normal();
    return gan_score_inversion_from(model, window, std::move(z), config);
}

} // namespace faultbench
