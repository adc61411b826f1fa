#include "faultbench/vae.hpp"

#include "faultbench/common.hpp"

#include <cmath>

namespace faultbench {

VaeModel make_vae(std::size_t input_dim, std::size_t hidden1, std::size_t hidden2,
                  std::size_t latent_dim, double l2_lambda, double kl_weight) {
    require(input_dim >= 1 && hidden1 >= 1 && hidden2 >= 1 && latent_dim >= 1,
            "make_vae: all dims must be >= 1");
    VaeModel m;
    m.input_dim = input_dim;
    m.latent_dim = latent_dim;
    m.l2_lambda = l2_lambda;
    m.kl_weight = kl_weight;

    m.encoder.layers.push_back(make_layer(input_dim, hidden1, Activation::relu, 0.2, l2_lambda));
    m.encoder.layers.push_back(make_layer(hidden1, hidden2, Activation::relu, 0.2, l2_lambda));
    m.encoder.layers.push_back(
        make_layer(hidden2, 2 * latent_dim, Activation::identity, 0.2, l2_lambda));

    m.decoder.layers.push_back(make_layer(latent_dim, hidden2, Activation::relu, 0.2, l2_lambda));
    m.decoder.layers.push_back(
        make_layer(hidden2, input_dim, Activation::sigmoid, 0.2, l2_lambda));
    return m;
}

double kl_divergence(const Vector& mu, const Vector& log_var) {
    require(mu.size() == log_var.size() && !mu.empty(), "kl_divergence: dimension mismatch");
    double s = 0.0;
    for (std::size_t j = 0; j < mu.size(); ++j)
        s += mu[j] * mu[j] + std::exp(log_var[j]) - 1.0 - log_var[j];
    return 0.5 * s;
}

VaeTape vae_forward_loss(const VaeModel& model, const Vector& input, const Vector& eps) {
    require(input.size() == model.input_dim, "vae: input dimension mismatch");
    require(eps.size() == model.latent_dim, "vae: noise dimension mismatch");

    VaeTape tape;
    tape.encoder_tape = forward(model.encoder, input, Mode::eval, 0.0, nullptr);

    const Vector& head = tape.encoder_tape.output();
    tape.mu.assign(head.begin(), head.begin() + static_cast<std::ptrdiff_t>(model.latent_dim));
    tape.log_var.assign(head.begin() + static_cast<std::ptrdiff_t>(model.latent_dim), head.end());
    tape.eps = eps;

    tape.z.resize(model.latent_dim);
    for (std::size_t j = 0; j < model.latent_dim; ++j)
        tape.z[j] = tape.mu[j] + std::exp(0.5 * tape.log_var[j]) * eps[j];

    tape.decoder_tape = forward(model.decoder, tape.z, Mode::eval, 0.0, nullptr);

    tape.reconstruction = mse(input, tape.decoder_tape.output());
    tape.kl = kl_divergence(tape.mu, tape.log_var);
    tape.loss = tape.reconstruction + model.kl_weight * tape.kl + l2_penalty(model.encoder) +
                l2_penalty(model.decoder);
    return tape;
}

VaeTape elbo_loss(const VaeModel& model, const Vector& input, RngStream& rng, bool strict) {
    if (strict) {
        for (double v : input)
            require(v >= 0.0 && v <= 1.0, "vae: input outside [0,1]; scale inputs first");
    }
    Vector eps(model.latent_dim);
    for (double& e : eps) e = rng.normal();
    return vae_forward_loss(model, input, eps);
}

VaeGrads vae_backward(const VaeModel& model, const VaeTape& tape, const Vector& input) {
    VaeGrads grads;
    Vector d_xhat = mse_grad(input, tape.decoder_tape.output());
    grads.decoder = backward(model.decoder, tape.decoder_tape, d_xhat);

    const Vector& dz = grads.decoder.input;
    Vector d_head(2 * model.latent_dim);
    for (std::size_t j = 0; j < model.latent_dim; ++j) {
        // z = mu + exp(lv/2) * eps; KL adds mu and (exp(lv) - 1)/2 terms.
        d_head[j] = dz[j] + model.kl_weight * tape.mu[j];
        d_head[model.latent_dim + j] =
            dz[j] * tape.eps[j] * 0.5 * std::exp(0.5 * tape.log_var[j]) +
            model.kl_weight * 0.5 * (std::exp(tape.log_var[j]) - 1.0);
    }
    grads.encoder = backward(model.encoder, tape.encoder_tape, d_head);
    return grads;
}

VaeTrainResult train_vae(const std::vector<Vector>& windows, const VaeTrainConfig& config) {
    require(!windows.empty(), "train_vae: no training windows");
    require(config.epochs >= 1, "train_vae: epochs must be >= 1");
    require(config.batch_size >= 1, "train_vae: batch_size must be >= 1");
    std::size_t input_dim = windows.front().size();
    for (const auto& w : windows)
        require(w.size() == input_dim, "train_vae: inconsistent window dimensions");
    if (config.strict_input_range) {
        for (const auto& w : windows)
            for (double v : w)
                require(v >= 0.0 && v <= 1.0, "train_vae: input outside [0,1]; scale inputs first");
    }

    VaeTrainResult result;
    result.model = make_vae(input_dim, config.hidden1, config.hidden2, config.latent_dim,
                            config.l2_lambda, config.kl_weight);
    VaeModel& model = result.model;

    RngStream rng(config.seed);
    init_weights(model.encoder, rng);
    init_weights(model.decoder, rng);

    AdamConfig adam_cfg;
    adam_cfg.learning_rate = config.learning_rate;
    AdamState enc_state = AdamState::init(model.encoder, adam_cfg);
    AdamState dec_state = AdamState::init(model.decoder, adam_cfg);

    std::vector<std::size_t> order(windows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t batches = 0;

        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            std::size_t end = std::min(start + config.batch_size, order.size());
            double batch_n = static_cast<double>(end - start);

            NetGrads enc_acc = NetGrads::zeros_like(model.encoder);
            NetGrads dec_acc = NetGrads::zeros_like(model.decoder);
            double batch_loss = 0.0;

            for (std::size_t k = start; k < end; ++k) {
                const Vector& x = windows[order[k]];
                VaeTape tape = elbo_loss(model, x, rng, false);
                VaeGrads g = vae_backward(model, tape, x);
                enc_acc.add(g.encoder);
                dec_acc.add(g.decoder);
                batch_loss += tape.loss;
            }
            enc_acc.scale(1.0 / batch_n);
            dec_acc.scale(1.0 / batch_n);
            adam_step(model.encoder, enc_acc, enc_state);
            adam_step(model.decoder, dec_acc, dec_state);

            epoch_loss += batch_loss / batch_n;
            ++batches;
        }
        result.loss_history.push_back(epoch_loss / static_cast<double>(batches));
    }
    return result;
}

double vae_score(const VaeModel& model, const Vector& window) {
    require(window.size() == model.input_dim, "vae_score: dimension mismatch");
    Tape enc = forward(model.encoder, window, Mode::eval, 0.0, nullptr);
    Vector mu(enc.output().begin(),
              enc.output().begin() + static_cast<std::ptrdiff_t>(model.latent_dim));
    Tape dec = forward(model.decoder, mu, Mode::eval, 0.0, nullptr);
    return mse(window, dec.output());
}

} // namespace faultbench
