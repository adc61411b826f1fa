#pragma once

#include "faultbench/tensor.hpp"

#include <cstdint>
#include <vector>

namespace faultbench {

// Fully connected VAE. The encoder is a two-layer ReLU trunk plus a linear
// head emitting [mu | log-variance]; the decoder is one ReLU hidden layer
// into a sigmoid output, so reconstructions live in (0,1) and inputs are
// expected in [0,1].
struct VaeModel {
    DenseNet encoder; // input -> h1 -> h2 (relu), head h2 -> 2*latent (identity)
    DenseNet decoder; // latent -> h2 (relu) -> input (sigmoid)
    std::size_t input_dim = 0;
    std::size_t latent_dim = 0;
    double l2_lambda = 0.0;
    double kl_weight = 1.0;
};

struct VaeTrainConfig {
    std::size_t epochs = 300;
    std::size_t batch_size = 32;
    double learning_rate = 0.001;
    std::uint64_t seed = 0;
    double l2_lambda = 1e-4;
    double kl_weight = 1.0;
    std::size_t hidden1 = 16;
    std::size_t hidden2 = 8;
    std::size_t latent_dim = 4;
    bool strict_input_range = true; // reject training inputs outside [0,1]
};

struct VaeTape {
    Tape encoder_tape;
    Vector mu, log_var, eps, z;
    Tape decoder_tape;
    double reconstruction = 0.0; // mse(input, decode(z))
    double kl = 0.0;
    double loss = 0.0; // reconstruction + kl_weight * kl + L2 penalties
};

struct VaeGrads {
    NetGrads encoder;
    NetGrads decoder;
};

struct VaeTrainResult {
    VaeModel model;
    std::vector<double> loss_history; // epoch means
};

// Architecture only; weights are zero until init_weights / train.
VaeModel make_vae(std::size_t input_dim, std::size_t hidden1, std::size_t hidden2,
                  std::size_t latent_dim, double l2_lambda, double kl_weight = 1.0);

// KL(N(mu, exp(log_var)) || N(0, I)) = 1/2 sum(mu^2 + exp(lv) - 1 - lv).
double kl_divergence(const Vector& mu, const Vector& log_var);

// Reparameterized forward pass and composite loss with the given noise draw;
// the frozen-noise form is what the finite-difference checks differentiate.
VaeTape vae_forward_loss(const VaeModel& model, const Vector& input, const Vector& eps);

// Draws eps from rng, then vae_forward_loss. strict enforces input in [0,1].
VaeTape elbo_loss(const VaeModel& model, const Vector& input, RngStream& rng,
                  bool strict = true);

// Exact gradients of tape.loss w.r.t. all encoder and decoder parameters,
// including the reparameterized sampling path and the L2 terms.
VaeGrads vae_backward(const VaeModel& model, const VaeTape& tape, const Vector& input);

// Seeded mini-batch Adam for config.epochs; weight init, batch order and
// noise draws all come from config.seed, so identical configs give identical
// parameters.
VaeTrainResult train_vae(const std::vector<Vector>& windows, const VaeTrainConfig& config);

// Deterministic anomaly score: mse(window, decode(mu(window))), latent mean
// only, no sampling.
double vae_score(const VaeModel& model, const Vector& window);

} // namespace faultbench
