#pragma once

#include "faultbench/tensor.hpp"

#include <cstdint>
#include <vector>

namespace faultbench {

// Dense GAN on flattened windows scaled to [0,1]. Generator widens
// 256 -> 512 into the window dimension; the discriminator mirrors it
// (512 -> 256 -> 1) with dropout on its hidden layers.
struct GanModel {
    DenseNet generator;     // noise -> 256 -> 512 -> input (leaky hidden, sigmoid out)
    DenseNet discriminator; // input -> 512 -> 256 -> 1 (leaky + dropout hidden, sigmoid out)
    std::size_t input_dim = 0;
    std::size_t noise_dim = 64;
    double leaky_alpha = 0.2;
    double dropout_rate = 0.4;
};

struct GanTrainConfig {
    std::size_t epochs = 300;
    std::size_t batch_size = 64;
    double learning_rate = 0.0002;
    double beta1 = 0.5;
    double beta2 = 0.999;
    std::uint64_t seed = 0;
    std::size_t noise_dim = 64;
    double leaky_alpha = 0.2;
    double dropout_rate = 0.4;
};

struct GanTrainResult {
    GanModel model;
    std::vector<double> d_loss_history; // epoch means
    std::vector<double> g_loss_history;
};

struct GanInversionConfig {
    std::size_t n_steps = 100;
    double learning_rate = 0.05;
    std::uint64_t seed = 0;
    double blend = 0.0; // weight of the discriminator term in the final score
};

GanModel make_gan(std::size_t input_dim, std::size_t noise_dim, double leaky_alpha,
                  double dropout_rate);

// Alternating Adam: per batch, one discriminator step (BCE, real labeled 1,
// generated labeled 0, dropout active) then one generator step (BCE pushing
// D(G(z)) toward 1 with D frozen). Separate Adam states per network, fully
// seeded. Trailing windows that do not fill a batch are skipped.
GanTrainResult train_gan(const std::vector<Vector>& windows, const GanTrainConfig& config);

// 1 - D(window) with dropout off; higher means more anomalous.
double gan_score_discriminator(const GanModel& model, const Vector& window);

// AnoGAN-style score: descend a latent code z to minimize mse(G(z), window)
// with backtracking on the step size, so the objective never increases over
// accepted steps. Score = final reconstruction error, optionally blended
// with the discriminator score by config.blend.
double gan_score_inversion(const GanModel& model, const Vector& window,
                           const GanInversionConfig& config);

// Same, but starting from an explicit latent code.
double gan_score_inversion_from(const GanModel& model, const Vector& window, Vector z,
                                const GanInversionConfig& config);

} // namespace faultbench
