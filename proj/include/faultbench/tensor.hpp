#pragma once

#include "faultbench/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace faultbench {

using Vector = std::vector<double>;

// Dense row-major matrix. Sizes here are desk-scale, so plain loops in
// double precision are the whole story.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    double* row(std::size_t i) { return data.data() + i * cols; }
    const double* row(std::size_t i) const { return data.data() + i * cols; }
};

enum class Activation : std::uint8_t { identity = 0, relu = 1, leaky_relu = 2, sigmoid = 3 };

struct DenseLayer {
    Matrix weights; // out_dim x in_dim
    Vector biases;  // out_dim
    Activation activation = Activation::identity;
    double leaky_alpha = 0.2; // only read for leaky_relu
    double l2_lambda = 0.0;   // weight decay on weights, never on biases
    bool dropout = false;     // whether train-mode dropout masks this layer's output

    std::size_t in_dim() const { return weights.cols; }
    std::size_t out_dim() const { return weights.rows; }
};

struct DenseNet {
    std::vector<DenseLayer> layers;

    std::size_t input_dim() const { return layers.front().in_dim(); }
    std::size_t output_dim() const { return layers.back().out_dim(); }
};

DenseLayer make_layer(std::size_t in_dim, std::size_t out_dim, Activation activation,
                      double leaky_alpha = 0.2, double l2_lambda = 0.0, bool dropout = false);

// Checks that adjacent layer dimensions chain and all entries are finite.
void validate(const DenseNet& net);

// Uniform on +/- sqrt(6 / (fan_in + fan_out)) per layer, biases zero. Draw
// order is layer by layer, weights row-major.
void init_weights(DenseNet& net, RngStream& rng);

enum class Mode { train, eval };

struct LayerTape {
    Vector input;  // x
    Vector pre;    // z = Wx + b
    Vector post;   // activation(z)
    Vector mask;   // scaled inverted-dropout mask; empty when dropout is off
    Vector output; // post (.) mask, or post when mask empty
};

struct Tape {
    std::vector<LayerTape> layers;
    const Vector& output() const { return layers.back().output; }
};

// Train mode applies inverted dropout to the output of every layer with
// dropout = true: each unit survives with probability 1 - dropout_rate and
// survivors scale by 1 / (1 - dropout_rate). Eval mode is a plain forward
// pass; rng may be null then (and when dropout_rate is 0).
Tape forward(const DenseNet& net, const Vector& input, Mode mode, double dropout_rate,
             RngStream* rng);

// Forward with externally supplied masks, one entry per layer (empty vector
// = no mask). Replays a recorded tape's dropout exactly; this is what makes
// the finite-difference gradient checks well-posed.
Tape forward_with_masks(const DenseNet& net, const Vector& input,
                        const std::vector<Vector>& masks);

struct NetGrads {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
    Vector input; // gradient w.r.t. the net input, for chaining nets

    static NetGrads zeros_like(const DenseNet& net);
    void add(const NetGrads& other);
    void scale(double s);
};

// Exact reverse-mode gradients of (loss + L2 penalty) w.r.t. every weight
// and bias, where output_gradient is d loss / d output. The L2 term
// contributes l2_lambda * w per weight. Dropout masks are replayed from the
// tape.
NetGrads backward(const DenseNet& net, const Tape& tape, const Vector& output_gradient);

// Sum over layers of (l2_lambda / 2) * sum(w^2); the loss term whose
// gradient is l2_lambda * w.
double l2_penalty(const DenseNet& net);

struct AdamConfig {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    AdamConfig config;
    std::int64_t step = 0;
    std::vector<Matrix> m_w, v_w;
    std::vector<Vector> m_b, v_b;

    static AdamState init(const DenseNet& net, const AdamConfig& config);
};

// One bias-corrected Adam update over all net parameters.
void adam_step(DenseNet& net, const NetGrads& grads, AdamState& state);

// Elementwise Adam recurrence on a single parameter; adam_step applies this
// kernel to every coordinate with the state's step counter already advanced.
void adam_update(double& theta, double g, double& m, double& v, std::int64_t t,
                 const AdamConfig& config);

// Mean squared componentwise difference.
double mse(const Vector& x, const Vector& xhat);
// d mse / d xhat.
Vector mse_grad(const Vector& x, const Vector& xhat);

// Binary cross-entropy averaged over components; predictions are clamped to
// [1e-7, 1 - 1e-7] before the logs.
double bce(const Vector& predictions, const Vector& targets);
double bce(double prediction, double target);
// d bce / d prediction; zero where the clamp is active.
Vector bce_grad(const Vector& predictions, const Vector& targets);

} // namespace faultbench
