#include "faultbench/tensor.hpp"

#include "faultbench/common.hpp"

#include <cmath>

namespace faultbench {

namespace {

constexpr double kBceClamp = 1e-7;

double activate(Activation a, double z, double alpha) {
    switch (a) {
    case Activation::identity: return z;
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::leaky_relu: return z > 0.0 ? z : alpha * z;
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-z));
    }
    return z;
}

// Derivative in terms of pre-activation z and activation value a.
double activate_grad(Activation act, double z, double a, double alpha) {
    switch (act) {
    case Activation::identity: return 1.0;
    case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::leaky_relu: return z > 0.0 ? 1.0 : alpha;
    case Activation::sigmoid: return a * (1.0 - a);
    }
    return 1.0;
}

Tape run_forward(const DenseNet& net, const Vector& input, Mode mode, double dropout_rate,
                 RngStream* rng, const std::vector<Vector>* fixed_masks) {
    require(!net.layers.empty(), "forward: empty net");
    require(input.size() == net.input_dim(), "forward: input dimension mismatch");
    require(dropout_rate >= 0.0 && dropout_rate < 1.0, "forward: dropout_rate must be in [0,1)");

    Tape tape;
    tape.layers.resize(net.layers.size());
    const Vector* x = &input;

    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const DenseLayer& layer = net.layers[l];
        require(x->size() == layer.in_dim(), "forward: layer dimension mismatch");
        LayerTape& lt = tape.layers[l];
        lt.input = *x;

        std::size_t out = layer.out_dim(), in = layer.in_dim();
        lt.pre.resize(out);
        for (std::size_t i = 0; i < out; ++i) {
            const double* w = layer.weights.row(i);
            double z = layer.biases[i];
            for (std::size_t j = 0; j < in; ++j) z += w[j] * (*x)[j];
            lt.pre[i] = z;
        }

        lt.post.resize(out);
        for (std::size_t i = 0; i < out; ++i)
            lt.post[i] = activate(layer.activation, lt.pre[i], layer.leaky_alpha);

        if (fixed_masks) {
            const Vector& m = (*fixed_masks)[l];
            if (!m.empty()) {
                require(m.size() == out, "forward: mask dimension mismatch");
                lt.mask = m;
            }
        } else if (mode == Mode::train && layer.dropout && dropout_rate > 0.0) {
            require(rng != nullptr, "forward: train-mode dropout needs an rng");
            double keep_scale = 1.0 / (1.0 - dropout_rate);
            lt.mask.resize(out);
            for (std::size_t i = 0; i < out; ++i)
                lt.mask[i] = rng->uniform01() >= dropout_rate ? keep_scale : 0.0;
        }

        if (!lt.mask.empty()) {
            lt.output.resize(out);
            for (std::size_t i = 0; i < out; ++i) lt.output[i] = lt.post[i] * lt.mask[i];
        } else {
            lt.output = lt.post;
        }
        x = &lt.output;
    }
    return tape;
}

} // namespace

DenseLayer make_layer(std::size_t in_dim, std::size_t out_dim, Activation activation,
                      double leaky_alpha, double l2_lambda, bool dropout) {
    DenseLayer layer;
    layer.weights = Matrix(out_dim, in_dim);
    layer.biases.assign(out_dim, 0.0);
    layer.activation = activation;
    layer.leaky_alpha = leaky_alpha;
    layer.l2_lambda = l2_lambda;
    layer.dropout = dropout;
    return layer;
}

void validate(const DenseNet& net) {
    require(!net.layers.empty(), "net: no layers");
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const DenseLayer& layer = net.layers[l];
        require(layer.weights.rows >= 1 && layer.weights.cols >= 1, "net: empty layer");
        require(layer.biases.size() == layer.weights.rows, "net: bias size mismatch");
        require(layer.l2_lambda >= 0.0, "net: negative l2_lambda");
        if (l > 0)
            require(net.layers[l - 1].out_dim() == layer.in_dim(),
                    "net: adjacent layer dimensions do not chain");
        for (double w : layer.weights.data)
            require(std::isfinite(w), "net: non-finite weight");
        for (double b : layer.biases)
            require(std::isfinite(b), "net: non-finite bias");
    }
}

void init_weights(DenseNet& net, RngStream& rng) {
    for (auto& layer : net.layers) {
        double bound =
            std::sqrt(6.0 / static_cast<double>(layer.in_dim() + layer.out_dim()));
        for (double& w : layer.weights.data) w = rng.uniform(-bound, bound);
        for (double& b : layer.biases) b = 0.0;
    }
}

Tape forward(const DenseNet& net, const Vector& input, Mode mode, double dropout_rate,
             RngStream* rng) {
    return run_forward(net, input, mode, dropout_rate, rng, nullptr);
}

Tape forward_with_masks(const DenseNet& net, const Vector& input,
                        const std::vector<Vector>& masks) {
    require(masks.size() == net.layers.size(), "forward_with_masks: one mask slot per layer");
    return run_forward(net, input, Mode::train, 0.0, nullptr, &masks);
}

NetGrads NetGrads::zeros_like(const DenseNet& net) {
    NetGrads g;
    g.weights.reserve(net.layers.size());
    g.biases.reserve(net.layers.size());
    for (const auto& layer : net.layers) {
        g.weights.emplace_back(layer.weights.rows, layer.weights.cols);
        g.biases.emplace_back(layer.biases.size(), 0.0);
    }
    g.input.assign(net.input_dim(), 0.0);
    return g;
}

void NetGrads::add(const NetGrads& other) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        for (std::size_t k = 0; k < weights[l].data.size(); ++k)
            weights[l].data[k] += other.weights[l].data[k];
        for (std::size_t k = 0; k < biases[l].size(); ++k)
            biases[l][k] += other.biases[l][k];
    }
    for (std::size_t k = 0; k < input.size(); ++k) input[k] += other.input[k];
}

void NetGrads::scale(double s) {
    for (auto& w : weights)
        for (double& v : w.data) v *= s;
    for (auto& b : biases)
        for (double& v : b) v *= s;
    for (double& v : input) v *= s;
}

NetGrads backward(const DenseNet& net, const Tape& tape, const Vector& output_gradient) {
    require(tape.layers.size() == net.layers.size(), "backward: tape does not match net");
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        require(tape.layers[l].input.size() == net.layers[l].in_dim() &&
                    tape.layers[l].pre.size() == net.layers[l].out_dim(),
                "backward: tape does not match net");
    }
    require(output_gradient.size() == net.output_dim(), "backward: output gradient size mismatch");

    NetGrads grads = NetGrads::zeros_like(net);
    Vector g = output_gradient; // d loss / d layer-output, flowing backwards

    for (std::size_t l = net.layers.size(); l-- > 0;) {
        const DenseLayer& layer = net.layers[l];
        const LayerTape& lt = tape.layers[l];
        std::size_t out = layer.out_dim(), in = layer.in_dim();

        Vector dz(out);
        for (std::size_t i = 0; i < out; ++i) {
            double gi = lt.mask.empty() ? g[i] : g[i] * lt.mask[i];
            dz[i] = gi * activate_grad(layer.activation, lt.pre[i], lt.post[i],
                                       layer.leaky_alpha);
        }

        Matrix& dW = grads.weights[l];
        for (std::size_t i = 0; i < out; ++i) {
            double* dw = dW.row(i);
            const double* x = lt.input.data();
            double d = dz[i];
            for (std::size_t j = 0; j < in; ++j) dw[j] = d * x[j];
        }
        if (layer.l2_lambda > 0.0) {
            for (std::size_t k = 0; k < dW.data.size(); ++k)
                dW.data[k] += layer.l2_lambda * layer.weights.data[k];
        }
        grads.biases[l] = dz;

        Vector dx(in, 0.0);
        for (std::size_t i = 0; i < out; ++i) {
            const double* w = layer.weights.row(i);
            double d = dz[i];
            for (std::size_t j = 0; j < in; ++j) dx[j] += d * w[j];
        }
        g = std::move(dx);
    }
    grads.input = std::move(g);
    return grads;
}

double l2_penalty(const DenseNet& net) {
    double total = 0.0;
    for (const auto& layer : net.layers) {
        if (layer.l2_lambda <= 0.0) continue;
        double ss = 0.0;
        for (double w : layer.weights.data) ss += w * w;
        total += 0.5 * layer.l2_lambda * ss;
    }
    return total;
}

AdamState AdamState::init(const DenseNet& net, const AdamConfig& config) {
    AdamState s;
    s.config = config;
    for (const auto& layer : net.layers) {
        s.m_w.emplace_back(layer.weights.rows, layer.weights.cols);
        s.v_w.emplace_back(layer.weights.rows, layer.weights.cols);
        s.m_b.emplace_back(layer.biases.size(), 0.0);
        s.v_b.emplace_back(layer.biases.size(), 0.0);
    }
    return s;
}

void adam_update(double& theta, double g, double& m, double& v, std::int64_t t,
                 const AdamConfig& config) {
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g * g;
    double mhat = m / (1.0 - std::pow(config.beta1, static_cast<double>(t)));
    double vhat = v / (1.0 - std::pow(config.beta2, static_cast<double>(t)));
    theta -= config.learning_rate * mhat / (std::sqrt(vhat) + config.epsilon);
}

void adam_step(DenseNet& net, const NetGrads& grads, AdamState& state) {
    require(state.m_w.size() == net.layers.size() && grads.weights.size() == net.layers.size(),
            "adam_step: shape mismatch");
    ++state.step;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        DenseLayer& layer = net.layers[l];
        require(grads.weights[l].data.size() == layer.weights.data.size() &&
                    grads.biases[l].size() == layer.biases.size(),
                "adam_step: shape mismatch");
        for (std::size_t k = 0; k < layer.weights.data.size(); ++k)
            adam_update(layer.weights.data[k], grads.weights[l].data[k], state.m_w[l].data[k],
                        state.v_w[l].data[k], state.step, state.config);
        for (std::size_t k = 0; k < layer.biases.size(); ++k)
            adam_update(layer.biases[k], grads.biases[l][k], state.m_b[l][k], state.v_b[l][k],
                        state.step, state.config);
    }
}

double mse(const Vector& x, const Vector& xhat) {
    require(x.size() == xhat.size() && !x.empty(), "mse: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double d = xhat[i] - x[i];
        s += d * d;
    }
    return s / static_cast<double>(x.size());
}

Vector mse_grad(const Vector& x, const Vector& xhat) {
    require(x.size() == xhat.size() && !x.empty(), "mse_grad: dimension mismatch");
    Vector g(x.size());
    double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = 2.0 * (xhat[i] - x[i]) / n;
    return g;
}

double bce(double prediction, double target) {
    double p = prediction;
    if (p < kBceClamp) p = kBceClamp;
    if (p > 1.0 - kBceClamp) p = 1.0 - kBceClamp;
    return -(target * std::log(p) + (1.0 - target) * std::log(1.0 - p));
}

double bce(const Vector& predictions, const Vector& targets) {
    require(predictions.size() == targets.size() && !predictions.empty(),
            "bce: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) s += bce(predictions[i], targets[i]);
    return s / static_cast<double>(predictions.size());
}

Vector bce_grad(const Vector& predictions, const Vector& targets) {
    require(predictions.size() == targets.size() && !predictions.empty(),
            "bce_grad: dimension mismatch");
    Vector g(predictions.size(), 0.0);
    double n = static_cast<double>(predictions.size());
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        double p = predictions[i];
        if (p < kBceClamp || p > 1.0 - kBceClamp) continue; // clamp active: flat
        g[i] = (p - targets[i]) / (p * (1.0 - p)) / n;
    }
    return g;
}

} // namespace faultbench
