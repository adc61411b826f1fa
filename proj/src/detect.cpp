#include "faultbench/detect.hpp"

#include "faultbench/common.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <utility>

namespace faultbench {

namespace {

constexpr char kMagic[4] = {'F', 'B', 'N', 'D'};
constexpr std::uint32_t kBundleVersion = 1;

// Upper bound on any serialized element count; a corrupt length field fails
// here instead of attempting a huge allocation.
constexpr std::uint64_t kMaxCount = 100'000'000ull;

} // namespace

const char* to_string(ModelKind kind) {
    switch (kind) {
    case ModelKind::hmm: return "hmm";
    case ModelKind::vae: return "vae";
    case ModelKind::gan: return "gan";
    }
    fail("unknown model kind");
}

const char* to_string(FeatureMode mode) {
    switch (mode) {
    case FeatureMode::stats: return "stats";
    case FeatureMode::raw: return "raw";
    }
    fail("unknown feature mode");
}

const char* to_string(Aggregation aggregation) {
    switch (aggregation) {
    case Aggregation::max: return "max";
    case Aggregation::mean: return "mean";
    }
    fail("unknown aggregation");
}

Threshold calibrate(const std::vector<double>& training_scores, double fpr_tolerance) {
    require(!training_scores.empty(), "calibrate needs at least one training score");
    require(fpr_tolerance >= 0.0 && fpr_tolerance < 1.0,
            "false-positive tolerance must lie in [0, 1)");
    for (double s : training_scores)
        require(std::isfinite(s), "calibration scores must be finite");

    std::vector<double> sorted = training_scores;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    auto rank = static_cast<std::size_t>(std::ceil((1.0 - fpr_tolerance) * static_cast<double>(n)));
    rank = std::min(std::max<std::size_t>(rank, 1), n);

    Threshold t;
    t.value = sorted[rank - 1];
    t.fpr_tolerance = fpr_tolerance;
    t.calibration_size = n;
    return t;
}

std::vector<double> calibrate_kfold(const std::vector<double>& training_scores,
                                    double fpr_tolerance, std::size_t k, std::uint64_t seed) {
    require(k >= 2, "k-fold calibration needs k >= 2");
    require(training_scores.size() >= k, "k-fold calibration needs at least k scores");

    RngStream rng(seed);
    std::vector<std::size_t> order = rng.permutation(training_scores.size());

    std::vector<double> thresholds;
    thresholds.reserve(k);
    for (std::size_t fold = 0; fold < k; ++fold) {
        std::vector<double> rest;
        rest.reserve(training_scores.size());
        for (std::size_t i = 0; i < order.size(); ++i)
            if (i % k != fold) rest.push_back(training_scores[order[i]]);
        thresholds.push_back(calibrate(rest, fpr_tolerance).value);
    }
    return thresholds;
}

double aggregate(const std::vector<double>& window_scores, Aggregation method) {
    require(!window_scores.empty(), "aggregate needs at least one window score");
    if (method == Aggregation::max) return *std::max_element(window_scores.begin(), window_scores.end());
    double sum = 0.0;
    for (double s : window_scores) sum += s;
    return sum / static_cast<double>(window_scores.size());
}

namespace {

Vector minmax_remap(const PipelineConfig& pipeline, const Vector& v) {
    const auto& lo = pipeline.minmax_lo;
    const auto& hi = pipeline.minmax_hi;
    require(lo.size() == hi.size(), "min-max bounds must have matching lengths");
    require(lo.size() == 1 || lo.size() == v.size(),
            "min-max bounds must be scalar or match the vector dimension");
    Vector out(v.size());
    for (std::size_t j = 0; j < v.size(); ++j) {
        const std::size_t b = lo.size() == 1 ? 0 : j;
        const double span = hi[b] - lo[b];
        out[j] = span > 0.0 ? (v[j] - lo[b]) / span : 0.5;
    }
    return out;
}

} // namespace

std::vector<Vector> pipeline_vectors(const PipelineConfig& pipeline, const RawSequence& sequence) {
    require(pipeline.window_size > 0, "window size must be positive");
    require(pipeline.stride > 0, "stride must be positive");

    std::vector<Window> windows = make_windows(sequence, pipeline.window_size, pipeline.stride);
    std::vector<Vector> out;
    out.reserve(windows.size());
    for (const Window& w : windows) {
        Vector v = pipeline.feature_mode == FeatureMode::stats ? extract_features(w).as_vector()
                                                               : w.values;
        if (!pipeline.scaler.means.empty()) v = transform(pipeline.scaler, v);
        if (!pipeline.minmax_lo.empty()) v = minmax_remap(pipeline, v);
        out.push_back(std::move(v));
    }
    return out;
}

std::vector<double> window_scores(const ModelBundle& bundle, const RawSequence& sequence) {
    std::vector<Vector> vecs = pipeline_vectors(bundle.pipeline, sequence);
    if (vecs.empty()) return {};

    switch (bundle.kind) {
    case ModelKind::hmm:
        return bundle.hmm_score_mode == HmmScoreMode::reconstruction
                   ? window_errors(bundle.hmm, vecs)
                   : nll_window_scores(bundle.hmm, vecs);
    case ModelKind::vae: {
        std::vector<double> scores;
        scores.reserve(vecs.size());
        for (const Vector& v : vecs) scores.push_back(vae_score(bundle.vae, v));
        return scores;
    }
    case ModelKind::gan: {
        std::vector<double> scores;
        scores.reserve(vecs.size());
        for (const Vector& v : vecs) {
            scores.push_back(bundle.gan_score_mode == GanScoreMode::discriminator
                                 ? gan_score_discriminator(bundle.gan, v)
                                 : gan_score_inversion(bundle.gan, v, bundle.gan_inversion));
        }
        return scores;
    }
    }
    fail("unknown model kind");
}

std::optional<double> sequence_score(const ModelBundle& bundle, const RawSequence& sequence) {
    std::vector<double> scores = window_scores(bundle, sequence);
    if (scores.empty()) return std::nullopt;
    return aggregate(scores, bundle.pipeline.aggregation);
}

std::vector<Verdict> judge(const ModelBundle& bundle, const Dataset& dataset) {
    require(bundle.threshold.has_value(), "bundle carries no threshold; calibrate before judging");

    std::vector<Verdict> verdicts;
    verdicts.reserve(dataset.sequences.size());
    for (const RawSequence& sequence : dataset.sequences) {
        Verdict v;
        v.sequence_id = sequence.id;
        v.true_label = sequence.label;
        std::optional<double> score = sequence_score(bundle, sequence);
        if (!score) {
            v.unscorable = true;
        } else {
            v.score = *score;
            v.flagged = *score > bundle.threshold->value;
        }
        verdicts.push_back(std::move(v));
    }
    return verdicts;
}

// --- serialization ---------------------------------------------------------
//
// All multi-byte fields are little-endian regardless of host order; doubles
// travel as their IEEE-754 bit patterns. docs/BUNDLE_FORMAT.md describes the
// byte layout.

namespace {

void put_bytes(std::ostream& out, const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    require(out.good(), "write to bundle stream failed");
}

void put_u8(std::ostream& out, std::uint8_t v) { put_bytes(out, &v, 1); }

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    put_bytes(out, b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    put_bytes(out, b, 8);
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void put_vec(std::ostream& out, const Vector& v) {
    put_u64(out, v.size());
    for (double x : v) put_f64(out, x);
}

void put_vecs(std::ostream& out, const std::vector<Vector>& vs) {
    put_u64(out, vs.size());
    for (const Vector& v : vs) put_vec(out, v);
}

void put_matrix(std::ostream& out, const Matrix& m) {
    put_u64(out, m.rows);
    put_u64(out, m.cols);
    for (double x : m.data) put_f64(out, x);
}

void put_net(std::ostream& out, const DenseNet& net) {
    put_u64(out, net.layers.size());
    for (const DenseLayer& layer : net.layers) {
        put_matrix(out, layer.weights);
        put_vec(out, layer.biases);
        put_u8(out, static_cast<std::uint8_t>(layer.activation));
        put_f64(out, layer.leaky_alpha);
        put_f64(out, layer.l2_lambda);
        put_u8(out, layer.dropout ? 1 : 0);
    }
}

void get_bytes(std::istream& in, void* p, std::size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    require(static_cast<std::size_t>(in.gcount()) == n, "model bundle is truncated");
}

std::uint8_t get_u8(std::istream& in) {
    std::uint8_t v = 0;
    get_bytes(in, &v, 1);
    return v;
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    get_bytes(in, b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::istream& in) {
    unsigned char b[8];
    get_bytes(in, b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

std::uint64_t get_count(std::istream& in) {
    std::uint64_t n = get_u64(in);
    require(n <= kMaxCount, "model bundle declares an implausible element count");
    return n;
}

Vector get_vec(std::istream& in) {
    const std::uint64_t n = get_count(in);
    Vector v(n);
    for (std::uint64_t i = 0; i < n; ++i) v[i] = get_f64(in);
    return v;
}

std::vector<Vector> get_vecs(std::istream& in) {
    const std::uint64_t n = get_count(in);
    std::vector<Vector> vs(n);
    for (std::uint64_t i = 0; i < n; ++i) vs[i] = get_vec(in);
    return vs;
}

Matrix get_matrix(std::istream& in) {
    const std::uint64_t rows = get_count(in);
    const std::uint64_t cols = get_count(in);
    require(rows == 0 || cols <= kMaxCount / std::max<std::uint64_t>(rows, 1),
            "model bundle declares an implausible matrix size");
    Matrix m(rows, cols);
    for (double& x : m.data) x = get_f64(in);
    return m;
}

DenseNet get_net(std::istream& in) {
    const std::uint64_t n_layers = get_count(in);
    require(n_layers >= 1, "serialized network has no layers");
    DenseNet net;
    net.layers.resize(n_layers);
    for (DenseLayer& layer : net.layers) {
        layer.weights = get_matrix(in);
        layer.biases = get_vec(in);
        const std::uint8_t act = get_u8(in);
        require(act <= static_cast<std::uint8_t>(Activation::sigmoid),
                "serialized network has an unknown activation");
        layer.activation = static_cast<Activation>(act);
        layer.leaky_alpha = get_f64(in);
        layer.l2_lambda = get_f64(in);
        layer.dropout = get_u8(in) != 0;
        require(layer.biases.size() == layer.weights.rows,
                "serialized layer bias length does not match its weight rows");
    }
    validate(net);
    return net;
}

} // namespace

void save_bundle(const ModelBundle& bundle, std::ostream& out) {
    put_bytes(out, kMagic, 4);
    put_u32(out, kBundleVersion);
    put_u8(out, static_cast<std::uint8_t>(bundle.kind));

    const PipelineConfig& p = bundle.pipeline;
    put_u64(out, p.window_size);
    put_u64(out, p.stride);
    put_u8(out, static_cast<std::uint8_t>(p.feature_mode));
    put_u8(out, static_cast<std::uint8_t>(p.aggregation));
    put_vec(out, p.scaler.means);
    put_vec(out, p.scaler.stds);
    put_vec(out, p.minmax_lo);
    put_vec(out, p.minmax_hi);

    put_u64(out, bundle.train_seed);

    put_u8(out, bundle.threshold.has_value() ? 1 : 0);
    if (bundle.threshold) {
        put_f64(out, bundle.threshold->value);
        put_f64(out, bundle.threshold->fpr_tolerance);
        put_u64(out, bundle.threshold->calibration_size);
    }

    switch (bundle.kind) {
    case ModelKind::hmm:
        put_u64(out, bundle.hmm.n_states);
        put_u8(out, static_cast<std::uint8_t>(bundle.hmm_score_mode));
        put_vec(out, bundle.hmm.pi);
        put_matrix(out, bundle.hmm.trans);
        put_vecs(out, bundle.hmm.means);
        put_vecs(out, bundle.hmm.vars);
        break;
    case ModelKind::vae:
        put_u64(out, bundle.vae.input_dim);
        put_u64(out, bundle.vae.latent_dim);
        put_f64(out, bundle.vae.l2_lambda);
        put_f64(out, bundle.vae.kl_weight);
        put_net(out, bundle.vae.encoder);
        put_net(out, bundle.vae.decoder);
        break;
    case ModelKind::gan:
        put_u64(out, bundle.gan.input_dim);
        put_u64(out, bundle.gan.noise_dim);
        put_f64(out, bundle.gan.leaky_alpha);
        put_f64(out, bundle.gan.dropout_rate);
        put_u8(out, static_cast<std::uint8_t>(bundle.gan_score_mode));
        put_u64(out, bundle.gan_inversion.n_steps);
        put_f64(out, bundle.gan_inversion.learning_rate);
        put_u64(out, bundle.gan_inversion.seed);
        put_f64(out, bundle.gan_inversion.blend);
        put_net(out, bundle.gan.generator);
        put_net(out, bundle.gan.discriminator);
        break;
    }
    out.flush();
    require(out.good(), "write to bundle stream failed");
}

ModelBundle load_bundle(std::istream& in) {
    char magic[4];
    get_bytes(in, magic, 4);
    require(std::memcmp(magic, kMagic, 4) == 0, "stream is not a model bundle");

    const std::uint32_t version = get_u32(in);
    if (version != kBundleVersion) {
        std::ostringstream msg;
        msg << "unsupported bundle version " << version << " (expected " << kBundleVersion << ")";
        fail(msg.str());
    }

    ModelBundle bundle;
    const std::uint8_t kind = get_u8(in);
    require(kind <= static_cast<std::uint8_t>(ModelKind::gan), "bundle has an unknown model kind");
    bundle.kind = static_cast<ModelKind>(kind);

    PipelineConfig& p = bundle.pipeline;
    p.window_size = get_count(in);
    p.stride = get_count(in);
    require(p.window_size > 0 && p.stride > 0, "bundle pipeline has a zero window size or stride");
    const std::uint8_t mode = get_u8(in);
    require(mode <= static_cast<std::uint8_t>(FeatureMode::raw),
            "bundle has an unknown feature mode");
    p.feature_mode = static_cast<FeatureMode>(mode);
    const std::uint8_t agg = get_u8(in);
    require(agg <= static_cast<std::uint8_t>(Aggregation::mean),
            "bundle has an unknown aggregation");
    p.aggregation = static_cast<Aggregation>(agg);
    p.scaler.means = get_vec(in);
    p.scaler.stds = get_vec(in);
    require(p.scaler.means.size() == p.scaler.stds.size(),
            "bundle scaler means and stds disagree in length");
    p.minmax_lo = get_vec(in);
    p.minmax_hi = get_vec(in);
    require(p.minmax_lo.size() == p.minmax_hi.size(),
            "bundle min-max bounds disagree in length");

    bundle.train_seed = get_u64(in);

    if (get_u8(in) != 0) {
        Threshold t;
        t.value = get_f64(in);
        t.fpr_tolerance = get_f64(in);
        t.calibration_size = get_count(in);
        bundle.threshold = t;
    }

    switch (bundle.kind) {
    case ModelKind::hmm: {
        bundle.hmm.n_states = get_count(in);
        const std::uint8_t sm = get_u8(in);
        require(sm <= static_cast<std::uint8_t>(HmmScoreMode::nll),
                "bundle has an unknown score mode");
        bundle.hmm_score_mode = static_cast<HmmScoreMode>(sm);
        bundle.hmm.pi = get_vec(in);
        bundle.hmm.trans = get_matrix(in);
        bundle.hmm.means = get_vecs(in);
        bundle.hmm.vars = get_vecs(in);
        const std::size_t k = bundle.hmm.n_states;
        require(k >= 1, "bundle holds a zero-state model");
        require(bundle.hmm.pi.size() == k && bundle.hmm.trans.rows == k &&
                    bundle.hmm.trans.cols == k && bundle.hmm.means.size() == k &&
                    bundle.hmm.vars.size() == k,
                "bundle state-count fields disagree");
        for (std::size_t s = 0; s < k; ++s)
            require(bundle.hmm.means[s].size() == bundle.hmm.obs_dim() &&
                        bundle.hmm.vars[s].size() == bundle.hmm.obs_dim(),
                    "bundle emission dimensions disagree");
        break;
    }
    case ModelKind::vae: {
        bundle.vae.input_dim = get_count(in);
        bundle.vae.latent_dim = get_count(in);
        bundle.vae.l2_lambda = get_f64(in);
        bundle.vae.kl_weight = get_f64(in);
        bundle.vae.encoder = get_net(in);
        bundle.vae.decoder = get_net(in);
        require(bundle.vae.encoder.input_dim() == bundle.vae.input_dim &&
                    bundle.vae.encoder.output_dim() == 2 * bundle.vae.latent_dim &&
                    bundle.vae.decoder.input_dim() == bundle.vae.latent_dim &&
                    bundle.vae.decoder.output_dim() == bundle.vae.input_dim,
                "bundle network dimensions disagree with the declared sizes");
        break;
    }
    case ModelKind::gan: {
        bundle.gan.input_dim = get_count(in);
        bundle.gan.noise_dim = get_count(in);
        bundle.gan.leaky_alpha = get_f64(in);
        bundle.gan.dropout_rate = get_f64(in);
        const std::uint8_t sm = get_u8(in);
        require(sm <= static_cast<std::uint8_t>(GanScoreMode::inversion),
                "bundle has an unknown score mode");
        bundle.gan_score_mode = static_cast<GanScoreMode>(sm);
        bundle.gan_inversion.n_steps = get_count(in);
        bundle.gan_inversion.learning_rate = get_f64(in);
        bundle.gan_inversion.seed = get_u64(in);
        bundle.gan_inversion.blend = get_f64(in);
        bundle.gan.generator = get_net(in);
        bundle.gan.discriminator = get_net(in);
        require(bundle.gan.generator.input_dim() == bundle.gan.noise_dim &&
                    bundle.gan.generator.output_dim() == bundle.gan.input_dim &&
                    bundle.gan.discriminator.input_dim() == bundle.gan.input_dim &&
                    bundle.gan.discriminator.output_dim() == 1,
                "bundle network dimensions disagree with the declared sizes");
        break;
    }
    }

    require(in.peek() == std::char_traits<char>::eof(), "bundle has trailing bytes");
    return bundle;
}

void save_bundle_file(const ModelBundle& bundle, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    require(out.is_open(), "cannot open '" + path + "' for writing");
    save_bundle(bundle, out);
    out.close();
    require(out.good(), "writing '" + path + "' failed");
}

ModelBundle load_bundle_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.is_open(), "cannot open '" + path + "' for reading");
    return load_bundle(in);
}

} // namespace faultbench
