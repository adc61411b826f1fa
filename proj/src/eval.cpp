#include "faultbench/eval.hpp"

#include "faultbench/common.hpp"
#include "faultbench/preprocess.hpp"
#include "faultbench/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <utility>

namespace faultbench {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string format_double(const char* fmt, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), fmt, v);
    return buf;
}

} // namespace

MetricSummary metrics(const std::vector<Verdict>& verdicts) {
    MetricSummary m;
    for (const Verdict& v : verdicts) {
        if (v.unscorable) {
            ++m.unscorable_count;
            continue;
        }
        require(v.true_label.has_value(), "metrics needs a true label on every scored verdict");
        require(*v.true_label == 0 || *v.true_label == 1, "true labels must be 0 or 1");
        const bool positive = *v.true_label == 1;
        if (v.flagged && positive)
            ++m.confusion.tp;
        else if (v.flagged && !positive)
            ++m.confusion.fp;
        else if (!v.flagged && positive)
            ++m.confusion.fn;
        else
            ++m.confusion.tn;
    }
    const std::size_t total = m.confusion.total();
    require(total > 0, "metrics needs at least one scorable verdict");

    m.accuracy = static_cast<double>(m.confusion.tp + m.confusion.tn) / static_cast<double>(total);
    const std::size_t flagged = m.confusion.tp + m.confusion.fp;
    if (flagged == 0) {
        m.precision = 0.0;
        m.precision_degenerate = true;
    } else {
        m.precision = static_cast<double>(m.confusion.tp) / static_cast<double>(flagged);
    }
    const std::size_t positives = m.confusion.tp + m.confusion.fn;
    if (positives == 0) {
        m.recall = 0.0;
        m.recall_degenerate = true;
    } else {
        m.recall = static_cast<double>(m.confusion.tp) / static_cast<double>(positives);
    }
    return m;
}

const char* to_string(AnomalyKind kind) {
    switch (kind) {
    case AnomalyKind::step_shift: return "step_shift";
    case AnomalyKind::amplitude_burst: return "amplitude_burst";
    case AnomalyKind::frequency_shift: return "frequency_shift";
    }
    fail("unknown anomaly kind");
}

AnomalyKind anomaly_kind_from_string(const std::string& name) {
    if (name == "step_shift") return AnomalyKind::step_shift;
    if (name == "amplitude_burst") return AnomalyKind::amplitude_burst;
    if (name == "frequency_shift") return AnomalyKind::frequency_shift;
    fail("unknown anomaly kind '" + name + "'");
}

namespace {

struct SinusoidBank {
    std::vector<double> amplitudes;
    std::vector<double> frequencies;
    std::vector<double> phases;
};

void validate(const SynthConfig& c) {
    require(c.n_normal + c.n_anomalous > 0, "synthetic config generates no sequences");
    require(c.min_length >= 1 && c.min_length <= c.max_length,
            "synthetic length range must satisfy 1 <= min <= max");
    require(c.amplitude_min >= 0.0 && c.amplitude_min <= c.amplitude_max,
            "sinusoid amplitude range must satisfy 0 <= min <= max");
    require(c.frequency_min > 0.0 && c.frequency_min <= c.frequency_max &&
                c.frequency_max < 0.5,
            "sinusoid frequencies must satisfy 0 < min <= max < 0.5 cycles per sample");
    require(c.noise_sigma >= 0.0, "noise sigma must be non-negative");
    require(c.magnitude_min > 0.0 && c.magnitude_min <= c.magnitude_max,
            "anomaly magnitude range must satisfy 0 < min <= max");
    require(c.n_anomalous == 0 || !c.kinds.empty(),
            "anomalous sequences need at least one anomaly kind");
}

std::size_t draw_length(RngStream& rng, const SynthConfig& c) {
    return c.min_length + rng.uniform_index(c.max_length - c.min_length + 1);
}

SinusoidBank draw_bank(RngStream& rng, const SynthConfig& c) {
    SinusoidBank bank;
    for (std::size_t k = 0; k < c.n_sinusoids; ++k) {
        bank.amplitudes.push_back(rng.uniform(c.amplitude_min, c.amplitude_max));
        bank.frequencies.push_back(rng.uniform(c.frequency_min, c.frequency_max));
        bank.phases.push_back(rng.uniform(0.0, 2.0 * kPi));
    }
    return bank;
}

double bank_value(const SinusoidBank& bank, double t) {
    double v = 0.0;
    for (std::size_t k = 0; k < bank.amplitudes.size(); ++k)
        v += bank.amplitudes[k] * std::sin(2.0 * kPi * bank.frequencies[k] * t + bank.phases[k]);
    return v;
}

// Kind-specific anomaly parameters, drawn before any noise so the draw order
// is independent of sequence length.
struct AnomalyPlan {
    AnomalyKind kind = AnomalyKind::step_shift;
    std::size_t change_point = 0;
    double magnitude = 0.0;   // in raw units (magnitude draw * noise sigma scale)
    double burst_frequency = 0.0;
    double shift_factor = 1.0;
};

AnomalyPlan draw_plan(RngStream& rng, const SynthConfig& c, std::size_t length) {
    AnomalyPlan plan;
    plan.kind = c.kinds[rng.uniform_index(c.kinds.size())];
    // Magnitudes are denominated in noise sigmas; with sigma 0 they fall
    // back to raw units so anomalies stay visible.
    const double unit = c.noise_sigma > 0.0 ? c.noise_sigma : 1.0;
    plan.magnitude = rng.uniform(c.magnitude_min, c.magnitude_max) * unit;
    const std::size_t lo = length / 4;
    const std::size_t hi = (3 * length) / 4;
    plan.change_point = lo + rng.uniform_index(std::max<std::size_t>(hi - lo, 1));
    plan.burst_frequency = rng.uniform(0.05, 0.25);
    plan.shift_factor = rng.uniform(2.0, 4.0);
    return plan;
}

RawSequence make_sequence(RngStream& rng, const SynthConfig& c, const std::string& id,
                          bool anomalous) {
    const std::size_t length = draw_length(rng, c);
    const SinusoidBank bank = draw_bank(rng, c);
    AnomalyPlan plan;
    if (anomalous) plan = draw_plan(rng, c, length);

    RawSequence seq;
    seq.id = id;
    seq.label = anomalous ? 1 : 0;
    if (anomalous) seq.anomaly_at_ms = static_cast<std::int64_t>(plan.change_point);
    seq.samples.resize(length);

    for (std::size_t t = 0; t < length; ++t) {
        double v;
        if (anomalous && plan.kind == AnomalyKind::frequency_shift && t >= plan.change_point) {
            // All base frequencies scale by the shift factor from the change
            // point on; the phase argument stays continuous at the switch.
            v = 0.0;
            const double t0 = static_cast<double>(plan.change_point);
            for (std::size_t k = 0; k < bank.amplitudes.size(); ++k) {
                const double f = bank.frequencies[k];
                const double arg = 2.0 * kPi * f * plan.shift_factor * (static_cast<double>(t) - t0) +
                                   2.0 * kPi * f * t0 + bank.phases[k];
                v += bank.amplitudes[k] * std::sin(arg);
            }
        } else {
            v = bank_value(bank, static_cast<double>(t));
        }

        if (anomalous && t >= plan.change_point) {
            const double dt = static_cast<double>(t - plan.change_point);
            switch (plan.kind) {
            case AnomalyKind::step_shift:
                v += plan.magnitude;
                break;
            case AnomalyKind::amplitude_burst:
                // Repeated one-sided impacts: a half-wave rectified carrier,
                // so the level, skew, and tail weight of every post-change
                // window move together.
                v += plan.magnitude *
                     std::max(0.0, std::sin(2.0 * kPi * plan.burst_frequency * dt));
                break;
            case AnomalyKind::frequency_shift:
                break; // handled in the base term above
            }
        }

        v += c.noise_sigma > 0.0 ? rng.normal(0.0, c.noise_sigma) : 0.0;
        seq.samples[t] = v;
    }
    return seq;
}

std::string padded_index(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04zu", i);
    return buf;
}

} // namespace

Dataset generate_synthetic(const SynthConfig& config) {
    validate(config);

    RngStream root(config.seed);
    Dataset out;
    out.source_name = "synthetic-seed-" + std::to_string(config.seed);
    out.sequences.reserve(config.n_normal + config.n_anomalous);

    for (std::size_t i = 0; i < config.n_normal; ++i) {
        RngStream rng = root.fork(1 + i);
        out.sequences.push_back(
            make_sequence(rng, config, config.id_prefix + "-n-" + padded_index(i), false));
    }
    for (std::size_t j = 0; j < config.n_anomalous; ++j) {
        RngStream rng = root.fork(1'000'003 + j);
        out.sequences.push_back(
            make_sequence(rng, config, config.id_prefix + "-a-" + padded_index(j), true));
    }
    validate(out);
    return out;
}

std::size_t effective_stride(const BenchConfig& config) {
    return config.stride == 0 ? config.window_size : config.stride;
}

Aggregation effective_aggregation(const BenchConfig& config) {
    if (config.aggregation) return *config.aggregation;
    return config.feature_mode == FeatureMode::stats ? Aggregation::mean : Aggregation::max;
}

namespace {

template <typename F>
auto stage(const char* name, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const std::exception& e) {
        fail(std::string(name) + " stage: " + e.what());
    }
}

} // namespace

ModelBundle train_bundle(const Dataset& train, const BenchConfig& config) {
    require(!train.sequences.empty(), "training set is empty");
    require(config.window_size > 0, "window size must be positive");
    for (const RawSequence& seq : train.sequences)
        require(seq.label == 0, "training set must contain only normal sequences ('" + seq.id +
                                    "' is labeled anomalous)");

    ModelBundle bundle;
    bundle.kind = config.model;
    bundle.train_seed = config.seed;
    PipelineConfig& p = bundle.pipeline;
    p.window_size = config.window_size;
    p.stride = effective_stride(config);
    p.feature_mode = config.feature_mode;
    p.aggregation = effective_aggregation(config);

    stage("preprocess", [&] {
        std::vector<std::vector<double>> base_rows;
        for (const RawSequence& seq : train.sequences) {
            std::vector<Window> windows = make_windows(seq, p.window_size, p.stride);
            require(!windows.empty(), "training sequence '" + seq.id +
                                          "' is shorter than one window");
            for (const Window& w : windows) {
                base_rows.push_back(p.feature_mode == FeatureMode::stats
                                        ? extract_features(w).as_vector()
                                        : w.values);
            }
        }

        if (p.feature_mode == FeatureMode::stats) {
            p.scaler = fit_scaler(base_rows);
            base_rows = transform(p.scaler, base_rows);
        }

        // Models that expect inputs in [0,1] get a min-max remap fitted on
        // the training windows: per dimension for features, one global pair
        // for raw windows.
        if (config.model == ModelKind::vae || config.model == ModelKind::gan) {
            if (p.feature_mode == FeatureMode::stats) {
                const std::size_t dim = base_rows.front().size();
                p.minmax_lo.assign(dim, std::numeric_limits<double>::infinity());
                p.minmax_hi.assign(dim, -std::numeric_limits<double>::infinity());
                for (const auto& row : base_rows)
                    for (std::size_t j = 0; j < dim; ++j) {
                        p.minmax_lo[j] = std::min(p.minmax_lo[j], row[j]);
                        p.minmax_hi[j] = std::max(p.minmax_hi[j], row[j]);
                    }
            } else {
                double lo = std::numeric_limits<double>::infinity();
                double hi = -lo;
                for (const auto& row : base_rows)
                    for (double x : row) {
                        lo = std::min(lo, x);
                        hi = std::max(hi, x);
                    }
                p.minmax_lo = {lo};
                p.minmax_hi = {hi};
            }
        }
        return 0;
    });

    stage("train", [&] {
        switch (config.model) {
        case ModelKind::hmm: {
            std::vector<ObsSequence> observations;
            observations.reserve(train.sequences.size());
            for (const RawSequence& seq : train.sequences)
                observations.push_back(pipeline_vectors(p, seq));
            HmmFitResult fit = fit_baum_welch(observations, config.hmm_states, config.seed,
                                              config.hmm_max_iters, config.hmm_tol);
            bundle.hmm = std::move(fit.params);
            bundle.hmm_score_mode = config.hmm_score_mode;
            break;
        }
        case ModelKind::vae: {
            std::vector<Vector> windows;
            for (const RawSequence& seq : train.sequences)
                for (Vector& v : pipeline_vectors(p, seq)) windows.push_back(std::move(v));
            VaeTrainConfig vc;
            vc.epochs = config.epochs;
            vc.batch_size = config.batch_size == 0 ? 32 : config.batch_size;
            vc.learning_rate = config.learning_rate == 0.0 ? 1e-3 : config.learning_rate;
            vc.seed = config.seed;
            vc.l2_lambda = config.vae_l2;
            vc.kl_weight = config.vae_kl_weight;
            vc.hidden1 = config.vae_hidden1;
            vc.hidden2 = config.vae_hidden2;
            vc.latent_dim = config.vae_latent;
            bundle.vae = train_vae(windows, vc).model;
            break;
        }
        case ModelKind::gan: {
            std::vector<Vector> windows;
            for (const RawSequence& seq : train.sequences)
                for (Vector& v : pipeline_vectors(p, seq)) windows.push_back(std::move(v));
            GanTrainConfig gc;
            gc.epochs = config.epochs;
            gc.batch_size = config.batch_size == 0 ? 64 : config.batch_size;
            gc.learning_rate = config.learning_rate == 0.0 ? 2e-4 : config.learning_rate;
            gc.seed = config.seed;
            gc.noise_dim = config.gan_noise_dim;
            bundle.gan = train_gan(windows, gc).model;
            bundle.gan_score_mode = config.gan_score_mode;
            bundle.gan_inversion = config.gan_inversion;
            break;
        }
        }
        return 0;
    });

    return bundle;
}

std::vector<double> training_scores(const ModelBundle& bundle, const Dataset& train) {
    std::vector<double> scores;
    scores.reserve(train.sequences.size());
    for (const RawSequence& seq : train.sequences) {
        std::optional<double> s = sequence_score(bundle, seq);
        require(s.has_value(), "training sequence '" + seq.id + "' yields no window to score");
        scores.push_back(*s);
    }
    return scores;
}

EvalReport run_benchmark(const Dataset& train, const Dataset& test, const BenchConfig& config) {
    ModelBundle bundle = train_bundle(train, config);

    stage("calibrate", [&] {
        bundle.threshold = calibrate(training_scores(bundle, train), config.fpr_tolerance);
        return 0;
    });

    std::vector<Verdict> verdicts = stage("judge", [&] { return judge(bundle, test); });

    EvalReport report;
    report.model = config.model;
    report.dataset_name = !test.source_name.empty() ? test.source_name : train.source_name;
    report.window_size = config.window_size;
    report.stride = effective_stride(config);
    report.feature_mode = config.feature_mode;
    report.aggregation = effective_aggregation(config);
    report.seeds = {config.seed};
    report.threshold = *bundle.threshold;
    report.summary = stage("metrics", [&] { return metrics(verdicts); });
    report.verdicts = std::move(verdicts);
    return report;
}

EvalReport run_benchmark(const Dataset& dataset, const BenchConfig& config) {
    SplitResult parts = stage("split", [&] { return split(dataset, config.split_ratio, config.seed); });
    return run_benchmark(parts.train, parts.test, config);
}

std::string report_text(const EvalReport& report) {
    std::ostringstream out;
    const MetricSummary& m = report.summary;
    out << "benchmark report\n";
    out << "  model        " << to_string(report.model) << "\n";
    out << "  dataset      " << (report.dataset_name.empty() ? "(unnamed)" : report.dataset_name)
        << "\n";
    out << "  window       " << report.window_size << " samples, stride " << report.stride << "\n";
    out << "  features     " << to_string(report.feature_mode) << "\n";
    out << "  aggregation  " << to_string(report.aggregation) << "\n";
    out << "  seed(s)      ";
    for (std::size_t i = 0; i < report.seeds.size(); ++i)
        out << (i ? "," : "") << report.seeds[i];
    out << "\n";
    out << "  threshold    " << format_double("%.6g", report.threshold.value)
        << " (nearest-rank quantile, fpr tolerance "
        << format_double("%g", report.threshold.fpr_tolerance) << ", calibrated on "
        << report.threshold.calibration_size << " scores)\n";
    out << "  confusion    tp=" << m.confusion.tp << " fp=" << m.confusion.fp
        << " tn=" << m.confusion.tn << " fn=" << m.confusion.fn << "\n";
    out << "  unscorable   " << m.unscorable_count << "\n";
    out << "\n";
    out << "  model | accuracy | precision | recall\n";
    out << "  " << to_string(report.model) << " | " << format_double("%.4f", m.accuracy) << " | "
        << format_double("%.4f", m.precision) << (m.precision_degenerate ? "*" : "") << " | "
        << format_double("%.4f", m.recall) << (m.recall_degenerate ? "*" : "") << "\n";
    if (m.precision_degenerate)
        out << "  * precision reported as 0: nothing was flagged\n";
    if (m.recall_degenerate)
        out << "  * recall reported as 0: no anomalous sequence was scored\n";
    return out.str();
}

std::string report_records(const EvalReport& report) {
    std::ostringstream out;
    const MetricSummary& m = report.summary;
    out << "summary\t" << to_string(report.model) << "\t"
        << (report.dataset_name.empty() ? "-" : report.dataset_name) << "\t" << report.window_size
        << "\t" << report.stride << "\t" << to_string(report.feature_mode) << "\t"
        << to_string(report.aggregation) << "\t";
    for (std::size_t i = 0; i < report.seeds.size(); ++i)
        out << (i ? "," : "") << report.seeds[i];
    out << "\t" << format_double("%.17g", report.threshold.value) << "\t"
        << format_double("%.17g", report.threshold.fpr_tolerance) << "\t"
        << report.threshold.calibration_size << "\t" << m.confusion.tp << "\t" << m.confusion.fp
        << "\t" << m.confusion.tn << "\t" << m.confusion.fn << "\t" << m.unscorable_count << "\t"
        << format_double("%.17g", m.accuracy) << "\t" << format_double("%.17g", m.precision)
        << "\t" << format_double("%.17g", m.recall) << "\n";
    for (const Verdict& v : report.verdicts) {
        out << "verdict\t" << v.sequence_id << "\t" << format_double("%.17g", v.score) << "\t"
            << (v.flagged ? 1 : 0) << "\t";
        if (v.true_label)
            out << *v.true_label;
        else
            out << "-";
        out << "\t" << (v.unscorable ? 1 : 0) << "\n";
    }
    return out.str();
}

} // namespace faultbench
