#pragma once

#include "faultbench/detect.hpp"
#include "faultbench/ingest.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace faultbench {

struct ConfusionMatrix {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }
};

// Metrics over the scorable verdicts. Positive class = anomalous (label 1).
// Degenerate denominators report the metric as 0 and raise the matching
// flag instead of dividing by zero.
struct MetricSummary {
    ConfusionMatrix confusion;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    bool precision_degenerate = false; // tp + fp = 0, nothing flagged
    bool recall_degenerate = false;    // tp + fn = 0, no anomalies present
    std::size_t unscorable_count = 0;  // excluded from the matrix, reported
};

struct EvalReport {
    ModelKind model = ModelKind::hmm;
    std::string dataset_name;
    std::size_t window_size = 0;
    std::size_t stride = 0;
    FeatureMode feature_mode = FeatureMode::stats;
    Aggregation aggregation = Aggregation::mean;
    std::vector<std::uint64_t> seeds;
    MetricSummary summary;
    Threshold threshold;
    std::vector<Verdict> verdicts;
};

MetricSummary metrics(const std::vector<Verdict>& verdicts);

enum class AnomalyKind : std::uint8_t { step_shift = 0, amplitude_burst = 1, frequency_shift = 2 };

const char* to_string(AnomalyKind kind);
AnomalyKind anomaly_kind_from_string(const std::string& name);

// Seeded surrogate for confidential change-point data: sums of random
// sinusoids plus Gaussian noise, with one anomaly per anomalous sequence
// injected from its change point onward. Frequencies are in cycles per
// sample. min_length should be at least the window size used downstream.
struct SynthConfig {
    std::size_t n_normal = 200;
    std::size_t n_anomalous = 60;
    std::size_t min_length = 4096;
    std::size_t max_length = 16384;
    std::size_t n_sinusoids = 3;
    double amplitude_min = 0.5;
    double amplitude_max = 2.0;
    double frequency_min = 0.001;
    double frequency_max = 0.05;
    double noise_sigma = 1.0;
    // Anomaly kinds drawn uniformly per sequence. Pure frequency shifts
    // leave the per-window moment features nearly unchanged, so the default
    // mix sticks to kinds the stats pipeline can see.
    std::vector<AnomalyKind> kinds = {AnomalyKind::step_shift, AnomalyKind::amplitude_burst};
    double magnitude_min = 3.0; // in units of noise_sigma
    double magnitude_max = 8.0;
    std::uint64_t seed = 0;
    std::string id_prefix = "syn";
};

// Deterministic given the config: same seed, byte-identical dataset. Each
// anomalous sequence records its change point in anomaly_at_ms; the change
// point lands in the middle half of the sequence.
Dataset generate_synthetic(const SynthConfig& config);

struct BenchConfig {
    ModelKind model = ModelKind::vae;
    std::size_t window_size = 2048;
    std::size_t stride = 0; // 0 = window_size
    FeatureMode feature_mode = FeatureMode::stats;
    // Default aggregation when unset: mean for stats features, max for raw
    // windows.
    std::optional<Aggregation> aggregation;
    double fpr_tolerance = 0.05;
    std::uint64_t seed = 0;
    double split_ratio = 0.8; // only for the single-dataset overload

    std::size_t hmm_states = 2;
    std::size_t hmm_max_iters = 50;
    double hmm_tol = 1e-4;
    HmmScoreMode hmm_score_mode = HmmScoreMode::reconstruction;

    std::size_t epochs = 300;
    std::size_t batch_size = 0;   // 0 = per-model default (VAE 32, GAN 64)
    double learning_rate = 0.0;   // 0 = per-model default (VAE 1e-3, GAN 2e-4)
    std::size_t vae_hidden1 = 16; // encoder trunk widths for stats features
    std::size_t vae_hidden2 = 8;
    std::size_t vae_latent = 4;
    double vae_l2 = 1e-4;
    double vae_kl_weight = 1.0;

    std::size_t gan_noise_dim = 64;
    GanScoreMode gan_score_mode = GanScoreMode::discriminator;
    GanInversionConfig gan_inversion;
};

std::size_t effective_stride(const BenchConfig& config);
Aggregation effective_aggregation(const BenchConfig& config);

// Fits the preprocessing pipeline on the training sequences and trains one
// model of config.model, without calibrating a threshold.
ModelBundle train_bundle(const Dataset& train, const BenchConfig& config);

// Aggregated per-sequence scores for calibration; every sequence must yield
// at least one window.
std::vector<double> training_scores(const ModelBundle& bundle, const Dataset& train);

// Train on `train` (normal sequences only), calibrate the threshold on the
// training scores, judge `test`, and summarize. Stage failures carry the
// stage name.
EvalReport run_benchmark(const Dataset& train, const Dataset& test, const BenchConfig& config);

// Same, but first splits one dataset: a seeded split_ratio share of the
// normal sequences trains, the rest plus all anomalous sequences test.
EvalReport run_benchmark(const Dataset& dataset, const BenchConfig& config);

// Human-readable report: a metrics table with the published-table column
// order (accuracy, precision, recall) plus the run configuration.
std::string report_text(const EvalReport& report);

// Line-delimited machine-readable records; field order documented in the
// README. One `summary` line, then one `verdict` line per sequence.
std::string report_records(const EvalReport& report);

} // namespace faultbench
