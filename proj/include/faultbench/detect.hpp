#pragma once

#include "faultbench/gan.hpp"
#include "faultbench/hmm.hpp"
#include "faultbench/ingest.hpp"
#include "faultbench/preprocess.hpp"
#include "faultbench/vae.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace faultbench {

enum class ModelKind : std::uint8_t { hmm = 0, vae = 1, gan = 2 };
enum class FeatureMode : std::uint8_t { stats = 0, raw = 1 };
enum class Aggregation : std::uint8_t { max = 0, mean = 1 };
enum class HmmScoreMode : std::uint8_t { reconstruction = 0, nll = 1 };
enum class GanScoreMode : std::uint8_t { discriminator = 0, inversion = 1 };

const char* to_string(ModelKind kind);
const char* to_string(FeatureMode mode);
const char* to_string(Aggregation aggregation);

// Everything needed to turn a raw sequence into model-input vectors, exactly
// as recorded at training time. scaler applies when its dims are non-empty
// (stats pipeline); the min-max remap to [0,1] applies when its bounds are
// non-empty (VAE/GAN inputs).
struct PipelineConfig {
    std::size_t window_size = 2048;
    std::size_t stride = 2048;
    FeatureMode feature_mode = FeatureMode::stats;
    Aggregation aggregation = Aggregation::mean;
    ScalerParams scaler;
    std::vector<double> minmax_lo;
    std::vector<double> minmax_hi;
};

// Nearest-rank quantile of normal-only training scores.
struct Threshold {
    double value = 0.0;
    double fpr_tolerance = 0.05;
    std::size_t calibration_size = 0;
};

struct Verdict {
    std::string sequence_id;
    double score = 0.0;
    bool flagged = false;    // score > threshold, strict
    bool unscorable = false; // sequence shorter than one window
    std::optional<int> true_label;
};

// Self-describing container for one trained detector: model parameters,
// preprocessing constants, optional calibrated threshold, seeds. Only the
// section matching `kind` is meaningful. Serialized layout is documented in
// docs/BUNDLE_FORMAT.md.
struct ModelBundle {
    ModelKind kind = ModelKind::hmm;
    PipelineConfig pipeline;
    std::uint64_t train_seed = 0;
    std::optional<Threshold> threshold;

    HmmParams hmm;
    HmmScoreMode hmm_score_mode = HmmScoreMode::reconstruction;

    VaeModel vae;

    GanModel gan;
    GanScoreMode gan_score_mode = GanScoreMode::discriminator;
    GanInversionConfig gan_inversion;
};

// threshold = the nearest-rank (1 - fpr) quantile: sort ascending and take
// the 1-based element at ceil((1 - fpr) * n), i.e. the smallest score with
// at most fpr * n training scores strictly above it.
Threshold calibrate(const std::vector<double>& training_scores, double fpr_tolerance);

// Threshold stability report: seeded partition into k folds, one threshold
// calibrated on each leave-one-fold-out complement.
std::vector<double> calibrate_kfold(const std::vector<double>& training_scores,
                                    double fpr_tolerance, std::size_t k, std::uint64_t seed);

double aggregate(const std::vector<double>& window_scores, Aggregation method);

// The stored pipeline applied to one sequence: windows, then features or raw
// values, then the recorded scaler / min-max constants. Empty when the
// sequence is shorter than one window.
std::vector<Vector> pipeline_vectors(const PipelineConfig& pipeline, const RawSequence& sequence);

// Per-window anomaly scores under the bundle's model.
std::vector<double> window_scores(const ModelBundle& bundle, const RawSequence& sequence);

// Aggregated per-sequence score; nullopt when the sequence yields no window.
std::optional<double> sequence_score(const ModelBundle& bundle, const RawSequence& sequence);

// Scores every sequence and compares against the bundle's threshold. Too
// short sequences get an explicit unscorable verdict instead of a silent
// skip.
std::vector<Verdict> judge(const ModelBundle& bundle, const Dataset& dataset);

void save_bundle(const ModelBundle& bundle, std::ostream& out);
ModelBundle load_bundle(std::istream& in);
void save_bundle_file(const ModelBundle& bundle, const std::string& path);
ModelBundle load_bundle_file(const std::string& path);

} // namespace faultbench
