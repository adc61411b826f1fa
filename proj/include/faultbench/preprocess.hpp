#pragma once

#include "faultbench/ingest.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace faultbench {

// Fixed-length segment of a sequence.
struct Window {
    std::string parent_id;
    std::size_t start_index = 0;
    std::vector<double> values;
};

// Four-statistic summary of a window. Moments use the population (1/n)
// convention; skewness = m3/m2^1.5 and kurtosis = m4/m2^2 with no excess
// subtraction. Constant windows define both ratios as 0.
struct FeatureVector {
    double mean = 0.0;
    double median = 0.0;
    double skewness = 0.0;
    double kurtosis = 0.0;

    std::vector<double> as_vector() const { return {mean, median, skewness, kurtosis}; }
};

// Per-dimension standardization constants, fixed at fit time.
struct ScalerParams {
    std::vector<double> means;
    std::vector<double> stds;
};

struct SplitResult {
    Dataset train; // normal sequences only
    Dataset test;  // remaining normal + all anomalous
    double split_ratio = 0.8;
    std::uint64_t seed = 0;
};

// Pre-pads every sequence with zeros to the maximum length in the dataset.
// Original samples stay as an exact suffix; anomaly_at_ms shifts by the pad
// amount.
Dataset pad_to_max(const Dataset& dataset);

// Windows at offsets 0, stride, 2*stride, ... ; trailing samples that do not
// fill a window are dropped. Too-short sequences yield an empty list.
std::vector<Window> make_windows(const RawSequence& sequence, std::size_t window_size,
                                 std::size_t stride);

FeatureVector extract_features(const Window& window);
FeatureVector extract_features(const std::vector<double>& values);

// Deterministic seeded shuffle of the normal sequences; the first
// floor(ratio * n_normal) go to train, everything else to test.
SplitResult split(const Dataset& dataset, double ratio, std::uint64_t seed);

ScalerParams fit_scaler(const std::vector<std::vector<double>>& rows);
std::vector<double> transform(const ScalerParams& scaler, const std::vector<double>& row);
std::vector<std::vector<double>> transform(const ScalerParams& scaler,
                                           const std::vector<std::vector<double>>& rows);

} // namespace faultbench
