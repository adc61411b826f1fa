#include "faultbench/preprocess.hpp"

#include "faultbench/common.hpp"
#include "faultbench/rng.hpp"

#include <algorithm>
#include <cmath>

namespace faultbench {

Dataset pad_to_max(const Dataset& dataset) {
    require(!dataset.sequences.empty(), "pad_to_max: empty dataset");
    std::size_t max_len = 0;
    for (const auto& seq : dataset.sequences)
        max_len = std::max(max_len, seq.samples.size());

    Dataset out;
    out.source_name = dataset.source_name;
    out.sequences.reserve(dataset.sequences.size());
    for (const auto& seq : dataset.sequences) {
        std::size_t pad = max_len - seq.samples.size();
        RawSequence padded;
        padded.id = seq.id;
        padded.label = seq.label;
        padded.samples.assign(pad, 0.0);
        padded.samples.insert(padded.samples.end(), seq.samples.begin(), seq.samples.end());
        if (seq.anomaly_at_ms)
            padded.anomaly_at_ms = *seq.anomaly_at_ms + static_cast<std::int64_t>(pad);
        out.sequences.push_back(std::move(padded));
    }
    return out;
}

std::vector<Window> make_windows(const RawSequence& sequence, std::size_t window_size,
                                 std::size_t stride) {
    require(window_size >= 2, "make_windows: window_size must be >= 2");
    require(stride >= 1, "make_windows: stride must be >= 1");

    std::vector<Window> windows;
    std::size_t n = sequence.samples.size();
    if (n < window_size) return windows;

    std::size_t count = (n - window_size) / stride + 1;
    windows.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        std::size_t start = k * stride;
        Window w;
        w.parent_id = sequence.id;
        w.start_index = start;
        w.values.assign(sequence.samples.begin() + static_cast<std::ptrdiff_t>(start),
                        sequence.samples.begin() + static_cast<std::ptrdiff_t>(start + window_size));
        windows.push_back(std::move(w));
    }
    return windows;
}

FeatureVector extract_features(const std::vector<double>& values) {
    require(!values.empty(), "extract_features: empty window");
    std::size_t n = values.size();

    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);

    std::vector<double> sorted(values);
    std::sort(sorted.begin(), sorted.end());
    double median = (n % 2 == 1) ? sorted[n / 2]
                                 : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : values) {
        double d = v - mean;
        double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= static_cast<double>(n);
    m3 /= static_cast<double>(n);
    m4 /= static_cast<double>(n);

    FeatureVector f;
    f.mean = mean;
    f.median = median;
    if (m2 > 0.0) {
        f.skewness = m3 / std::pow(m2, 1.5);
        f.kurtosis = m4 / (m2 * m2);
    }
    return f;
}

FeatureVector extract_features(const Window& window) {
    return extract_features(window.values);
}

SplitResult split(const Dataset& dataset, double ratio, std::uint64_t seed) {
    require(ratio > 0.0 && ratio < 1.0, "split: ratio must be in (0,1)");

    std::vector<std::size_t> normal_idx, anomalous_idx;
    for (std::size_t i = 0; i < dataset.sequences.size(); ++i) {
        if (dataset.sequences[i].label == 0)
            normal_idx.push_back(i);
        else
            anomalous_idx.push_back(i);
    }
    require(!normal_idx.empty(), "split: cannot form training set, no normal sequences");

    RngStream rng(seed);
    rng.shuffle(normal_idx);

    std::size_t n_train =
        static_cast<std::size_t>(std::floor(ratio * static_cast<double>(normal_idx.size())));

    SplitResult result;
    result.split_ratio = ratio;
    result.seed = seed;
    result.train.source_name = dataset.source_name + ":train";
    result.test.source_name = dataset.source_name + ":test";

    for (std::size_t k = 0; k < normal_idx.size(); ++k) {
        const auto& seq = dataset.sequences[normal_idx[k]];
        (k < n_train ? result.train : result.test).sequences.push_back(seq);
    }
    for (std::size_t i : anomalous_idx)
        result.test.sequences.push_back(dataset.sequences[i]);
    return result;
}

ScalerParams fit_scaler(const std::vector<std::vector<double>>& rows) {
    require(!rows.empty(), "fit_scaler: empty feature list");
    std::size_t dim = rows.front().size();
    for (const auto& r : rows)
        require(r.size() == dim, "fit_scaler: inconsistent feature dimensions");

    ScalerParams p;
    p.means.assign(dim, 0.0);
    p.stds.assign(dim, 0.0);
    double n = static_cast<double>(rows.size());

    for (const auto& r : rows)
        for (std::size_t j = 0; j < dim; ++j) p.means[j] += r[j];
    for (std::size_t j = 0; j < dim; ++j) p.means[j] /= n;

    for (const auto& r : rows)
        for (std::size_t j = 0; j < dim; ++j) {
            double d = r[j] - p.means[j];
            p.stds[j] += d * d;
        }
    for (std::size_t j = 0; j < dim; ++j) p.stds[j] = std::sqrt(p.stds[j] / n);
    return p;
}

std::vector<double> transform(const ScalerParams& scaler, const std::vector<double>& row) {
    require(row.size() == scaler.means.size(), "transform: dimension mismatch");
    std::vector<double> out(row.size());
    for (std::size_t j = 0; j < row.size(); ++j)
        out[j] = scaler.stds[j] > 0.0 ? (row[j] - scaler.means[j]) / scaler.stds[j] : 0.0;
    return out;
}

std::vector<std::vector<double>> transform(const ScalerParams& scaler,
                                           const std::vector<std::vector<double>>& rows) {
    std::vector<std::vector<double>> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(transform(scaler, r));
    return out;
}

} // namespace faultbench
