#pragma once

#include "faultbench/tensor.hpp"

#include <cstdint>
#include <vector>

namespace faultbench {

// One observation sequence: T rows of equal dimension.
using ObsSequence = std::vector<Vector>;

// Gaussian-emission HMM with diagonal per-state covariance.
struct HmmParams {
    std::size_t n_states = 2;
    Vector pi;                 // initial distribution
    Matrix trans;              // n_states x n_states, rows sum to 1
    std::vector<Vector> means; // per state, obs_dim
    std::vector<Vector> vars;  // per state, obs_dim, floored at kVarianceFloor

    std::size_t obs_dim() const { return means.empty() ? 0 : means.front().size(); }
};

struct HmmPosterior {
    Matrix gamma; // T x n_states state marginals, rows sum to 1
    double log_likelihood = 0.0;
};

struct HmmFitResult {
    HmmParams params;
    std::vector<double> log_likelihood_history; // one entry per EM iteration
};

inline constexpr double kVarianceFloor = 1e-6;

// Baum-Welch EM with log-space forward-backward. Initial means come from
// seeded farthest-point selection over the pooled observations, variances
// from the global per-dimension population variance, pi and the transition
// rows uniform. Stops when the total log-likelihood improves by less than
// tol or after max_iters iterations.
HmmFitResult fit_baum_welch(const std::vector<ObsSequence>& observations, std::size_t n_states,
                            std::uint64_t seed, std::size_t max_iters, double tol);

// log P(sequence | params) via the log-space forward algorithm.
double log_likelihood(const HmmParams& params, const ObsSequence& sequence);

// Forward-backward state marginals.
HmmPosterior posteriors(const HmmParams& params, const ObsSequence& sequence);

// Most probable state path; ties break toward the lower state index.
std::vector<std::size_t> viterbi(const HmmParams& params, const ObsSequence& sequence);

// Per-step squared error between the observation and its posterior-weighted
// emission-mean reconstruction, averaged over dimensions. The mean of these
// is score_reconstruction.
Vector window_errors(const HmmParams& params, const ObsSequence& sequence);

// The module's anomaly score: mean squared reconstruction error over the
// sequence.
double score_reconstruction(const HmmParams& params, const ObsSequence& sequence);

// Alternative per-step score: negative incremental log-likelihood, so the
// mean over the sequence equals -log_likelihood / T.
Vector nll_window_scores(const HmmParams& params, const ObsSequence& sequence);

} // namespace faultbench
