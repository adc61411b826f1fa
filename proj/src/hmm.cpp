#include "faultbench/hmm.hpp"

#include "faultbench/common.hpp"
#include "faultbench/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace faultbench {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454836;

double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

double logsumexp(const Vector& v) {
    double mx = kNegInf;
    for (double x : v) mx = std::max(mx, x);
    if (mx == kNegInf) return kNegInf;
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

void check_sequence(const HmmParams& params, const ObsSequence& seq) {
    require(!seq.empty(), "hmm: empty observation sequence");
    for (const auto& x : seq)
        require(x.size() == params.obs_dim(), "hmm: observation dimension mismatch");
}

double log_emission(const HmmParams& params, std::size_t state, const Vector& x) {
    const Vector& mu = params.means[state];
    const Vector& var = params.vars[state];
    double lp = 0.0;
    for (std::size_t d = 0; d < x.size(); ++d) {
        double diff = x[d] - mu[d];
        lp += -0.5 * (kLog2Pi + std::log(var[d]) + diff * diff / var[d]);
    }
    return lp;
}

// log-space alpha matrix (T x K) plus per-step cumulative log-likelihoods.
struct ForwardResult {
    Matrix log_alpha;
    Vector step_loglik; // step_loglik[t] = log P(x_0..x_t)
    double log_likelihood = 0.0;
};

ForwardResult forward_pass(const HmmParams& params, const ObsSequence& seq) {
    std::size_t T = seq.size(), K = params.n_states;
    ForwardResult fr;
    fr.log_alpha = Matrix(T, K);
    fr.step_loglik.resize(T);

    Vector scratch(K);
    for (std::size_t i = 0; i < K; ++i)
        fr.log_alpha.at(0, i) = safe_log(params.pi[i]) + log_emission(params, i, seq[0]);

    for (std::size_t t = 1; t < T; ++t) {
        for (std::size_t j = 0; j < K; ++j) {
            for (std::size_t i = 0; i < K; ++i)
                scratch[i] = fr.log_alpha.at(t - 1, i) + safe_log(params.trans.at(i, j));
            fr.log_alpha.at(t, j) = logsumexp(scratch) + log_emission(params, j, seq[t]);
        }
    }

    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t i = 0; i < K; ++i) scratch[i] = fr.log_alpha.at(t, i);
        fr.step_loglik[t] = logsumexp(scratch);
    }
    fr.log_likelihood = fr.step_loglik[T - 1];
    return fr;
}

Matrix backward_pass(const HmmParams& params, const ObsSequence& seq) {
    std::size_t T = seq.size(), K = params.n_states;
    Matrix log_beta(T, K);
    Vector scratch(K);
    for (std::size_t i = 0; i < K; ++i) log_beta.at(T - 1, i) = 0.0;
    for (std::size_t t = T - 1; t-- > 0;) {
        for (std::size_t i = 0; i < K; ++i) {
            for (std::size_t j = 0; j < K; ++j)
                scratch[j] = safe_log(params.trans.at(i, j)) +
                             log_emission(params, j, seq[t + 1]) + log_beta.at(t + 1, j);
            log_beta.at(t, i) = logsumexp(scratch);
        }
    }
    return log_beta;
}

void validate_params(const HmmParams& params) {
    require(params.n_states >= 1, "hmm: n_states must be >= 1");
    require(params.pi.size() == params.n_states, "hmm: pi size mismatch");
    require(params.trans.rows == params.n_states && params.trans.cols == params.n_states,
            "hmm: transition matrix shape mismatch");
    require(params.means.size() == params.n_states && params.vars.size() == params.n_states,
            "hmm: emission parameter count mismatch");
}

HmmParams initialize(const std::vector<ObsSequence>& observations, std::size_t n_states,
                     std::uint64_t seed) {
    std::vector<const Vector*> pool;
    for (const auto& seq : observations)
        for (const auto& x : seq) pool.push_back(&x);
    std::size_t dim = pool.front()->size();

    HmmParams p;
    p.n_states = n_states;
    p.pi.assign(n_states, 1.0 / static_cast<double>(n_states));
    p.trans = Matrix(n_states, n_states);
    for (double& a : p.trans.data) a = 1.0 / static_cast<double>(n_states);

    // Farthest-point seeding for the means: a seeded first pick, then greedy
    // max-min-distance picks. Deterministic given the seed.
    RngStream rng(seed);
    std::vector<std::size_t> chosen;
    chosen.push_back(rng.uniform_index(pool.size()));
    while (chosen.size() < n_states) {
        std::size_t best = 0;
        double best_dist = -1.0;
        for (std::size_t c = 0; c < pool.size(); ++c) {
            double min_dist = std::numeric_limits<double>::infinity();
            for (std::size_t s : chosen) {
                double d2 = 0.0;
                for (std::size_t j = 0; j < dim; ++j) {
                    double d = (*pool[c])[j] - (*pool[s])[j];
                    d2 += d * d;
                }
                min_dist = std::min(min_dist, d2);
            }
            if (min_dist > best_dist) {
                best_dist = min_dist;
                best = c;
            }
        }
        chosen.push_back(best);
    }

    Vector global_mean(dim, 0.0), global_var(dim, 0.0);
    for (const auto* x : pool)
        for (std::size_t j = 0; j < dim; ++j) global_mean[j] += (*x)[j];
    for (std::size_t j = 0; j < dim; ++j) global_mean[j] /= static_cast<double>(pool.size());
    for (const auto* x : pool)
        for (std::size_t j = 0; j < dim; ++j) {
            double d = (*x)[j] - global_mean[j];
            global_var[j] += d * d;
        }
    for (std::size_t j = 0; j < dim; ++j)
        global_var[j] = std::max(global_var[j] / static_cast<double>(pool.size()), kVarianceFloor);

    for (std::size_t s = 0; s < n_states; ++s) {
        p.means.push_back(*pool[chosen[s]]);
        p.vars.push_back(global_var);
    }
    return p;
}

} // namespace

double log_likelihood(const HmmParams& params, const ObsSequence& sequence) {
    validate_params(params);
    check_sequence(params, sequence);
    return forward_pass(params, sequence).log_likelihood;
}

HmmPosterior posteriors(const HmmParams& params, const ObsSequence& sequence) {
    validate_params(params);
    check_sequence(params, sequence);
    std::size_t T = sequence.size(), K = params.n_states;

    ForwardResult fr = forward_pass(params, sequence);
    Matrix log_beta = backward_pass(params, sequence);

    HmmPosterior post;
    post.log_likelihood = fr.log_likelihood;
    post.gamma = Matrix(T, K);
    for (std::size_t t = 0; t < T; ++t) {
        double row_sum = 0.0;
        for (std::size_t i = 0; i < K; ++i) {
            double g = std::exp(fr.log_alpha.at(t, i) + log_beta.at(t, i) - fr.log_likelihood);
            post.gamma.at(t, i) = g;
            row_sum += g;
        }
        require(row_sum > 0.0, "hmm: degenerate posterior row");
        for (std::size_t i = 0; i < K; ++i) post.gamma.at(t, i) /= row_sum;
    }
    return post;
}

std::vector<std::size_t> viterbi(const HmmParams& params, const ObsSequence& sequence) {
    validate_params(params);
    check_sequence(params, sequence);
    std::size_t T = sequence.size(), K = params.n_states;

    Matrix score(T, K);
    std::vector<std::vector<std::size_t>> back(T, std::vector<std::size_t>(K, 0));

    for (std::size_t i = 0; i < K; ++i)
        score.at(0, i) = safe_log(params.pi[i]) + log_emission(params, i, sequence[0]);

    for (std::size_t t = 1; t < T; ++t) {
        for (std::size_t j = 0; j < K; ++j) {
            double best = kNegInf;
            std::size_t best_i = 0;
            for (std::size_t i = 0; i < K; ++i) {
                double s = score.at(t - 1, i) + safe_log(params.trans.at(i, j));
                if (s > best) { // strict: ties keep the lower state index
                    best = s;
                    best_i = i;
                }
            }
            score.at(t, j) = best + log_emission(params, j, sequence[t]);
            back[t][j] = best_i;
        }
    }

    std::size_t last = 0;
    double best = kNegInf;
    for (std::size_t i = 0; i < K; ++i) {
        if (score.at(T - 1, i) > best) {
            best = score.at(T - 1, i);
            last = i;
        }
    }

    std::vector<std::size_t> path(T);
    path[T - 1] = last;
    for (std::size_t t = T - 1; t-- > 0;) path[t] = back[t + 1][path[t + 1]];
    return path;
}

Vector window_errors(const HmmParams& params, const ObsSequence& sequence) {
    HmmPosterior post = posteriors(params, sequence);
    std::size_t T = sequence.size(), K = params.n_states, dim = params.obs_dim();

    Vector errors(T, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        double err = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            double xhat = 0.0;
            for (std::size_t i = 0; i < K; ++i)
                xhat += post.gamma.at(t, i) * params.means[i][d];
            double diff = sequence[t][d] - xhat;
            err += diff * diff;
        }
        errors[t] = err / static_cast<double>(dim);
    }
    return errors;
}

double score_reconstruction(const HmmParams& params, const ObsSequence& sequence) {
    Vector errors = window_errors(params, sequence);
    double s = 0.0;
    for (double e : errors) s += e;
    return s / static_cast<double>(errors.size());
}

Vector nll_window_scores(const HmmParams& params, const ObsSequence& sequence) {
    validate_params(params);
    check_sequence(params, sequence);
    ForwardResult fr = forward_pass(params, sequence);
    Vector scores(sequence.size());
    scores[0] = -fr.step_loglik[0];
    for (std::size_t t = 1; t < sequence.size(); ++t)
        scores[t] = -(fr.step_loglik[t] - fr.step_loglik[t - 1]);
    return scores;
}

HmmFitResult fit_baum_welch(const std::vector<ObsSequence>& observations, std::size_t n_states,
                            std::uint64_t seed, std::size_t max_iters, double tol) {
    require(!observations.empty(), "fit_baum_welch: no observation sequences");
    require(n_states >= 1, "fit_baum_welch: n_states must be >= 1");
    std::size_t dim = 0;
    for (const auto& seq : observations) {
        require(seq.size() >= 2, "fit_baum_welch: every sequence must have length >= 2");
        for (const auto& x : seq) {
            if (dim == 0) dim = x.size();
            require(x.size() == dim && dim >= 1,
                    "fit_baum_welch: inconsistent observation dimensions");
        }
    }

    HmmFitResult result;
    result.params = initialize(observations, n_states, seed);
    HmmParams& p = result.params;
    std::size_t K = n_states;

    double prev_ll = kNegInf;
    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        // E-step accumulators.
        Vector pi_acc(K, 0.0);
        Matrix a_num(K, K);
        Vector a_den(K, 0.0);
        std::vector<Vector> mean_num(K, Vector(dim, 0.0));
        Vector gamma_sum(K, 0.0);
        // Second pass for variances needs gamma again; store per-sequence
        // posteriors (desk-scale data, fine to keep).
        std::vector<Matrix> gammas(observations.size());
        double total_ll = 0.0;

        for (std::size_t r = 0; r < observations.size(); ++r) {
            const ObsSequence& seq = observations[r];
            std::size_t T = seq.size();
            ForwardResult fr = forward_pass(p, seq);
            Matrix log_beta = backward_pass(p, seq);
            total_ll += fr.log_likelihood;

            Matrix gamma(T, K);
            for (std::size_t t = 0; t < T; ++t) {
                double row = 0.0;
                for (std::size_t i = 0; i < K; ++i) {
                    double g =
                        std::exp(fr.log_alpha.at(t, i) + log_beta.at(t, i) - fr.log_likelihood);
                    gamma.at(t, i) = g;
                    row += g;
                }
                require(row > 0.0, "fit_baum_welch: degenerate posterior row");
                for (std::size_t i = 0; i < K; ++i) gamma.at(t, i) /= row;
            }

            for (std::size_t i = 0; i < K; ++i) pi_acc[i] += gamma.at(0, i);

            for (std::size_t t = 0; t + 1 < T; ++t) {
                // xi(i,j) normalized over (i,j) for this step.
                Matrix xi(K, K);
                double xi_sum = 0.0;
                for (std::size_t i = 0; i < K; ++i) {
                    for (std::size_t j = 0; j < K; ++j) {
                        double lx = fr.log_alpha.at(t, i) + safe_log(p.trans.at(i, j)) +
                                    log_emission(p, j, seq[t + 1]) + log_beta.at(t + 1, j) -
                                    fr.log_likelihood;
                        double x = std::exp(lx);
                        xi.at(i, j) = x;
                        xi_sum += x;
                    }
                }
                require(xi_sum > 0.0, "fit_baum_welch: degenerate transition posterior");
                for (std::size_t i = 0; i < K; ++i) {
                    for (std::size_t j = 0; j < K; ++j)
                        a_num.at(i, j) += xi.at(i, j) / xi_sum;
                    a_den[i] += gamma.at(t, i);
                }
            }

            for (std::size_t t = 0; t < T; ++t) {
                for (std::size_t i = 0; i < K; ++i) {
                    double g = gamma.at(t, i);
                    gamma_sum[i] += g;
                    for (std::size_t d = 0; d < dim; ++d) mean_num[i][d] += g * seq[t][d];
                }
            }
            gammas[r] = std::move(gamma);
        }

        result.log_likelihood_history.push_back(total_ll);

        // M-step.
        double R = static_cast<double>(observations.size());
        for (std::size_t i = 0; i < K; ++i) p.pi[i] = pi_acc[i] / R;

        for (std::size_t i = 0; i < K; ++i) {
            if (a_den[i] > 0.0) {
                double row = 0.0;
                for (std::size_t j = 0; j < K; ++j) row += a_num.at(i, j);
                for (std::size_t j = 0; j < K; ++j)
                    p.trans.at(i, j) = row > 0.0 ? a_num.at(i, j) / row
                                                 : 1.0 / static_cast<double>(K);
            } else {
                for (std::size_t j = 0; j < K; ++j)
                    p.trans.at(i, j) = 1.0 / static_cast<double>(K);
            }
        }

        std::vector<Vector> new_means(K, Vector(dim, 0.0));
        for (std::size_t i = 0; i < K; ++i) {
            if (gamma_sum[i] > 0.0) {
                for (std::size_t d = 0; d < dim; ++d)
                    new_means[i][d] = mean_num[i][d] / gamma_sum[i];
            } else {
                new_means[i] = p.means[i];
            }
        }

        std::vector<Vector> var_num(K, Vector(dim, 0.0));
        for (std::size_t r = 0; r < observations.size(); ++r) {
            const ObsSequence& seq = observations[r];
            for (std::size_t t = 0; t < seq.size(); ++t) {
                for (std::size_t i = 0; i < K; ++i) {
                    double g = gammas[r].at(t, i);
                    for (std::size_t d = 0; d < dim; ++d) {
                        double diff = seq[t][d] - new_means[i][d];
                        var_num[i][d] += g * diff * diff;
                    }
                }
            }
        }
        for (std::size_t i = 0; i < K; ++i) {
            p.means[i] = new_means[i];
            for (std::size_t d = 0; d < dim; ++d) {
                double v = gamma_sum[i] > 0.0 ? var_num[i][d] / gamma_sum[i] : p.vars[i][d];
                p.vars[i][d] = std::max(v, kVarianceFloor);
            }
        }

        if (iter > 0 && total_ll - prev_ll < tol) break;
        prev_ll = total_ll;
    }
    return result;
}

} // namespace faultbench
