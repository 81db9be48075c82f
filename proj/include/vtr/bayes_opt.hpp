#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

// 1-D Gaussian-process Bayesian optimization with Expected Improvement.
// Squared-exponential kernel, hyperparameters picked by log-marginal-
// likelihood over a fixed 8x8 grid, acquisition maximized over a uniform
// grid. Everything is deterministic given the seed.

namespace vtr {

namespace detail {

/// Uniform double in [0, 1) from the generator's raw bits. Used instead of
/// std::uniform_real_distribution, whose output is implementation-defined.
inline double next_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// In-place lower Cholesky of a row-major symmetric matrix. Returns false if
/// the matrix is not positive definite.
inline bool cholesky_in_place(std::vector<double>& a, std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) {
        double diag = a[j * n + j];
        for (std::size_t k = 0; k < j; ++k) diag -= a[j * n + k] * a[j * n + k];
        if (!(diag > 0.0)) return false;
        const double root = std::sqrt(diag);
        a[j * n + j] = root;
        for (std::size_t i = j + 1; i < n; ++i) {
            double v = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) v -= a[i * n + k] * a[j * n + k];
            a[i * n + j] = v / root;
        }
    }
    // Zero the strict upper triangle so the factor can be used directly.
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) a[i * n + j] = 0.0;
    }
    return true;
}

inline void solve_lower(const std::vector<double>& chol, std::size_t n, std::vector<double>& b) {
    for (std::size_t i = 0; i < n; ++i) {
        double v = b[i];
        for (std::size_t k = 0; k < i; ++k) v -= chol[i * n + k] * b[k];
        b[i] = v / chol[i * n + i];
    }
}

inline void solve_upper_transposed(const std::vector<double>& chol, std::size_t n,
                                   std::vector<double>& b) {
    for (std::size_t ii = n; ii-- > 0;) {
        double v = b[ii];
        for (std::size_t k = ii + 1; k < n; ++k) v -= chol[k * n + ii] * b[k];
        b[ii] = v / chol[ii * n + ii];
    }
}

inline double normal_pdf(double z) {
    return 0.3989422804014327 * std::exp(-0.5 * z * z);
}

inline double normal_cdf(double z) {
    return 0.5 * std::erfc(-z * 0.7071067811865476);
}

}  // namespace detail

/// Fitted GP posterior over observed 1-D points.
struct GpSurrogate {
    std::vector<double> observed_points;
    std::vector<double> observed_values;
    double length_scale = 1.0;
    double signal_variance = 1.0;
    double noise_jitter = 1e-8;

    // Fit state: lower Cholesky of K + jitter*I and alpha = K^{-1}(y - mean).
    std::vector<double> chol;
    std::vector<double> alpha;
    double value_mean = 0.0;

    double kernel(double a, double b) const {
        const double d = (a - b) / length_scale;
        return signal_variance * std::exp(-0.5 * d * d);
    }

    /// Closed-form posterior mean and standard deviation at x.
    void posterior(double x, double& mean, double& stddev) const {
        const std::size_t n = observed_points.size();
        std::vector<double> k_star(n);
        for (std::size_t i = 0; i < n; ++i) k_star[i] = kernel(x, observed_points[i]);

        mean = value_mean;
        for (std::size_t i = 0; i < n; ++i) mean += k_star[i] * alpha[i];

        std::vector<double> v = k_star;
        detail::solve_lower(chol, n, v);
        double reduction = 0.0;
        for (std::size_t i = 0; i < n; ++i) reduction += v[i] * v[i];
        const double variance = std::max(0.0, kernel(x, x) + noise_jitter - reduction);
        stddev = std::sqrt(variance);
    }
};

namespace detail {

// Builds the Cholesky state for given hyperparameters; returns the log
// marginal likelihood, or -inf when the kernel matrix is not PD even after
// jitter escalation.
inline double build_gp(GpSurrogate& gp) {
    const std::size_t n = gp.observed_points.size();
    double jitter = gp.noise_jitter;
    for (int attempt = 0; attempt < 8; ++attempt) {
        std::vector<double> k(n * n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                k[i * n + j] = gp.kernel(gp.observed_points[i], gp.observed_points[j]);
            }
            k[i * n + i] += jitter;
        }
        if (cholesky_in_place(k, n)) {
            gp.noise_jitter = jitter;
            gp.chol = std::move(k);
            gp.value_mean = 0.0;
            for (double v : gp.observed_values) gp.value_mean += v;
            gp.value_mean /= static_cast<double>(n);

            gp.alpha.assign(gp.observed_values.begin(), gp.observed_values.end());
            for (double& v : gp.alpha) v -= gp.value_mean;
            solve_lower(gp.chol, n, gp.alpha);

            double quad = 0.0;
            double log_det_half = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                quad += gp.alpha[i] * gp.alpha[i];
                log_det_half += std::log(gp.chol[i * n + i]);
            }
            solve_upper_transposed(gp.chol, n, gp.alpha);
            return -0.5 * quad - log_det_half -
                   0.5 * static_cast<double>(n) * std::log(2.0 * 3.141592653589793);
        }
        jitter = (jitter == 0.0) ? 1e-12 : jitter * 100.0;
    }
    return -std::numeric_limits<double>::infinity();
}

}  // namespace detail

/// Fits the squared-exponential GP, choosing (length_scale, signal_variance)
/// by log marginal likelihood over a fixed 8x8 grid scaled to the data.
inline GpSurrogate gp_fit(std::span<const double> points, std::span<const double> values,
                          double noise_jitter = 1e-8) {
    if (points.size() != values.size()) {
        throw std::invalid_argument("gp_fit: points/values length mismatch");
    }
    if (points.size() < 2) throw std::invalid_argument("gp_fit: need at least 2 observations");
    for (double v : values) {
        if (!std::isfinite(v)) throw std::invalid_argument("gp_fit: non-finite observed value");
    }
    for (double p : points) {
        if (!std::isfinite(p)) throw std::invalid_argument("gp_fit: non-finite observed point");
    }

    const auto [min_it, max_it] = std::minmax_element(points.begin(), points.end());
    double span = *max_it - *min_it;
    if (span <= 0.0) span = 1.0;

    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double variance = 0.0;
    for (double v : values) variance += (v - mean) * (v - mean);
    variance /= static_cast<double>(values.size());
    variance = std::max(variance, 1e-12);

    GpSurrogate best;
    double best_lml = -std::numeric_limits<double>::infinity();
    for (int li = 0; li < 8; ++li) {
        // length scales from span/100 to span, log-spaced
        const double ell = span * std::pow(10.0, -2.0 + 2.0 * li / 7.0);
        for (int si = 0; si < 8; ++si) {
            // signal variances from var/100 to 10*var, log-spaced
            const double sig2 = variance * std::pow(10.0, -2.0 + 3.0 * si / 7.0);
            GpSurrogate candidate;
            candidate.observed_points.assign(points.begin(), points.end());
            candidate.observed_values.assign(values.begin(), values.end());
            candidate.length_scale = ell;
            candidate.signal_variance = sig2;
            candidate.noise_jitter = noise_jitter;
            const double lml = detail::build_gp(candidate);
            if (lml > best_lml) {
                best_lml = lml;
                best = std::move(candidate);
            }
        }
    }
    if (!std::isfinite(best_lml)) {
        throw std::runtime_error("gp_fit: no hyperparameter candidate gave a PD kernel");
    }
    return best;
}

/// EI(x) = (mu - f+) Phi(z) + s phi(z), z = (mu - f+)/s; the degenerate
/// s -> 0 limit is max(0, mu - f+).
inline double expected_improvement(const GpSurrogate& surrogate, double x, double best_so_far) {
    double mean = 0.0;
    double stddev = 0.0;
    surrogate.posterior(x, mean, stddev);
    const double gain = mean - best_so_far;
    if (stddev < 1e-12) return std::max(0.0, gain);
    const double z = gain / stddev;
    return gain * detail::normal_cdf(z) + stddev * detail::normal_pdf(z);
}

struct BoConfig {
    int num_initial_samples = 10;
    int num_iterations = 15;
    double domain_lo = 0.0;
    double domain_hi = 1.0;
    int acquisition_grid_size = 101;
    std::uint64_t rng_seed = 0;

    void validate() const {
        if (!(domain_lo < domain_hi)) throw std::invalid_argument("bo: empty domain");
        if (num_initial_samples < 2) throw std::invalid_argument("bo: need >= 2 initial samples");
        if (num_iterations < 0) throw std::invalid_argument("bo: iterations must be >= 0");
        if (acquisition_grid_size < 2) throw std::invalid_argument("bo: grid must have >= 2 points");
    }
};

struct BoStep {
    int step = 0;
    double x = 0.0;
    double value = 0.0;
    bool is_initial = false;
};

struct BoResult {
    double best_x = 0.0;
    double best_value = 0.0;
    std::vector<BoStep> log;
};

/// Maximizes a deterministic scalar target over [domain_lo, domain_hi].
/// When `candidates` is non-empty it replaces the uniform acquisition grid
/// and initial samples snap to the nearest candidate (used to search discrete
/// rate grids). Returns the best OBSERVED point; ties go to the lowest x.
inline BoResult bo_maximize(const std::function<double(double)>& target, const BoConfig& config,
                            std::vector<double> candidates = {}) {
    config.validate();

    const bool snap_samples = !candidates.empty();
    std::vector<double> grid;
    if (snap_samples) {
        grid = std::move(candidates);
        std::sort(grid.begin(), grid.end());
    } else {
        grid.resize(static_cast<std::size_t>(config.acquisition_grid_size));
        for (std::size_t i = 0; i < grid.size(); ++i) {
            grid[i] = config.domain_lo + (config.domain_hi - config.domain_lo) *
                                             static_cast<double>(i) /
                                             static_cast<double>(grid.size() - 1);
        }
    }

    auto snap = [&](double x) {
        auto it = std::lower_bound(grid.begin(), grid.end(), x);
        if (it == grid.end()) return grid.back();
        if (it == grid.begin()) return grid.front();
        return (x - *(it - 1) <= *it - x) ? *(it - 1) : *it;
    };

    BoResult result;
    std::vector<double> xs;
    std::vector<double> ys;
    auto evaluate = [&](double x, bool initial) {
        const double value = target(x);
        if (!std::isfinite(value)) {
            throw std::domain_error("bo_maximize: target returned non-finite value at x=" +
                                    std::to_string(x));
        }
        xs.push_back(x);
        ys.push_back(value);
        result.log.push_back({static_cast<int>(xs.size()) - 1, x, value, initial});
    };

    std::mt19937_64 rng(config.rng_seed);
    for (int i = 0; i < config.num_initial_samples; ++i) {
        double x = config.domain_lo +
                   (config.domain_hi - config.domain_lo) * detail::next_uniform(rng);
        if (snap_samples) x = snap(x);
        evaluate(x, true);
    }

    for (int t = 0; t < config.num_iterations; ++t) {
        const GpSurrogate gp = gp_fit(xs, ys);
        const double best = *std::max_element(ys.begin(), ys.end());
        double best_ei = -1.0;
        double next_x = grid.front();
        for (double x : grid) {
            const double ei = expected_improvement(gp, x, best);
            if (ei > best_ei) {
                best_ei = ei;
                next_x = x;
            }
        }
        evaluate(next_x, false);
    }

    std::size_t best_idx = 0;
    for (std::size_t i = 1; i < xs.size(); ++i) {
        if (ys[i] > ys[best_idx] || (ys[i] == ys[best_idx] && xs[i] < xs[best_idx])) {
            best_idx = i;
        }
    }
    result.best_x = xs[best_idx];
    result.best_value = ys[best_idx];
    return result;
}

}  // namespace vtr
