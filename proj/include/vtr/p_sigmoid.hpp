#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "vtr/bayes_opt.hpp"
#include "vtr/cost_model.hpp"
#include "vtr/schedule.hpp"

// Parametric sigmoid schedule family
//
//   r(i) = 2b / (1 + e^{k (i - alpha)}),   i in [3, L],  alpha = (3 + L) / 2
//
// The pairing r(i) + r(3+L-i) = 2b makes the budget identity
// sum_{i=3}^{L} r(i) = (L-2) b exact for every k >= 0 as long as no clamping
// triggers (b <= 0.5). Raw rates above 1 (possible when 2b > 1) are clamped
// to 1 and the achieved budget then falls below the requested one.

namespace vtr {

struct PSigmoidParams {
    double budget = 0.25;    // b: mean keeping rate over layers 3..L
    double steepness = 0.0;  // k >= 0
    int num_layers = 32;

    double midpoint() const { return 0.5 * (3.0 + static_cast<double>(num_layers)); }

    void validate() const {
        if (!(budget > 0.0 && budget <= 1.0)) {
            throw std::invalid_argument("p-sigmoid: budget must be in (0, 1]");
        }
        if (!(steepness >= 0.0)) throw std::invalid_argument("p-sigmoid: steepness must be >= 0");
        if (num_layers < 3) throw std::invalid_argument("p-sigmoid: needs at least 3 layers");
    }
};

inline constexpr double kDefaultSteepnessMax = 20.0;

inline double sigmoid_rate(int layer, const PSigmoidParams& params) {
    params.validate();
    if (layer < 3 || layer > params.num_layers) {
        throw std::out_of_range("sigmoid_rate: layer " + std::to_string(layer) +
                                " outside domain [3, " + std::to_string(params.num_layers) + "]");
    }
    const double raw =
        2.0 * params.budget /
        (1.0 + std::exp(params.steepness * (static_cast<double>(layer) - params.midpoint())));
    return std::min(1.0, raw);
}

inline KeepingSchedule schedule_from_params(const PSigmoidParams& params) {
    params.validate();
    std::vector<double> rates(static_cast<std::size_t>(params.num_layers), 1.0);
    for (int i = 3; i <= params.num_layers; ++i) {
        rates[static_cast<std::size_t>(i - 1)] = sigmoid_rate(i, params);
    }
    return {std::move(rates), true};
}

struct KSearchResult {
    PSigmoidParams params;
    KeepingSchedule schedule;
    double value = 0.0;
    std::vector<BoStep> log;
};

/// Searches the steepness k in [0, steepness_max] that maximizes the
/// evaluator under a fixed budget; b is pinned by the budget, never searched.
inline KSearchResult k_search(const std::function<double(const KeepingSchedule&)>& evaluator,
                              double budget, int num_layers, const BoConfig& bo,
                              double steepness_max = kDefaultSteepnessMax) {
    BoConfig config = bo;
    config.domain_lo = 0.0;
    config.domain_hi = steepness_max;

    auto target = [&](double k) {
        return evaluator(schedule_from_params({budget, k, num_layers}));
    };
    const BoResult result = bo_maximize(target, config);

    KSearchResult out;
    out.params = {budget, result.best_x, num_layers};
    out.schedule = schedule_from_params(out.params);
    out.value = result.best_value;
    out.log = result.log;
    return out;
}

struct PSigmoidFit {
    PSigmoidParams params;
    double residual = 0.0;  // sum of squared rate errors over layers 3..L
};

namespace detail {

inline double fit_residual(const KeepingSchedule& schedule, double budget, double k) {
    const PSigmoidParams params{budget, k, schedule.num_layers()};
    double residual = 0.0;
    for (int i = 3; i <= schedule.num_layers(); ++i) {
        const double diff = schedule.rate(i) - sigmoid_rate(i, params);
        residual += diff * diff;
    }
    return residual;
}

inline double golden_section_min(const std::function<double(double)>& f, double lo, double hi,
                                 double tol) {
    constexpr double kInvPhi = 0.6180339887498949;
    double a = lo;
    double b = hi;
    double x1 = b - kInvPhi * (b - a);
    double x2 = a + kInvPhi * (b - a);
    double f1 = f(x1);
    double f2 = f(x2);
    while (b - a > tol) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - kInvPhi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + kInvPhi * (b - a);
            f2 = f(x2);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace detail

/// Least-squares fit of a monotone schedule to the sigmoid family. The budget
/// is forced by the identity b = mean(rates[3..L]); only k is searched, over
/// {0} plus a 200-point log grid in [1e-3, 100], then refined by golden
/// section. Small upward jitter (<= 0.05, e.g. measurement noise) is
/// tolerated in the monotonicity check.
inline PSigmoidFit fit_psigmoid(const KeepingSchedule& schedule) {
    const int L = schedule.num_layers();
    if (L < 4) throw std::invalid_argument("fit_psigmoid: need at least 4 layers");
    constexpr double kMonotoneTolerance = 0.05;
    for (int i = 3; i <= L; ++i) {
        if (schedule.rate(i) > schedule.rate(i - 1) + kMonotoneTolerance) {
            throw std::invalid_argument("fit_psigmoid: schedule not monotone at layer " +
                                        std::to_string(i));
        }
    }

    double budget = 0.0;
    for (int i = 3; i <= L; ++i) budget += schedule.rate(i);
    budget /= static_cast<double>(L - 2);
    budget = std::clamp(budget, 1e-12, 1.0);

    auto residual_at = [&](double k) { return detail::fit_residual(schedule, budget, k); };

    constexpr double kGridLo = 1e-3;
    constexpr double kGridHi = 100.0;
    constexpr int kGridPoints = 200;
    std::vector<double> candidates;
    candidates.reserve(kGridPoints + 1);
    candidates.push_back(0.0);  // exact flat limit, below the log grid
    for (int j = 0; j < kGridPoints; ++j) {
        candidates.push_back(kGridLo * std::pow(kGridHi / kGridLo,
                                                static_cast<double>(j) /
                                                    static_cast<double>(kGridPoints - 1)));
    }

    std::size_t best_idx = 0;
    double best_residual = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < candidates.size(); ++j) {
        const double r = residual_at(candidates[j]);
        if (r < best_residual) {
            best_residual = r;
            best_idx = j;
        }
    }

    const double lo = (best_idx == 0) ? 0.0 : candidates[best_idx - 1];
    const double hi =
        (best_idx + 1 < candidates.size()) ? candidates[best_idx + 1] : candidates.back();
    double k = detail::golden_section_min(residual_at, lo, hi, 1e-6);
    if (residual_at(candidates[best_idx]) < residual_at(k)) k = candidates[best_idx];

    PSigmoidFit fit;
    fit.params = {budget, k, L};
    fit.residual = residual_at(k);
    return fit;
}

/// Budget b whose P-Sigmoid schedule (at fixed steepness k) matches the
/// target prefill FLOPs; delegates to the cost model's bisection.
inline double budget_for_flops(double target_flops, const ModelDims& dims, double steepness) {
    ScheduleFamily family;
    family.param_lo = 1e-9;
    family.param_hi = 1.0;
    family.make = [&dims, steepness](double b) {
        return schedule_from_params({b, steepness, dims.num_layers});
    };
    return match_budget(target_flops, dims, family);
}

}  // namespace vtr
