#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vtr/bayes_opt.hpp"
#include "vtr/schedule.hpp"

// Greedy layer-by-layer keeping-rate search: at each searched layer maximize
// f(r_i) = E(r_3..r_{i-1}, r_i, ...) - lambda * r_i over the rate grid
// restricted to [0, r_{i-1}], where deeper layers provisionally inherit the
// candidate rate so E is well-defined mid-search. A brute-force enumerator
// over all monotone grid schedules provides the optimality oracle.

namespace vtr {

using Evaluator = std::function<double(const KeepingSchedule&)>;

enum class SearchMode {
    kAuto,        // exhaustive per-layer argmax when the grid has <= 32 points, BO otherwise
    kExhaustive,
    kBayes,
};

inline std::vector<double> default_rate_grid() {
    std::vector<double> grid(21);
    for (int i = 0; i < 21; ++i) grid[static_cast<std::size_t>(i)] = i / 20.0;
    return grid;
}

struct GSearchConfig {
    double lambda = 0.01;
    int stride = 3;
    std::vector<double> rate_grid = default_rate_grid();
    SearchMode mode = SearchMode::kAuto;
    BoConfig bo;

    void validate() const {
        if (lambda < 0.0) throw std::invalid_argument("gsearch: lambda must be >= 0");
        if (stride < 1) throw std::invalid_argument("gsearch: stride must be >= 1");
        if (rate_grid.empty()) throw std::invalid_argument("gsearch: empty rate grid");
        if (!std::is_sorted(rate_grid.begin(), rate_grid.end())) {
            throw std::invalid_argument("gsearch: rate grid must be sorted");
        }
        if (rate_grid.front() < 0.0 || rate_grid.back() > 1.0) {
            throw std::invalid_argument("gsearch: rate grid outside [0, 1]");
        }
        if (rate_grid.back() != 1.0) {
            throw std::invalid_argument("gsearch: rate grid must contain 1.0");
        }
    }
};

struct AuditRow {
    int layer = 0;
    double candidate_rate = 0.0;
    double performance = 0.0;  // E
    double target = 0.0;       // f = E - lambda * r
};

namespace detail {

/// Schedule with layers 1..2 full, layers 3..i-1 from `prefix`, and layers
/// i..L inheriting `candidate` (the mid-search extension rule).
inline KeepingSchedule extend_prefix(std::span<const double> prefix, double candidate, int layer,
                                     int num_layers) {
    std::vector<double> rates(static_cast<std::size_t>(num_layers), candidate);
    rates[0] = 1.0;
    if (num_layers >= 2) rates[1] = 1.0;
    for (std::size_t j = 0; j < prefix.size(); ++j) rates[2 + j] = prefix[j];
    (void)layer;
    return {std::move(rates), true};
}

}  // namespace detail

/// f(r_i) for a candidate rate given the already-fixed rates r_3..r_{i-1}.
inline double layer_target(const Evaluator& evaluator, std::span<const double> fixed_prefix,
                           double candidate_rate, double lambda, int num_layers) {
    const double prev = fixed_prefix.empty() ? 1.0 : fixed_prefix.back();
    if (candidate_rate > prev) {
        throw std::invalid_argument("layer_target: candidate " + std::to_string(candidate_rate) +
                                    " exceeds previous rate " + std::to_string(prev));
    }
    const int layer = 3 + static_cast<int>(fixed_prefix.size());
    const KeepingSchedule schedule =
        detail::extend_prefix(fixed_prefix, candidate_rate, layer, num_layers);
    return evaluator(schedule) - lambda * candidate_rate;
}

/// Greedy search over layers 3, 3+stride, ...; unsearched layers inherit the
/// most recent searched rate. Output is always monotone with rates[1..2] = 1.
inline KeepingSchedule g_search(const Evaluator& evaluator, int num_layers,
                                const GSearchConfig& config,
                                std::vector<AuditRow>* audit = nullptr) {
    config.validate();
    if (num_layers < 3) return full_schedule(num_layers);

    const bool exhaustive = config.mode == SearchMode::kExhaustive ||
                            (config.mode == SearchMode::kAuto && config.rate_grid.size() <= 32);

    std::vector<double> rates(static_cast<std::size_t>(num_layers), 1.0);
    std::vector<double> prefix;  // searched/inherited rates for layers 3..i-1
    double prev_rate = 1.0;

    for (int layer = 3; layer <= num_layers; layer += config.stride) {
        std::vector<double> feasible;
        for (double r : config.rate_grid) {
            if (r <= prev_rate) feasible.push_back(r);
        }

        auto probe = [&](double r) {
            const KeepingSchedule schedule =
                detail::extend_prefix(prefix, r, layer, num_layers);
            double performance;
            try {
                performance = evaluator(schedule);
            } catch (const std::exception& e) {
                throw std::runtime_error("evaluator failed at layer " + std::to_string(layer) +
                                         ": " + e.what());
            }
            const double target = performance - config.lambda * r;
            if (audit) audit->push_back({layer, r, performance, target});
            return target;
        };

        double best_rate = feasible.front();
        if (exhaustive) {
            double best_target = -std::numeric_limits<double>::infinity();
            for (double r : feasible) {  // ascending: ties keep the lowest rate
                const double t = probe(r);
                if (t > best_target) {
                    best_target = t;
                    best_rate = r;
                }
            }
        } else {
            BoConfig bo = config.bo;
            bo.domain_lo = feasible.front();
            bo.domain_hi = std::max(feasible.back(), feasible.front() + 1e-12);
            bo.rng_seed = config.bo.rng_seed + static_cast<std::uint64_t>(layer);
            if (feasible.size() == 1) {
                probe(feasible.front());
                best_rate = feasible.front();
            } else {
                const BoResult result = bo_maximize(probe, bo, feasible);
                best_rate = result.best_x;
            }
        }

        // Inherit forward; deeper searched layers overwrite.
        for (int j = layer; j <= num_layers; ++j) {
            rates[static_cast<std::size_t>(j - 1)] = best_rate;
        }
        const int next = std::min(layer + config.stride, num_layers + 1);
        for (int j = layer; j < next; ++j) prefix.push_back(best_rate);
        prev_rate = best_rate;
    }

    KeepingSchedule result{std::move(rates), true};
    require_valid(result);
    return result;
}

/// Exhaustive enumeration of monotone grid schedules, maximizing the summed
/// per-layer target sum_i (recall_i - lambda*r_i) = (L-2)*E - lambda*sum r_i.
/// Ties go to the lexicographically smallest rate vector. Guarded against
/// blowing up: at most 10^7 schedules.
inline KeepingSchedule brute_force_search(const Evaluator& evaluator, int num_layers,
                                          const GSearchConfig& config) {
    config.validate();
    if (num_layers < 3) return full_schedule(num_layers);

    const int positions = num_layers - 2;
    const std::size_t grid_size = config.rate_grid.size();
    // Monotone sequences of length `positions` over the grid: C(g+p-1, p).
    double count = 1.0;
    for (int i = 1; i <= positions; ++i) {
        count *= static_cast<double>(grid_size - 1 + i) / static_cast<double>(i);
        if (count > 1e7) {
            throw std::invalid_argument("brute_force_search: enumeration budget exceeded");
        }
    }

    std::vector<double> rates(static_cast<std::size_t>(num_layers), 1.0);
    std::vector<double> best_rates;
    double best_total = -std::numeric_limits<double>::infinity();

    // Recursion in ascending rate order per position: the first optimum seen
    // is the lexicographically smallest.
    std::function<void(int, std::size_t)> recurse = [&](int pos, std::size_t max_grid_idx) {
        if (pos == positions) {
            KeepingSchedule schedule{rates, true};
            const double performance = evaluator(schedule);
            double rate_sum = 0.0;
            for (int j = 3; j <= num_layers; ++j) rate_sum += rates[static_cast<std::size_t>(j - 1)];
            const double total =
                static_cast<double>(positions) * performance - config.lambda * rate_sum;
            if (total > best_total) {
                best_total = total;
                best_rates = rates;
            }
            return;
        }
        for (std::size_t gi = 0; gi <= max_grid_idx; ++gi) {
            rates[static_cast<std::size_t>(2 + pos)] = config.rate_grid[gi];
            recurse(pos + 1, gi);
        }
    };
    recurse(0, grid_size - 1);

    return {std::move(best_rates), true};
}

}  // namespace vtr
