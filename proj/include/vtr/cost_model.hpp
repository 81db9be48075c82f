#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vtr/schedule.hpp"

// Layerwise FLOPs/MACs and KV-cache memory accounting.
//
// Per-layer cost of one transformer layer over n tokens:
//
//   C_i = 4*n*d^2 + 2*n^2*d + 2*n*d*m        (multiply-accumulates)
//
// (QKVO projections, attention score + weighted sum, two-matrix FFN).
// The FLOPs view is exactly 2x the MACs view; both are reported.

namespace vtr {

struct CostReport {
    double total_flops = 0.0;
    double total_macs = 0.0;
    double memory_rate = 0.0;  // kept vision tokens / (L * N_v), KV-cache proxy
    std::vector<double> per_layer_flops;
    // Decoding modeled as output_tokens sequential steps attending over the
    // retained KV cache; kept separate from the prefill totals above.
    double decode_flops = 0.0;
    double decode_macs = 0.0;
};

/// MACs of one layer over `tokens` tokens. Real-valued on purpose: budget
/// matching and the uniform-minimum comparisons need the rounding-free view.
inline double layer_macs(double tokens, const ModelDims& dims) {
    if (tokens < 0.0) throw std::invalid_argument("token count must be >= 0");
    const double d = static_cast<double>(dims.hidden_size);
    const double m = static_cast<double>(dims.ffn_intermediate);
    return 4.0 * tokens * d * d + 2.0 * tokens * tokens * d + 2.0 * tokens * d * m;
}

inline double layer_flops(double tokens, const ModelDims& dims) {
    return 2.0 * layer_macs(tokens, dims);
}

/// Prefill MACs for explicit (possibly real-valued) per-layer token totals.
inline double total_macs_for_counts(std::span<const double> tokens_per_layer,
                                    const ModelDims& dims) {
    double total = 0.0;
    for (double n : tokens_per_layer) total += layer_macs(n, dims);
    return total;
}

namespace detail {

inline double decode_macs_for_counts(std::span<const int> kept_vision, const ModelDims& dims) {
    // Each decode step sees the retained prefill KV plus the tokens generated
    // so far (including its own).
    const double d = static_cast<double>(dims.hidden_size);
    const double m = static_cast<double>(dims.ffn_intermediate);
    double total = 0.0;
    for (int step = 1; step <= dims.output_tokens; ++step) {
        for (int kv : kept_vision) {
            const double kv_len = static_cast<double>(kv + dims.input_text_tokens + step);
            total += 4.0 * d * d + 2.0 * kv_len * d + 2.0 * d * m;
        }
    }
    return total;
}

}  // namespace detail

/// Full cost report for a schedule: integer token counts per layer
/// (kept vision + text) through the MACs formula.
inline CostReport schedule_cost(const KeepingSchedule& schedule, const ModelDims& dims) {
    dims.validate();
    if (schedule.num_layers() != dims.num_layers) {
        throw std::invalid_argument("schedule has " + std::to_string(schedule.num_layers()) +
                                    " layers, dims expect " + std::to_string(dims.num_layers));
    }
    const std::vector<int> kept = token_counts(schedule, dims.vision_tokens);

    CostReport report;
    report.per_layer_flops.reserve(kept.size());
    long long kept_total = 0;
    for (int n_vision : kept) {
        kept_total += n_vision;
        const double macs = layer_macs(static_cast<double>(n_vision + dims.input_text_tokens), dims);
        report.total_macs += macs;
        report.per_layer_flops.push_back(2.0 * macs);
    }
    report.total_flops = 2.0 * report.total_macs;
    report.memory_rate = static_cast<double>(kept_total) /
                         (static_cast<double>(dims.num_layers) * dims.vision_tokens);
    report.decode_macs = detail::decode_macs_for_counts(kept, dims);
    report.decode_flops = 2.0 * report.decode_macs;
    return report;
}

/// Rounding-free prefill MACs for a schedule (n_i = r_i * N_v + text).
/// This is the view budget matching bisects on: continuous and strictly
/// increasing in every rate.
inline double schedule_macs_continuous(const KeepingSchedule& schedule, const ModelDims& dims) {
    dims.validate();
    if (schedule.num_layers() != dims.num_layers) {
        throw std::invalid_argument("schedule/dims layer mismatch");
    }
    double total = 0.0;
    for (double r : schedule.rates) {
        total += layer_macs(r * dims.vision_tokens + dims.input_text_tokens, dims);
    }
    return total;
}

inline double schedule_flops_continuous(const KeepingSchedule& schedule, const ModelDims& dims) {
    return 2.0 * schedule_macs_continuous(schedule, dims);
}

/// A one-parameter schedule family whose cost grows with the parameter.
struct ScheduleFamily {
    std::function<KeepingSchedule(double)> make;
    double param_lo = 0.0;
    double param_hi = 1.0;
};

/// Finds the family parameter whose (continuous) prefill FLOPs match
/// `target_flops`, by bisection to relative tolerance `rel_tol` on the
/// parameter. Throws std::out_of_range naming the achievable range when the
/// target is not reachable.
inline double match_budget(double target_flops, const ModelDims& dims,
                           const ScheduleFamily& family, double rel_tol = 1e-6) {
    auto cost_at = [&](double theta) {
        return schedule_flops_continuous(family.make(theta), dims);
    };
    double lo = family.param_lo;
    double hi = family.param_hi;
    const double cost_lo = cost_at(lo);
    const double cost_hi = cost_at(hi);
    if (target_flops < cost_lo || target_flops > cost_hi) {
        throw std::out_of_range("target " + std::to_string(target_flops) +
                                " FLOPs outside achievable [" + std::to_string(cost_lo) + ", " +
                                std::to_string(cost_hi) + "]");
    }
    while (hi - lo > rel_tol * std::max(1.0, std::abs(hi))) {
        const double mid = 0.5 * (lo + hi);
        if (cost_at(mid) < target_flops) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace vtr
