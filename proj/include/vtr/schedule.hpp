#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

// Core domain types: per-layer keeping-rate schedules, model dimensions,
// and attention traces. Layers are numbered 1..L throughout; the first two
// layers of a schedule are never reduced.

namespace vtr {

/// Per-layer keeping rates r_1..r_L. `monotone` tags schedules whose rates
/// must be non-increasing from layer 2 on (search outputs always are).
struct KeepingSchedule {
    std::vector<double> rates;
    bool monotone = false;

    KeepingSchedule() = default;
    KeepingSchedule(std::vector<double> r, bool mono) : rates(std::move(r)), monotone(mono) {}

    int num_layers() const { return static_cast<int>(rates.size()); }

    /// 1-based access.
    double rate(int layer) const {
        if (layer < 1 || layer > num_layers()) {
            throw std::out_of_range("layer " + std::to_string(layer) + " outside [1, " +
                                    std::to_string(num_layers()) + "]");
        }
        return rates[static_cast<std::size_t>(layer - 1)];
    }
};

/// Schedule keeping everything (rates all 1.0).
inline KeepingSchedule full_schedule(int num_layers) {
    return {std::vector<double>(static_cast<std::size_t>(num_layers), 1.0), true};
}

/// FastV-style schedule: full for layers 1..2, `rate` for layers 3..L.
inline KeepingSchedule uniform_schedule(int num_layers, double rate) {
    std::vector<double> r(static_cast<std::size_t>(num_layers), rate);
    if (num_layers >= 1) r[0] = 1.0;
    if (num_layers >= 2) r[1] = 1.0;
    return {std::move(r), true};
}

/// Transformer dimensions for the cost model. All counts strictly positive.
struct ModelDims {
    int num_layers = 0;        // L
    int hidden_size = 0;       // d
    int ffn_intermediate = 0;  // m
    int vision_tokens = 0;     // N_v
    int input_text_tokens = 0; // prompt text incl. system/template tokens
    int output_tokens = 0;     // decoded tokens

    void validate() const {
        auto positive = [](int v, const char* name) {
            if (v <= 0) throw std::invalid_argument(std::string(name) + " must be positive");
        };
        positive(num_layers, "num_layers");
        positive(hidden_size, "hidden_size");
        positive(ffn_intermediate, "ffn_intermediate");
        positive(vision_tokens, "vision_tokens");
        positive(input_text_tokens, "input_text_tokens");
        positive(output_tokens, "output_tokens");
    }
};

/// L x N matrix of per-layer vision-token attention mass toward instruction
/// tokens. Row-major, row = layer (1-based in the API).
struct AttentionTrace {
    int layer_count = 0;
    int token_count = 0;
    std::vector<double> scores;  // layer_count * token_count

    AttentionTrace() = default;
    AttentionTrace(int layers, int tokens)
        : layer_count(layers),
          token_count(tokens),
          scores(static_cast<std::size_t>(layers) * static_cast<std::size_t>(tokens), 0.0) {}

    std::span<const double> row(int layer) const {
        check_layer(layer);
        return {scores.data() + static_cast<std::size_t>(layer - 1) * token_count,
                static_cast<std::size_t>(token_count)};
    }

    std::span<double> row(int layer) {
        check_layer(layer);
        return {scores.data() + static_cast<std::size_t>(layer - 1) * token_count,
                static_cast<std::size_t>(token_count)};
    }

    double at(int layer, int token) const { return row(layer)[static_cast<std::size_t>(token)]; }

    void validate() const {
        if (layer_count <= 0 || token_count <= 0) {
            throw std::invalid_argument("trace dimensions must be positive");
        }
        if (scores.size() != static_cast<std::size_t>(layer_count) * token_count) {
            throw std::invalid_argument("trace score buffer does not match dimensions");
        }
        for (double s : scores) {
            if (!std::isfinite(s) || s < 0.0) {
                throw std::invalid_argument("trace scores must be finite and non-negative");
            }
        }
    }

private:
    void check_layer(int layer) const {
        if (layer < 1 || layer > layer_count) {
            throw std::out_of_range("trace layer " + std::to_string(layer) + " outside [1, " +
                                    std::to_string(layer_count) + "]");
        }
    }
};

inline long long round_half_up(double x) {
    return static_cast<long long>(std::floor(x + 0.5));
}

/// Invariant check; returns the list of violations (empty when valid).
inline std::vector<std::string> validate(const KeepingSchedule& schedule) {
    std::vector<std::string> violations;
    const int L = schedule.num_layers();
    if (L < 1) {
        violations.push_back("schedule must have at least one layer");
        return violations;
    }
    if (schedule.rates[0] != 1.0 || (L >= 2 && schedule.rates[1] != 1.0)) {
        violations.push_back("first two layers must be 1.0");
    }
    for (int i = 1; i <= L; ++i) {
        const double r = schedule.rates[static_cast<std::size_t>(i - 1)];
        if (!(r >= 0.0 && r <= 1.0)) {
            violations.push_back("rate at layer " + std::to_string(i) + " outside [0, 1]");
        }
    }
    if (schedule.monotone) {
        for (int i = 3; i <= L; ++i) {
            if (schedule.rates[static_cast<std::size_t>(i - 1)] >
                schedule.rates[static_cast<std::size_t>(i - 2)]) {
                violations.push_back("monotonicity violated between layers " +
                                     std::to_string(i - 1) + " and " + std::to_string(i));
            }
        }
    }
    return violations;
}

inline bool is_valid(const KeepingSchedule& schedule) { return validate(schedule).empty(); }

inline void require_valid(const KeepingSchedule& schedule) {
    auto violations = validate(schedule);
    if (!violations.empty()) {
        std::string msg = "invalid schedule:";
        for (const auto& v : violations) msg += " " + v + ";";
        throw std::invalid_argument(msg);
    }
}

/// Kept vision tokens per layer: n_i = round_half_up(r_i * N_v), clamped to
/// the previous layer's count for monotone-tagged schedules so kept sets can
/// nest even when rounding jitters upward.
inline std::vector<int> token_counts(const KeepingSchedule& schedule, int vision_tokens) {
    if (vision_tokens < 1) throw std::invalid_argument("vision_tokens must be >= 1");
    require_valid(schedule);
    std::vector<int> counts;
    counts.reserve(schedule.rates.size());
    for (std::size_t i = 0; i < schedule.rates.size(); ++i) {
        int n = static_cast<int>(round_half_up(schedule.rates[i] * vision_tokens));
        if (schedule.monotone && i >= 2 && n > counts[i - 1]) n = counts[i - 1];
        counts.push_back(n);
    }
    return counts;
}

}  // namespace vtr
