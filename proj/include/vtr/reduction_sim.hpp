#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vtr/bayes_opt.hpp"  // detail::next_uniform
#include "vtr/schedule.hpp"

// Sort & Reduce inference simulator over a synthetic oracle with nested
// essential token sets E_3 ⊇ E_4 ⊇ ... ⊇ E_L. The oracle makes the optimal
// schedule analytically known, so search optimality is testable.
//
// Trace construction: row 1 is pure noise. Rows 2..L are a fixed depth-graded
// essential ladder B(v) = bonus * max(0, depth(v) - 2) (depth(v) = deepest
// layer whose essential set contains v) plus AR(1) noise
// w_i = rho*w_{i-1} + (1-rho)*noise_scale*eta_i. The ladder separates depth
// classes by `bonus` in every row while the noise spread stays below
// noise_scale, so essential tokens strictly outrank non-essential ones
// whenever noise_scale < bonus — that bound is asserted at construction.

namespace vtr {

struct SyntheticOracle {
    std::vector<std::vector<int>> essential_sets;  // index j -> set for layer j+3, sorted
    int vision_tokens = 0;
    double persistence = 0.95;   // rho
    double noise_scale = 0.05;
    std::uint64_t rng_seed = 0;
    double bonus = 2.0;

    int num_layers() const { return static_cast<int>(essential_sets.size()) + 2; }

    bool has_essentials() const {
        for (const auto& set : essential_sets) {
            if (!set.empty()) return true;
        }
        return false;
    }

    /// |E_i| / N_v for layer i in [3, L].
    double essential_fraction(int layer) const {
        return static_cast<double>(essential_set(layer).size()) / vision_tokens;
    }

    const std::vector<int>& essential_set(int layer) const {
        if (layer < 3 || layer > num_layers()) {
            throw std::out_of_range("essential sets cover layers [3, " +
                                    std::to_string(num_layers()) + "]");
        }
        return essential_sets[static_cast<std::size_t>(layer - 3)];
    }

    /// Deepest layer whose essential set contains the token (0 when none).
    int depth_of(int token) const {
        for (int layer = num_layers(); layer >= 3; --layer) {
            const auto& set = essential_set(layer);
            if (std::binary_search(set.begin(), set.end(), token)) return layer;
        }
        return 0;
    }

    void validate() const {
        if (vision_tokens < 1) throw std::invalid_argument("oracle: vision_tokens must be >= 1");
        if (essential_sets.empty()) throw std::invalid_argument("oracle: needs layers beyond 2");
        if (!(persistence >= 0.0 && persistence <= 1.0)) {
            throw std::invalid_argument("oracle: persistence outside [0, 1]");
        }
        if (noise_scale < 0.0) throw std::invalid_argument("oracle: noise_scale must be >= 0");
        for (std::size_t j = 0; j < essential_sets.size(); ++j) {
            const auto& set = essential_sets[j];
            if (!std::is_sorted(set.begin(), set.end())) {
                throw std::invalid_argument("oracle: essential sets must be sorted");
            }
            for (int token : set) {
                if (token < 0 || token >= vision_tokens) {
                    throw std::invalid_argument("oracle: essential token index out of range");
                }
            }
            if (j > 0) {
                const auto& outer = essential_sets[j - 1];
                if (!std::includes(outer.begin(), outer.end(), set.begin(), set.end())) {
                    throw std::invalid_argument("oracle: essential sets must be nested, E_" +
                                                std::to_string(j + 3) + " is not inside E_" +
                                                std::to_string(j + 2));
                }
            }
        }
        if (static_cast<int>(essential_sets.front().size()) > vision_tokens) {
            throw std::invalid_argument("oracle: |E_3| exceeds vision token count");
        }
        // Ground-truth regime: essential ranks stay strict only while the
        // noise spread is below the ladder rung.
        if (has_essentials() && noise_scale >= bonus) {
            throw std::invalid_argument(
                "oracle: noise_scale " + std::to_string(noise_scale) +
                " is at or above the essential-outranking threshold " + std::to_string(bonus));
        }
    }
};

/// Nested random essential sets of the given sizes (one per layer 3..L,
/// non-increasing). E_3 is drawn from all tokens, each deeper set from the
/// one above it.
inline SyntheticOracle make_random_oracle(const std::vector<int>& essential_sizes,
                                          int vision_tokens, double persistence,
                                          double noise_scale, std::uint64_t seed) {
    if (essential_sizes.empty()) throw std::invalid_argument("need at least one layer beyond 2");
    for (std::size_t j = 1; j < essential_sizes.size(); ++j) {
        if (essential_sizes[j] > essential_sizes[j - 1]) {
            throw std::invalid_argument("essential sizes must be non-increasing");
        }
    }
    if (essential_sizes.front() > vision_tokens || essential_sizes.back() < 0) {
        throw std::invalid_argument("essential sizes must fit in [0, vision_tokens]");
    }

    std::mt19937_64 rng(seed);
    auto sample_subset = [&](std::vector<int> pool, int size) {
        // Seeded partial Fisher-Yates; uniform index from raw bits.
        for (int i = 0; i < size; ++i) {
            const auto remaining = static_cast<std::uint64_t>(pool.size() - i);
            const auto pick = i + static_cast<int>(rng() % remaining);
            std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick)]);
        }
        pool.resize(static_cast<std::size_t>(size));
        std::sort(pool.begin(), pool.end());
        return pool;
    };

    SyntheticOracle oracle;
    oracle.vision_tokens = vision_tokens;
    oracle.persistence = persistence;
    oracle.noise_scale = noise_scale;
    oracle.rng_seed = seed;

    std::vector<int> pool(static_cast<std::size_t>(vision_tokens));
    std::iota(pool.begin(), pool.end(), 0);
    for (int size : essential_sizes) {
        pool = sample_subset(std::move(pool), size);
        oracle.essential_sets.push_back(pool);
    }
    oracle.validate();
    return oracle;
}

/// Deterministic trace realization of the oracle (same seed, same trace).
inline AttentionTrace generate_trace(const SyntheticOracle& oracle, int num_layers) {
    oracle.validate();
    if (num_layers != oracle.num_layers()) {
        throw std::invalid_argument("trace layer count " + std::to_string(num_layers) +
                                    " does not match oracle layers " +
                                    std::to_string(oracle.num_layers()));
    }
    const int n = oracle.vision_tokens;
    AttentionTrace trace(num_layers, n);

    std::vector<double> ladder(static_cast<std::size_t>(n), 0.0);
    for (int token = 0; token < n; ++token) {
        const int depth = oracle.depth_of(token);
        if (depth >= 3) {
            ladder[static_cast<std::size_t>(token)] = oracle.bonus * static_cast<double>(depth - 2);
        }
    }

    std::mt19937_64 rng(oracle.rng_seed);
    auto noise_row = [&](std::span<double> out, double scale) {
        for (double& v : out) v = scale * detail::next_uniform(rng);
    };

    std::vector<double> walk(static_cast<std::size_t>(n));
    noise_row(walk, oracle.noise_scale);
    std::copy(walk.begin(), walk.end(), trace.row(1).begin());

    std::vector<double> fresh(static_cast<std::size_t>(n));
    for (int layer = 2; layer <= num_layers; ++layer) {
        noise_row(fresh, oracle.noise_scale);
        auto row = trace.row(layer);
        for (int token = 0; token < n; ++token) {
            const auto t = static_cast<std::size_t>(token);
            walk[t] = oracle.persistence * walk[t] + (1.0 - oracle.persistence) * fresh[t];
            row[t] = ladder[t] + walk[t];
        }
    }
    return trace;
}

/// Keeps the n_target members of `kept` with the highest prev_scores, ties by
/// ascending index. Result is sorted ascending.
inline std::vector<int> sort_and_reduce(std::span<const double> prev_scores,
                                        const std::vector<int>& kept, int n_target) {
    if (n_target > static_cast<int>(kept.size())) {
        throw std::invalid_argument("sort_and_reduce: target " + std::to_string(n_target) +
                                    " exceeds surviving count " + std::to_string(kept.size()) +
                                    " (schedule monotonicity violation)");
    }
    if (n_target < 0) throw std::invalid_argument("sort_and_reduce: negative target");
    std::vector<int> order = kept;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double sa = prev_scores[static_cast<std::size_t>(a)];
        const double sb = prev_scores[static_cast<std::size_t>(b)];
        if (sa != sb) return sa > sb;
        return a < b;
    });
    order.resize(static_cast<std::size_t>(n_target));
    std::sort(order.begin(), order.end());
    return order;
}

struct ReductionRun {
    KeepingSchedule schedule;
    std::vector<std::vector<int>> kept_indices;  // one set per layer 1..L
    std::vector<double> per_layer_recall;        // layers 3..L
    double score = 0.0;
};

/// Runs Sort & Reduce layer by layer against the oracle's trace; score is the
/// mean essential recall over layers 3..L. Empty essential sets demand
/// nothing and count as recall 1.
inline ReductionRun evaluate_run(const SyntheticOracle& oracle, const AttentionTrace& trace,
                                 const KeepingSchedule& schedule) {
    const int L = oracle.num_layers();
    if (schedule.num_layers() != L) {
        throw std::invalid_argument("schedule has " + std::to_string(schedule.num_layers()) +
                                    " layers, oracle has " + std::to_string(L));
    }
    const std::vector<int> counts = token_counts(schedule, oracle.vision_tokens);

    ReductionRun run;
    run.schedule = schedule;

    std::vector<int> kept(static_cast<std::size_t>(oracle.vision_tokens));
    std::iota(kept.begin(), kept.end(), 0);
    run.kept_indices.push_back(kept);
    if (L >= 2) run.kept_indices.push_back(kept);

    double recall_sum = 0.0;
    for (int layer = 3; layer <= L; ++layer) {
        kept = sort_and_reduce(trace.row(layer - 1), kept,
                               counts[static_cast<std::size_t>(layer - 1)]);
        run.kept_indices.push_back(kept);

        const auto& essential = oracle.essential_set(layer);
        double recall = 1.0;
        if (!essential.empty()) {
            std::vector<int> hit;
            std::set_intersection(kept.begin(), kept.end(), essential.begin(), essential.end(),
                                  std::back_inserter(hit));
            recall = static_cast<double>(hit.size()) / static_cast<double>(essential.size());
        }
        run.per_layer_recall.push_back(recall);
        recall_sum += recall;
    }
    run.score = (L > 2) ? recall_sum / static_cast<double>(L - 2) : 1.0;
    return run;
}

inline double evaluate(const SyntheticOracle& oracle, const KeepingSchedule& schedule,
                       int num_layers) {
    const AttentionTrace trace = generate_trace(oracle, num_layers);
    return evaluate_run(oracle, trace, schedule).score;
}

}  // namespace vtr
