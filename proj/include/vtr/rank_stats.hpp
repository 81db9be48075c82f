#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vtr/schedule.hpp"

// Vision-token ranking by attention score and Kendall's-Tau rank correlation
// between layers.

namespace vtr {

/// Token indices of one layer sorted by descending score, ties broken by
/// ascending token index so downstream reductions are deterministic.
struct LayerRanking {
    std::vector<int> order;
    int layer_index = 0;
};

inline LayerRanking rank_layer(const AttentionTrace& trace, int layer) {
    const auto scores = trace.row(layer);  // throws on out-of-range layer
    LayerRanking ranking;
    ranking.layer_index = layer;
    ranking.order.resize(scores.size());
    std::iota(ranking.order.begin(), ranking.order.end(), 0);
    std::sort(ranking.order.begin(), ranking.order.end(), [&](int a, int b) {
        if (scores[static_cast<std::size_t>(a)] != scores[static_cast<std::size_t>(b)]) {
            return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
        }
        return a < b;
    });
    return ranking;
}

namespace detail {

// Merge-sort inversion count: number of pairs i < j with values[i] > values[j].
// Equal values are taken from the left run first and counted as no inversion.
inline unsigned long long count_inversions(std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<double> buffer(n);
    unsigned long long inversions = 0;
    for (std::size_t width = 1; width < n; width *= 2) {
        for (std::size_t lo = 0; lo + width < n; lo += 2 * width) {
            const std::size_t mid = lo + width;
            const std::size_t hi = std::min(lo + 2 * width, n);
            std::size_t left = lo;
            std::size_t right = mid;
            std::size_t out = lo;
            while (left < mid && right < hi) {
                if (values[right] < values[left]) {
                    inversions += mid - left;
                    buffer[out++] = values[right++];
                } else {
                    buffer[out++] = values[left++];
                }
            }
            while (left < mid) buffer[out++] = values[left++];
            while (right < hi) buffer[out++] = values[right++];
            std::copy(buffer.begin() + static_cast<std::ptrdiff_t>(lo),
                      buffer.begin() + static_cast<std::ptrdiff_t>(hi),
                      values.begin() + static_cast<std::ptrdiff_t>(lo));
        }
    }
    return inversions;
}

inline double tied_pair_count(const std::vector<double>& sorted) {
    double pairs = 0.0;
    std::size_t run = 1;
    for (std::size_t i = 1; i <= sorted.size(); ++i) {
        if (i < sorted.size() && sorted[i] == sorted[i - 1]) {
            ++run;
        } else {
            pairs += 0.5 * static_cast<double>(run) * static_cast<double>(run - 1);
            run = 1;
        }
    }
    return pairs;
}

}  // namespace detail

/// Kendall's tau-b between two paired value vectors, O(N log N) via Knight's
/// algorithm: sort by (x asc, y asc), then discordant pairs are exactly the
/// strict y-inversions; tie corrections enter through the denominator.
/// Fully tied (or length < 2) input carries no rank information: returns 0.
inline double kendall_tau(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw std::invalid_argument("kendall_tau: size mismatch " + std::to_string(x.size()) +
                                    " vs " + std::to_string(y.size()));
    }
    const std::size_t n = x.size();
    if (n < 2) return 0.0;

    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        const auto ua = static_cast<std::size_t>(a);
        const auto ub = static_cast<std::size_t>(b);
        if (x[ua] != x[ub]) return x[ua] < x[ub];
        return y[ua] < y[ub];
    });

    const double n0 = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);

    // Ties in x, and joint ties, over the (x, y)-sorted order.
    double n1 = 0.0;
    double n3 = 0.0;
    {
        std::size_t run_x = 1;
        std::size_t run_xy = 1;
        for (std::size_t i = 1; i <= n; ++i) {
            const bool x_equal =
                i < n && x[static_cast<std::size_t>(idx[i])] == x[static_cast<std::size_t>(idx[i - 1])];
            const bool xy_equal =
                x_equal && y[static_cast<std::size_t>(idx[i])] == y[static_cast<std::size_t>(idx[i - 1])];
            if (xy_equal) {
                ++run_xy;
            } else {
                n3 += 0.5 * static_cast<double>(run_xy) * static_cast<double>(run_xy - 1);
                run_xy = 1;
            }
            if (x_equal) {
                ++run_x;
            } else {
                n1 += 0.5 * static_cast<double>(run_x) * static_cast<double>(run_x - 1);
                run_x = 1;
            }
        }
    }

    std::vector<double> y_in_x_order(n);
    for (std::size_t i = 0; i < n; ++i) y_in_x_order[i] = y[static_cast<std::size_t>(idx[i])];
    const auto discordant = static_cast<double>(detail::count_inversions(y_in_x_order));
    const double n2 = detail::tied_pair_count(y_in_x_order);  // now sorted by y

    const double denom = std::sqrt(n0 - n1) * std::sqrt(n0 - n2);
    if (denom == 0.0) return 0.0;
    return (n0 - n1 - n2 + n3 - 2.0 * discordant) / denom;
}

/// Tau between two rankings over the implied rank vectors (rank of token t =
/// its position in the ranking's order). Rankings are tie-free by
/// construction, so tau-b coincides with plain tau here.
inline double kendall_tau(const LayerRanking& a, const LayerRanking& b) {
    if (a.order.size() != b.order.size()) {
        throw std::invalid_argument("kendall_tau: rankings cover different token counts");
    }
    const std::size_t n = a.order.size();
    std::vector<double> rank_a(n);
    std::vector<double> rank_b(n);
    for (std::size_t pos = 0; pos < n; ++pos) {
        rank_a[static_cast<std::size_t>(a.order[pos])] = static_cast<double>(pos);
        rank_b[static_cast<std::size_t>(b.order[pos])] = static_cast<double>(pos);
    }
    return kendall_tau(std::span<const double>(rank_a), std::span<const double>(rank_b));
}

/// Tau between each adjacent layer pair (i, i+1); length L-1.
struct TauSeries {
    std::vector<double> values;
};

inline TauSeries tau_series(const AttentionTrace& trace) {
    if (trace.layer_count < 2) throw std::invalid_argument("tau_series needs at least 2 layers");
    TauSeries series;
    series.values.reserve(static_cast<std::size_t>(trace.layer_count - 1));
    LayerRanking prev = rank_layer(trace, 1);
    for (int layer = 2; layer <= trace.layer_count; ++layer) {
        LayerRanking cur = rank_layer(trace, layer);
        series.values.push_back(kendall_tau(prev, cur));
        prev = std::move(cur);
    }
    return series;
}

/// Pairwise tau between all layers; symmetric with unit diagonal.
inline std::vector<std::vector<double>> tau_matrix(const AttentionTrace& trace) {
    const int L = trace.layer_count;
    std::vector<LayerRanking> rankings;
    rankings.reserve(static_cast<std::size_t>(L));
    for (int layer = 1; layer <= L; ++layer) rankings.push_back(rank_layer(trace, layer));

    std::vector<std::vector<double>> matrix(static_cast<std::size_t>(L),
                                            std::vector<double>(static_cast<std::size_t>(L), 1.0));
    for (int i = 0; i < L; ++i) {
        for (int j = i + 1; j < L; ++j) {
            const double tau = kendall_tau(rankings[static_cast<std::size_t>(i)],
                                           rankings[static_cast<std::size_t>(j)]);
            matrix[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = tau;
            matrix[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = tau;
        }
    }
    return matrix;
}

}  // namespace vtr
