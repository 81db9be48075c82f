#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "vtr/rank_stats.hpp"
#include "vtr/schedule.hpp"

using namespace vtr;

namespace {

// O(N^2) pair-counting oracle for tau-b, kept deliberately independent of the
// merge-sort implementation.
double tau_brute_force(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double concordant = 0.0;
    double discordant = 0.0;
    double ties_x = 0.0;
    double ties_y = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = x[i] - x[j];
            const double dy = y[i] - y[j];
            if (dx == 0.0) ties_x += 1.0;
            if (dy == 0.0) ties_y += 1.0;
            if (dx == 0.0 || dy == 0.0) continue;
            if ((dx > 0.0) == (dy > 0.0)) {
                concordant += 1.0;
            } else {
                discordant += 1.0;
            }
        }
    }
    const double n0 = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
    const double denom = std::sqrt(n0 - ties_x) * std::sqrt(n0 - ties_y);
    if (denom == 0.0) return 0.0;
    return (concordant - discordant) / denom;
}

std::vector<double> random_values(std::mt19937_64& rng, std::size_t n, bool with_ties) {
    std::vector<double> v(n);
    for (auto& e : v) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        e = with_ties ? std::floor(u * 12.0) : u;  // coarse bins force ties
    }
    return v;
}

AttentionTrace trace_from_rows(const std::vector<std::vector<double>>& rows) {
    AttentionTrace trace(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
    for (std::size_t l = 0; l < rows.size(); ++l) {
        std::copy(rows[l].begin(), rows[l].end(), trace.row(static_cast<int>(l) + 1).begin());
    }
    return trace;
}

}  // namespace

TEST_CASE("rank_layer sorts by descending score", "[rank_stats]") {
    const auto trace = trace_from_rows({{0.1, 0.9, 0.5}});
    CHECK(rank_layer(trace, 1).order == std::vector<int>{1, 2, 0});
}

TEST_CASE("rank_layer breaks ties by ascending index", "[rank_stats]") {
    const auto trace = trace_from_rows({{0.3, 0.3, 0.3, 0.3}});
    CHECK(rank_layer(trace, 1).order == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("rank_layer matches a stable-sort oracle", "[rank_stats]") {
    std::mt19937_64 rng(31);
    const auto scores = random_values(rng, 20, true);
    const auto trace = trace_from_rows({scores});

    std::vector<int> expected(20);
    for (int i = 0; i < 20; ++i) expected[static_cast<std::size_t>(i)] = i;
    std::stable_sort(expected.begin(), expected.end(), [&](int a, int b) {
        return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
    });

    CHECK(rank_layer(trace, 1).order == expected);
}

TEST_CASE("rank_layer rejects out-of-range layers", "[rank_stats]") {
    const auto trace = trace_from_rows({{0.1, 0.2}});
    CHECK_THROWS_AS(rank_layer(trace, 0), std::out_of_range);
    CHECK_THROWS_AS(rank_layer(trace, 2), std::out_of_range);
}

TEST_CASE("kendall_tau is exactly 1 on identical rankings", "[rank_stats]") {
    const auto trace = trace_from_rows({{0.4, 0.1, 0.8, 0.2}, {0.4, 0.1, 0.8, 0.2}});
    CHECK(kendall_tau(rank_layer(trace, 1), rank_layer(trace, 2)) == 1.0);
}

TEST_CASE("kendall_tau is exactly -1 on reversed rankings", "[rank_stats]") {
    const auto trace = trace_from_rows({{1.0, 2.0, 3.0, 4.0, 5.0}, {5.0, 4.0, 3.0, 2.0, 1.0}});
    CHECK(kendall_tau(rank_layer(trace, 1), rank_layer(trace, 2)) == -1.0);
}

TEST_CASE("kendall_tau rejects size mismatch", "[rank_stats]") {
    const std::vector<double> a{1.0, 2.0};
    const std::vector<double> b{1.0, 2.0, 3.0};
    CHECK_THROWS_AS(kendall_tau(std::span<const double>(a), std::span<const double>(b)),
                    std::invalid_argument);
}

TEST_CASE("kendall_tau agrees with the pair-counting oracle", "[rank_stats]") {
    std::mt19937_64 rng(37);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = 2 + rng() % 120;
        const bool ties = (trial % 2) == 0;
        const auto x = random_values(rng, n, ties);
        const auto y = random_values(rng, n, ties);
        const double fast = kendall_tau(std::span<const double>(x), std::span<const double>(y));
        const double slow = tau_brute_force(x, y);
        CHECK(std::abs(fast - slow) < 1e-12);
        CHECK(fast >= -1.0);
        CHECK(fast <= 1.0);
    }
}

TEST_CASE("kendall_tau is symmetric and reflexive", "[rank_stats]") {
    std::mt19937_64 rng(41);
    const auto x = random_values(rng, 50, true);
    const auto y = random_values(rng, 50, false);
    const auto xs = std::span<const double>(x);
    const auto ys = std::span<const double>(y);
    CHECK(kendall_tau(xs, ys) == kendall_tau(ys, xs));
    CHECK(kendall_tau(xs, xs) == 1.0);
}

TEST_CASE("kendall_tau is invariant under strictly monotone transforms", "[rank_stats]") {
    std::mt19937_64 rng(43);
    const auto x = random_values(rng, 80, true);
    const auto y = random_values(rng, 80, false);

    auto transform = [](const std::vector<double>& v, auto f) {
        std::vector<double> out(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = f(v[i]);
        return out;
    };
    const auto x_affine = transform(x, [](double v) { return 3.0 * v + 7.0; });
    const auto x_cubed = transform(x, [](double v) { return v * v * v; });

    const double base = kendall_tau(std::span<const double>(x), std::span<const double>(y));
    CHECK(kendall_tau(std::span<const double>(x_affine), std::span<const double>(y)) ==
          Catch::Approx(base).margin(1e-15));
    CHECK(kendall_tau(std::span<const double>(x_cubed), std::span<const double>(y)) ==
          Catch::Approx(base).margin(1e-15));
}

TEST_CASE("tau_series is 1 on identical rows", "[rank_stats]") {
    const std::vector<double> row{0.5, 0.2, 0.9, 0.1, 0.7};
    const auto trace = trace_from_rows({row, row, row, row});
    for (double v : tau_series(trace).values) CHECK(v == 1.0);
}

TEST_CASE("tau_series stays near zero on independent rows", "[rank_stats]") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(1000 + seed);
        std::vector<std::vector<double>> rows;
        for (int l = 0; l < 4; ++l) rows.push_back(random_values(rng, 200, false));
        for (double v : tau_series(trace_from_rows(rows)).values) {
            CHECK(std::abs(v) <= 0.2);
        }
    }
}

TEST_CASE("tau_matrix on identical 2-layer trace is all ones", "[rank_stats]") {
    const auto trace = trace_from_rows({{0.2, 0.8, 0.5}, {0.2, 0.8, 0.5}});
    const auto m = tau_matrix(trace);
    REQUIRE(m.size() == 2);
    CHECK(m[0][0] == 1.0);
    CHECK(m[0][1] == 1.0);
    CHECK(m[1][0] == 1.0);
    CHECK(m[1][1] == 1.0);
}

TEST_CASE("tau_matrix is symmetric with unit diagonal", "[rank_stats]") {
    std::mt19937_64 rng(47);
    std::vector<std::vector<double>> rows;
    for (int l = 0; l < 6; ++l) rows.push_back(random_values(rng, 40, true));
    const auto trace = trace_from_rows(rows);
    const auto m = tau_matrix(trace);
    for (std::size_t i = 0; i < m.size(); ++i) {
        CHECK(m[i][i] == 1.0);
        for (std::size_t j = 0; j < m.size(); ++j) CHECK(m[i][j] == m[j][i]);
    }
}

TEST_CASE("tau_matrix entries match standalone pair computation", "[rank_stats]") {
    std::mt19937_64 rng(53);
    std::vector<std::vector<double>> rows;
    for (int l = 0; l < 5; ++l) rows.push_back(random_values(rng, 30, false));
    const auto trace = trace_from_rows(rows);
    const auto m = tau_matrix(trace);
    CHECK(m[2][4] == kendall_tau(rank_layer(trace, 3), rank_layer(trace, 5)));
}
