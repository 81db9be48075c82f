#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "vtr/cost_model.hpp"
#include "vtr/schedule.hpp"

using namespace vtr;

namespace {

ModelDims llava_like() {
    return ModelDims{32, 4096, 11008, 576, 111, 5};
}

ModelDims tiny_dims(int layers) {
    return ModelDims{layers, 64, 256, 100, 20, 4};
}

}  // namespace

TEST_CASE("layer_macs at zero tokens is zero", "[cost_model]") {
    CHECK(layer_macs(0.0, llava_like()) == 0.0);
}

TEST_CASE("layer_macs hand evaluation", "[cost_model]") {
    ModelDims d{4, 2, 3, 10, 5, 1};
    CHECK(layer_macs(1.0, d) == 32.0);  // 4*1*4 + 2*1*2 + 2*1*2*3
    CHECK(layer_flops(1.0, d) == 64.0);
}

TEST_CASE("layer_macs equals term-by-term summation", "[cost_model]") {
    ModelDims dims{4, 64, 256, 100, 5, 1};
    const double n = 100.0;
    const double proj = 4.0 * n * 64.0 * 64.0;
    const double attn = 2.0 * n * n * 64.0;
    const double ffn = 2.0 * n * 64.0 * 256.0;
    CHECK(layer_macs(n, dims) == proj + attn + ffn);
}

TEST_CASE("schedule_cost reproduces the FastV memory rate", "[cost_model]") {
    const auto report = schedule_cost(uniform_schedule(32, 0.5), llava_like());
    CHECK(report.memory_rate == 0.53125);
}

TEST_CASE("schedule_cost memory rate of the all-ones schedule is 1", "[cost_model]") {
    CHECK(schedule_cost(full_schedule(32), llava_like()).memory_rate == 1.0);
}

TEST_CASE("schedule_cost reproduces the VTW memory rate", "[cost_model]") {
    std::vector<double> rates(32, 0.0);
    for (int i = 0; i < 16; ++i) rates[static_cast<std::size_t>(i)] = 1.0;
    const auto report = schedule_cost(KeepingSchedule{rates, true}, llava_like());
    CHECK(report.memory_rate == 0.5);
}

TEST_CASE("flops are exactly twice the macs", "[cost_model]") {
    const auto report = schedule_cost(uniform_schedule(32, 0.37), llava_like());
    CHECK(report.total_flops == 2.0 * report.total_macs);
    CHECK(report.decode_flops == 2.0 * report.decode_macs);

    double per_layer_sum = 0.0;
    for (double f : report.per_layer_flops) {
        CHECK(f >= 0.0);
        per_layer_sum += f;
    }
    CHECK(per_layer_sum == report.total_flops);
}

TEST_CASE("schedule_cost rejects dimension mismatch", "[cost_model]") {
    CHECK_THROWS_AS(schedule_cost(full_schedule(8), llava_like()), std::invalid_argument);
}

TEST_CASE("raising any single rate never lowers cost or memory", "[cost_model]") {
    const auto dims = tiny_dims(12);
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> rates(12, 1.0);
        for (int i = 3; i <= 12; ++i) {
            rates[static_cast<std::size_t>(i - 1)] = static_cast<double>(rng() % 1001) / 1000.0;
        }
        KeepingSchedule base{rates, false};
        const auto base_report = schedule_cost(base, dims);

        const int bump_layer = 3 + static_cast<int>(rng() % 10);
        auto bumped = rates;
        auto& r = bumped[static_cast<std::size_t>(bump_layer - 1)];
        r = std::min(1.0, r + 0.25);
        const auto bumped_report = schedule_cost(KeepingSchedule{bumped, false}, dims);

        CHECK(bumped_report.total_flops >= base_report.total_flops);
        CHECK(bumped_report.memory_rate >= base_report.memory_rate);
    }
}

TEST_CASE("zero tokens beyond layer 2 hit the analytic floor", "[cost_model]") {
    const auto dims = tiny_dims(10);
    const auto report = schedule_cost(uniform_schedule(10, 0.0), dims);
    const double full_layer = layer_macs(static_cast<double>(dims.vision_tokens +
                                                             dims.input_text_tokens), dims);
    const double text_layer = layer_macs(static_cast<double>(dims.input_text_tokens), dims);
    CHECK(report.total_macs == 2.0 * full_layer + 8.0 * text_layer);
}

TEST_CASE("uniform-equal-total schedules minimize cost", "[cost_model]") {
    // Cauchy-Schwarz: at fixed total tokens, sum of layer costs is minimal
    // when every layer carries the same count. Real-valued counts on purpose.
    const auto dims = llava_like();
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> counts(32);
        double total = 0.0;
        for (auto& c : counts) {
            c = dims.input_text_tokens +
                dims.vision_tokens * static_cast<double>(rng() % 1001) / 1000.0;
            total += c;
        }
        const std::vector<double> uniform(32, total / 32.0);
        const double cost = total_macs_for_counts(counts, dims);
        const double floor = total_macs_for_counts(uniform, dims);
        CHECK(cost >= floor * (1.0 - 1e-12));
    }
}

TEST_CASE("match_budget recovers a family fixed point", "[cost_model]") {
    const auto dims = llava_like();
    ScheduleFamily family;
    family.param_lo = 0.0;
    family.param_hi = 1.0;
    family.make = [&](double r) { return uniform_schedule(dims.num_layers, r); };

    const double target = schedule_flops_continuous(family.make(0.25), dims);
    const double theta = match_budget(target, dims, family);
    CHECK(theta == Catch::Approx(0.25).margin(1e-6));
}

TEST_CASE("match_budget reports the achievable range", "[cost_model]") {
    const auto dims = llava_like();
    ScheduleFamily family;
    family.param_lo = 0.0;
    family.param_hi = 1.0;
    family.make = [&](double r) { return uniform_schedule(dims.num_layers, r); };

    const double below_floor = 0.5 * schedule_flops_continuous(family.make(0.0), dims);
    CHECK_THROWS_AS(match_budget(below_floor, dims, family), std::out_of_range);
    try {
        match_budget(below_floor, dims, family);
    } catch (const std::out_of_range& e) {
        CHECK(std::string(e.what()).find("achievable [") != std::string::npos);
    }
}
