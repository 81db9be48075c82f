#pragma once

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "vtr/reduction_sim.hpp"
#include "vtr/schedule.hpp"

// JSON file formats and atomic writes. Doubles go through nlohmann's
// shortest-round-trip serialization, so files round-trip bit-exactly.

namespace vtr {

using json = nlohmann::json;

/// Filesystem-level failure (missing file, unwritable path). Callers map
/// this to a distinct exit code from validation errors.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline json schedule_to_json(const KeepingSchedule& schedule) {
    return json{{"num_layers", schedule.num_layers()},
                {"rates", schedule.rates},
                {"monotone", schedule.monotone}};
}

inline KeepingSchedule schedule_from_json(const json& j) {
    KeepingSchedule schedule;
    schedule.rates = j.at("rates").get<std::vector<double>>();
    schedule.monotone = j.value("monotone", false);
    const int declared = j.at("num_layers").get<int>();
    if (declared != schedule.num_layers()) {
        throw std::invalid_argument("schedule file: num_layers " + std::to_string(declared) +
                                    " does not match " + std::to_string(schedule.num_layers()) +
                                    " rates");
    }
    return schedule;
}

inline json trace_to_json(const AttentionTrace& trace) {
    json rows = json::array();
    for (int layer = 1; layer <= trace.layer_count; ++layer) {
        const auto row = trace.row(layer);
        rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    return json{{"num_layers", trace.layer_count},
                {"num_tokens", trace.token_count},
                {"scores", std::move(rows)}};
}

inline AttentionTrace trace_from_json(const json& j) {
    const int layers = j.at("num_layers").get<int>();
    const int tokens = j.at("num_tokens").get<int>();
    const auto& rows = j.at("scores");
    if (!rows.is_array() || static_cast<int>(rows.size()) != layers) {
        throw std::invalid_argument("trace file: scores row count does not match num_layers");
    }
    AttentionTrace trace(layers, tokens);
    for (int layer = 1; layer <= layers; ++layer) {
        const auto row = rows[static_cast<std::size_t>(layer - 1)].get<std::vector<double>>();
        if (static_cast<int>(row.size()) != tokens) {
            throw std::invalid_argument("trace file: row " + std::to_string(layer) +
                                        " does not match num_tokens");
        }
        std::copy(row.begin(), row.end(), trace.row(layer).begin());
    }
    trace.validate();
    return trace;
}

inline json dims_to_json(const ModelDims& dims) {
    return json{{"num_layers", dims.num_layers},
                {"hidden_size", dims.hidden_size},
                {"ffn_intermediate", dims.ffn_intermediate},
                {"vision_tokens", dims.vision_tokens},
                {"input_text_tokens", dims.input_text_tokens},
                {"output_tokens", dims.output_tokens}};
}

inline ModelDims dims_from_json(const json& j) {
    ModelDims dims;
    dims.num_layers = j.at("num_layers").get<int>();
    dims.hidden_size = j.at("hidden_size").get<int>();
    dims.ffn_intermediate = j.at("ffn_intermediate").get<int>();
    dims.vision_tokens = j.at("vision_tokens").get<int>();
    dims.input_text_tokens = j.at("input_text_tokens").get<int>();
    dims.output_tokens = j.at("output_tokens").get<int>();
    dims.validate();
    return dims;
}

/// Oracle spec: {"essential_sizes": [..], "n_tokens": N, "rho": r,
/// "noise": s, "seed": u64}.
inline SyntheticOracle oracle_from_json(const json& j) {
    return make_random_oracle(j.at("essential_sizes").get<std::vector<int>>(),
                              j.at("n_tokens").get<int>(), j.at("rho").get<double>(),
                              j.at("noise").get<double>(), j.at("seed").get<std::uint64_t>());
}

inline json oracle_to_json(const SyntheticOracle& oracle) {
    std::vector<int> sizes;
    sizes.reserve(oracle.essential_sets.size());
    for (const auto& set : oracle.essential_sets) sizes.push_back(static_cast<int>(set.size()));
    return json{{"essential_sizes", std::move(sizes)},
                {"n_tokens", oracle.vision_tokens},
                {"rho", oracle.persistence},
                {"noise", oracle.noise_scale},
                {"seed", oracle.rng_seed}};
}

inline json load_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("malformed JSON in " + path.string() + ": " + e.what());
    }
    return j;
}

/// Temp-file-plus-rename so readers never observe a half-written file.
inline void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
    std::error_code ec;
    fs::create_directories(dir, ec);
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << content;
        if (!out.good()) throw IoError("write failed for " + tmp.string());
    }
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("rename to " + path.string() + " failed: " + ec.message());
}

}  // namespace vtr
