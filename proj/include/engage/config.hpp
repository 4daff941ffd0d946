#pragma once

#include "engage/eval.hpp"
#include "engage/experiment.hpp"
#include "engage/features.hpp"
#include "engage/forest.hpp"
#include "engage/simulate.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace engage {

struct RunPaths {
    std::string data;
    std::string out;

    friend bool operator==(const RunPaths&, const RunPaths&) = default;
};

/// Everything an evaluation or training run depends on.
///
/// JSON keys: protocol, window_s, hop_s, repeats, seed, fusion, overall,
/// holdout_fraction, forest {n_trees, max_depth, min_samples_leaf, mtry},
/// forest_overrides {<Modality>: partial forest}, features {<Modality>:
/// {channels, statistics, sample_rate}}, paths {data, out}. Unknown keys are
/// rejected at every level.
struct RunConfig {
    Protocol protocol = Protocol::Loso;
    double window_s = kDefaultWindowSeconds;
    double hop_s = kDefaultHopSeconds;
    std::array<ForestParams, 3> forest{};
    bool fusion = true;
    std::size_t repeats = 10;
    std::uint64_t seed = 0;
    OverallScheme overall = OverallScheme::Weighted;
    double holdout_fraction = 0.8;
    std::optional<FeatureSchema> features;  // nullopt: inferred from the samples
    RunPaths paths;

    /// Throws ParameterError.
    void validate() const;
    ExperimentSettings experiment(std::size_t jobs = 1) const;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Parses and validates. Throws ParseError for malformed JSON or unknown keys.
RunConfig parse_run_config(std::string_view json_text);
/// Canonical JSON (sorted keys, all fields present).
std::string dump_run_config(const RunConfig& config);
/// 16 hex digits of FNV-1a 64 over the canonical dump.
std::string config_hash(const RunConfig& config);

SimConfig parse_sim_config(std::string_view json_text);
std::string dump_sim_config(const SimConfig& config);

RunConfig load_run_config(const std::filesystem::path& path);
SimConfig load_sim_config(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

} // namespace engage
