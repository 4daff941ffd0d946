#pragma once

#include "engage/eval.hpp"
#include "engage/features.hpp"
#include "engage/forest.hpp"
#include "engage/fusion.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace engage {

enum class Protocol : std::uint8_t { Loso, Holdout };

std::string_view to_string(Protocol p);
/// Throws ParameterError for anything but "loso" or "holdout".
Protocol parse_protocol(std::string_view text);

struct ExperimentSettings {
    Protocol protocol = Protocol::Loso;
    std::size_t repeats = 10;
    std::uint64_t master_seed = 0;
    std::array<ForestParams, 3> forest{};  // per modality
    bool fusion = true;
    OverallScheme scheme = OverallScheme::Weighted;
    double holdout_fraction = 0.8;
    std::size_t jobs = 1;
};

/// Three modality forests trained on the same rows, plus their fusion pool.
struct TrainedModels {
    std::array<Forest, 3> forests;
    FusionPool pool;

    const Forest& operator[](Modality m) const noexcept { return forests[index_of(m)]; }
};

/// Forest for modality m is seeded with mix(seed, 1 + m).
TrainedModels train_models(std::span<const Instance> instances, std::span<const std::size_t> rows,
                           const std::array<ForestParams, 3>& params, std::uint64_t seed,
                           std::size_t jobs = 1);

/// Predictions of the four models, aligned with the fold's test rows.
struct RepeatPredictions {
    std::array<std::vector<EngagementLabel>, 4> labels;  // indexed by ReportModel
    std::vector<double> fusion_confidence_on;            // pooled OnTask vote fraction
};

/// Repeat j balances the fold's training rows with seed mix(base_seed, j),
/// trains the forests on that subset, and predicts the test rows.
RepeatPredictions run_repeat(std::span<const Instance> instances, const Fold& fold,
                             const ExperimentSettings& settings, std::uint64_t base_seed,
                             std::size_t repeat);

std::vector<RepeatPredictions> run_repeats(std::span<const Instance> instances, const Fold& fold,
                                           const ExperimentSettings& settings,
                                           std::uint64_t base_seed);

/// Full evaluation: for each section, models are trained and tested only on
/// that section's windows. Fold f of section s uses base seed
/// mix(mix(master_seed, 1 + s), f). The result does not depend on jobs.
MetricsReport run_experiment(std::span<const Instance> instances, const ExperimentSettings& settings);

} // namespace engage
