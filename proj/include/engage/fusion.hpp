#pragma once

#include "engage/domain.hpp"
#include "engage/features.hpp"
#include "engage/forest.hpp"

#include <array>
#include <span>
#include <vector>

namespace engage {

/// Per-modality feature rows for one window. Modalities may be absent.
class ModalInput {
public:
    ModalInput() = default;
    static ModalInput from(const Instance& instance);

    void set(Modality m, std::span<const double> x)
    {
        rows_[index_of(m)] = x;
        present_[index_of(m)] = true;
    }
    bool has(Modality m) const noexcept { return present_[index_of(m)]; }
    /// Throws ParameterError when the modality is absent.
    std::span<const double> get(Modality m) const;

private:
    std::array<std::span<const double>, 3> rows_{};
    std::array<bool, 3> present_{};
};

struct PoolEntry {
    Modality modality;
    DecisionTree tree;
};

/// Every tree of every modality forest, ordered by modality then tree index.
struct FusionPool {
    std::vector<PoolEntry> entries;
    std::array<std::size_t, 3> arity{};  // feature count per modality present

    std::size_t size() const noexcept { return entries.size(); }
};

struct PooledDecision {
    EngagementLabel label;
    ClassCounts votes;
};

struct ConfidenceDecision {
    EngagementLabel label;
    LabelMap<double> scores;  // summed per-modality vote fractions
};

/// Throws ParameterError for an empty input or a repeated modality. Logs a
/// warning when the forests have different tree counts.
FusionPool pool_trees(std::span<const Forest> forests);

/// One vote per pooled tree, each on its own modality's features; argmax of
/// the totals with ties going to OnTask.
PooledDecision fuse_pooled(const FusionPool& pool, const ModalInput& x);

/// Argmax of the summed per-forest confidences, compared exactly as rationals;
/// ties go to OnTask.
ConfidenceDecision fuse_confidence_sum(std::span<const Forest> forests, const ModalInput& x);

} // namespace engage
