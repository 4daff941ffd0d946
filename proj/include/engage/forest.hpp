#pragma once

#include "engage/domain.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace engage {

using ClassCounts = LabelMap<std::size_t>;

/// Gini impurity 1 - sum p_i^2. Throws ParameterError for an empty count table.
double gini(const ClassCounts& counts);

/// Dense row-major training matrix with one label per row.
class Dataset {
public:
    explicit Dataset(std::size_t n_features) : n_features_(n_features) {}

    void add(std::span<const double> x, EngagementLabel y);

    std::size_t size() const noexcept { return labels_.size(); }
    std::size_t n_features() const noexcept { return n_features_; }
    bool empty() const noexcept { return labels_.empty(); }

    std::span<const double> row(std::size_t i) const
    {
        return {values_.data() + i * n_features_, n_features_};
    }
    double value(std::size_t i, std::size_t feature) const
    {
        return values_[i * n_features_ + feature];
    }
    EngagementLabel label(std::size_t i) const { return labels_[i]; }

private:
    std::size_t n_features_;
    std::vector<double> values_;
    std::vector<EngagementLabel> labels_;
};

/// Rows with value <= threshold go left.
struct Split {
    std::size_t feature_index = 0;
    double threshold = 0.0;

    friend bool operator==(const Split&, const Split&) = default;
};

struct SplitChoice {
    Split split;
    double impurity_decrease = 0.0;
};

/// Best Gini split of `rows` over `candidate_features`.
///
/// Thresholds are midpoints between consecutive distinct values. Both sides
/// must keep at least `min_leaf` rows. Candidates are compared with exact
/// integer arithmetic; ties go to the lower feature index, then the lower
/// threshold. Returns nullopt when no split strictly lowers impurity.
std::optional<SplitChoice> best_split(const Dataset& data, std::span<const std::size_t> rows,
                                      std::span<const std::size_t> candidate_features,
                                      std::size_t min_leaf = 1);

struct TreeNode {
    bool leaf = true;
    Split split;              // internal nodes only
    std::uint32_t left = 0;   // child indices, always greater than this node's index
    std::uint32_t right = 0;
    ClassCounts counts;       // leaves only: training rows per class

    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// Binary tree stored as a node array; nodes[0] is the root.
struct DecisionTree {
    std::vector<TreeNode> nodes;

    const TreeNode& leaf_for(std::span<const double> x) const;
    /// Argmax of the leaf counts; ties go to OnTask.
    EngagementLabel predict(std::span<const double> x) const;
    std::size_t depth() const;

    friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

struct ForestParams {
    std::size_t n_trees = 100;
    std::size_t max_depth = 12;
    std::size_t min_samples_leaf = 2;
    std::optional<std::size_t> mtry;  // nullopt: round(sqrt(n_features))
    bool bootstrap = true;            // false: every tree sees the rows as given

    std::size_t resolved_mtry(std::size_t n_features) const;
    /// Throws ParameterError unless every count is positive and mtry <= n_features.
    void validate(std::size_t n_features) const;

    friend bool operator==(const ForestParams&, const ForestParams&) = default;
};

struct Forest {
    Modality modality = Modality::Appearance;
    std::vector<DecisionTree> trees;
    std::vector<std::string> feature_names;
    ForestParams params;
    std::uint64_t seed = 0;

    std::size_t n_features() const noexcept { return feature_names.size(); }

    friend bool operator==(const Forest&, const Forest&) = default;
};

/// Grows one CART tree. At each node mtry features are drawn without
/// replacement from the seeded generator; growth stops at max_depth, purity,
/// fewer than 2 * min_samples_leaf rows, or when no split helps.
DecisionTree train_tree(const Dataset& data, std::span<const std::size_t> rows,
                        const ForestParams& params, std::uint64_t seed);
DecisionTree train_tree(const Dataset& data, const ForestParams& params, std::uint64_t seed);

/// Bagged forest. Tree i uses Rng(mix(seed, i)): n bootstrap draws, then one
/// more draw seeds train_tree. Output does not depend on `jobs`.
Forest train_forest(const Dataset& data, Modality modality, std::vector<std::string> feature_names,
                    const ForestParams& params, std::uint64_t seed, std::size_t jobs = 1);

/// Per-class count of trees whose leaf argmax is that class.
ClassCounts forest_votes(const Forest& forest, std::span<const double> x);

/// Vote fractions; sums to 1.
LabelMap<double> forest_confidence(const Forest& forest, std::span<const double> x);

} // namespace engage
