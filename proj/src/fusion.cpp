#include "engage/fusion.hpp"

#include "engage/errors.hpp"

#include <algorithm>
#include <iostream>
#include <numeric>

namespace engage {

ModalInput ModalInput::from(const Instance& instance)
{
    ModalInput input;
    for (auto m : kModalities) {
        input.set(m, instance[m].values);
    }
    return input;
}

std::span<const double> ModalInput::get(Modality m) const
{
    if (!has(m)) {
        throw ParameterError("no feature vector for modality " + std::string(to_string(m)));
    }
    return rows_[index_of(m)];
}

namespace {

void check_distinct(std::span<const Forest> forests)
{
    if (forests.empty()) {
        throw ParameterError("fusion needs at least one forest");
    }
    std::array<bool, 3> seen{};
    for (const auto& forest : forests) {
        if (forest.trees.empty()) {
            throw ParameterError(std::string(to_string(forest.modality)) + " forest has no trees");
        }
        if (seen[index_of(forest.modality)]) {
            throw ParameterError("more than one forest for modality " +
                                 std::string(to_string(forest.modality)));
        }
        seen[index_of(forest.modality)] = true;
    }
}

void check_arity(Modality m, std::size_t expected, std::span<const double> x)
{
    if (x.size() != expected) {
        throw ParameterError(std::string(to_string(m)) + " input has " + std::to_string(x.size()) +
                             " features, expected " + std::to_string(expected));
    }
}

} // namespace

FusionPool pool_trees(std::span<const Forest> forests)
{
    check_distinct(forests);

    std::vector<const Forest*> ordered;
    for (const auto& forest : forests) {
        ordered.push_back(&forest);
    }
    std::ranges::sort(ordered, {}, [](const Forest* f) { return index_of(f->modality); });

    const std::size_t first_size = ordered.front()->trees.size();
    if (std::ranges::any_of(ordered, [&](const Forest* f) { return f->trees.size() != first_size; })) {
        std::clog << "warning: pooled forests have different tree counts; pooled voting no longer "
                     "matches the confidence sum\n";
    }

    FusionPool pool;
    for (const Forest* forest : ordered) {
        pool.arity[index_of(forest->modality)] = forest->n_features();
        for (const auto& tree : forest->trees) {
            pool.entries.push_back(PoolEntry{forest->modality, tree});
        }
    }
    return pool;
}

PooledDecision fuse_pooled(const FusionPool& pool, const ModalInput& x)
{
    if (pool.entries.empty()) {
        throw ParameterError("empty fusion pool");
    }
    std::array<bool, 3> checked{};
    ClassCounts votes;
    for (const auto& entry : pool.entries) {
        const auto row = x.get(entry.modality);
        if (!checked[index_of(entry.modality)]) {
            check_arity(entry.modality, pool.arity[index_of(entry.modality)], row);
            checked[index_of(entry.modality)] = true;
        }
        ++votes[entry.tree.predict(row)];
    }
    return {argmax_label(votes), votes};
}

ConfidenceDecision fuse_confidence_sum(std::span<const Forest> forests, const ModalInput& x)
{
    check_distinct(forests);

    // Sum of votes_m / trees_m over a common denominator (lcm of tree counts).
    using u128 = unsigned __int128;
    u128 denominator = 1;
    for (const auto& forest : forests) {
        denominator = std::lcm(static_cast<std::uint64_t>(denominator),
                               static_cast<std::uint64_t>(forest.trees.size()));
    }

    std::vector<const Forest*> ordered;
    for (const auto& forest : forests) {
        ordered.push_back(&forest);
    }
    std::ranges::sort(ordered, {}, [](const Forest* f) { return index_of(f->modality); });

    LabelMap<u128> exact;
    ConfidenceDecision decision{EngagementLabel::OnTask, {}};
    for (const Forest* forest_ptr : ordered) {
        const Forest& forest = *forest_ptr;
        const auto row = x.get(forest.modality);
        const ClassCounts votes = forest_votes(forest, row);
        const u128 scale = denominator / forest.trees.size();
        const auto total = static_cast<double>(forest.trees.size());
        for (auto l : kLabels) {
            exact[l] += static_cast<u128>(votes[l]) * scale;
            decision.scores[l] += static_cast<double>(votes[l]) / total;
        }
    }
    decision.label = argmax_label(exact);
    return decision;
}

} // namespace engage
