#include "engage/forest.hpp"

#include "engage/errors.hpp"
#include "engage/parallel.hpp"
#include "engage/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace engage {

double gini(const ClassCounts& counts)
{
    const std::size_t total = counts[EngagementLabel::OnTask] + counts[EngagementLabel::OffTask];
    if (total == 0) {
        throw ParameterError("gini of an empty count table");
    }
    double sum_sq = 0.0;
    for (auto l : kLabels) {
        const double p = static_cast<double>(counts[l]) / static_cast<double>(total);
        sum_sq += p * p;
    }
    return 1.0 - sum_sq;
}

void Dataset::add(std::span<const double> x, EngagementLabel y)
{
    if (x.size() != n_features_) {
        throw ParameterError("row has " + std::to_string(x.size()) + " features, dataset has " +
                             std::to_string(n_features_));
    }
    values_.insert(values_.end(), x.begin(), x.end());
    labels_.push_back(y);
}

namespace {

using u128 = unsigned __int128;

// sum over children of (on^2 + off^2) / n_child, kept as an exact fraction.
struct SplitScore {
    u128 num = 0;
    u128 den = 1;
};

u128 square_sum(std::size_t a, std::size_t b)
{
    return static_cast<u128>(a) * a + static_cast<u128>(b) * b;
}

SplitScore score(const ClassCounts& left, const ClassCounts& right)
{
    const std::size_t n_left = left.values[0] + left.values[1];
    const std::size_t n_right = right.values[0] + right.values[1];
    return {square_sum(left.values[0], left.values[1]) * n_right +
                square_sum(right.values[0], right.values[1]) * n_left,
            static_cast<u128>(n_left) * n_right};
}

bool better(const SplitScore& a, const SplitScore& b) { return a.num * b.den > b.num * a.den; }

double midpoint(double lo, double hi)
{
    double mid = lo + (hi - lo) / 2.0;
    if (!(mid < hi)) {
        mid = lo;
    }
    return mid;
}

ClassCounts count_labels(const Dataset& data, std::span<const std::size_t> rows)
{
    ClassCounts counts;
    for (auto r : rows) {
        ++counts[data.label(r)];
    }
    return counts;
}

// Running best split over features scanned in ascending index order.
class SplitSearch {
public:
    SplitSearch(const ClassCounts& parent, std::size_t min_leaf)
        : parent_(parent), n_(parent.values[0] + parent.values[1]),
          min_leaf_(std::max<std::size_t>(min_leaf, 1))
    {
    }

    // `at(i)` yields (value, label index) of the i-th row in ascending value order.
    template <typename At>
    void scan(std::size_t feature, At at)
    {
        ClassCounts left;
        ClassCounts right = parent_;
        auto current = at(0);
        for (std::size_t i = 0; i + 1 < n_; ++i) {
            const auto next = at(i + 1);
            ++left.values[current.second];
            --right.values[current.second];
            const std::size_t n_left = i + 1;
            const double lo = current.first;
            current = next;
            if (n_left < min_leaf_ || n_ - n_left < min_leaf_ || !(lo < next.first)) {
                continue;
            }
            // Cheap floating screen; only near-ties reach the exact comparison.
            const auto lsq = static_cast<double>(left.values[0] * left.values[0] +
                                                 left.values[1] * left.values[1]);
            const auto rsq = static_cast<double>(right.values[0] * right.values[0] +
                                                 right.values[1] * right.values[1]);
            const double approx =
                lsq / static_cast<double>(n_left) + rsq / static_cast<double>(n_ - n_left);
            if (found_ && approx < best_approx_ * (1.0 - 1e-9)) {
                continue;
            }
            const SplitScore s = score(left, right);
            if (!found_ || better(s, best_score_)) {
                found_ = true;
                best_ = Split{feature, midpoint(lo, next.first)};
                best_score_ = s;
                best_approx_ = approx;
            }
        }
    }

    // Only strictly positive impurity decreases qualify.
    std::optional<SplitChoice> result() const
    {
        const u128 parent_sq = square_sum(parent_.values[0], parent_.values[1]);
        if (!found_ || !(best_score_.num * n_ > parent_sq * best_score_.den)) {
            return std::nullopt;
        }
        const double nd = static_cast<double>(n_);
        const double children =
            static_cast<double>(best_score_.num) / static_cast<double>(best_score_.den);
        const double decrease = (children - static_cast<double>(parent_sq) / nd) / nd;
        return SplitChoice{best_, decrease};
    }

private:
    ClassCounts parent_;
    std::size_t n_;
    std::size_t min_leaf_;
    bool found_ = false;
    Split best_{};
    SplitScore best_score_;
    double best_approx_ = 0.0;
};

} // namespace

std::optional<SplitChoice> best_split(const Dataset& data, std::span<const std::size_t> rows,
                                      std::span<const std::size_t> candidate_features,
                                      std::size_t min_leaf)
{
    const std::size_t n = rows.size();
    if (n < 2) {
        return std::nullopt;
    }

    std::vector<std::size_t> features(candidate_features.begin(), candidate_features.end());
    std::ranges::sort(features);
    features.erase(std::unique(features.begin(), features.end()), features.end());

    SplitSearch search(count_labels(data, rows), min_leaf);
    std::vector<std::pair<double, std::size_t>> column(n);
    for (auto f : features) {
        if (f >= data.n_features()) {
            throw ParameterError("candidate feature " + std::to_string(f) + " out of range");
        }
        for (std::size_t i = 0; i < n; ++i) {
            column[i] = {data.value(rows[i], f), index_of(data.label(rows[i]))};
        }
        std::sort(column.begin(), column.end(),
                  [](const auto& x, const auto& y) { return x.first < y.first; });
        search.scan(f, [&](std::size_t i) { return column[i]; });
    }
    return search.result();
}

const TreeNode& DecisionTree::leaf_for(std::span<const double> x) const
{
    const TreeNode* node = &nodes.front();
    while (!node->leaf) {
        node = &nodes[x[node->split.feature_index] <= node->split.threshold ? node->left
                                                                             : node->right];
    }
    return *node;
}

EngagementLabel DecisionTree::predict(std::span<const double> x) const
{
    return argmax_label(leaf_for(x).counts);
}

std::size_t DecisionTree::depth() const
{
    if (nodes.empty()) {
        return 0;
    }
    std::vector<std::size_t> depth(nodes.size(), 0);
    std::size_t deepest = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        deepest = std::max(deepest, depth[i]);
        if (!nodes[i].leaf) {
            depth[nodes[i].left] = depth[i] + 1;
            depth[nodes[i].right] = depth[i] + 1;
        }
    }
    return deepest;
}

std::size_t ForestParams::resolved_mtry(std::size_t n_features) const
{
    if (mtry) {
        return *mtry;
    }
    const auto rounded = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(n_features))));
    return std::max<std::size_t>(rounded, 1);
}

void ForestParams::validate(std::size_t n_features) const
{
    if (n_trees == 0 || max_depth == 0 || min_samples_leaf == 0) {
        throw ParameterError("forest parameters n_trees, max_depth and min_samples_leaf must be positive");
    }
    if (n_features == 0) {
        throw ParameterError("cannot train on zero features");
    }
    const std::size_t m = resolved_mtry(n_features);
    if (m == 0 || m > n_features) {
        throw ParameterError("mtry " + std::to_string(m) + " must be in [1, " +
                             std::to_string(n_features) + "]");
    }
}

namespace {

using RowId = std::uint32_t;

// Row ids of a dataset ordered by each feature's value.
std::vector<std::vector<RowId>> presort(const Dataset& data)
{
    std::vector<std::vector<RowId>> order(data.n_features());
    for (std::size_t f = 0; f < order.size(); ++f) {
        auto& o = order[f];
        o.resize(data.size());
        std::iota(o.begin(), o.end(), RowId{0});
        std::sort(o.begin(), o.end(),
                  [&](RowId a, RowId b) { return data.value(a, f) < data.value(b, f); });
    }
    return order;
}

// Grows one tree. Every node owns the same [lo, hi) range in each per-feature
// ordering, so split scans never sort.
class TreeBuilder {
public:
    TreeBuilder(const Dataset& data, const ForestParams& params, std::uint64_t seed)
        : data_(data), params_(params), mtry_(params.resolved_mtry(data.n_features())), rng_(seed),
          feature_pool_(data.n_features()), labels_(data.size()), goes_left_(data.size())
    {
        for (std::size_t r = 0; r < data.size(); ++r) {
            labels_[r] = static_cast<std::uint8_t>(index_of(data.label(r)));
        }
    }

    // `multiplicity[r]` copies of row r take part; `sorted` is presort(data).
    DecisionTree build(std::span<const std::uint32_t> multiplicity,
                       const std::vector<std::vector<RowId>>& sorted)
    {
        std::size_t n = 0;
        for (auto m : multiplicity) {
            n += m;
        }
        order_.assign(data_.n_features(), {});
        for (std::size_t f = 0; f < order_.size(); ++f) {
            auto& o = order_[f];
            o.reserve(n);
            for (auto r : sorted[f]) {
                o.insert(o.end(), multiplicity[r], r);
            }
        }
        buffer_.resize(n);
        grow(0, n, 0);
        return std::move(tree_);
    }

private:
    std::uint32_t grow(std::size_t lo, std::size_t hi, std::size_t depth)
    {
        const auto index = static_cast<std::uint32_t>(tree_.nodes.size());
        tree_.nodes.emplace_back();

        ClassCounts counts;
        for (std::size_t i = lo; i < hi; ++i) {
            ++counts.values[labels_[order_[0][i]]];
        }
        const std::size_t n = hi - lo;
        const bool pure = counts.values[0] == 0 || counts.values[1] == 0;
        if (pure || depth >= params_.max_depth || n < 2 * params_.min_samples_leaf) {
            return make_leaf(index, counts);
        }

        auto features = draw_features();
        std::sort(features.begin(), features.end());
        SplitSearch search(counts, params_.min_samples_leaf);
        for (auto f : features) {
            const RowId* o = order_[f].data() + lo;
            search.scan(f, [&](std::size_t i) {
                return std::pair<double, std::size_t>{data_.value(o[i], f), labels_[o[i]]};
            });
        }
        const auto choice = search.result();
        if (!choice) {
            return make_leaf(index, counts);
        }

        const Split split = choice->split;
        for (std::size_t i = lo; i < hi; ++i) {
            const RowId r = order_[0][i];
            goes_left_[r] = data_.value(r, split.feature_index) <= split.threshold;
        }
        std::size_t n_left = 0;
        for (auto& o : order_) {
            n_left = partition(o, lo, hi);
        }

        const auto left = grow(lo, lo + n_left, depth + 1);
        const auto right = grow(lo + n_left, hi, depth + 1);
        TreeNode& node = tree_.nodes[index];
        node.leaf = false;
        node.split = split;
        node.left = left;
        node.right = right;
        return index;
    }

    // Stable partition of o[lo, hi) by goes_left_; returns the left count.
    std::size_t partition(std::vector<RowId>& o, std::size_t lo, std::size_t hi)
    {
        std::size_t l = lo;
        std::size_t r = 0;
        for (std::size_t i = lo; i < hi; ++i) {
            const RowId id = o[i];
            if (goes_left_[id]) {
                o[l++] = id;
            } else {
                buffer_[r++] = id;
            }
        }
        std::copy_n(buffer_.begin(), r, o.begin() + static_cast<std::ptrdiff_t>(l));
        return l - lo;
    }

    std::uint32_t make_leaf(std::uint32_t index, const ClassCounts& counts)
    {
        tree_.nodes[index].counts = counts;
        return index;
    }

    // Partial Fisher-Yates over a fresh 0..d-1 pool.
    std::vector<std::size_t> draw_features()
    {
        std::iota(feature_pool_.begin(), feature_pool_.end(), std::size_t{0});
        const std::size_t d = feature_pool_.size();
        for (std::size_t i = 0; i < mtry_; ++i) {
            const auto j = i + static_cast<std::size_t>(rng_.uniform_below(d - i));
            std::swap(feature_pool_[i], feature_pool_[j]);
        }
        return {feature_pool_.begin(), feature_pool_.begin() + static_cast<std::ptrdiff_t>(mtry_)};
    }

    const Dataset& data_;
    const ForestParams& params_;
    std::size_t mtry_;
    Rng rng_;
    std::vector<std::size_t> feature_pool_;
    std::vector<std::uint8_t> labels_;
    std::vector<std::uint8_t> goes_left_;
    std::vector<std::vector<RowId>> order_;
    std::vector<RowId> buffer_;
    DecisionTree tree_;
};

void check_size(const Dataset& data)
{
    if (data.size() > (std::size_t{1} << 24)) {
        throw ParameterError("too many rows for exact split scoring");
    }
}

} // namespace

DecisionTree train_tree(const Dataset& data, std::span<const std::size_t> rows,
                        const ForestParams& params, std::uint64_t seed)
{
    if (rows.empty()) {
        throw ParameterError("cannot train a tree on zero rows");
    }
    params.validate(data.n_features());
    check_size(data);
    std::vector<std::uint32_t> multiplicity(data.size(), 0);
    for (auto r : rows) {
        if (r >= data.size()) {
            throw ParameterError("row index out of range");
        }
        ++multiplicity[r];
    }
    return TreeBuilder(data, params, seed).build(multiplicity, presort(data));
}

DecisionTree train_tree(const Dataset& data, const ForestParams& params, std::uint64_t seed)
{
    std::vector<std::size_t> rows(data.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return train_tree(data, rows, params, seed);
}

Forest train_forest(const Dataset& data, Modality modality, std::vector<std::string> feature_names,
                    const ForestParams& params, std::uint64_t seed, std::size_t jobs)
{
    if (data.empty()) {
        throw ParameterError("cannot train a forest on zero rows");
    }
    if (feature_names.size() != data.n_features()) {
        throw ParameterError("feature name count does not match dataset width");
    }
    params.validate(data.n_features());
    check_size(data);

    Forest forest;
    forest.modality = modality;
    forest.feature_names = std::move(feature_names);
    forest.params = params;
    forest.seed = seed;
    forest.trees.resize(params.n_trees);

    const auto sorted = presort(data);
    const std::size_t n = data.size();
    parallel_for(params.n_trees, jobs, [&](std::size_t i) {
        Rng rng(mix(seed, i));
        std::vector<std::uint32_t> multiplicity(n, params.bootstrap ? 0 : 1);
        if (params.bootstrap) {
            for (std::size_t k = 0; k < n; ++k) {
                ++multiplicity[static_cast<std::size_t>(rng.uniform_below(n))];
            }
        }
        forest.trees[i] = TreeBuilder(data, params, rng.next()).build(multiplicity, sorted);
    });
    return forest;
}

ClassCounts forest_votes(const Forest& forest, std::span<const double> x)
{
    if (x.size() != forest.n_features()) {
        throw ParameterError(std::string(to_string(forest.modality)) + " forest expects " +
                             std::to_string(forest.n_features()) + " features, got " +
                             std::to_string(x.size()));
    }
    ClassCounts votes;
    for (const auto& tree : forest.trees) {
        ++votes[tree.predict(x)];
    }
    return votes;
}

LabelMap<double> forest_confidence(const Forest& forest, std::span<const double> x)
{
    const ClassCounts votes = forest_votes(forest, x);
    const auto total = static_cast<double>(forest.trees.size());
    LabelMap<double> confidence;
    for (auto l : kLabels) {
        confidence[l] = static_cast<double>(votes[l]) / total;
    }
    return confidence;
}

} // namespace engage
