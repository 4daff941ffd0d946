#pragma once

// Independent reference implementations and random generators shared by the
// unit tests and the acceptance runner. Nothing here calls the code under
// test for the quantity it checks.

#include "engage/domain.hpp"
#include "engage/features.hpp"
#include "engage/forest.hpp"
#include "engage/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace oracle {

using engage::EngagementLabel;

/// Window starts found by stepping through time, not by formula.
inline std::vector<std::pair<double, double>> enumerate_windows(double duration, double window,
                                                                double hop)
{
    std::vector<std::pair<double, double>> out;
    for (double start = 0.0; start + window <= duration; start += hop) {
        out.emplace_back(start, start + window);
    }
    return out;
}

/// Per-class F1 recomputed from raw pairs via precision and recall.
/// nullopt when the class never appears in either column.
inline std::optional<double> f1_from_pairs(const std::vector<EngagementLabel>& predicted,
                                           const std::vector<EngagementLabel>& truth,
                                           EngagementLabel positive)
{
    double hits = 0;
    double predicted_pos = 0;
    double actual_pos = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const bool p = predicted[i] == positive;
        const bool t = truth[i] == positive;
        predicted_pos += p ? 1 : 0;
        actual_pos += t ? 1 : 0;
        hits += (p && t) ? 1 : 0;
    }
    if (predicted_pos == 0 && actual_pos == 0) {
        return std::nullopt;
    }
    if (hits == 0) {
        return 0.0;
    }
    const double precision = hits / predicted_pos;
    const double recall = hits / actual_pos;
    return 2.0 * precision * recall / (precision + recall);
}

struct Row {
    std::vector<double> x;
    EngagementLabel y;
};

/// Textbook CART: all features, every midpoint, Gini, unbounded depth,
/// leaves of any size. Split quality is the weighted child impurity
/// sum_c n_c * gini_c, minimised; exact ties keep the first candidate in
/// (feature, threshold) order.
class PlainCart {
public:
    explicit PlainCart(const std::vector<Row>& rows)
    {
        std::vector<std::size_t> idx(rows.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            idx[i] = i;
        }
        root_ = grow(rows, idx);
    }

    EngagementLabel predict(const std::vector<double>& x) const
    {
        std::size_t n = root_;
        while (!nodes_[n].leaf) {
            n = x[nodes_[n].feature] <= nodes_[n].threshold ? nodes_[n].left : nodes_[n].right;
        }
        return nodes_[n].label;
    }

private:
    struct Node {
        bool leaf = true;
        EngagementLabel label = EngagementLabel::OnTask;
        std::size_t feature = 0;
        double threshold = 0;
        std::size_t left = 0;
        std::size_t right = 0;
    };

    // n * gini as the exact fraction (n^2 - on^2 - off^2) / n.
    struct Impurity {
        long long num;
        long long den;
    };

    static Impurity impurity(long long on, long long off)
    {
        const long long n = on + off;
        return {n * n - on * on - off * off, n};
    }

    static bool less(Impurity a1, Impurity a2, Impurity b1, Impurity b2)
    {
        // a1 + a2 < b1 + b2 on fractions, via common denominators.
        const __int128 a = static_cast<__int128>(a1.num) * a2.den + static_cast<__int128>(a2.num) * a1.den;
        const __int128 ad = static_cast<__int128>(a1.den) * a2.den;
        const __int128 b = static_cast<__int128>(b1.num) * b2.den + static_cast<__int128>(b2.num) * b1.den;
        const __int128 bd = static_cast<__int128>(b1.den) * b2.den;
        return a * bd < b * ad;
    }

    std::size_t grow(const std::vector<Row>& rows, const std::vector<std::size_t>& idx)
    {
        long long on = 0;
        long long off = 0;
        for (auto i : idx) {
            (rows[i].y == EngagementLabel::OnTask ? on : off) += 1;
        }
        const std::size_t me = nodes_.size();
        nodes_.push_back({});
        nodes_[me].label = off > on ? EngagementLabel::OffTask : EngagementLabel::OnTask;
        if (on == 0 || off == 0) {
            return me;
        }

        const Impurity parent = impurity(on, off);
        bool found = false;
        Impurity best_l{0, 1};
        Impurity best_r{0, 1};
        std::size_t best_f = 0;
        double best_t = 0;
        const std::size_t d = rows[idx[0]].x.size();
        for (std::size_t f = 0; f < d; ++f) {
            std::vector<double> values;
            for (auto i : idx) {
                values.push_back(rows[i].x[f]);
            }
            std::sort(values.begin(), values.end());
            values.erase(std::unique(values.begin(), values.end()), values.end());
            for (std::size_t k = 0; k + 1 < values.size(); ++k) {
                const double t = values[k] + (values[k + 1] - values[k]) / 2.0;
                long long lon = 0, loff = 0, ron = 0, roff = 0;
                for (auto i : idx) {
                    const bool left = rows[i].x[f] <= t;
                    const bool is_on = rows[i].y == EngagementLabel::OnTask;
                    (left ? (is_on ? lon : loff) : (is_on ? ron : roff)) += 1;
                }
                const Impurity l = impurity(lon, loff);
                const Impurity r = impurity(ron, roff);
                if (!found || less(l, r, best_l, best_r)) {
                    found = true;
                    best_l = l;
                    best_r = r;
                    best_f = f;
                    best_t = t;
                }
            }
        }
        if (!found || !less(best_l, best_r, parent, Impurity{0, 1})) {
            return me;
        }

        std::vector<std::size_t> li;
        std::vector<std::size_t> ri;
        for (auto i : idx) {
            (rows[i].x[best_f] <= best_t ? li : ri).push_back(i);
        }
        const std::size_t l = grow(rows, li);
        const std::size_t r = grow(rows, ri);
        nodes_[me].leaf = false;
        nodes_[me].feature = best_f;
        nodes_[me].threshold = best_t;
        nodes_[me].left = l;
        nodes_[me].right = r;
        return me;
    }

    std::vector<Node> nodes_;
    std::size_t root_ = 0;
};

/// Small random helpers on top of the project generator.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    std::size_t below(std::size_t n) { return static_cast<std::size_t>(rng_.uniform_below(n)); }
    std::size_t between(std::size_t lo, std::size_t hi) { return lo + below(hi - lo + 1); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * rng_.uniform01(); }
    bool coin(double p = 0.5) { return rng_.bernoulli(p); }
    EngagementLabel label(double p_off = 0.5)
    {
        return coin(p_off) ? EngagementLabel::OffTask : EngagementLabel::OnTask;
    }
    engage::Rng& rng() { return rng_; }

private:
    engage::Rng rng_;
};

/// A random tree of depth <= max_depth over `d` features. Leaf counts are
/// small so exact class ties occur often.
inline engage::DecisionTree random_tree(Gen& g, std::size_t d, std::size_t max_depth)
{
    engage::DecisionTree tree;
    struct Pending {
        std::size_t node;
        std::size_t depth;
    };
    tree.nodes.emplace_back();
    std::vector<Pending> stack{{0, 0}};
    while (!stack.empty()) {
        const Pending p = stack.back();
        stack.pop_back();
        if (p.depth < max_depth && g.coin(0.6)) {
            const auto left = static_cast<std::uint32_t>(tree.nodes.size());
            tree.nodes.emplace_back();
            tree.nodes.emplace_back();
            auto& node = tree.nodes[p.node];
            node.leaf = false;
            node.split = {g.below(d), std::round(g.uniform(-3.0, 3.0) * 2.0) / 2.0};
            node.left = left;
            node.right = left + 1;
            stack.push_back({left, p.depth + 1});
            stack.push_back({left + 1, p.depth + 1});
        } else {
            auto& node = tree.nodes[p.node];
            node.counts.values = {g.between(0, 3), g.between(0, 3)};
            if (node.counts.values[0] + node.counts.values[1] == 0) {
                node.counts.values[g.below(2)] = 1;
            }
        }
    }
    return tree;
}

inline engage::Forest random_forest(Gen& g, engage::Modality m, std::size_t n_trees, std::size_t d)
{
    engage::Forest forest;
    forest.modality = m;
    for (std::size_t f = 0; f < d; ++f) {
        forest.feature_names.push_back("f" + std::to_string(f));
    }
    forest.params.n_trees = n_trees;
    for (std::size_t t = 0; t < n_trees; ++t) {
        forest.trees.push_back(random_tree(g, d, 3));
    }
    return forest;
}

inline std::vector<double> random_input(Gen& g, std::size_t d)
{
    std::vector<double> x(d);
    for (auto& v : x) {
        v = std::round(g.uniform(-3.5, 3.5) * 2.0) / 2.0;  // lands on thresholds now and then
    }
    return x;
}

/// Instances with random students, sessions, windows, sections and labels.
/// Features are empty; protocol code only looks at the keys and labels.
inline std::vector<engage::Instance> random_instances(Gen& g, std::size_t max_students = 8)
{
    std::vector<engage::Instance> out;
    const std::size_t students = g.between(2, max_students);
    const double p_off = g.uniform(0.1, 0.6);
    for (std::size_t s = 0; s < students; ++s) {
        const std::size_t sessions = g.between(1, 2);
        for (std::size_t k = 0; k < sessions; ++k) {
            const std::size_t windows = g.between(1, 30);
            for (std::size_t w = 0; w < windows; ++w) {
                engage::Instance inst;
                inst.student_id = "s" + std::to_string(s);
                inst.session_id = "k" + std::to_string(k);
                inst.window.index = w;
                inst.window.start_s = 4.0 * static_cast<double>(w);
                inst.window.end_s = inst.window.start_s + 8.0;
                inst.window.section = g.coin() ? engage::SectionType::Instructional
                                               : engage::SectionType::Assessment;
                for (auto m : engage::kModalities) {
                    inst.features[engage::index_of(m)].modality = m;
                    inst.features[engage::index_of(m)].window_index = w;
                }
                inst.label = g.label(p_off);
                out.push_back(std::move(inst));
            }
        }
    }
    return out;
}

} // namespace oracle
