#ifndef POACHPRED_TREE_HPP
#define POACHPRED_TREE_HPP

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "augmentation.hpp"
#include "dataset.hpp"

namespace poach {

// Dense copy of a training view: features plus 0/1 targets.
struct Samples {
    std::vector<FeatureVector> x;
    std::vector<int> y;

    [[nodiscard]] std::size_t size() const noexcept { return x.size(); }
};

[[nodiscard]] inline Samples samples_of(const TrainingSet& t) {
    Samples s;
    s.x.reserve(t.size());
    s.y.reserve(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        s.x.push_back(t[i].features);
        s.y.push_back(t[i].label == Label::Positive ? 1 : 0);
    }
    return s;
}

// Binary entropy in bits.
[[nodiscard]] inline double entropy(double pos, double neg) {
    const double n = pos + neg;
    if (n <= 0) return 0.0;
    double h = 0;
    for (double c : {pos, neg})
        if (c > 0) h -= (c / n) * std::log2(c / n);
    return h;
}

struct Split {
    std::size_t feature = 0;
    double threshold = 0;            // numeric: x <= threshold goes left
    std::uint64_t category_mask = 0;  // land_type: category bit set goes left
    double gain = -1;

    [[nodiscard]] bool valid() const noexcept { return gain >= 0; }

    [[nodiscard]] bool goes_left(const FeatureVector& x) const {
        if (feature == LandType) return (category_mask >> static_cast<unsigned>(x[LandType])) & 1u;
        return x[feature] <= threshold;
    }
};

namespace detail {

// c * log2(c) for integer counts, so split scans avoid calling log.
class XLogX {
public:
    void reserve(std::size_t n) {
        for (std::size_t c = table_.size(); c <= n; ++c)
            table_.push_back(c == 0 ? 0.0 : static_cast<double>(c) * std::log2(static_cast<double>(c)));
    }
    [[nodiscard]] double operator()(std::size_t c) const { return table_[c]; }

private:
    std::vector<double> table_;
};

// n * H(pos, neg) with n = pos + neg.
[[nodiscard]] inline double weighted_entropy(const XLogX& t, std::size_t pos, std::size_t neg) {
    return t(pos + neg) - t(pos) - t(neg);
}

inline constexpr double kGainTie = 1e-12;

// Candidate update preserving "lowest feature, then lowest threshold" on ties:
// callers visit candidates in that order and a later one must be strictly better.
inline void offer(Split& best, const Split& candidate) {
    if (candidate.gain > best.gain + kGainTie || !best.valid()) best = candidate;
}

// Scans one numeric feature whose node rows are given in ascending value order.
template <class ValueAt, class LabelAt>
void scan_numeric(std::size_t feature, std::size_t n, ValueAt value, LabelAt label, std::size_t pos, std::size_t neg,
                  std::size_t min_leaf, const XLogX& xl, Split& best) {
    const double parent = weighted_entropy(xl, pos, neg);
    const double total = static_cast<double>(n);
    std::size_t lp = 0, ln = 0;
    // Track the best child entropy locally and only build a Split for winners.
    double best_children = std::numeric_limits<double>::infinity();
    std::size_t best_i = n;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        (label(i) ? lp : ln) += 1;
        const std::size_t left = i + 1;
        if (left < min_leaf || n - left < min_leaf) continue;
        if (!(value(i) < value(i + 1))) continue;
        const double children = weighted_entropy(xl, lp, ln) + weighted_entropy(xl, pos - lp, neg - ln);
        if (children < best_children - kGainTie * total) {
            best_children = children;
            best_i = i;
        }
    }
    if (best_i == n) return;
    const double a = value(best_i), b = value(best_i + 1);
    double mid = a + (b - a) / 2;
    if (!(mid < b)) mid = a;
    offer(best, {feature, mid, 0, (parent - best_children) / total});
}

// Categorical split: for two classes the best subset is a prefix of the
// categories ordered by positive fraction, so C-1 prefixes cover the search.
inline void scan_categorical(const std::array<std::size_t, 64>& cpos, const std::array<std::size_t, 64>& cneg,
                             std::size_t pos, std::size_t neg, std::size_t min_leaf, const XLogX& xl, Split& best) {
    std::vector<int> present;
    for (int c = 0; c < 64; ++c)
        if (cpos[static_cast<std::size_t>(c)] + cneg[static_cast<std::size_t>(c)] > 0) present.push_back(c);
    if (present.size() < 2) return;
    std::stable_sort(present.begin(), present.end(), [&](int a, int b) {
        const auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
        // pa/na < pb/nb without division
        return cpos[ua] * (cpos[ub] + cneg[ub]) < cpos[ub] * (cpos[ua] + cneg[ua]);
    });
    const double parent = weighted_entropy(xl, pos, neg);
    const double total = static_cast<double>(pos + neg);
    std::size_t lp = 0, ln = 0;
    std::uint64_t mask = 0;
    for (std::size_t j = 0; j + 1 < present.size(); ++j) {
        const auto c = static_cast<std::size_t>(present[j]);
        lp += cpos[c];
        ln += cneg[c];
        mask |= std::uint64_t{1} << c;
        if (lp + ln < min_leaf || pos + neg - lp - ln < min_leaf) continue;
        const double children = weighted_entropy(xl, lp, ln) + weighted_entropy(xl, pos - lp, neg - ln);
        offer(best, {LandType, 0.0, mask, (parent - children) / total});
    }
}

}  // namespace detail

// Maximum information-gain split over all features for the given rows.
// Returns an invalid split (gain < 0) when no feature separates the rows.
[[nodiscard]] inline Split best_split(std::span<const FeatureVector> x, std::span<const int> y,
                                     std::span<const std::size_t> rows, std::size_t min_leaf = 1) {
    detail::XLogX xl;
    xl.reserve(rows.size());
    std::size_t pos = 0;
    for (auto r : rows) pos += static_cast<std::size_t>(y[r]);
    const std::size_t neg = rows.size() - pos;
    Split best;
    std::vector<std::size_t> order(rows.begin(), rows.end());
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        if (f == LandType) {
            std::array<std::size_t, 64> cp{}, cn{};
            for (auto r : rows) (y[r] ? cp : cn)[static_cast<std::size_t>(x[r][LandType])] += 1;
            detail::scan_categorical(cp, cn, pos, neg, min_leaf, xl, best);
            continue;
        }
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a][f] < x[b][f]; });
        detail::scan_numeric(
            f, order.size(), [&](std::size_t i) { return x[order[i]][f]; }, [&](std::size_t i) { return y[order[i]] != 0; },
            pos, neg, min_leaf, xl, best);
    }
    return best;
}

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0;
    std::uint64_t category_mask = 0;
    int left = -1, right = -1;
    double value = 0;  // positive-class fraction at the node

    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct DecisionTree {
    std::vector<TreeNode> nodes;

    [[nodiscard]] double predict(const FeatureVector& x) const {
        std::size_t i = 0;
        while (nodes[i].feature >= 0) {
            const auto& n = nodes[i];
            bool left = n.feature == static_cast<int>(LandType)
                            ? ((n.category_mask >> static_cast<unsigned>(x[LandType])) & 1u)
                            : x[static_cast<std::size_t>(n.feature)] <= n.threshold;
            i = static_cast<std::size_t>(left ? n.left : n.right);
        }
        return nodes[i].value;
    }

    [[nodiscard]] std::size_t depth() const {
        std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
        std::size_t best = 0;
        while (!stack.empty()) {
            auto [i, d] = stack.back();
            stack.pop_back();
            best = std::max(best, d);
            if (nodes[i].feature >= 0) {
                stack.emplace_back(static_cast<std::size_t>(nodes[i].left), d + 1);
                stack.emplace_back(static_cast<std::size_t>(nodes[i].right), d + 1);
            }
        }
        return best;
    }

    friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

struct TreeParams {
    int n_trees = 1000;
    double subsample = 0.10;
    bool with_replacement = true;
    int min_leaf = 1;
    int max_depth = 0;  // 0 = grow until pure

    friend bool operator==(const TreeParams&, const TreeParams&) = default;
};

// Rank of every row under each numeric feature (ties ranked by row index),
// computed once and shared by every tree of an ensemble.
struct Presorted {
    std::array<std::vector<std::uint32_t>, kNumFeatures> rank;
    std::uint32_t bits = 1;  // rank width for radix passes
};

[[nodiscard]] inline Presorted presort(const Samples& data) {
    Presorted p;
    std::vector<std::uint32_t> o(data.size());
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        if (f == LandType) continue;
        std::iota(o.begin(), o.end(), 0u);
        std::stable_sort(o.begin(), o.end(), [&](std::uint32_t a, std::uint32_t b) { return data.x[a][f] < data.x[b][f]; });
        auto& r = p.rank[f];
        r.resize(data.size());
        for (std::size_t i = 0; i < o.size(); ++i) r[o[i]] = static_cast<std::uint32_t>(i);
    }
    p.bits = static_cast<std::uint32_t>(std::max<std::size_t>(1, std::bit_width(data.size())));
    return p;
}

namespace detail {

// Stable LSD radix sort of positions 0..m-1 by key[i].
inline void radix_order(std::span<const std::uint32_t> key, std::uint32_t bits, std::vector<std::uint32_t>& out,
                        std::vector<std::uint32_t>& tmp) {
    constexpr std::uint32_t kDigit = 11;
    const std::size_t m = key.size();
    out.resize(m);
    tmp.resize(m);
    std::iota(out.begin(), out.end(), 0u);
    std::array<std::uint32_t, (1u << kDigit) + 1> count{};
    for (std::uint32_t shift = 0; shift < bits; shift += kDigit) {
        count.fill(0);
        for (std::size_t i = 0; i < m; ++i) ++count[((key[out[i]] >> shift) & ((1u << kDigit) - 1)) + 1];
        std::partial_sum(count.begin(), count.end(), count.begin());
        for (std::size_t i = 0; i < m; ++i) tmp[count[(key[out[i]] >> shift) & ((1u << kDigit) - 1)]++] = out[i];
        out.swap(tmp);
    }
}

}  // namespace detail

// Grows one tree on the sample rows (repeats allowed) by greedy maximum
// information gain. Each numeric feature keeps its rows presorted; children
// inherit the order through a stable partition.
[[nodiscard]] inline DecisionTree grow_tree(const Samples& data, std::span<const std::size_t> sample,
                                            const TreeParams& params, const Presorted* sorted = nullptr) {
    const std::size_t m = sample.size();
    DecisionTree tree;
    if (m == 0) {
        tree.nodes.push_back({});
        return tree;
    }
    const auto min_leaf = static_cast<std::size_t>(std::max(1, params.min_leaf));
    std::vector<std::vector<double>> xs(kNumFeatures, std::vector<double>(m));
    std::vector<std::uint8_t> ys(m);
    for (std::size_t i = 0; i < m; ++i) {
        const auto& row = data.x[sample[i]];
        for (std::size_t f = 0; f < kNumFeatures; ++f) xs[f][i] = row[f];
        ys[i] = static_cast<std::uint8_t>(data.y[sample[i]]);
    }
    std::vector<std::vector<std::uint32_t>> order(kNumFeatures);
    std::vector<std::uint32_t> keys(sorted ? m : 0), tmp;
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        auto& o = order[f];
        if (f == LandType) {
            o.resize(m);
            std::iota(o.begin(), o.end(), 0u);
            continue;
        }
        if (sorted) {
            for (std::size_t i = 0; i < m; ++i) keys[i] = sorted->rank[f][sample[i]];
            detail::radix_order(keys, sorted->bits, o, tmp);
            continue;
        }
        o.resize(m);
        std::iota(o.begin(), o.end(), 0u);
        std::stable_sort(o.begin(), o.end(), [&](std::uint32_t a, std::uint32_t b) { return xs[f][a] < xs[f][b]; });
    }
    // Values and labels laid out in each feature's order so scans read memory
    // sequentially; the partition below keeps all three arrays aligned.
    std::vector<std::vector<double>> vals(kNumFeatures, std::vector<double>(m));
    std::vector<std::vector<std::uint8_t>> labs(kNumFeatures, std::vector<std::uint8_t>(m));
    for (std::size_t f = 0; f < kNumFeatures; ++f)
        for (std::size_t i = 0; i < m; ++i) {
            vals[f][i] = xs[f][order[f][i]];
            labs[f][i] = ys[order[f][i]];
        }
    detail::XLogX xl;
    xl.reserve(m);
    std::vector<std::uint8_t> left_flag(m);
    std::vector<std::uint32_t> buffer(m);
    std::vector<double> vbuffer(m);
    std::vector<std::uint8_t> lbuffer(m);

    struct Frame {
        std::size_t begin, end, depth;
        int node;
    };
    tree.nodes.push_back({});
    std::vector<Frame> stack{{0, m, 0, 0}};
    while (!stack.empty()) {
        const Frame fr = stack.back();
        stack.pop_back();
        const std::size_t n = fr.end - fr.begin;
        std::size_t pos = 0;
        for (std::size_t i = fr.begin; i < fr.end; ++i) pos += ys[order[0][i]];
        const std::size_t neg = n - pos;
        tree.nodes[static_cast<std::size_t>(fr.node)].value = static_cast<double>(pos) / static_cast<double>(n);
        const bool depth_capped = params.max_depth > 0 && fr.depth >= static_cast<std::size_t>(params.max_depth);
        if (pos == 0 || neg == 0 || n < 2 * min_leaf || depth_capped) continue;

        Split best;
        for (std::size_t f = 0; f < kNumFeatures; ++f) {
            const auto* v = vals[f].data() + fr.begin;
            const auto* l = labs[f].data() + fr.begin;
            if (f == LandType) {
                std::array<std::size_t, 64> cp{}, cn{};
                for (std::size_t i = 0; i < n; ++i) (l[i] ? cp : cn)[static_cast<std::size_t>(v[i])] += 1;
                detail::scan_categorical(cp, cn, pos, neg, min_leaf, xl, best);
                continue;
            }
            detail::scan_numeric(
                f, n, [&](std::size_t i) { return v[i]; }, [&](std::size_t i) { return l[i] != 0; }, pos, neg, min_leaf,
                xl, best);
        }
        if (!best.valid()) continue;

        std::size_t n_left = 0;
        for (std::size_t i = fr.begin; i < fr.end; ++i) {
            const auto s = order[0][i];
            const bool left = best.feature == LandType
                                  ? ((best.category_mask >> static_cast<unsigned>(xs[LandType][s])) & 1u) != 0
                                  : xs[best.feature][s] <= best.threshold;
            left_flag[s] = left ? 1 : 0;
            n_left += left ? 1 : 0;
        }
        for (std::size_t f = 0; f < kNumFeatures; ++f) {
            auto* o = order[f].data();
            auto* v = vals[f].data();
            auto* lb = labs[f].data();
            std::size_t l = fr.begin, r = 0;
            for (std::size_t i = fr.begin; i < fr.end; ++i) {
                if (left_flag[o[i]]) {
                    o[l] = o[i];
                    v[l] = v[i];
                    lb[l++] = lb[i];
                } else {
                    buffer[r] = o[i];
                    vbuffer[r] = v[i];
                    lbuffer[r++] = lb[i];
                }
            }
            std::copy_n(buffer.begin(), r, o + l);
            std::copy_n(vbuffer.begin(), r, v + l);
            std::copy_n(lbuffer.begin(), r, lb + l);
        }

        const int left_id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});
        const int right_id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});
        auto& node = tree.nodes[static_cast<std::size_t>(fr.node)];
        node.feature = static_cast<int>(best.feature);
        node.threshold = best.threshold;
        node.category_mask = best.category_mask;
        node.left = left_id;
        node.right = right_id;
        stack.push_back({fr.begin + n_left, fr.end, fr.depth + 1, right_id});
        stack.push_back({fr.begin, fr.begin + n_left, fr.depth + 1, left_id});
    }
    return tree;
}

struct TreeEnsemble {
    TreeParams params;
    std::uint64_t seed = 0;
    std::vector<DecisionTree> trees;

    [[nodiscard]] double predict(const FeatureVector& x) const {
        double sum = 0;
        for (const auto& t : trees) sum += t.predict(x);
        return trees.empty() ? 0.0 : sum / static_cast<double>(trees.size());
    }

    friend bool operator==(const TreeEnsemble&, const TreeEnsemble&) = default;
};

// Rows drawn for one bagged tree.
[[nodiscard]] inline std::vector<std::size_t> bag_rows(std::size_t n, const TreeParams& params, std::uint64_t seed) {
    const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(params.subsample * static_cast<double>(n))));
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> rows;
    if (params.with_replacement) {
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        rows.resize(m);
        for (auto& r : rows) r = pick(rng);
    } else {
        rows.resize(n);
        std::iota(rows.begin(), rows.end(), std::size_t{0});
        const std::size_t take = std::min(m, n);
        for (std::size_t j = 0; j < take; ++j) std::swap(rows[j], rows[std::uniform_int_distribution<std::size_t>(j, n - 1)(rng)]);
        rows.resize(take);
    }
    return rows;
}

[[nodiscard]] inline TreeEnsemble train_trees(const Samples& data, const TreeParams& params, std::uint64_t seed) {
    if (params.n_trees < 1) throw ParameterError("n_trees must be >= 1");
    if (!(params.subsample > 0.0 && params.subsample <= 1.0)) throw ParameterError("subsample must be in (0,1]");
    const auto pos = static_cast<std::size_t>(std::count(data.y.begin(), data.y.end(), 1));
    if (pos == 0 || pos == data.size())
        throw TrainingError("training data has a single class (" + std::to_string(pos) + " positives of " +
                            std::to_string(data.size()) + "); apply data duplication or add the missing class first");
    TreeEnsemble ens{params, seed, std::vector<DecisionTree>(static_cast<std::size_t>(params.n_trees))};
    const Presorted sorted = presort(data);
    parallel_for(ens.trees.size(), [&](std::size_t i) {
        const auto rows = bag_rows(data.size(), params, derive_seed({seed, i}));
        ens.trees[i] = grow_tree(data, rows, params, &sorted);
    });
    return ens;
}

}  // namespace poach

#endif  // POACHPRED_TREE_HPP
