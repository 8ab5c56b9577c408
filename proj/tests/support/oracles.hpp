#ifndef POACHPRED_TESTS_ORACLES_HPP
#define POACHPRED_TESTS_ORACLES_HPP

// Test-only reference implementations. Each one is written the slow, obvious
// way and shares no code path with the library routine it checks.

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include <poachpred/poachpred.hpp>

namespace oracle {

using poach::FeatureVector;
using poach::kNumFeatures;

inline double entropy_bits(double pos, double neg) {
    const double n = pos + neg;
    double h = 0;
    if (pos > 0) h -= pos / n * std::log2(pos / n);
    if (neg > 0) h -= neg / n * std::log2(neg / n);
    return h;
}

// Information gain of a left/right partition given as a predicate.
template <class GoesLeft>
double partition_gain(const std::vector<FeatureVector>& x, const std::vector<int>& y,
                      const std::vector<std::size_t>& rows, GoesLeft goes_left) {
    double lp = 0, ln = 0, rp = 0, rn = 0;
    for (auto r : rows) {
        if (goes_left(x[r])) (y[r] ? lp : ln) += 1;
        else (y[r] ? rp : rn) += 1;
    }
    const double n = lp + ln + rp + rn;
    if (lp + ln == 0 || rp + rn == 0) return -1;
    return entropy_bits(lp + rp, ln + rn) - (lp + ln) / n * entropy_bits(lp, ln) - (rp + rn) / n * entropy_bits(rp, rn);
}

// Highest gain over every numeric threshold (each observed value, x <= v) and
// every non-trivial subset of the land types present.
inline double exhaustive_best_gain(const std::vector<FeatureVector>& x, const std::vector<int>& y,
                                   const std::vector<std::size_t>& rows) {
    double best = -1;
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        if (f == poach::LandType) {
            std::set<int> present;
            for (auto r : rows) present.insert(static_cast<int>(x[r][f]));
            const std::vector<int> cats(present.begin(), present.end());
            const std::size_t subsets = std::size_t{1} << cats.size();
            for (std::size_t s = 1; s + 1 < subsets; ++s) {
                std::set<int> left;
                for (std::size_t j = 0; j < cats.size(); ++j)
                    if ((s >> j) & 1u) left.insert(cats[j]);
                best = std::max(best, partition_gain(x, y, rows, [&](const FeatureVector& v) {
                                    return left.contains(static_cast<int>(v[poach::LandType]));
                                }));
            }
            continue;
        }
        for (auto r : rows) {
            const double t = x[r][f];
            best = std::max(best, partition_gain(x, y, rows, [&](const FeatureVector& v) { return v[f] <= t; }));
        }
    }
    return best;
}

// Straightforward forward pass of the 8-4-1 network. Records relu inputs so
// callers can tell when a perturbation crosses a kink.
struct Forward {
    double loss = 0;
    std::vector<double> preacts;
};

inline Forward reference_forward(const std::vector<double>& params, std::size_t d,
                                 const std::vector<std::vector<double>>& xs, const std::vector<double>& ys,
                                 double lambda) {
    const std::size_t h1 = 8, h2 = 4;
    const std::size_t w1 = 0, b1 = w1 + h1 * d, w2 = b1 + h1, b2 = w2 + h2 * h1, w3 = b2 + h2, b3 = w3 + h2;
    Forward out;
    for (std::size_t s = 0; s < xs.size(); ++s) {
        std::vector<double> a1(h1), a2(h2);
        for (std::size_t j = 0; j < h1; ++j) {
            double z = params[b1 + j];
            for (std::size_t i = 0; i < d; ++i) z += params[w1 + j * d + i] * xs[s][i];
            out.preacts.push_back(z);
            a1[j] = std::max(0.0, z);
        }
        for (std::size_t j = 0; j < h2; ++j) {
            double z = params[b2 + j];
            for (std::size_t i = 0; i < h1; ++i) z += params[w2 + j * h1 + i] * a1[i];
            out.preacts.push_back(z);
            a2[j] = std::max(0.0, z);
        }
        double z = params[b3];
        for (std::size_t i = 0; i < h2; ++i) z += params[w3 + i] * a2[i];
        const double p = 1.0 / (1.0 + std::exp(-z));
        out.loss += -(ys[s] * std::log(p) + (1 - ys[s]) * std::log(1 - p));
    }
    out.loss /= static_cast<double>(xs.size());
    double penalty = 0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        const bool bias = (k >= b1 && k < w2) || (k >= b2 && k < w3) || k == b3;
        if (!bias) penalty += params[k] * params[k];
    }
    out.loss += 0.5 * lambda * penalty;
    return out;
}

struct GradientCheck {
    double max_rel_error = 0;
    std::size_t compared = 0;
    std::size_t at_kink = 0;  // coordinates skipped because a relu flipped
};

// Central differences against the analytic gradient. A coordinate whose
// perturbation flips the sign of any relu input has no derivative there and
// is skipped.
inline GradientCheck check_gradient(const std::vector<double>& params, std::size_t d,
                                    const std::vector<std::vector<double>>& xs, const std::vector<double>& ys,
                                    double lambda, const std::vector<double>& analytic, double h = 1e-6) {
    GradientCheck c;
    const auto base = reference_forward(params, d, xs, ys, lambda);
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto plus = params, minus = params;
        plus[k] += h;
        minus[k] -= h;
        const auto fp = reference_forward(plus, d, xs, ys, lambda);
        const auto fm = reference_forward(minus, d, xs, ys, lambda);
        bool kink = false;
        for (std::size_t j = 0; j < base.preacts.size() && !kink; ++j) {
            const bool s0 = base.preacts[j] > 0;
            kink = (fp.preacts[j] > 0) != s0 || (fm.preacts[j] > 0) != s0;
        }
        if (kink) {
            ++c.at_kink;
            continue;
        }
        const double numeric = (fp.loss - fm.loss) / (2 * h);
        const double denom = std::max({std::abs(numeric), std::abs(analytic[k]), 1e-6});
        c.max_rel_error = std::max(c.max_rel_error, std::abs(numeric - analytic[k]) / denom);
        ++c.compared;
    }
    return c;
}

// p^m q^(n-m) evaluated per cell, then a full sort by (score desc, grid_id).
inline std::set<std::string> psfr_top(const poach::Dataset& d, const std::vector<std::size_t>& pool,
                                      const std::vector<poach::FeatureRange>& ranges, double p, double q,
                                      std::size_t top_n) {
    std::vector<std::pair<double, std::string>> scored;
    for (auto i : pool) {
        double prob = 1;
        for (const auto& r : ranges) {
            const double v = d[i].features[r.feature];
            prob *= (v >= r.high.lo && v <= r.high.hi) ? p : q;
        }
        scored.emplace_back(prob, d[i].grid_id);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::set<std::string> out;
    for (std::size_t j = 0; j < top_n && j < scored.size(); ++j) out.insert(scored[j].second);
    return out;
}

// Index of the closest centroid by plain Euclidean distance (first on ties).
inline int nearest_centroid(const std::vector<double>& x, const std::vector<std::vector<double>>& centroids) {
    int best = -1;
    double best_d = 0;
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        double s = 0;
        for (std::size_t j = 0; j < x.size(); ++j) s += (x[j] - centroids[c][j]) * (x[j] - centroids[c][j]);
        if (best < 0 || s < best_d) best = static_cast<int>(c), best_d = s;
    }
    return best;
}

inline double f1_of(double precision, double recall) { return 2 * precision * recall / (precision + recall); }

}  // namespace oracle

#endif  // POACHPRED_TESTS_ORACLES_HPP
