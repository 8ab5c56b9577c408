#ifndef POACHPRED_NET_HPP
#define POACHPRED_NET_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "core.hpp"
#include "elicitation.hpp"
#include "tree.hpp"

namespace poach {

struct NetParams {
    int members = 100;
    int epochs = 50;
    int batch = 64;
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.1;
    double plateau_tol = 1e-5;
    int plateau_epochs = 5;

    friend bool operator==(const NetParams&, const NetParams&) = default;
};

inline constexpr std::size_t kHidden1 = 8;
inline constexpr std::size_t kHidden2 = 4;

// D -> 8 -> 4 -> 1 with relu, relu, sigmoid. Parameters are stored flat:
// W1 (8 x D, row major), b1, W2 (4 x 8), b2, W3 (1 x 4), b3.
struct Mlp {
    std::size_t inputs = 0;
    std::vector<double> params;

    struct Layout {
        std::size_t w1, b1, w2, b2, w3, b3, total;
    };

    [[nodiscard]] static Layout layout(std::size_t d) {
        Layout l{};
        l.w1 = 0;
        l.b1 = l.w1 + kHidden1 * d;
        l.w2 = l.b1 + kHidden1;
        l.b2 = l.w2 + kHidden2 * kHidden1;
        l.w3 = l.b2 + kHidden2;
        l.b3 = l.w3 + kHidden2;
        l.total = l.b3 + 1;
        return l;
    }

    // True for entries that are weights (penalized), false for biases.
    [[nodiscard]] static std::vector<bool> weight_mask(std::size_t d) {
        const auto l = layout(d);
        std::vector<bool> m(l.total, false);
        std::fill(m.begin() + static_cast<std::ptrdiff_t>(l.w1), m.begin() + static_cast<std::ptrdiff_t>(l.b1), true);
        std::fill(m.begin() + static_cast<std::ptrdiff_t>(l.w2), m.begin() + static_cast<std::ptrdiff_t>(l.b2), true);
        std::fill(m.begin() + static_cast<std::ptrdiff_t>(l.w3), m.begin() + static_cast<std::ptrdiff_t>(l.b3), true);
        return m;
    }

    [[nodiscard]] double logit(std::span<const double> x) const {
        const auto l = layout(inputs);
        const double* p = params.data();
        double h1[kHidden1], h2[kHidden2];
        for (std::size_t j = 0; j < kHidden1; ++j) {
            double z = p[l.b1 + j];
            for (std::size_t i = 0; i < inputs; ++i) z += p[l.w1 + j * inputs + i] * x[i];
            h1[j] = z > 0 ? z : 0;
        }
        for (std::size_t j = 0; j < kHidden2; ++j) {
            double z = p[l.b2 + j];
            for (std::size_t i = 0; i < kHidden1; ++i) z += p[l.w2 + j * kHidden1 + i] * h1[i];
            h2[j] = z > 0 ? z : 0;
        }
        double z = p[l.b3];
        for (std::size_t i = 0; i < kHidden2; ++i) z += p[l.w3 + i] * h2[i];
        return z;
    }

    // Sigmoid output kept strictly inside (0,1).
    [[nodiscard]] double predict(std::span<const double> x) const {
        const double z = logit(x);
        const double s = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
        return std::clamp(s, std::nextafter(0.0, 1.0), std::nextafter(1.0, 0.0));
    }

    friend bool operator==(const Mlp&, const Mlp&) = default;
};

// Binary cross-entropy from a logit, stable for large |z|.
[[nodiscard]] inline double bce_with_logit(double z, double y) {
    return std::max(z, 0.0) - y * z + std::log1p(std::exp(-std::abs(z)));
}

// Mean BCE over the batch plus (lambda/2) * sum of squared weights. Writes the
// gradient with respect to every parameter into grad.
inline double loss_and_gradient(const Mlp& net, std::span<const std::vector<double>> xs, std::span<const double> ys,
                                double lambda, std::vector<double>& grad) {
    const std::size_t d = net.inputs;
    const auto l = Mlp::layout(d);
    const double* p = net.params.data();
    grad.assign(l.total, 0.0);
    double* g = grad.data();
    double loss = 0;
    const double inv = xs.empty() ? 0.0 : 1.0 / static_cast<double>(xs.size());
    for (std::size_t s = 0; s < xs.size(); ++s) {
        const double* x = xs[s].data();
        double z1[kHidden1], h1[kHidden1], z2[kHidden2], h2[kHidden2];
        for (std::size_t j = 0; j < kHidden1; ++j) {
            double z = p[l.b1 + j];
            for (std::size_t i = 0; i < d; ++i) z += p[l.w1 + j * d + i] * x[i];
            z1[j] = z;
            h1[j] = z > 0 ? z : 0;
        }
        for (std::size_t j = 0; j < kHidden2; ++j) {
            double z = p[l.b2 + j];
            for (std::size_t i = 0; i < kHidden1; ++i) z += p[l.w2 + j * kHidden1 + i] * h1[i];
            z2[j] = z;
            h2[j] = z > 0 ? z : 0;
        }
        double z3 = p[l.b3];
        for (std::size_t i = 0; i < kHidden2; ++i) z3 += p[l.w3 + i] * h2[i];
        loss += bce_with_logit(z3, ys[s]) * inv;

        const double sig = z3 >= 0 ? 1.0 / (1.0 + std::exp(-z3)) : std::exp(z3) / (1.0 + std::exp(z3));
        const double d3 = (sig - ys[s]) * inv;
        g[l.b3] += d3;
        double d2[kHidden2];
        for (std::size_t i = 0; i < kHidden2; ++i) {
            g[l.w3 + i] += d3 * h2[i];
            d2[i] = z2[i] > 0 ? d3 * p[l.w3 + i] : 0.0;
        }
        double d1[kHidden1] = {};
        for (std::size_t j = 0; j < kHidden2; ++j) {
            if (d2[j] == 0.0) continue;
            g[l.b2 + j] += d2[j];
            for (std::size_t i = 0; i < kHidden1; ++i) {
                g[l.w2 + j * kHidden1 + i] += d2[j] * h1[i];
                d1[i] += d2[j] * p[l.w2 + j * kHidden1 + i];
            }
        }
        for (std::size_t j = 0; j < kHidden1; ++j) {
            if (!(z1[j] > 0) || d1[j] == 0.0) continue;
            g[l.b1 + j] += d1[j];
            for (std::size_t i = 0; i < d; ++i) g[l.w1 + j * d + i] += d1[j] * x[i];
        }
    }
    const auto mask = Mlp::weight_mask(d);
    for (std::size_t k = 0; k < l.total; ++k) {
        if (!mask[k]) continue;
        loss += 0.5 * lambda * p[k] * p[k];
        g[k] += lambda * p[k];
    }
    return loss;
}

// He initialization for the relu layers, Glorot for the output; biases zero.
[[nodiscard]] inline Mlp init_mlp(std::size_t d, std::uint64_t seed) {
    Mlp net{d, std::vector<double>(Mlp::layout(d).total, 0.0)};
    const auto l = Mlp::layout(d);
    std::mt19937_64 rng(seed);
    auto fill = [&](std::size_t from, std::size_t count, double sd) {
        std::normal_distribution<double> nd(0.0, sd);
        for (std::size_t k = 0; k < count; ++k) net.params[from + k] = nd(rng);
    };
    fill(l.w1, kHidden1 * d, std::sqrt(2.0 / static_cast<double>(std::max<std::size_t>(d, 1))));
    fill(l.w2, kHidden2 * kHidden1, std::sqrt(2.0 / kHidden1));
    fill(l.w3, kHidden2, std::sqrt(2.0 / (kHidden2 + 1)));
    return net;
}

struct MemberReport {
    int epochs = 0;
    double final_loss = 0;
};

// Minibatch Adam on one member. Stops early once the epoch loss has improved
// by less than plateau_tol for plateau_epochs consecutive epochs.
[[nodiscard]] inline Mlp train_member(std::span<const std::vector<double>> xs, std::span<const double> ys,
                                      const NetParams& params, std::uint64_t seed, std::size_t member_id = 0,
                                      MemberReport* report = nullptr) {
    const std::size_t d = xs.empty() ? 0 : xs.front().size();
    Mlp net = init_mlp(d, derive_seed({seed, 0}));
    const std::size_t np = net.params.size();
    std::vector<double> m(np, 0.0), v(np, 0.0), grad;
    std::vector<std::size_t> idx(xs.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(derive_seed({seed, 1}));
    const auto batch = static_cast<std::size_t>(std::max(1, params.batch));
    std::vector<std::vector<double>> bx;
    std::vector<double> by;
    double best = std::numeric_limits<double>::infinity();
    int stale = 0, epoch = 0;
    double last = 0;
    long long step = 0;
    for (epoch = 0; epoch < params.epochs; ++epoch) {
        std::shuffle(idx.begin(), idx.end(), rng);
        double epoch_loss = 0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < idx.size(); start += batch) {
            const std::size_t end = std::min(idx.size(), start + batch);
            bx.clear();
            by.clear();
            for (std::size_t k = start; k < end; ++k) {
                bx.push_back(xs[idx[k]]);
                by.push_back(ys[idx[k]]);
            }
            const double loss = loss_and_gradient(net, bx, by, params.weight_decay, grad);
            ++step;
            if (!std::isfinite(loss))
                throw DivergenceError("non-finite loss in member " + std::to_string(member_id) + " at epoch " +
                                      std::to_string(epoch) + ", step " + std::to_string(step));
            const double c1 = 1.0 - std::pow(params.beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(params.beta2, static_cast<double>(step));
            for (std::size_t k = 0; k < np; ++k) {
                m[k] = params.beta1 * m[k] + (1 - params.beta1) * grad[k];
                v[k] = params.beta2 * v[k] + (1 - params.beta2) * grad[k] * grad[k];
                net.params[k] -= params.lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + params.eps);
            }
            epoch_loss += loss;
            ++batches;
        }
        last = batches ? epoch_loss / static_cast<double>(batches) : 0.0;
        if (best - last < params.plateau_tol) {
            if (++stale >= params.plateau_epochs) {
                ++epoch;
                break;
            }
        } else {
            stale = 0;
        }
        best = std::min(best, last);
    }
    if (report) *report = {epoch, last};
    return net;
}

// One-hot categories follow the land types seen in training.
[[nodiscard]] inline Embedding embedding_for(const Samples& data) {
    std::vector<int> cats;
    for (const auto& x : data.x) cats.push_back(static_cast<int>(x[LandType]));
    std::sort(cats.begin(), cats.end());
    cats.erase(std::unique(cats.begin(), cats.end()), cats.end());
    return Embedding{cats};
}

struct NetEnsemble {
    NetParams params;
    std::uint64_t seed = 0;
    Embedding encoding;
    std::vector<Mlp> members;

    [[nodiscard]] double predict(const FeatureVector& x) const {
        if (members.empty()) return 0.0;
        const auto e = encoding(x);
        double sum = 0;
        for (const auto& m : members) sum += m.predict(e);
        return sum / static_cast<double>(members.size());
    }

    friend bool operator==(const NetEnsemble& a, const NetEnsemble& b) {
        return a.params == b.params && a.seed == b.seed && a.encoding.categories == b.encoding.categories &&
               a.members == b.members;
    }
};

[[nodiscard]] inline NetEnsemble train_nets(const Samples& data, const NetParams& params, std::uint64_t seed) {
    if (params.members < 1) throw ParameterError("members must be >= 1");
    if (params.epochs < 1) throw ParameterError("epochs must be >= 1");
    if (params.batch < 1) throw ParameterError("batch must be >= 1");
    if (!(params.lr > 0)) throw ParameterError("lr must be > 0");
    if (params.weight_decay < 0) throw ParameterError("weight_decay must be >= 0");
    const auto pos = static_cast<std::size_t>(std::count(data.y.begin(), data.y.end(), 1));
    if (pos == 0 || pos == data.size())
        throw TrainingError("training data has a single class (" + std::to_string(pos) + " positives of " +
                            std::to_string(data.size()) + "); apply data duplication or add the missing class first");
    NetEnsemble ens{params, seed, embedding_for(data), std::vector<Mlp>(static_cast<std::size_t>(params.members))};
    std::vector<std::vector<double>> xs;
    xs.reserve(data.size());
    for (const auto& x : data.x) xs.push_back(ens.encoding(x));
    std::vector<double> ys(data.y.begin(), data.y.end());
    parallel_for(ens.members.size(), [&](std::size_t i) {
        ens.members[i] = train_member(xs, ys, params, derive_seed({seed, i}), i);
    });
    return ens;
}

}  // namespace poach

#endif  // POACHPRED_NET_HPP
