#pragma once

// Independent reference implementations used only by the tests. They favor
// obviousness over speed and share no code paths with the library beyond the
// plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "rstsp/rstsp.hpp"

namespace oracle {

using rstsp::Instance;

inline double d2(const Instance& inst, std::size_t i, std::size_t j) {
    const double dx = inst[i].a - inst[j].a, dy = inst[i].b - inst[j].b;
    return std::hypot(dx, dy);
}

/// Exhaustive search over all tours starting at node 0 (metric distances).
inline double brute_force_tsp(const Instance& inst) {
    const std::size_t n = inst.size();
    std::vector<std::uint32_t> rest(n - 1);
    std::iota(rest.begin(), rest.end(), 1u);
    double best = std::numeric_limits<double>::infinity();
    do {
        if (rest.front() > rest.back()) continue;  // each cycle once per direction
        double len = inst.metric_dist(0, rest.front()) + inst.metric_dist(rest.back(), 0);
        for (std::size_t k = 0; k + 1 < rest.size(); ++k) len += inst.metric_dist(rest[k], rest[k + 1]);
        best = std::min(best, len);
    } while (std::next_permutation(rest.begin(), rest.end()));
    return best;
}

/// Row i: all nodes sorted by (distance to i, index), cut to k1 entries.
inline std::vector<std::vector<std::uint32_t>> knn_by_sort(const Instance& inst, std::size_t k1) {
    const std::size_t n = inst.size();
    std::vector<std::vector<std::uint32_t>> rows(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::uint32_t> all(n);
        std::iota(all.begin(), all.end(), 0u);
        std::stable_sort(all.begin(), all.end(), [&](std::uint32_t x, std::uint32_t y) {
            const double dx = x == i ? -1.0 : d2(inst, i, x);
            const double dy = y == i ? -1.0 : d2(inst, i, y);
            return dx < dy;
        });
        all.resize(k1);
        rows[i] = all;
    }
    return rows;
}

using Mat = std::vector<std::vector<double>>;

inline std::vector<double> matvec(const rstsp::Dense& d, const std::vector<double>& v) {
    std::vector<double> out(d.rows);
    for (std::size_t r = 0; r < d.rows; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < d.cols; ++c) s += double(d.w[r * d.cols + c]) * v[c];
        out[r] = s + double(d.b[r]);
    }
    return out;
}

inline double ref_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double ref_gelu(double x) { return x * 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline std::vector<double> ref_layer_norm(std::vector<double> v, const rstsp::LayerNormParams& p) {
    const double h = double(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / h;
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= h;
    for (std::size_t f = 0; f < v.size(); ++f) v[f] = (v[f] - mean) / std::sqrt(var + 1e-5) * p.gain[f] + p.offset[f];
    return v;
}

struct RefFeatures {
    Mat x;                // n x h
    std::vector<Mat> e;   // n x k1 x h
};

/// Neighbor rows and rescaled distances recomputed from scratch.
struct RefSubgraph {
    std::vector<std::vector<std::uint32_t>> rows;
    Mat rescaled;
};

inline RefSubgraph ref_subgraph(const Instance& inst, std::size_t k1) {
    RefSubgraph s;
    s.rows = knn_by_sort(inst, k1);
    for (const auto& row : s.rows) {
        double amin = 1e300, amax = -1e300, bmin = 1e300, bmax = -1e300;
        for (auto j : row) {
            amin = std::min(amin, inst[j].a);
            amax = std::max(amax, inst[j].a);
            bmin = std::min(bmin, inst[j].b);
            bmax = std::max(bmax, inst[j].b);
        }
        const double ext = std::max(amax - amin, bmax - bmin);
        const double mu = ext > 0 ? 1.0 / ext : 1.0;
        std::vector<double> r;
        for (auto j : row) r.push_back(d2(inst, row[0], j) * mu);
        s.rescaled.push_back(r);
    }
    return s;
}

inline RefFeatures ref_embed(const Instance& inst, const RefSubgraph& sub, const rstsp::ModelWeights& w) {
    RefFeatures f;
    for (std::size_t i = 0; i < inst.size(); ++i) {
        f.x.push_back(matvec(w.node_embed, {inst[i].a, inst[i].b}));
        Mat ei;
        for (double d : sub.rescaled[i]) ei.push_back(matvec(w.edge_embed, {d}));
        f.e.push_back(ei);
    }
    return f;
}

inline RefFeatures ref_conv(const RefFeatures& in, const RefSubgraph& sub, const rstsp::ConvLayerWeights& c) {
    RefFeatures out = in;
    const auto& w7 = c.edge_target.empty() ? c.edge_source : c.edge_target;
    for (std::size_t i = 0; i < in.x.size(); ++i) {
        auto agg = matvec(c.node_self, in.x[i]);
        for (std::size_t s = 0; s < sub.rows[i].size(); ++s) {
            const auto m = matvec(c.node_message, in.x[sub.rows[i][s]]);
            for (std::size_t f = 0; f < agg.size(); ++f) agg[f] += ref_sigmoid(in.e[i][s][f]) * m[f];
        }
        agg = ref_layer_norm(agg, c.node_norm);
        for (std::size_t f = 0; f < agg.size(); ++f) out.x[i][f] = in.x[i][f] + ref_gelu(agg[f]);
        for (std::size_t s = 0; s < sub.rows[i].size(); ++s) {
            auto a = matvec(c.edge_self, in.e[i][s]);
            const auto b = matvec(c.edge_source, in.x[i]);
            const auto d = matvec(w7, in.x[sub.rows[i][s]]);
            for (std::size_t f = 0; f < a.size(); ++f) a[f] += b[f] + d[f];
            a = ref_layer_norm(a, c.edge_norm);
            for (std::size_t f = 0; f < a.size(); ++f) out.e[i][s][f] = in.e[i][s][f] + ref_gelu(a[f]);
        }
    }
    return out;
}

/// Dense heat matrix (n x n) from the reference network.
inline Mat ref_forward(const Instance& inst, std::size_t k1, const rstsp::ModelWeights& w) {
    const auto sub = ref_subgraph(inst, k1);
    auto f = ref_embed(inst, sub, w);
    for (const auto& c : w.conv) f = ref_conv(f, sub, c);
    const std::size_t n = inst.size();
    Mat H(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t s = 1; s < k1; ++s) {
            auto hid = matvec(w.head_hidden, f.e[i][s]);
            for (auto& v : hid) v = ref_gelu(v);
            H[i][sub.rows[i][s]] = ref_sigmoid(matvec(w.head_out, hid)[0]);
        }
    }
    return H;
}

inline double cycle_length(const Instance& inst, const std::vector<std::uint32_t>& p) {
    double len = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) len += d2(inst, p[k], p[(k + 1) % p.size()]);
    return len;
}

/// Best unrestricted 2-Opt improvement available, or 0 when `p` is 2-optimal.
inline double best_two_opt_gain(const Instance& inst, const std::vector<std::uint32_t>& p) {
    const std::size_t n = p.size();
    double best = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        for (std::size_t j = i + 2; j < n; ++j) {
            if (i == 0 && j == n - 1) continue;
            const auto a = p[i], b = p[i + 1], c = p[j], d = p[(j + 1) % n];
            const double gain = d2(inst, a, b) + d2(inst, c, d) - d2(inst, a, c) - d2(inst, b, d);
            best = std::max(best, gain);
        }
    }
    return best;
}

/// Random permutation of 0..n-1 from a seeded generator.
inline std::vector<std::uint32_t> random_perm(std::size_t n, std::uint64_t seed) {
    std::vector<std::uint32_t> p(n);
    std::iota(p.begin(), p.end(), 0u);
    rstsp::Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.below(i)]);
    return p;
}

/// Instance with node labels permuted: new node k is old node perm[k].
inline Instance relabel(const Instance& inst, const std::vector<std::uint32_t>& perm) {
    std::vector<rstsp::Point> pts;
    for (auto j : perm) pts.push_back(inst[j]);
    return Instance(inst.id() + "_relabeled", pts);
}

}  // namespace oracle
