#pragma once

// k-nearest-neighbour subgraphs and Uniform Unit Square Projection.
//
// Every node i owns a subgraph made of itself and its k1 - 1 nearest nodes.
// Rescaling multiplies the subgraph's edge lengths by
//     mu_i = 1 / max(a_max - a_min, b_max - b_min)
// taken over the subgraph's coordinates, so every subgraph spans the unit
// square no matter how dense the instance is.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <ostream>
#include <span>
#include <vector>

#include "rstsp/errors.hpp"
#include "rstsp/instance.hpp"

namespace rstsp {

/// Row-major n x k table of node indices. Row i starts with i itself.
struct NeighborTable {
    std::size_t n = 0;
    std::size_t k = 0;
    std::vector<std::uint32_t> idx;

    [[nodiscard]] std::span<const std::uint32_t> row(std::size_t i) const noexcept {
        return {idx.data() + i * k, k};
    }
    /// Slot of j in row i, or k if absent.
    [[nodiscard]] std::size_t slot(std::size_t i, std::uint32_t j) const noexcept {
        const auto r = row(i);
        return static_cast<std::size_t>(std::find(r.begin(), r.end(), j) - r.begin());
    }
};

class SubgraphSet {
public:
    SubgraphSet(std::shared_ptr<const NeighborTable> neighbors, std::vector<double> raw_dist)
        : nb_(std::move(neighbors)), raw_(std::move(raw_dist)) {}

    [[nodiscard]] std::size_t size() const noexcept { return nb_->n; }
    [[nodiscard]] std::size_t k1() const noexcept { return nb_->k; }
    [[nodiscard]] const std::shared_ptr<const NeighborTable>& table() const noexcept { return nb_; }
    [[nodiscard]] std::span<const std::uint32_t> neighbors(std::size_t i) const noexcept { return nb_->row(i); }
    [[nodiscard]] std::span<const double> raw_dist(std::size_t i) const noexcept {
        return {raw_.data() + i * k1(), k1()};
    }
    [[nodiscard]] bool rescaled() const noexcept { return !mu_.empty(); }
    [[nodiscard]] std::span<const double> rescaled_dist(std::size_t i) const noexcept {
        return {scaled_.data() + i * k1(), k1()};
    }
    [[nodiscard]] double mu(std::size_t i) const noexcept { return mu_[i]; }
    [[nodiscard]] std::span<const double> mu() const noexcept { return mu_; }

private:
    friend SubgraphSet rescale(SubgraphSet sub, const Instance& inst);

    std::shared_ptr<const NeighborTable> nb_;
    std::vector<double> raw_;
    std::vector<double> scaled_;
    std::vector<double> mu_;
};

namespace detail {

struct DistIdx {
    double d;
    std::uint32_t j;
    friend bool operator<(const DistIdx& x, const DistIdx& y) noexcept {
        return x.d < y.d || (x.d == y.d && x.j < y.j);
    }
};

inline void finish_row(std::vector<DistIdx>& cand, std::size_t i, std::size_t k1, std::uint32_t* row, double* dist) {
    const std::size_t take = k1 - 1;
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end());
    row[0] = static_cast<std::uint32_t>(i);
    dist[0] = 0.0;
    for (std::size_t s = 0; s < take; ++s) {
        row[s + 1] = cand[s].j;
        dist[s + 1] = cand[s].d;
    }
}

inline void check_k1(std::size_t n, std::size_t k1) {
    if (k1 < 1 || k1 > n) {
        throw ArgumentError("k1 must lie in [1, n]; got k1=" + std::to_string(k1) + ", n=" + std::to_string(n));
    }
}

}  // namespace detail

/// Exact k-NN by full scan, O(n^2 log k). Ties go to the lower node index.
inline SubgraphSet build_knn_exact(const Instance& inst, std::size_t k1) {
    const std::size_t n = inst.size();
    detail::check_k1(n, k1);
    auto table = std::make_shared<NeighborTable>(NeighborTable{n, k1, std::vector<std::uint32_t>(n * k1)});
    std::vector<double> raw(n * k1);
    std::vector<detail::DistIdx> cand;
    cand.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        cand.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) cand.push_back({inst.dist(i, j), static_cast<std::uint32_t>(j)});
        }
        detail::finish_row(cand, i, k1, table->idx.data() + i * k1, raw.data() + i * k1);
    }
    return SubgraphSet(std::move(table), std::move(raw));
}

/// k-NN through uniform grid bucketing with ring expansion. Produces exactly
/// the rows of build_knn_exact, including tie-breaks.
inline SubgraphSet build_knn_grid(const Instance& inst, std::size_t k1) {
    const std::size_t n = inst.size();
    detail::check_k1(n, k1);
    const auto side = static_cast<std::size_t>(std::max(1.0, std::ceil(std::sqrt(static_cast<double>(n) / 2.0))));
    const double cell = 1.0 / static_cast<double>(side);
    auto cell_of = [&](double v) {
        return std::min(side - 1, static_cast<std::size_t>(std::max(0.0, v) / cell));
    };

    std::vector<std::uint32_t> start(side * side + 1, 0), items(n);
    for (std::size_t i = 0; i < n; ++i) ++start[cell_of(inst[i].b) * side + cell_of(inst[i].a) + 1];
    for (std::size_t c = 0; c < side * side; ++c) start[c + 1] += start[c];
    {
        std::vector<std::uint32_t> fill(start.begin(), start.end() - 1);
        for (std::size_t i = 0; i < n; ++i) items[fill[cell_of(inst[i].b) * side + cell_of(inst[i].a)]++] = static_cast<std::uint32_t>(i);
    }

    auto table = std::make_shared<NeighborTable>(NeighborTable{n, k1, std::vector<std::uint32_t>(n * k1)});
    std::vector<double> raw(n * k1);
    std::vector<detail::DistIdx> cand;
    const std::size_t need = k1 - 1;
    const auto iside = static_cast<std::ptrdiff_t>(side);
    for (std::size_t i = 0; i < n; ++i) {
        cand.clear();
        const auto ca = static_cast<std::ptrdiff_t>(cell_of(inst[i].a));
        const auto cb = static_cast<std::ptrdiff_t>(cell_of(inst[i].b));
        for (std::ptrdiff_t r = 0;; ++r) {
            for (std::ptrdiff_t y = cb - r; y <= cb + r; ++y) {
                if (y < 0 || y >= iside) continue;
                const bool edge_row = (y == cb - r || y == cb + r);
                for (std::ptrdiff_t x = ca - r; x <= ca + r; x += (edge_row ? 1 : 2 * r)) {
                    if (x >= 0 && x < iside) {
                        const auto c = static_cast<std::size_t>(y * iside + x);
                        for (auto s = start[c]; s < start[c + 1]; ++s) {
                            const auto j = items[s];
                            if (j != i) cand.push_back({inst.dist(i, j), j});
                        }
                    }
                    if (r == 0) break;
                }
            }
            const bool covered = (ca - r <= 0 && cb - r <= 0 && ca + r >= iside - 1 && cb + r >= iside - 1);
            if (covered) break;
            if (cand.size() >= need) {
                if (need == 0) break;
                std::nth_element(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(need - 1), cand.end());
                // Unvisited points are at least r * cell away from node i.
                if (cand[need - 1].d < static_cast<double>(r) * cell) break;
            }
        }
        detail::finish_row(cand, i, k1, table->idx.data() + i * k1, raw.data() + i * k1);
    }
    return SubgraphSet(std::move(table), std::move(raw));
}

inline constexpr std::size_t kExactKnnMaxNodes = 20000;

/// Rows of the k1 nearest nodes including the node itself (distances only).
inline SubgraphSet build_knn(const Instance& inst, std::size_t k1) {
    return inst.size() <= kExactKnnMaxNodes ? build_knn_exact(inst, k1) : build_knn_grid(inst, k1);
}

/// Default subgraph size min(50, n).
inline std::size_t default_k1(std::size_t n) noexcept { return std::min<std::size_t>(50, n); }

/// Populates mu and rescaled distances. A subgraph whose points all coincide
/// gets mu = 1.
inline SubgraphSet rescale(SubgraphSet sub, const Instance& inst) {
    const std::size_t n = sub.size(), k = sub.k1();
    if (inst.size() != n) throw ContractError("rescale: instance size differs from subgraph set");
    sub.mu_.assign(n, 1.0);
    sub.scaled_.assign(n * k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = sub.neighbors(i);
        double amin = inst[row[0]].a, amax = amin, bmin = inst[row[0]].b, bmax = bmin;
        for (auto j : row) {
            amin = std::min(amin, inst[j].a);
            amax = std::max(amax, inst[j].a);
            bmin = std::min(bmin, inst[j].b);
            bmax = std::max(bmax, inst[j].b);
        }
        const double extent = std::max(amax - amin, bmax - bmin);
        const double mu = extent > 0.0 ? 1.0 / extent : 1.0;
        sub.mu_[i] = mu;
        for (std::size_t s = 0; s < k; ++s) sub.scaled_[i * k + s] = sub.raw_[i * k + s] * mu;
    }
    return sub;
}

/// build_knn followed by rescale.
inline SubgraphSet build_subgraphs(const Instance& inst, std::size_t k1) {
    return rescale(build_knn(inst, k1), inst);
}

/// Coordinates of node i's subgraph after projection onto the unit square:
/// translated by the subgraph's bounding-box minimum and multiplied by mu_i.
inline std::vector<Point> project_coords(const SubgraphSet& sub, const Instance& inst, std::size_t i) {
    if (!sub.rescaled()) throw ContractError("project_coords requires a rescaled subgraph set");
    const auto row = sub.neighbors(i);
    double amin = inst[row[0]].a, bmin = inst[row[0]].b;
    for (auto j : row) {
        amin = std::min(amin, inst[j].a);
        bmin = std::min(bmin, inst[j].b);
    }
    const double mu = sub.mu(i);
    std::vector<Point> out;
    out.reserve(row.size());
    for (auto j : row) out.push_back({(inst[j].a - amin) * mu, (inst[j].b - bmin) * mu});
    return out;
}

/// CSV rows (i, j, raw_dist, rescaled_dist, mu_i), 1-based node indices.
inline void write_subgraph_csv(std::ostream& os, const SubgraphSet& sub) {
    if (!sub.rescaled()) throw ContractError("write_subgraph_csv requires a rescaled subgraph set");
    os << "i,j,raw_dist,rescaled_dist,mu_i\n";
    for (std::size_t i = 0; i < sub.size(); ++i) {
        const auto row = sub.neighbors(i);
        const auto raw = sub.raw_dist(i);
        const auto sc = sub.rescaled_dist(i);
        for (std::size_t s = 0; s < sub.k1(); ++s) {
            os << i + 1 << ',' << row[s] + 1 << ',';
            detail::write_real(os, raw[s]) << ',';
            detail::write_real(os, sc[s]) << ',';
            detail::write_real(os, sub.mu(i)) << '\n';
        }
    }
}

}  // namespace rstsp
