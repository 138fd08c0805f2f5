#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "rstsp/errors.hpp"
#include "rstsp/instance.hpp"

namespace rstsp {

inline constexpr std::size_t kHeldKarpMaxNodes = 16;

/// Exact optimum by dynamic programming over subsets (Held-Karp).
/// Node 0 is fixed as the tour start; the returned tour starts at node 0.
inline LabeledInstance held_karp_optimal(const Instance& inst) {
    const std::size_t n = inst.size();
    if (n > kHeldKarpMaxNodes) {
        throw SizeLimitError("held_karp_optimal supports n <= 16, got " + std::to_string(n));
    }
    if (n < 3) {
        std::vector<std::uint32_t> perm(n);
        for (std::size_t i = 0; i < n; ++i) perm[i] = static_cast<std::uint32_t>(i);
        return make_labeled(inst, Tour(std::move(perm)));
    }

    // Subsets over nodes 1..n-1; bit k stands for node k+1.
    const std::size_t m = n - 1;
    const std::size_t full = std::size_t{1} << m;
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> cost(full * m, kInf);
    std::vector<std::uint8_t> parent(full * m, 0xFF);

    std::vector<double> d(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) d[i * n + j] = inst.metric_dist(i, j);

    for (std::size_t k = 0; k < m; ++k) cost[(std::size_t{1} << k) * m + k] = d[k + 1];

    for (std::size_t set = 1; set < full; ++set) {
        for (std::size_t last = 0; last < m; ++last) {
            if (!(set & (std::size_t{1} << last))) continue;
            const double c = cost[set * m + last];
            if (c == kInf) continue;
            for (std::size_t next = 0; next < m; ++next) {
                if (set & (std::size_t{1} << next)) continue;
                const std::size_t nset = set | (std::size_t{1} << next);
                const double nc = c + d[(last + 1) * n + next + 1];
                if (nc < cost[nset * m + next]) {
                    cost[nset * m + next] = nc;
                    parent[nset * m + next] = static_cast<std::uint8_t>(last);
                }
            }
        }
    }

    const std::size_t all = full - 1;
    double best = kInf;
    std::size_t best_last = 0;
    for (std::size_t last = 0; last < m; ++last) {
        const double c = cost[all * m + last] + d[(last + 1) * n];
        if (c < best) {
            best = c;
            best_last = last;
        }
    }

    std::vector<std::uint32_t> perm(n);
    perm[0] = 0;
    std::size_t set = all, last = best_last;
    for (std::size_t pos = n - 1; pos >= 1; --pos) {
        perm[pos] = static_cast<std::uint32_t>(last + 1);
        const std::size_t prev = parent[set * m + last];
        set &= ~(std::size_t{1} << last);
        last = prev;
    }
    return make_labeled(inst, Tour(std::move(perm)));
}

}  // namespace rstsp
