#pragma once

// Reconstruction-Based Search.
//
// A greedy tour built from candidate lists is improved by candidate-restricted
// 2-Opt. The search then repeats: open the tour at a random split node, apply
// a few Lin-Kernighan style reconstruction actions whose targets are drawn with
// probability proportional to learned edge weights Q, close the path, run 2-Opt
// again and keep the result if it beats the best tour. Every improving 2-Opt
// swap raises Q on the two edges it creates by exp(-L_new / L_pre).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rstsp/errors.hpp"
#include "rstsp/heatmap.hpp"
#include "rstsp/instance.hpp"
#include "rstsp/rng.hpp"
#include "rstsp/subgraph.hpp"

namespace rstsp {

// ---------------------------------------------------------------------------
// Candidates

struct CandidateSets {
    std::size_t n = 0;
    std::size_t k2 = 0;
    std::vector<std::uint32_t> cand;

    [[nodiscard]] std::span<const std::uint32_t> row(std::size_t i) const noexcept {
        return {cand.data() + i * k2, k2};
    }
    friend bool operator==(const CandidateSets&, const CandidateSets&) = default;
};

namespace detail {

inline void check_k2(std::size_t n, std::size_t k2) {
    if (k2 == 0 || k2 >= n) {
        throw ArgumentError("k2 must lie in [1, n-1]; got k2=" + std::to_string(k2) + ", n=" + std::to_string(n));
    }
}

}  // namespace detail

/// Top-k2 hottest neighbors per node. Ties go to the nearer node, then the
/// lower index.
inline CandidateSets init_candidates(const Heatmap& hm, const Instance& inst, std::size_t k2) {
    const std::size_t n = hm.size();
    if (inst.size() != n) throw ContractError("init_candidates: heatmap and instance sizes differ");
    detail::check_k2(n, k2);
    if (k2 > hm.k1() - 1) {
        throw ArgumentError("k2=" + std::to_string(k2) + " exceeds the heatmap's " + std::to_string(hm.k1() - 1) + " neighbors");
    }
    CandidateSets cs{n, k2, std::vector<std::uint32_t>(n * k2)};
    std::vector<std::size_t> slots;
    for (std::size_t i = 0; i < n; ++i) {
        const auto nb = hm.neighbors(i);
        const auto heat = hm.row(i);
        slots.resize(hm.k1() - 1);
        std::iota(slots.begin(), slots.end(), std::size_t{1});
        std::partial_sort(slots.begin(), slots.begin() + static_cast<std::ptrdiff_t>(k2), slots.end(),
                          [&](std::size_t x, std::size_t y) {
                              if (heat[x] != heat[y]) return heat[x] > heat[y];
                              const double dx = inst.dist(i, nb[x]), dy = inst.dist(i, nb[y]);
                              if (dx != dy) return dx < dy;
                              return nb[x] < nb[y];
                          });
        for (std::size_t s = 0; s < k2; ++s) cs.cand[i * k2 + s] = nb[slots[s]];
    }
    return cs;
}

/// Nearest k2 nodes per node (self excluded), ascending distance.
inline CandidateSets init_candidates_knn(const SubgraphSet& sub, std::size_t k2) {
    const std::size_t n = sub.size();
    detail::check_k2(n, k2);
    if (k2 > sub.k1() - 1) throw ArgumentError("k2 exceeds the subgraph size");
    CandidateSets cs{n, k2, std::vector<std::uint32_t>(n * k2)};
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = sub.neighbors(i);
        std::copy_n(row.begin() + 1, k2, cs.cand.begin() + static_cast<std::ptrdiff_t>(i * k2));
    }
    return cs;
}

inline CandidateSets init_candidates_knn(const Instance& inst, std::size_t k2) {
    detail::check_k2(inst.size(), k2);
    return init_candidates_knn(build_knn(inst, k2 + 1), k2);
}

// ---------------------------------------------------------------------------
// Edge weights

/// Symmetric nonnegative edge weights, default 0. Dense for small n, hashed
/// otherwise.
class EdgeWeightStore {
public:
    static constexpr std::size_t kDenseMaxNodes = 1024;

    explicit EdgeWeightStore(std::size_t n = 0) : n_(n) {
        if (n_ <= kDenseMaxNodes) dense_.assign(n_ * n_, 0.0);
    }

    [[nodiscard]] std::size_t size() const noexcept { return n_; }

    [[nodiscard]] double get(std::uint32_t i, std::uint32_t j) const {
        if (!dense_.empty()) return dense_[static_cast<std::size_t>(i) * n_ + j];
        const auto it = sparse_.find(key(i, j));
        return it == sparse_.end() ? 0.0 : it->second;
    }

    void add(std::uint32_t i, std::uint32_t j, double v) {
        if (v < 0.0) throw ContractError("edge weights only grow");
        if (v == 0.0) return;
        if (!dense_.empty()) {
            if (dense_[static_cast<std::size_t>(i) * n_ + j] == 0.0) ++nonzero_;
            dense_[static_cast<std::size_t>(i) * n_ + j] += v;
            dense_[static_cast<std::size_t>(j) * n_ + i] += v;
            return;
        }
        auto& slot = sparse_[key(i, j)];
        if (slot == 0.0) ++nonzero_;
        slot += v;
    }

    /// Number of unordered pairs with positive weight.
    [[nodiscard]] std::size_t nonzero() const noexcept { return nonzero_; }

    /// Positive entries as (i, j, weight) with i < j, sorted.
    [[nodiscard]] std::vector<std::tuple<std::uint32_t, std::uint32_t, double>> entries() const {
        std::vector<std::tuple<std::uint32_t, std::uint32_t, double>> out;
        if (!dense_.empty()) {
            for (std::size_t i = 0; i < n_; ++i)
                for (std::size_t j = i + 1; j < n_; ++j)
                    if (dense_[i * n_ + j] > 0.0)
                        out.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), dense_[i * n_ + j]);
        } else {
            for (const auto& [k, v] : sparse_) {
                out.emplace_back(static_cast<std::uint32_t>(k >> 32), static_cast<std::uint32_t>(k & 0xFFFFFFFFu), v);
            }
            std::sort(out.begin(), out.end());
        }
        return out;
    }

private:
    static std::uint64_t key(std::uint32_t i, std::uint32_t j) noexcept {
        if (i > j) std::swap(i, j);
        return (static_cast<std::uint64_t>(i) << 32) | j;
    }

    std::size_t n_;
    std::size_t nonzero_ = 0;
    std::vector<double> dense_;
    std::unordered_map<std::uint64_t, double> sparse_;
};

// ---------------------------------------------------------------------------
// Configuration

enum class CandidateMode { Heatmap, Knn };
enum class AcceptMode { Improving, Always };

/// Search budget: wall-clock seconds (optionally per node) or outer iterations.
struct Budget {
    enum class Kind { WallClock, Iterations };
    Kind kind = Kind::WallClock;
    double seconds = 0.05;
    bool per_node = true;
    std::uint64_t iterations = 0;

    static Budget wall(double seconds, bool per_node = false) {
        if (!(seconds > 0.0)) throw ArgumentError("wall-clock budget must be positive");
        return {Kind::WallClock, seconds, per_node, 0};
    }
    static Budget iters(std::uint64_t count) {
        if (count == 0) throw ArgumentError("iteration budget must be positive");
        return {Kind::Iterations, 0.0, false, count};
    }

    /// Parses `wall:<seconds>`, `wall:<factor>n` or `iters:<count>`.
    static Budget parse(const std::string& spec) {
        const auto colon = spec.find(':');
        if (colon == std::string::npos) throw ArgumentError("budget must look like wall:0.05n or iters:N, got '" + spec + "'");
        const std::string kind = spec.substr(0, colon);
        std::string value = spec.substr(colon + 1);
        if (kind == "iters") {
            std::size_t used = 0;
            long long v = 0;
            try {
                v = std::stoll(value, &used);
            } catch (const std::exception&) {
                throw ArgumentError("bad iteration budget '" + value + "'");
            }
            if (used != value.size() || v <= 0) throw ArgumentError("iteration budget must be a positive integer, got '" + value + "'");
            return iters(static_cast<std::uint64_t>(v));
        }
        if (kind == "wall") {
            bool per_node = false;
            if (!value.empty() && value.back() == 'n') {
                per_node = true;
                value.pop_back();
            }
            double v = 0.0;
            if (!detail::parse_double(value, v)) throw ArgumentError("bad wall-clock budget '" + spec + "'");
            return wall(v, per_node);
        }
        throw ArgumentError("unknown budget kind '" + kind + "'");
    }

    [[nodiscard]] double seconds_for(std::size_t n) const noexcept {
        return per_node ? seconds * static_cast<double>(n) : seconds;
    }
};

struct SolveConfig {
    std::size_t k2 = 5;
    CandidateMode candidate_mode = CandidateMode::Heatmap;
    AcceptMode accept = AcceptMode::Improving;
    Budget budget{};
    std::size_t m_lo = 10;
    std::optional<std::size_t> m_hi;  // default min(40, n)
    double epsilon = 1e-6;
    bool init_all_candidates = false;
    bool edge_enhancement = true;
    bool check_invariants = false;
    std::uint64_t seed = 0;
};

/// Upper (exclusive) bound of the action-count range for an n-node instance.
inline std::size_t default_m_hi(std::size_t n) noexcept { return std::min<std::size_t>(40, n); }

// ---------------------------------------------------------------------------
// Search state

/// Pairwise distances on normalized coordinates, cached as a matrix for small n.
class DistanceOracle {
public:
    static constexpr std::size_t kMatrixMaxNodes = 1024;

    explicit DistanceOracle(const Instance& inst) : inst_(&inst), n_(inst.size()) {
        if (n_ <= kMatrixMaxNodes) {
            m_.resize(n_ * n_);
            for (std::size_t i = 0; i < n_; ++i)
                for (std::size_t j = 0; j < n_; ++j) m_[i * n_ + j] = inst.dist(i, j);
        }
    }
    double operator()(std::uint32_t i, std::uint32_t j) const noexcept {
        return m_.empty() ? inst_->dist(i, j) : m_[static_cast<std::size_t>(i) * n_ + j];
    }

private:
    const Instance* inst_;
    std::size_t n_;
    std::vector<double> m_;
};

struct TracePoint {
    double time_ms;
    std::uint64_t iteration;
    double best_length;
};

struct RunStats {
    std::uint64_t iterations = 0;
    std::uint64_t improving_swaps = 0;
    std::uint64_t accepted = 0;
    std::uint64_t reconstruction_actions = 0;
    std::uint64_t greedy_fallbacks = 0;
    double initial_length = 0.0;
    double q_density = 0.0;
    double wall_ms = 0.0;
    std::vector<TracePoint> trace;
};

/// Everything one search run mutates. Confined to a single thread.
struct SearchState {
    SearchState(const Instance& instance, CandidateSets candidates, SolveConfig config)
        : inst(&instance),
          dist(instance),
          cand(std::move(candidates)),
          q(instance.size()),
          rng(config.seed),
          cfg(std::move(config)),
          tried(instance.size(), 0) {
        if (cand.n != instance.size()) throw ContractError("candidate sets do not match instance");
    }

    const Instance* inst;
    DistanceOracle dist;
    CandidateSets cand;
    std::optional<CandidateSets> init_cand;  // greedy construction only
    EdgeWeightStore q;
    Rng rng;
    SolveConfig cfg;

    std::vector<std::uint32_t> tour;
    double length = 0.0;
    std::vector<std::uint32_t> best;
    double best_length = std::numeric_limits<double>::infinity();
    RunStats stats;

    // scratch for reconstruction: tried[v] == tried_stamp marks v as tried
    std::vector<std::uint32_t> tried;
    std::uint32_t tried_stamp = 0;

    [[nodiscard]] std::size_t size() const noexcept { return inst->size(); }
    [[nodiscard]] std::size_t m_hi() const noexcept { return cfg.m_hi.value_or(default_m_hi(size())); }

    [[nodiscard]] double length_of(std::span<const std::uint32_t> perm) const noexcept {
        const std::size_t n = perm.size();
        double len = dist(perm[n - 1], perm[0]);
        for (std::size_t k = 0; k + 1 < n; ++k) len += dist(perm[k], perm[k + 1]);
        return len;
    }

    void set_tour(std::vector<std::uint32_t> perm) {
        if (perm.size() != size() || !Tour::is_permutation(perm)) throw ContractError("set_tour: not a permutation");
        tour = std::move(perm);
        length = length_of(tour);
    }
};

// ---------------------------------------------------------------------------
// State initialization

/// Appends the hottest untraversed candidate of the current node until the
/// tour is complete. When every candidate is traversed, the nearest untraversed
/// node (lowest index on ties) is taken instead.
inline std::vector<std::uint32_t> greedy_init_from(SearchState& st, std::uint32_t start) {
    const std::size_t n = st.size();
    if (start >= n) throw ContractError("greedy start node out of range");
    const CandidateSets& cs = st.init_cand ? *st.init_cand : st.cand;
    std::vector<char> used(n, 0);
    std::vector<std::uint32_t> perm;
    perm.reserve(n);
    auto cur = start;
    perm.push_back(cur);
    used[cur] = 1;
    while (perm.size() < n) {
        std::uint32_t next = static_cast<std::uint32_t>(n);
        for (auto c : cs.row(cur)) {
            if (!used[c]) {
                next = c;
                break;
            }
        }
        if (next == n) {
            ++st.stats.greedy_fallbacks;
            double bd = std::numeric_limits<double>::infinity();
            for (std::uint32_t v = 0; v < n; ++v) {
                if (used[v]) continue;
                const double d = st.dist(cur, v);
                if (d < bd) {
                    bd = d;
                    next = v;
                }
            }
        }
        perm.push_back(next);
        used[next] = 1;
        cur = next;
    }
    return perm;
}

/// greedy_init_from a uniformly drawn start node.
inline std::vector<std::uint32_t> greedy_init(SearchState& st) {
    return greedy_init_from(st, static_cast<std::uint32_t>(st.rng.below(st.size())));
}

// ---------------------------------------------------------------------------
// 2-Opt with edge enhancement

struct SwapEvent {
    std::uint32_t i1, j1, i2, j2;  // removed (i1,j1),(i2,j2); added (i1,j2),(i2,j1)
    double length_before;
    double length_after;
    double increment;
};

using SwapObserver = std::function<void(const SwapEvent&)>;

/// Weight added to both created edges of an improving swap.
inline double enhancement_increment(double length_after, double length_before) noexcept {
    return std::exp(-length_after / length_before);
}

namespace detail {

/// Reverses the cyclic position range [i, j] (or its complement, whichever is
/// shorter; both give the same cycle).
inline void reverse_cyclic(std::vector<std::uint32_t>& perm, std::vector<std::uint32_t>& pos, std::size_t i, std::size_t j) {
    const std::size_t n = perm.size();
    std::size_t len = (j + n - i) % n + 1;
    if (2 * len > n) {
        const std::size_t ni = (j + 1) % n, nj = (i + n - 1) % n;
        i = ni;
        j = nj;
        len = n - len;
    }
    for (std::size_t s = 0; s < len / 2; ++s) {
        std::swap(perm[i], perm[j]);
        pos[perm[i]] = static_cast<std::uint32_t>(i);
        pos[perm[j]] = static_cast<std::uint32_t>(j);
        i = (i + 1) % n;
        j = (j + n - 1) % n;
    }
}

inline constexpr double kImproveTol = 1e-12;

}  // namespace detail

/// Candidate-restricted first-improvement 2-Opt to a local optimum. Returns
/// the new tour length (normalized coordinates). Each improving swap adds
/// exp(-L_new / L_pre) to Q on both created edges when enhancement is on.
inline double two_opt_enhance(std::vector<std::uint32_t>& perm, SearchState& st, const SwapObserver& observer = {}) {
    const std::size_t n = perm.size();
    if (n < 4) return st.length_of(perm);
    std::vector<std::uint32_t> pos(n);
    for (std::size_t k = 0; k < n; ++k) pos[perm[k]] = static_cast<std::uint32_t>(k);
    double len = st.length_of(perm);
    const auto& D = st.dist;

    auto apply = [&](std::uint32_t a, std::uint32_t b, std::uint32_t c, std::uint32_t d, double delta, std::size_t from,
                     std::size_t to) {
        detail::reverse_cyclic(perm, pos, from, to);
        const double before = len;
        len += delta;
        ++st.stats.improving_swaps;
        double inc = 0.0;
        if (st.cfg.edge_enhancement) {
            inc = enhancement_increment(len, before);
            st.q.add(a, c, inc);
            st.q.add(b, d, inc);
        }
        if (observer) observer({a, b, d, c, before, len, inc});
    };

    bool improved = true;
    while (improved) {
        improved = false;
        for (std::size_t p = 0; p < n; ++p) {
            bool again = true;
            while (again) {
                again = false;
                const std::uint32_t a = perm[p];
                const std::uint32_t an = perm[(pos[a] + 1) % n];
                const std::uint32_t ap = perm[(pos[a] + n - 1) % n];
                for (auto c : st.cand.row(a)) {
                    // successor direction: (a,an),(c,cn) -> (a,c),(an,cn)
                    const std::uint32_t cn = perm[(pos[c] + 1) % n];
                    if (c != an && cn != a) {
                        const double delta = D(a, c) + D(an, cn) - D(a, an) - D(c, cn);
                        if (delta < -detail::kImproveTol) {
                            apply(a, an, c, cn, delta, pos[an], pos[c]);
                            again = improved = true;
                            break;
                        }
                    }
                    // predecessor direction: (ap,a),(cp,c) -> (a,c),(ap,cp)
                    const std::uint32_t cp = perm[(pos[c] + n - 1) % n];
                    if (c != ap && cp != a) {
                        const double delta = D(a, c) + D(ap, cp) - D(a, ap) - D(c, cp);
                        if (delta < -detail::kImproveTol) {
                            apply(a, ap, c, cp, delta, pos[a], pos[cp]);
                            again = improved = true;
                            break;
                        }
                    }
                }
            }
        }
    }
    return st.length_of(perm);
}

// ---------------------------------------------------------------------------
// Reconstruction

/// Hamiltonian path with the current start node at position 0.
struct AcyclicPath {
    std::vector<std::uint32_t> seq;
    std::vector<std::uint32_t> pos;
    double length = 0.0;  // sum of path edges, closing edge excluded

    [[nodiscard]] double closed_length(const DistanceOracle& d) const noexcept {
        return length + d(seq.front(), seq.back());
    }
};

/// Opens the current tour at a uniformly drawn split node s. With u < v the
/// two tour neighbors of s, edge s-v is removed when Q(s,u) >= Q(s,v),
/// otherwise s-u. The path starts at s and ends at the removed neighbor.
inline AcyclicPath split_at(const SearchState& st, std::uint32_t s) {
    const auto& perm = st.tour;
    const std::size_t n = perm.size();
    std::size_t ps = 0;
    while (perm[ps] != s) ++ps;
    const std::uint32_t succ = perm[(ps + 1) % n], pred = perm[(ps + n - 1) % n];
    const std::uint32_t lo = std::min(succ, pred), hi = std::max(succ, pred);
    const std::uint32_t removed = st.q.get(s, lo) >= st.q.get(s, hi) ? hi : lo;

    AcyclicPath path;
    path.seq.resize(n);
    path.pos.resize(n);
    const bool backward = (removed == succ);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t at = backward ? (ps + n - k) % n : (ps + k) % n;
        path.seq[k] = perm[at];
        path.pos[perm[at]] = static_cast<std::uint32_t>(k);
    }
    path.length = st.length - st.dist(s, removed);
    return path;
}

inline AcyclicPath split(SearchState& st) {
    const auto s = static_cast<std::uint32_t>(st.rng.below(st.size()));
    return split_at(st, s);
}

/// Adds edge start-target, removes the target's start-side path edge and
/// reverses the prefix in between. The displaced node becomes the new start.
inline void apply_reconstruction(AcyclicPath& path, std::uint32_t target, const DistanceOracle& d) {
    const std::size_t p = path.pos[target];
    if (p < 2) throw ContractError("reconstruction target must not be the start node or its path neighbor");
    path.length += d(path.seq[0], target) - d(path.seq[p - 1], target);
    std::reverse(path.seq.begin(), path.seq.begin() + static_cast<std::ptrdiff_t>(p));
    for (std::size_t k = 0; k < p; ++k) path.pos[path.seq[k]] = static_cast<std::uint32_t>(k);
}

/// Starts a new reconstruction process: forgets previously tried targets.
inline void reset_tried(SearchState& st) {
    if (++st.tried_stamp == 0) {
        std::fill(st.tried.begin(), st.tried.end(), 0);
        st.tried_stamp = 1;
    }
}

struct ActionResult {
    bool applied = false;  // false: no eligible target (exhaustion)
    std::uint32_t target = 0;
    bool improved = false;  // closed path beats `pre_length`
};

/// One reconstruction action from path.seq[0]. The target is drawn from the
/// start's candidates, excluding its path neighbor and targets already tried in
/// this process, with probability proportional to Q(start, j) + epsilon.
inline ActionResult reconstruction_action(AcyclicPath& path, SearchState& st, double pre_length) {
    const std::uint32_t s = path.seq[0];
    const auto row = st.cand.row(s);
    double total = 0.0;
    double w[64];
    std::uint32_t elig[64];
    std::size_t m = 0;
    std::vector<double> wv;
    std::vector<std::uint32_t> ev;
    const bool small = row.size() <= 64;
    if (!small) {
        wv.reserve(row.size());
        ev.reserve(row.size());
    }
    for (auto c : row) {
        if (path.pos[c] <= 1 || st.tried[c] == st.tried_stamp) continue;
        const double wt = st.q.get(s, c) + st.cfg.epsilon;
        total += wt;
        if (small) {
            w[m] = wt;
            elig[m] = c;
        } else {
            wv.push_back(wt);
            ev.push_back(c);
        }
        ++m;
    }
    if (m == 0) return {};
    const double* wp = small ? w : wv.data();
    const std::uint32_t* ep = small ? elig : ev.data();
    double u = st.rng.uniform() * total;
    std::size_t pick = m - 1;
    for (std::size_t t = 0; t < m; ++t) {
        if (u < wp[t]) {
            pick = t;
            break;
        }
        u -= wp[t];
    }
    const std::uint32_t target = ep[pick];
    st.tried[target] = st.tried_stamp;
    apply_reconstruction(path, target, st.dist);
    ++st.stats.reconstruction_actions;
    return {true, target, path.closed_length(st.dist) < pre_length - detail::kImproveTol};
}

enum class StopReason { Improved, Exhausted, MaxActions };

struct ProcessResult {
    std::vector<std::uint32_t> perm;
    double length = 0.0;
    std::size_t actions = 0;
    std::size_t max_actions = 0;
    StopReason reason = StopReason::MaxActions;
};

/// Split, then reconstruction actions until the closed path beats the current
/// tour, no eligible target remains, or `max_actions` actions were applied.
inline ProcessResult reconstruction_process(SearchState& st, std::size_t max_actions) {
    const double pre = st.length;
    reset_tried(st);
    AcyclicPath path = split(st);
    ProcessResult res;
    res.max_actions = max_actions;
    while (true) {
        if (res.actions >= max_actions) {
            res.reason = StopReason::MaxActions;
            break;
        }
        const auto act = reconstruction_action(path, st, pre);
        if (!act.applied) {
            res.reason = StopReason::Exhausted;
            break;
        }
        ++res.actions;
        if (act.improved) {
            res.reason = StopReason::Improved;
            break;
        }
    }
    res.length = path.closed_length(st.dist);
    res.perm = std::move(path.seq);
    return res;
}

/// As above with M drawn uniformly from [m_lo, m_hi); M = m_lo when the range
/// is empty.
inline ProcessResult reconstruction_process(SearchState& st) {
    const std::size_t lo = st.cfg.m_lo, hi = st.m_hi();
    const std::size_t m = hi > lo ? static_cast<std::size_t>(st.rng.range(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi))) : lo;
    return reconstruction_process(st, m);
}

// ---------------------------------------------------------------------------
// Driver

struct SolveResult {
    Tour tour;
    double length = 0.0;             // under the instance metric
    double normalized_length = 0.0;  // on normalized coordinates
    RunStats stats;
};

/// Builds the search state for `inst`: candidate sets per the configured mode
/// and, with init_all_candidates, wide candidate lists for greedy construction.
inline SearchState make_search_state(const Instance& inst, const Heatmap* heatmap, const SolveConfig& cfg) {
    const std::size_t n = inst.size();
    if (n < 3) throw ArgumentError("solve needs at least 3 nodes");
    if (cfg.m_lo == 0) throw ArgumentError("m_lo must be positive");
    if (!(cfg.epsilon > 0.0)) throw ArgumentError("epsilon must be positive");
    CandidateSets cand;
    std::optional<CandidateSets> wide;
    if (cfg.candidate_mode == CandidateMode::Heatmap) {
        if (!heatmap) throw ArgumentError("heatmap candidate mode needs a heatmap");
        if (heatmap->size() != n) throw ContractError("heatmap and instance sizes differ");
        cand = init_candidates(*heatmap, inst, cfg.k2);
        if (cfg.init_all_candidates) wide = init_candidates(*heatmap, inst, heatmap->k1() - 1);
    } else {
        detail::check_k2(n, cfg.k2);
        const std::size_t kw = cfg.init_all_candidates ? std::max(cfg.k2, default_k1(n) - 1) : cfg.k2;
        const auto sub = build_knn(inst, std::min(n, kw + 1));
        cand = init_candidates_knn(sub, cfg.k2);
        if (cfg.init_all_candidates) wide = init_candidates_knn(sub, std::min(n - 1, kw));
    }
    SearchState st(inst, std::move(cand), cfg);
    st.init_cand = std::move(wide);
    return st;
}

namespace detail {

inline void check_perm(std::span<const std::uint32_t> perm, const char* where) {
    if (!Tour::is_permutation(perm)) throw ContractError(std::string("invalid tour after ") + where);
}

}  // namespace detail

/// Greedy construction and one candidate 2-Opt pass (no reconstruction).
inline SolveResult greedy_two_opt(const Instance& inst, const Heatmap* heatmap, const SolveConfig& cfg) {
    SearchState st = make_search_state(inst, heatmap, cfg);
    auto perm = greedy_init(st);
    st.length = two_opt_enhance(perm, st);
    SolveResult r;
    r.normalized_length = st.length;
    r.tour = Tour(std::move(perm));
    r.length = tour_length(inst, r.tour);
    r.stats = st.stats;
    return r;
}

/// Full search loop on an existing state until the budget is spent.
inline SolveResult run_search(SearchState& st) {
    using Clock = std::chrono::steady_clock;
    const auto t0 = Clock::now();
    const auto elapsed_ms = [&] { return std::chrono::duration<double, std::milli>(Clock::now() - t0).count(); };
    const Budget& budget = st.cfg.budget;
    const double limit_ms = budget.kind == Budget::Kind::WallClock ? 1000.0 * budget.seconds_for(st.size()) : 0.0;
    if (budget.kind == Budget::Kind::WallClock && !(limit_ms > 0.0)) throw ArgumentError("budget must be positive");
    if (budget.kind == Budget::Kind::Iterations && budget.iterations == 0) throw ArgumentError("budget must be positive");

    auto perm = greedy_init(st);
    st.stats.initial_length = st.length_of(perm);
    st.length = two_opt_enhance(perm, st);
    st.tour = std::move(perm);
    st.best = st.tour;
    st.best_length = st.length;
    st.stats.trace.push_back({elapsed_ms(), 0, st.best_length});

    for (std::uint64_t it = 0;; ++it) {
        if (budget.kind == Budget::Kind::Iterations ? it >= budget.iterations : elapsed_ms() >= limit_ms) break;
        auto proc = reconstruction_process(st);
        if (st.cfg.check_invariants) detail::check_perm(proc.perm, "reconstruction");
        double len = two_opt_enhance(proc.perm, st);
        if (st.cfg.check_invariants) detail::check_perm(proc.perm, "2-opt");
        ++st.stats.iterations;
        if (len < st.best_length - detail::kImproveTol) {
            st.best = proc.perm;
            st.best_length = len;
            ++st.stats.accepted;
            st.stats.trace.push_back({elapsed_ms(), it + 1, len});
            st.tour = std::move(proc.perm);
            st.length = len;
        } else if (st.cfg.accept == AcceptMode::Always) {
            st.tour = std::move(proc.perm);
            st.length = len;
        } else {
            st.tour = st.best;
            st.length = st.best_length;
        }
    }

    SolveResult r;
    r.normalized_length = st.best_length;
    r.tour = Tour(st.best);
    r.length = tour_length(*st.inst, r.tour);
    st.stats.wall_ms = elapsed_ms();
    const double n = static_cast<double>(st.size());
    st.stats.q_density = static_cast<double>(st.q.nonzero()) / (n * (n - 1.0) / 2.0);
    r.stats = st.stats;
    return r;
}

/// Greedy init, 2-Opt, then reconstruction + 2-Opt rounds until the budget
/// expires. With an iteration budget the result is a pure function of the
/// inputs and cfg.seed.
inline SolveResult solve(const Instance& inst, const Heatmap* heatmap, const SolveConfig& cfg) {
    SearchState st = make_search_state(inst, heatmap, cfg);
    return run_search(st);
}

}  // namespace rstsp
