#pragma once

// Heatmap quality, tour-ordered heatmaps and run evaluation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "rstsp/errors.hpp"
#include "rstsp/heatmap.hpp"
#include "rstsp/instance.hpp"

namespace rstsp {

// ---------------------------------------------------------------------------
// Heatmap quality

/// Rank of j among i's neighbor heats sorted descending, self excluded. Ties
/// take the best tied rank. A j outside the row ranks k1 + 1.
inline std::size_t heat_rank(const Heatmap& hm, std::size_t i, std::uint32_t j) {
    const auto nb = hm.neighbors(i);
    const auto heat = hm.row(i);
    std::size_t slot = hm.k1();
    for (std::size_t s = 1; s < hm.k1(); ++s) {
        if (nb[s] == j) {
            slot = s;
            break;
        }
    }
    if (slot == hm.k1()) return hm.k1() + 1;
    std::size_t rank = 1;
    for (std::size_t s = 1; s < hm.k1(); ++s) rank += heat[s] > heat[slot] ? 1 : 0;
    return rank;
}

struct RankSummary {
    double best_of_two = 0.0;  // better rank of the two tour neighbors, per node
    double directed = 0.0;     // rank of the successor along the stored tour
};

namespace detail {

inline void check_pair(const Heatmap& hm, const LabeledInstance& li) {
    if (hm.size() != li.instance.size() || li.optimal_tour.size() != hm.size()) {
        throw ContractError("heatmap and labeled instance differ in size");
    }
}

}  // namespace detail

inline RankSummary average_rank(const Heatmap& hm, const LabeledInstance& li) {
    detail::check_pair(hm, li);
    const auto adj = li.optimal_tour.adjacency();
    const std::size_t n = hm.size();
    double best = 0.0, dir = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto rs = heat_rank(hm, i, adj[i][0]);
        const auto rp = heat_rank(hm, i, adj[i][1]);
        best += static_cast<double>(std::min(rs, rp));
        dir += static_cast<double>(rs);
    }
    return {best / static_cast<double>(n), dir / static_cast<double>(n)};
}

struct MissingSummary {
    double undirected = 0.0;  // over all 2n (node, tour neighbor) pairs
    double directed = 0.0;    // over the n (node, successor) pairs
};

/// Share of optimal tour neighbors outside the node's k hottest neighbors.
inline MissingSummary missing_rate(const Heatmap& hm, const LabeledInstance& li, std::size_t k) {
    detail::check_pair(hm, li);
    if (k == 0 || k > hm.k1()) throw ArgumentError("missing_rate: k must lie in [1, k1]");
    const auto adj = li.optimal_tour.adjacency();
    const std::size_t n = hm.size();
    std::size_t miss_s = 0, miss_p = 0;
    for (std::size_t i = 0; i < n; ++i) {
        miss_s += heat_rank(hm, i, adj[i][0]) > k ? 1 : 0;
        miss_p += heat_rank(hm, i, adj[i][1]) > k ? 1 : 0;
    }
    return {static_cast<double>(miss_s + miss_p) / (2.0 * static_cast<double>(n)),
            static_cast<double>(miss_s) / static_cast<double>(n)};
}

/// Share of optimal tour neighbors that appear in the node's subgraph.
inline double coverage(const Heatmap& hm, const LabeledInstance& li) {
    detail::check_pair(hm, li);
    const auto adj = li.optimal_tour.adjacency();
    const std::size_t n = hm.size();
    std::size_t in = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (auto j : adj[i]) in += hm.table()->slot(i, j) < hm.k1() ? 1 : 0;
    return static_cast<double>(in) / (2.0 * static_cast<double>(n));
}

struct HeatmapQuality {
    double avg_rank = 0.0;
    double avg_rank_directed = 0.0;
    double missing_rate_topk = 0.0;
    double missing_rate_directed = 0.0;
    std::size_t k = 5;
    double coverage = 0.0;
    std::size_t instances = 0;
};

inline HeatmapQuality heatmap_quality(const Heatmap& hm, const LabeledInstance& li, std::size_t k = 5) {
    const auto r = average_rank(hm, li);
    const auto m = missing_rate(hm, li, k);
    return {r.best_of_two, r.directed, m.undirected, m.directed, k, coverage(hm, li), 1};
}

/// Unweighted mean over instances.
inline HeatmapQuality mean_quality(const std::vector<HeatmapQuality>& qs) {
    HeatmapQuality out;
    if (qs.empty()) return out;
    out.k = qs.front().k;
    for (const auto& q : qs) {
        if (q.k != out.k) throw ContractError("mean_quality: mixed k");
        out.avg_rank += q.avg_rank;
        out.avg_rank_directed += q.avg_rank_directed;
        out.missing_rate_topk += q.missing_rate_topk;
        out.missing_rate_directed += q.missing_rate_directed;
        out.coverage += q.coverage;
    }
    const double c = static_cast<double>(qs.size());
    out.avg_rank /= c;
    out.avg_rank_directed /= c;
    out.missing_rate_topk /= c;
    out.missing_rate_directed /= c;
    out.coverage /= c;
    out.instances = qs.size();
    return out;
}

inline void write_quality_csv(std::ostream& os, const std::vector<std::pair<std::string, HeatmapQuality>>& rows) {
    os << "id,avg_rank,avg_rank_directed,k,missing_rate,missing_rate_directed,coverage\n";
    for (const auto& [id, q] : rows) {
        os << id << ',';
        detail::write_real(os, q.avg_rank) << ',';
        detail::write_real(os, q.avg_rank_directed) << ',' << q.k << ',';
        detail::write_real(os, q.missing_rate_topk) << ',';
        detail::write_real(os, q.missing_rate_directed) << ',';
        detail::write_real(os, q.coverage) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Ordered heatmaps

/// Dense matrix with rows and columns both listed in optimal tour order:
/// out[r][c] = H(pi_r, pi_c). An ideal heatmap becomes a band on the two
/// diagonals next to the main one, plus the corners (r, c) = (0, n-1), (n-1, 0).
inline std::vector<double> ordered_heatmap(const Heatmap& hm, const Tour& tour) {
    const std::size_t n = hm.size();
    if (tour.size() != n) throw ContractError("ordered_heatmap: tour size differs from heatmap");
    std::vector<double> out(n * n, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) out[r * n + c] = hm(tour[r], tour[c]);
    return out;
}

/// Per-node rotation: row i lists H(i, .) along the tour starting at i itself,
/// out[i][j] = H(i, pi[(j + pos(i)) mod n]) for 0-based j. Column 0 is the
/// self entry; an ideal heatmap lands in columns 1 and n-1.
inline std::vector<double> rotated_heatmap(const Heatmap& hm, const Tour& tour) {
    const std::size_t n = hm.size();
    if (tour.size() != n) throw ContractError("rotated_heatmap: tour size differs from heatmap");
    std::vector<std::size_t> pos(n);
    for (std::size_t k = 0; k < n; ++k) pos[tour[k]] = k;
    std::vector<double> out(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = hm(i, tour[(j + pos[i]) % n]);
    return out;
}

inline void write_matrix_csv(std::ostream& os, const std::vector<double>& m, std::size_t n) {
    if (m.size() != n * n) throw ContractError("matrix is not n x n");
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            if (c) os << ',';
            detail::write_real(os, m[r * n + c]);
        }
        os << '\n';
    }
}

/// Binary 8-bit PGM, values in [0,1] mapped linearly to 0..255 (white = 1).
inline void write_pgm(std::ostream& os, const std::vector<double>& m, std::size_t n) {
    if (m.size() != n * n) throw ContractError("matrix is not n x n");
    os << "P5\n" << n << ' ' << n << "\n255\n";
    std::string px(n * n, '\0');
    for (std::size_t k = 0; k < m.size(); ++k) {
        const double v = std::clamp(m[k], 0.0, 1.0);
        px[k] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
    }
    os.write(px.data(), static_cast<std::streamsize>(px.size()));
}

// ---------------------------------------------------------------------------
// Run evaluation

struct RunRecord {
    std::string id;
    std::size_t n = 0;
    double length = 0.0;
    std::uint64_t iterations = 0;
    double wall_ms = 0.0;
    std::uint64_t seed = 0;
    std::string candidate_mode;
};

enum class Aggregation {
    MeanOverSeeds,  // uniform test sets, grouped by n
    BestOverSeeds   // TSPLIB, grouped by size bins
};

struct ReportRow {
    std::string group;
    std::size_t instances = 0;
    std::size_t runs = 0;
    double mean_length = 0.0;
    std::optional<double> mean_gap;  // absent when no instance in the group has an optimum
    std::size_t missing_optima = 0;
    double total_wall_ms = 0.0;
};

struct Report {
    Aggregation aggregation = Aggregation::MeanOverSeeds;
    std::vector<ReportRow> rows;
    std::vector<std::string> missing_optimum_ids;
};

/// Size bin label for TSPLIB-style reports.
inline std::string size_bin(std::size_t n) {
    if (n < 100) return "<100";
    if (n < 200) return "[100,200)";
    if (n < 500) return "[200,500)";
    if (n < 1000) return "[500,1K)";
    return ">=1K";
}

/// Groups run records by instance, reduces over seeds (mean length and mean gap,
/// or the best length), then averages per group. TSPLIB reports end with an
/// "All" row.
inline Report evaluate_run(const std::vector<RunRecord>& runs, const std::map<std::string, double>& optima, Aggregation agg) {
    struct PerInstance {
        std::size_t n = 0;
        std::vector<double> lengths;
        double wall = 0.0;
    };
    std::map<std::string, PerInstance> by_id;
    for (const auto& r : runs) {
        if (!std::isfinite(r.length) || r.length < 0.0) throw NumericError("run '" + r.id + "' has an invalid length");
        auto& p = by_id[r.id];
        if (!p.lengths.empty() && p.n != r.n) throw FormatError("instance '" + r.id + "' appears with different sizes");
        p.n = r.n;
        p.lengths.push_back(r.length);
        p.wall += r.wall_ms;
    }

    struct Acc {
        std::size_t instances = 0, runs = 0, with_opt = 0, missing = 0;
        double len = 0.0, gap = 0.0, wall = 0.0;
    };
    std::map<std::string, Acc> groups;
    std::map<std::size_t, std::string> order;  // numeric ordering of group labels
    Acc all;
    Report rep;
    rep.aggregation = agg;

    for (const auto& [id, p] : by_id) {
        const auto opt = optima.find(id);
        double len = 0.0;
        std::optional<double> gap;
        if (agg == Aggregation::MeanOverSeeds) {
            double g = 0.0;
            for (double l : p.lengths) {
                len += l;
                if (opt != optima.end()) g += optimality_gap(l, opt->second);
            }
            len /= static_cast<double>(p.lengths.size());
            if (opt != optima.end()) gap = g / static_cast<double>(p.lengths.size());
        } else {
            len = *std::min_element(p.lengths.begin(), p.lengths.end());
            if (opt != optima.end()) gap = optimality_gap(len, opt->second);
        }
        if (!gap) rep.missing_optimum_ids.push_back(id);

        const std::string label = agg == Aggregation::MeanOverSeeds ? std::to_string(p.n) : size_bin(p.n);
        const std::size_t key = agg == Aggregation::MeanOverSeeds ? p.n
                                : p.n < 100 ? 0 : p.n < 200 ? 1 : p.n < 500 ? 2 : p.n < 1000 ? 3 : 4;
        order[key] = label;
        for (Acc* a : {&groups[label], &all}) {
            ++a->instances;
            a->runs += p.lengths.size();
            a->len += len;
            a->wall += p.wall;
            if (gap) {
                ++a->with_opt;
                a->gap += *gap;
            } else {
                ++a->missing;
            }
        }
    }

    auto row = [](const std::string& label, const Acc& a) {
        ReportRow r;
        r.group = label;
        r.instances = a.instances;
        r.runs = a.runs;
        r.mean_length = a.instances ? a.len / static_cast<double>(a.instances) : 0.0;
        if (a.with_opt) r.mean_gap = a.gap / static_cast<double>(a.with_opt);
        r.missing_optima = a.missing;
        r.total_wall_ms = a.wall;
        return r;
    };
    for (const auto& [key, label] : order) rep.rows.push_back(row(label, groups[label]));
    if (agg == Aggregation::BestOverSeeds && all.instances) rep.rows.push_back(row("All", all));
    return rep;
}

inline void write_report_csv(std::ostream& os, const Report& rep) {
    os << "group,instances,runs,mean_length,mean_gap,missing_optima,total_wall_ms\n";
    for (const auto& r : rep.rows) {
        os << r.group << ',' << r.instances << ',' << r.runs << ',';
        detail::write_real(os, r.mean_length) << ',';
        if (r.mean_gap) detail::write_real(os, *r.mean_gap);
        os << ',' << r.missing_optima << ',';
        detail::write_real(os, r.total_wall_ms) << '\n';
    }
}

}  // namespace rstsp
