#pragma once

// JSON and CSV files shared by the command-line tool and the tests: run
// results, convergence traces, optimum tables and evaluation reports.

#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rstsp/errors.hpp"
#include "rstsp/metrics.hpp"
#include "rstsp/rbs.hpp"

namespace rstsp {

inline const char* to_string(CandidateMode m) { return m == CandidateMode::Heatmap ? "heatmap" : "knn"; }

/// One results-file record. `gap` is written only when the optimum is known.
inline nlohmann::json result_json(const Instance& inst, const SolveResult& r, std::uint64_t seed, CandidateMode mode,
                                  std::optional<double> optimum = std::nullopt) {
    nlohmann::json j;
    j["id"] = inst.id();
    j["n"] = inst.size();
    j["length"] = r.length;
    if (optimum) j["gap"] = optimality_gap(r.length, *optimum);
    j["iterations"] = r.stats.iterations;
    j["wall_ms"] = r.stats.wall_ms;
    j["seed"] = seed;
    j["candidate_mode"] = to_string(mode);
    j["improving_swaps"] = r.stats.improving_swaps;
    j["q_density"] = r.stats.q_density;
    std::vector<std::uint32_t> one_based(r.tour.begin(), r.tour.end());
    for (auto& v : one_based) ++v;
    j["tour"] = one_based;
    return j;
}

/// Reads a results file: a JSON array of records (or a single record).
inline std::vector<RunRecord> read_results_json(std::istream& in) {
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("results file is not valid JSON: ") + e.what());
    }
    if (doc.is_object()) doc = nlohmann::json::array({doc});
    if (!doc.is_array()) throw FormatError("results file must hold a JSON array");
    std::vector<RunRecord> out;
    for (const auto& j : doc) {
        try {
            RunRecord r;
            r.id = j.at("id").get<std::string>();
            r.n = j.at("n").get<std::size_t>();
            r.length = j.at("length").get<double>();
            r.iterations = j.value("iterations", std::uint64_t{0});
            r.wall_ms = j.value("wall_ms", 0.0);
            r.seed = j.value("seed", std::uint64_t{0});
            r.candidate_mode = j.value("candidate_mode", std::string{});
            out.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(std::string("bad results record: ") + e.what());
        }
    }
    return out;
}

/// Convergence trace CSV: time_ms, iteration, best_length.
inline void write_trace_csv(std::ostream& os, const std::string& id, const std::vector<TracePoint>& trace) {
    for (const auto& p : trace) {
        os << id << ',';
        detail::write_real(os, p.time_ms) << ',' << p.iteration << ',';
        detail::write_real(os, p.best_length) << '\n';
    }
}

inline constexpr const char* kTraceHeader = "id,time_ms,iteration,best_length\n";

/// Optimum table: CSV lines `id,optimum`; an optional header line is skipped.
inline std::map<std::string, double> read_optima_csv(std::istream& in) {
    std::map<std::string, double> out;
    detail::LineReader rd(in);
    std::string line;
    bool first = true;
    while (rd.next(line)) {
        const auto t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto comma = t.find(',');
        if (comma == std::string::npos) throw ParseError("optimum row needs 'id,length'", rd.line_no());
        const std::string id = detail::trim(t.substr(0, comma));
        double v = 0.0;
        if (!detail::parse_double(detail::trim(t.substr(comma + 1)), v)) {
            if (first) {
                first = false;
                continue;
            }
            throw ParseError("bad optimum value", rd.line_no());
        }
        first = false;
        if (!(v > 0.0)) throw ParseError("optimum must be positive", rd.line_no());
        out[id] = v;
    }
    return out;
}

inline nlohmann::json report_json(const Report& rep) {
    nlohmann::json j;
    j["aggregation"] = rep.aggregation == Aggregation::MeanOverSeeds ? "mean_over_seeds" : "best_over_seeds";
    j["rows"] = nlohmann::json::array();
    for (const auto& r : rep.rows) {
        nlohmann::json row{{"group", r.group},
                           {"instances", r.instances},
                           {"runs", r.runs},
                           {"mean_length", r.mean_length},
                           {"missing_optima", r.missing_optima},
                           {"total_wall_ms", r.total_wall_ms}};
        row["mean_gap"] = r.mean_gap ? nlohmann::json(*r.mean_gap) : nlohmann::json(nullptr);
        j["rows"].push_back(std::move(row));
    }
    j["missing_optimum_ids"] = rep.missing_optimum_ids;
    return j;
}

inline nlohmann::json quality_json(const HeatmapQuality& q) {
    return {{"avg_rank", q.avg_rank},
            {"avg_rank_directed", q.avg_rank_directed},
            {"k", q.k},
            {"missing_rate", q.missing_rate_topk},
            {"missing_rate_directed", q.missing_rate_directed},
            {"coverage", q.coverage},
            {"instances", q.instances}};
}

}  // namespace rstsp
