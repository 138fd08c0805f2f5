// rstsp command-line tool: instance generation, labeling, heatmap inference,
// search, evaluation and heatmap diagnostics.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rstsp/rstsp.hpp"

namespace fs = std::filesystem;
using namespace rstsp;

namespace {

enum Exit : int { kOk = 0, kInternal = 1, kArgument = 2, kFormat = 3, kNumeric = 4 };

std::ifstream open_in(const std::string& path, std::ios::openmode mode = std::ios::in) {
    std::ifstream in(path, mode);
    if (!in) throw ArgumentError("cannot open '" + path + "'");
    return in;
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
    if (const auto dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
    std::ofstream out(path, mode);
    if (!out) throw ArgumentError("cannot write '" + path + "'");
    return out;
}

// "-" means stdout.
class Sink {
public:
    explicit Sink(const std::string& path) {
        if (path != "-") file_ = open_out(path);
    }
    std::ostream& os() { return file_ ? static_cast<std::ostream&>(*file_) : std::cout; }

private:
    std::optional<std::ofstream> file_;
};

Instance load_instance(const std::string& path) {
    auto in = open_in(path);
    try {
        return read_any_instance(in, fs::path(path).stem().string());
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

Heatmap load_heatmap(const std::string& path) {
    auto in = open_in(path);
    try {
        return read_heatmap_csv(in);
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

std::vector<LabeledInstance> load_labeled(const std::string& path) {
    auto in = open_in(path);
    try {
        return read_labeled_dataset(in, fs::path(path).stem().string());
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

std::size_t resolve_threads(std::size_t requested) { return requested ? requested : default_thread_count(); }

Heatmap infer_heatmap(const Instance& inst, std::size_t k1, const std::optional<ModelWeights>& w) {
    const auto sub = build_subgraphs(inst, k1 ? std::min(k1, inst.size()) : default_k1(inst.size()));
    return w ? forward(inst, sub, *w) : inverse_distance_heatmap(sub);
}

// ---------------------------------------------------------------------------

struct GenArgs {
    std::size_t n = 0, count = 1;
    std::uint64_t seed = 1;
    std::string out = ".", format = "internal";
};

int run_gen(const GenArgs& a) {
    if (a.n < 3) throw ArgumentError("--n must be >= 3");
    fs::create_directories(a.out);
    const int width = static_cast<int>(std::to_string(a.count - 1).size());
    for (std::size_t k = 0; k < a.count; ++k) {
        std::string idx = std::to_string(k);
        idx.insert(0, static_cast<std::size_t>(width) - idx.size(), '0');
        const std::string id = "tsp" + std::to_string(a.n) + "_" + idx;
        const auto inst = generate_uniform(a.n, derive_seed(a.seed, id), id);
        if (a.format == "tsplib") {
            auto os = open_out((fs::path(a.out) / (id + ".tsp")).string());
            serialize_tsplib(os, inst);
        } else {
            auto os = open_out((fs::path(a.out) / (id + ".txt")).string());
            write_instance(os, inst);
        }
    }
    return kOk;
}

struct LabelArgs {
    std::vector<std::size_t> n;
    std::vector<std::string> instances;
    std::size_t count = 1, threads = 0;
    std::uint64_t seed = 1;
    std::string out = "-";
};

int run_label(const LabelArgs& a) {
    std::vector<Instance> insts;
    for (const auto& p : a.instances) insts.push_back(load_instance(p));
    for (std::size_t n : a.n) {
        if (n < 3 || n > kHeldKarpMaxNodes) throw ArgumentError("--n must lie in [3, " + std::to_string(kHeldKarpMaxNodes) + "]");
        for (std::size_t k = 0; k < a.count; ++k) {
            const std::string id = "tsp" + std::to_string(n) + "_" + std::to_string(k);
            insts.push_back(generate_uniform(n, derive_seed(a.seed, id), id));
        }
    }
    if (insts.empty()) throw ArgumentError("nothing to label: give --n or --instances");
    std::vector<std::optional<LabeledInstance>> labeled(insts.size());
    parallel_for(insts.size(), resolve_threads(a.threads), [&](std::size_t i) { labeled[i] = held_karp_optimal(insts[i]); });
    Sink sink(a.out);
    for (const auto& li : labeled) write_labeled(sink.os(), *li);
    return kOk;
}

struct HeatmapArgs {
    std::vector<std::string> instances;
    std::string weights, out = ".";
    std::size_t k1 = 0, threads = 0;
};

int run_heatmap(const HeatmapArgs& a) {
    std::optional<ModelWeights> w;
    if (!a.weights.empty()) {
        w = load_weights(a.weights);
    } else {
        std::cerr << "warning: no --weights given, using the inverse-distance heatmap\n";
    }
    std::vector<Instance> insts;
    for (const auto& p : a.instances) insts.push_back(load_instance(p));
    fs::create_directories(a.out);
    std::vector<std::string> timing(insts.size());
    parallel_for(insts.size(), resolve_threads(a.threads), [&](std::size_t i) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto hm = infer_heatmap(insts[i], a.k1, w);
        const double ms = elapsed_ms(t0);
        auto os = open_out((fs::path(a.out) / (insts[i].id() + ".heat.csv")).string());
        write_heatmap_csv(os, hm);
        std::ostringstream line;
        line << insts[i].id() << " n=" << insts[i].size() << " k1=" << hm.k1() << " ms=" << ms;
        timing[i] = line.str();
    });
    for (const auto& l : timing) std::cout << l << '\n';
    return kOk;
}

struct SolveArgs {
    std::vector<std::string> instances, heatmaps;
    std::size_t k2 = 5, threads = 0, m_lo = 10, m_hi = 0;
    std::string budget = "wall:0.05n", candidates = "auto", accept = "improving", out = "-", trace, optima;
    std::uint64_t seed = 1;
    bool init_all = false, no_enhance = false;
};

int run_solve(const SolveArgs& a) {
    SolveConfig cfg;
    cfg.k2 = a.k2;
    cfg.budget = Budget::parse(a.budget);
    cfg.seed = a.seed;
    cfg.m_lo = a.m_lo;
    if (a.m_hi) cfg.m_hi = a.m_hi;
    cfg.init_all_candidates = a.init_all;
    cfg.edge_enhancement = !a.no_enhance;
    cfg.accept = a.accept == "always" ? AcceptMode::Always : AcceptMode::Improving;
    const bool use_heat = a.candidates == "heatmap" || (a.candidates == "auto" && !a.heatmaps.empty());
    cfg.candidate_mode = use_heat ? CandidateMode::Heatmap : CandidateMode::Knn;
    if (use_heat && a.heatmaps.empty()) throw ArgumentError("--candidates heatmap needs --heatmaps");
    if (!use_heat && !a.heatmaps.empty()) std::cerr << "warning: --heatmaps ignored with --candidates knn\n";
    if (use_heat && a.heatmaps.size() != a.instances.size()) {
        throw ArgumentError("--heatmaps must pair one file with each instance");
    }

    std::vector<Instance> insts;
    for (const auto& p : a.instances) insts.push_back(load_instance(p));
    for (const auto& inst : insts) {
        if (inst.size() < 3) throw ArgumentError(inst.id() + ": solve needs at least 3 nodes");
        if (a.k2 == 0 || a.k2 >= inst.size()) throw ArgumentError(inst.id() + ": --k2 must lie in [1, n-1]");
    }
    std::vector<Heatmap> hms;
    if (use_heat) {
        for (std::size_t i = 0; i < a.heatmaps.size(); ++i) {
            hms.push_back(load_heatmap(a.heatmaps[i]));
            if (hms.back().size() != insts[i].size()) {
                throw FormatError("paired files disagree: " + a.heatmaps[i] + " has " + std::to_string(hms.back().size()) +
                                  " nodes, " + a.instances[i] + " has " + std::to_string(insts[i].size()));
            }
        }
    }
    std::map<std::string, double> optima;
    if (!a.optima.empty()) {
        auto in = open_in(a.optima);
        optima = read_optima_csv(in);
    }

    const auto results = solve_batch(insts, hms, cfg, resolve_threads(a.threads));

    auto arr = nlohmann::json::array();
    for (std::size_t i = 0; i < insts.size(); ++i) {
        std::optional<double> opt;
        if (const auto it = optima.find(insts[i].id()); it != optima.end()) opt = it->second;
        arr.push_back(result_json(insts[i], results[i], instance_seed(a.seed, insts[i]), cfg.candidate_mode, opt));
    }
    // one record per line keeps long tours readable
    Sink sink(a.out);
    sink.os() << "[";
    for (std::size_t i = 0; i < arr.size(); ++i) sink.os() << (i ? ",\n " : "\n ") << arr[i].dump();
    sink.os() << "\n]\n";
    if (!a.trace.empty()) {
        auto os = open_out(a.trace);
        os << kTraceHeader;
        for (std::size_t i = 0; i < insts.size(); ++i) write_trace_csv(os, insts[i].id(), results[i].stats.trace);
    }
    return kOk;
}

struct EvalArgs {
    std::vector<std::string> results;
    std::string optima, aggregate = "mean", format = "csv", out = "-";
};

int run_eval(const EvalArgs& a) {
    std::vector<RunRecord> runs;
    for (const auto& p : a.results) {
        if (fs::is_directory(p)) {
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(p))
                if (e.path().extension() == ".json") files.push_back(e.path());
            std::sort(files.begin(), files.end());
            for (const auto& f : files) {
                auto in = open_in(f.string());
                for (auto& r : read_results_json(in)) runs.push_back(std::move(r));
            }
        } else {
            auto in = open_in(p);
            for (auto& r : read_results_json(in)) runs.push_back(std::move(r));
        }
    }
    std::map<std::string, double> optima;
    if (!a.optima.empty()) {
        auto in = open_in(a.optima);
        optima = read_optima_csv(in);
    }
    const auto rep = evaluate_run(runs, optima, a.aggregate == "best" ? Aggregation::BestOverSeeds : Aggregation::MeanOverSeeds);
    for (const auto& id : rep.missing_optimum_ids) std::cerr << "warning: no optimum for '" << id << "', gap omitted\n";
    Sink sink(a.out);
    if (a.format == "json") {
        sink.os() << report_json(rep).dump(2) << '\n';
    } else {
        write_report_csv(sink.os(), rep);
    }
    return kOk;
}

struct QualityArgs {
    std::vector<std::string> heatmaps;
    std::string labeled, weights, format = "csv", out = "-";
    std::size_t k = 5, k1 = 0;
};

int run_quality(const QualityArgs& a) {
    const auto data = load_labeled(a.labeled);
    if (!a.heatmaps.empty() && a.heatmaps.size() != data.size()) {
        throw ArgumentError("--heatmaps must pair one file with each labeled record (" + std::to_string(data.size()) + ")");
    }
    std::optional<ModelWeights> w;
    if (!a.weights.empty()) w = load_weights(a.weights);
    std::vector<std::pair<std::string, HeatmapQuality>> rows;
    std::vector<HeatmapQuality> qs;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& li = data[i];
        const Heatmap hm = a.heatmaps.empty() ? infer_heatmap(li.instance, a.k1, w) : load_heatmap(a.heatmaps[i]);
        if (hm.size() != li.instance.size()) throw FormatError("paired files disagree on node count at record " + std::to_string(i));
        if (a.k > hm.k1()) throw ArgumentError("--k exceeds the heatmap's neighbor count");
        qs.push_back(heatmap_quality(hm, li, a.k));
        rows.emplace_back(li.instance.id(), qs.back());
    }
    const auto mean = mean_quality(qs);
    Sink sink(a.out);
    if (a.format == "json") {
        nlohmann::json j;
        j["mean"] = quality_json(mean);
        j["instances"] = nlohmann::json::array();
        for (const auto& [id, q] : rows) {
            auto r = quality_json(q);
            r["id"] = id;
            j["instances"].push_back(std::move(r));
        }
        sink.os() << j.dump(2) << '\n';
    } else {
        rows.emplace_back("mean", mean);
        write_quality_csv(sink.os(), rows);
    }
    return kOk;
}

struct SubgraphArgs {
    std::string instance, out = "-";
    std::size_t k1 = 0;
};

int run_subgraph(const SubgraphArgs& a) {
    const auto inst = load_instance(a.instance);
    const auto sub = build_subgraphs(inst, a.k1 ? a.k1 : default_k1(inst.size()));
    Sink sink(a.out);
    write_subgraph_csv(sink.os(), sub);
    return kOk;
}

struct OrderedArgs {
    std::string labeled, heatmap, weights, out;
    std::size_t record = 0, k1 = 0;
    bool rotated = false;
};

int run_ordered(const OrderedArgs& a) {
    const auto data = load_labeled(a.labeled);
    if (a.record >= data.size()) throw ArgumentError("--record out of range; file has " + std::to_string(data.size()) + " records");
    const auto& li = data[a.record];
    std::optional<ModelWeights> w;
    if (!a.weights.empty()) w = load_weights(a.weights);
    const Heatmap hm = a.heatmap.empty() ? infer_heatmap(li.instance, a.k1, w) : load_heatmap(a.heatmap);
    if (hm.size() != li.instance.size()) throw FormatError("heatmap and labeled record disagree on node count");
    const auto m = a.rotated ? rotated_heatmap(hm, li.optimal_tour) : ordered_heatmap(hm, li.optimal_tour);
    auto csv = open_out(a.out + ".csv");
    write_matrix_csv(csv, m, hm.size());
    auto pgm = open_out(a.out + ".pgm", std::ios::out | std::ios::binary);
    write_pgm(pgm, m, hm.size());
    return kOk;
}

struct WeightsArgs {
    std::string out, in;
    std::uint32_t layers = 6, hidden = 128, k1_hint = 50;
    std::uint64_t seed = 1;
    bool untied = false;
};

int run_weights(const WeightsArgs& a) {
    if (!a.in.empty()) {
        const auto w = load_weights(a.in);
        std::cout << "layers=" << w.layers << " hidden=" << w.hidden << " k1_hint=" << w.k1_hint
                  << " tied=" << (w.tied_endpoints ? "yes" : "no") << " params=" << w.parameter_count() << '\n';
        return kOk;
    }
    if (a.out.empty()) throw ArgumentError("give --out to write weights or --in to inspect a file");
    auto w = ModelWeights::random(a.layers, a.hidden, a.seed, !a.untied);
    w.k1_hint = a.k1_hint;
    save_weights(a.out, w);
    std::cout << "params=" << w.parameter_count() << '\n';
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Rescaled-subgraph heatmaps and reconstruction-based search for the Euclidean TSP"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "rstsp 1.0.0");

    GenArgs gen;
    auto* c_gen = app.add_subcommand("gen", "Generate uniform random instances");
    c_gen->add_option("--n", gen.n, "Nodes per instance")->required();
    c_gen->add_option("--count", gen.count, "Number of instances")->check(CLI::PositiveNumber);
    c_gen->add_option("--seed", gen.seed, "Base seed");
    c_gen->add_option("--out", gen.out, "Output directory");
    c_gen->add_option("--format", gen.format, "internal or tsplib")->check(CLI::IsMember({"internal", "tsplib"}));

    LabelArgs label;
    auto* c_label = app.add_subcommand("label", "Write a labeled dataset with exact optimal tours (n <= 16)");
    c_label->add_option("--n", label.n, "Instance size; repeat for several sizes");
    c_label->add_option("--count", label.count, "Instances per size")->check(CLI::PositiveNumber);
    c_label->add_option("--instances", label.instances, "Existing instance files to label");
    c_label->add_option("--seed", label.seed, "Base seed");
    c_label->add_option("--threads", label.threads, "Worker threads (0: RESCALE_TSP_THREADS or all cores)");
    c_label->add_option("--out", label.out, "Output file, - for stdout");

    HeatmapArgs heat;
    auto* c_heat = app.add_subcommand("heatmap", "Infer sparse heatmaps");
    c_heat->add_option("--instances", heat.instances, "Instance files")->required();
    c_heat->add_option("--weights", heat.weights, "Weight file; omit for the inverse-distance heatmap");
    c_heat->add_option("--k1", heat.k1, "Subgraph size (default min(50, n))");
    c_heat->add_option("--out", heat.out, "Output directory");
    c_heat->add_option("--threads", heat.threads, "Worker threads");

    SolveArgs sol;
    auto* c_solve = app.add_subcommand("solve", "Run the reconstruction-based search");
    c_solve->add_option("--instances", sol.instances, "Instance files")->required();
    c_solve->add_option("--heatmaps", sol.heatmaps, "Heatmap CSV files, one per instance");
    c_solve->add_option("--k2", sol.k2, "Candidates per node");
    c_solve->add_option("--budget", sol.budget, "wall:<sec>, wall:<sec>n or iters:<N>");
    c_solve->add_option("--candidates", sol.candidates, "heatmap, knn or auto")->check(CLI::IsMember({"auto", "heatmap", "knn"}));
    c_solve->add_option("--accept", sol.accept, "improving or always")->check(CLI::IsMember({"improving", "always"}));
    c_solve->add_option("--m-lo", sol.m_lo, "Lower end of the action limit range")->check(CLI::PositiveNumber);
    c_solve->add_option("--m-hi", sol.m_hi, "Upper end (exclusive) of the action limit range; default min(40, n)");
    c_solve->add_flag("--init-all", sol.init_all, "Greedy construction over all subgraph neighbors");
    c_solve->add_flag("--no-enhance", sol.no_enhance, "Disable edge enhancement");
    c_solve->add_option("--seed", sol.seed, "Base seed");
    c_solve->add_option("--threads", sol.threads, "Worker threads");
    c_solve->add_option("--optima", sol.optima, "Optimum table (id,length) for gaps");
    c_solve->add_option("--trace", sol.trace, "Convergence trace CSV");
    c_solve->add_option("--out", sol.out, "Results JSON, - for stdout");

    EvalArgs ev;
    auto* c_eval = app.add_subcommand("eval", "Aggregate results into a report");
    c_eval->add_option("--results", ev.results, "Results JSON files or directories")->required();
    c_eval->add_option("--optima", ev.optima, "Optimum table (id,length)");
    c_eval->add_option("--aggregate", ev.aggregate, "mean (over seeds, by n) or best (size bins)")->check(CLI::IsMember({"mean", "best"}));
    c_eval->add_option("--format", ev.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    c_eval->add_option("--out", ev.out, "Report file, - for stdout");

    QualityArgs qa;
    auto* c_quality = app.add_subcommand("quality", "Heatmap quality against labeled tours");
    c_quality->add_option("--labeled", qa.labeled, "Labeled dataset")->required();
    c_quality->add_option("--heatmaps", qa.heatmaps, "Heatmap CSVs, one per record; omit to infer");
    c_quality->add_option("--weights", qa.weights, "Weight file used when inferring");
    c_quality->add_option("--k1", qa.k1, "Subgraph size when inferring");
    c_quality->add_option("--k", qa.k, "Top-k for the missing rate")->check(CLI::PositiveNumber);
    c_quality->add_option("--format", qa.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    c_quality->add_option("--out", qa.out, "Report file, - for stdout");

    SubgraphArgs sg;
    auto* c_sub = app.add_subcommand("subgraph", "Export raw and rescaled subgraph distances");
    c_sub->add_option("--instance", sg.instance, "Instance file")->required();
    c_sub->add_option("--k1", sg.k1, "Subgraph size (default min(50, n))");
    c_sub->add_option("--out", sg.out, "CSV file, - for stdout");

    OrderedArgs od;
    auto* c_ord = app.add_subcommand("ordered", "Export a tour-ordered heatmap as CSV and PGM");
    c_ord->add_option("--labeled", od.labeled, "Labeled dataset")->required();
    c_ord->add_option("--record", od.record, "Record index (0-based)");
    c_ord->add_option("--heatmap", od.heatmap, "Heatmap CSV; omit to infer");
    c_ord->add_option("--weights", od.weights, "Weight file used when inferring");
    c_ord->add_option("--k1", od.k1, "Subgraph size when inferring");
    c_ord->add_flag("--rotated", od.rotated, "Per-row rotation instead of tour-ordered rows and columns");
    c_ord->add_option("--out", od.out, "Output prefix (.csv and .pgm are appended)")->required();

    WeightsArgs wa;
    auto* c_w = app.add_subcommand("weights", "Write randomly initialized weights or inspect a weight file");
    c_w->add_option("--out", wa.out, "Weight file to write");
    c_w->add_option("--in", wa.in, "Weight file to inspect");
    c_w->add_option("--layers", wa.layers, "Graph convolution layers")->check(CLI::PositiveNumber);
    c_w->add_option("--hidden", wa.hidden, "Hidden width")->check(CLI::PositiveNumber);
    c_w->add_option("--k1-hint", wa.k1_hint, "Subgraph size recorded in the header");
    c_w->add_option("--seed", wa.seed, "Initialization seed");
    c_w->add_flag("--untied", wa.untied, "Separate source and target projections in the edge update");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kArgument;
    }

    try {
        if (*c_gen) return run_gen(gen);
        if (*c_label) return run_label(label);
        if (*c_heat) return run_heatmap(heat);
        if (*c_solve) return run_solve(sol);
        if (*c_eval) return run_eval(ev);
        if (*c_quality) return run_quality(qa);
        if (*c_sub) return run_subgraph(sg);
        if (*c_ord) return run_ordered(od);
        if (*c_w) return run_weights(wa);
    } catch (const ArgumentError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kArgument;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << '\n';
        return kFormat;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return kNumeric;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kInternal;
    }
    return kInternal;
}
