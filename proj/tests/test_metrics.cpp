#include <gtest/gtest.h>

#include <functional>
#include <sstream>

#include "oracles.hpp"
#include "rstsp/rstsp.hpp"

using namespace rstsp;

namespace {

// Heatmap over full rows (k1 = n) with H(i, j) = f(i, j).
Heatmap full_heatmap(const Instance& inst, const std::function<double(std::uint32_t, std::uint32_t)>& f) {
    const std::size_t n = inst.size();
    const auto sub = build_subgraphs(inst, n);
    std::vector<double> v(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto nb = sub.neighbors(i);
        for (std::size_t s = 1; s < n; ++s) v[i * n + s] = f(static_cast<std::uint32_t>(i), nb[s]);
    }
    return Heatmap(sub.table(), std::move(v));
}

Heatmap ideal_heatmap(const LabeledInstance& li) {
    const auto adj = li.optimal_tour.adjacency();
    return full_heatmap(li.instance, [&](std::uint32_t i, std::uint32_t j) {
        return (adj[i][0] == j || adj[i][1] == j) ? 1.0 : 0.0;
    });
}

Heatmap random_heatmap(const SubgraphSet& sub, std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t n = sub.size(), k = sub.k1();
    std::vector<double> v(n * k, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t s = 1; s < k; ++s) v[i * k + s] = rng.uniform();
    return Heatmap(sub.table(), std::move(v));
}

Heatmap transform(const Heatmap& hm, double (*f)(double)) {
    std::vector<double> v(hm.values().begin(), hm.values().end());
    for (std::size_t i = 0; i < hm.size(); ++i)
        for (std::size_t s = 1; s < hm.k1(); ++s) v[i * hm.k1() + s] = f(v[i * hm.k1() + s]);
    return Heatmap(hm.table(), std::move(v));
}

// Good (not necessarily optimal) tour used as the label for larger n.
LabeledInstance labeled_by_search(std::size_t n, std::uint64_t seed) {
    const auto inst = generate_uniform(n, seed);
    SolveConfig cfg;
    cfg.candidate_mode = CandidateMode::Knn;
    cfg.k2 = 8;
    cfg.budget = Budget::iters(20 * n);
    cfg.seed = seed;
    auto r = solve(inst, nullptr, cfg);
    return make_labeled(inst, r.tour);
}

LabeledInstance random_labeled(std::size_t n, std::uint64_t seed) {
    return make_labeled(generate_uniform(n, seed), Tour(oracle::random_perm(n, seed + 1)));
}

bool is_band_with_corners(const std::vector<double>& m, std::size_t n) {
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            const bool band = (r + 1 == c) || (c + 1 == r) || (r == 0 && c == n - 1) || (r == n - 1 && c == 0);
            if (m[r * n + c] != (band ? 1.0 : 0.0)) return false;
        }
    }
    return true;
}

std::vector<double> sorted_row(const std::vector<double>& m, std::size_t n, std::size_t r) {
    std::vector<double> row(m.begin() + static_cast<std::ptrdiff_t>(r * n), m.begin() + static_cast<std::ptrdiff_t>((r + 1) * n));
    std::sort(row.begin(), row.end());
    return row;
}

}  // namespace

// ---------------------------------------------------------------------------
// Rank and missing rate

TEST(Rank, IdealHeatmap) {
    const auto li = held_karp_optimal(generate_uniform(12, 3));
    const auto hm = ideal_heatmap(li);
    const auto r = average_rank(hm, li);
    EXPECT_DOUBLE_EQ(r.best_of_two, 1.0);
    EXPECT_DOUBLE_EQ(r.directed, 1.0);
    EXPECT_LE(r.best_of_two, 2.0);
    for (std::size_t k : {1u, 2u, 5u, 11u}) EXPECT_EQ(missing_rate(hm, li, k).undirected, 0.0);
    EXPECT_EQ(coverage(hm, li), 1.0);
}

TEST(Rank, OptimisticTies) {
    const Instance inst("sq", {{0, 0}, {0, 1}, {1, 1}, {1, 0}});
    const auto hm = full_heatmap(inst, [](std::uint32_t, std::uint32_t) { return 0.5; });
    for (std::uint32_t j = 1; j < 4; ++j) EXPECT_EQ(heat_rank(hm, 0, j), 1u);
}

TEST(Rank, NonNeighborRanksPastTheRow) {
    const auto inst = generate_uniform(30, 4);
    const auto sub = build_subgraphs(inst, 5);
    const auto hm = inverse_distance_heatmap(sub);
    const auto nb = sub.neighbors(0);
    std::uint32_t far = 0;
    while (std::find(nb.begin(), nb.end(), far) != nb.end()) ++far;
    EXPECT_EQ(heat_rank(hm, 0, far), 6u);
    EXPECT_EQ(heat_rank(hm, 0, nb[1]), 1u);
}

TEST(Missing, AdversarialHeatmap) {
    const auto li = random_labeled(40, 5);
    const auto adj = li.optimal_tour.adjacency();
    const auto hm = full_heatmap(li.instance, [&](std::uint32_t i, std::uint32_t j) {
        return (adj[i][0] == j || adj[i][1] == j) ? 0.0 : 0.5;
    });
    const auto m = missing_rate(hm, li, 5);
    EXPECT_EQ(m.undirected, 1.0);
    EXPECT_EQ(m.directed, 1.0);
    EXPECT_EQ(coverage(hm, li), 1.0);
}

TEST(Missing, AdversarialSubgraph) {
    // a random tour's neighbors mostly fall outside a 3-NN subgraph
    const auto li = random_labeled(200, 6);
    const auto hm = inverse_distance_heatmap(build_subgraphs(li.instance, 3));
    const auto q = heatmap_quality(hm, li, 2);
    EXPECT_GT(q.missing_rate_topk, 0.9);
    EXPECT_LE(q.missing_rate_topk, 1.0);
    EXPECT_LT(q.coverage, 0.1);
}

TEST(Missing, KOutOfRange) {
    const auto li = random_labeled(10, 1);
    const auto hm = inverse_distance_heatmap(build_subgraphs(li.instance, 5));
    EXPECT_THROW(missing_rate(hm, li, 0), ArgumentError);
    EXPECT_THROW(missing_rate(hm, li, 6), ArgumentError);
    EXPECT_NO_THROW(missing_rate(hm, li, 5));
}

TEST(Missing, NonIncreasingInK) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto li = labeled_by_search(80, seed);
        const auto sub = build_subgraphs(li.instance, 20);
        for (const auto& hm : {inverse_distance_heatmap(sub), random_heatmap(sub, seed)}) {
            double prev = 1.0, prev_d = 1.0;
            for (std::size_t k = 1; k <= 20; ++k) {
                const auto m = missing_rate(hm, li, k);
                EXPECT_LE(m.undirected, prev);
                EXPECT_LE(m.directed, prev_d);
                prev = m.undirected;
                prev_d = m.directed;
            }
        }
    }
}

TEST(Rank, RandomHeatmapMeanMatchesUniformExpectation) {
    // full rows: the successor's rank is uniform on 1..n-1, mean n/2
    const std::size_t n = 100;
    double sum = 0.0;
    const int reps = 20;
    for (int r = 0; r < reps; ++r) {
        const auto li = random_labeled(n, 1000 + static_cast<std::uint64_t>(r));
        const auto hm = random_heatmap(build_subgraphs(li.instance, n), 50 + static_cast<std::uint64_t>(r));
        sum += average_rank(hm, li).directed;
    }
    EXPECT_NEAR(sum / reps, n / 2.0, 2.5);
}

TEST(Rank, InverseDistanceBeatsRandomOnFifty) {
    double inv = 0.0, rnd = 0.0;
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto li = labeled_by_search(50, 300 + s);
        const auto sub = build_subgraphs(li.instance, default_k1(50));
        inv += average_rank(inverse_distance_heatmap(sub), li).best_of_two;
        rnd += average_rank(random_heatmap(sub, s), li).best_of_two;
    }
    EXPECT_LT(inv, rnd);
    EXPECT_LT(inv / 5, 2.0);
}

TEST(Missing, InverseDistanceOnHundredIsSmallButPositive) {
    std::vector<HeatmapQuality> qs;
    for (std::uint64_t s = 0; s < 8; ++s) {
        const auto li = labeled_by_search(100, 700 + s);
        qs.push_back(heatmap_quality(inverse_distance_heatmap(build_subgraphs(li.instance, default_k1(100))), li, 5));
    }
    const auto q = mean_quality(qs);
    EXPECT_EQ(q.instances, 8u);
    EXPECT_GT(q.missing_rate_topk, 0.0);
    EXPECT_LT(q.missing_rate_topk, 0.1);
    EXPECT_GE(q.avg_rank, 1.0);
    EXPECT_EQ(q.coverage, 1.0);
}

TEST(Rank, InvariantUnderMonotoneTransforms) {
    const auto li = labeled_by_search(60, 9);
    const auto sub = build_subgraphs(li.instance, 15);
    for (const auto& hm : {inverse_distance_heatmap(sub), random_heatmap(sub, 4)}) {
        const auto base = average_rank(hm, li);
        for (auto f : {+[](double x) { return x * x * x; }, +[](double x) { return std::sqrt(x); },
                       +[](double x) { return 0.5 * x + 0.1; }}) {
            const auto t = average_rank(transform(hm, f), li);
            EXPECT_EQ(t.best_of_two, base.best_of_two);
            EXPECT_EQ(t.directed, base.directed);
        }
    }
}

TEST(Rank, SizeMismatchIsContractError) {
    const auto li = random_labeled(10, 1);
    const auto hm = inverse_distance_heatmap(build_subgraphs(generate_uniform(11, 1), 5));
    EXPECT_THROW(average_rank(hm, li), ContractError);
}

TEST(Quality, CsvAndMean) {
    HeatmapQuality a{2.0, 3.0, 0.1, 0.2, 5, 1.0, 1}, b{4.0, 5.0, 0.3, 0.4, 5, 0.5, 1};
    const auto m = mean_quality({a, b});
    EXPECT_DOUBLE_EQ(m.avg_rank, 3.0);
    EXPECT_DOUBLE_EQ(m.missing_rate_directed, 0.3);
    EXPECT_DOUBLE_EQ(m.coverage, 0.75);
    b.k = 4;
    EXPECT_THROW(mean_quality({a, b}), ContractError);
    std::ostringstream os;
    write_quality_csv(os, {{"x", a}});
    std::istringstream in(os.str());
    std::string header, id, field;
    std::getline(in, header);
    EXPECT_EQ(header, "id,avg_rank,avg_rank_directed,k,missing_rate,missing_rate_directed,coverage");
    std::getline(in, id, ',');
    EXPECT_EQ(id, "x");
    std::vector<double> vals;
    while (std::getline(in, field, ',')) vals.push_back(std::stod(field));
    EXPECT_EQ(vals, (std::vector<double>{2, 3, 5, 0.1, 0.2, 1}));
}

// ---------------------------------------------------------------------------
// Ordered heatmaps

TEST(Ordered, IdealHeatmapGivesBandAndCorners) {
    for (std::size_t n : {5u, 10u, 17u}) {
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            const auto li = random_labeled(n, seed * 31 + n);
            const auto m = ordered_heatmap(ideal_heatmap(li), li.optimal_tour);
            EXPECT_TRUE(is_band_with_corners(m, n)) << "n=" << n;
        }
    }
}

TEST(Ordered, RowsArePermutationsOfHeatmapRows) {
    const auto li = random_labeled(23, 2);
    const auto hm = random_heatmap(build_subgraphs(li.instance, 8), 6);
    const auto dense = hm.dense();
    const auto m = ordered_heatmap(hm, li.optimal_tour);
    for (std::size_t r = 0; r < 23; ++r) EXPECT_EQ(sorted_row(m, 23, r), sorted_row(dense, 23, li.optimal_tour[r]));
}

TEST(Ordered, AllZeroStaysZero) {
    const auto li = random_labeled(9, 3);
    const auto hm = full_heatmap(li.instance, [](std::uint32_t, std::uint32_t) { return 0.0; });
    for (double v : ordered_heatmap(hm, li.optimal_tour)) EXPECT_EQ(v, 0.0);
    for (double v : rotated_heatmap(hm, li.optimal_tour)) EXPECT_EQ(v, 0.0);
}

TEST(Rotated, HandTraceOnThreeNodes) {
    const Instance inst("h", {{0, 0}, {1, 0}, {0, 1}});
    const double H[3][3] = {{0, 0.2, 0.3}, {0.4, 0, 0.5}, {0.6, 0.7, 0}};
    const auto hm = full_heatmap(inst, [&](std::uint32_t i, std::uint32_t j) { return H[i][j]; });
    const Tour pi({2, 0, 1});
    const auto m = rotated_heatmap(hm, pi);
    const std::vector<double> expect{0, 0.2, 0.3, 0, 0.5, 0.4, 0, 0.6, 0.7};
    EXPECT_EQ(m, expect);
}

TEST(Rotated, RowsAreRotationsAndIdealUsesColumnsOneAndLast) {
    const auto li = random_labeled(11, 8);
    const auto m = rotated_heatmap(ideal_heatmap(li), li.optimal_tour);
    for (std::size_t i = 0; i < 11; ++i)
        for (std::size_t j = 0; j < 11; ++j) EXPECT_EQ(m[i * 11 + j], (j == 1 || j == 10) ? 1.0 : 0.0);

    const auto hm = random_heatmap(build_subgraphs(li.instance, 11), 1);
    const auto r = rotated_heatmap(hm, li.optimal_tour);
    const auto d = hm.dense();
    for (std::size_t i = 0; i < 11; ++i) EXPECT_EQ(sorted_row(r, 11, i), sorted_row(d, 11, i));
}

TEST(Ordered, SizeMismatch) {
    const auto li = random_labeled(9, 3);
    const auto hm = inverse_distance_heatmap(build_subgraphs(li.instance, 4));
    EXPECT_THROW(ordered_heatmap(hm, Tour({0, 1, 2})), ContractError);
}

TEST(Export, MatrixCsvAndPgm) {
    const std::vector<double> m{0, 1, 0.5, 0.25};
    std::ostringstream csv;
    write_matrix_csv(csv, m, 2);
    EXPECT_EQ(csv.str(), "0,1\n0.5,0.25\n");
    std::ostringstream pgm;
    write_pgm(pgm, m, 2);
    const std::string s = pgm.str();
    const std::string header = "P5\n2 2\n255\n";
    ASSERT_EQ(s.size(), header.size() + 4);
    EXPECT_EQ(s.substr(0, header.size()), header);
    EXPECT_EQ(static_cast<unsigned char>(s[header.size() + 0]), 0);
    EXPECT_EQ(static_cast<unsigned char>(s[header.size() + 1]), 255);
    EXPECT_EQ(static_cast<unsigned char>(s[header.size() + 2]), 128);
    EXPECT_EQ(static_cast<unsigned char>(s[header.size() + 3]), 64);
    EXPECT_THROW(write_pgm(pgm, m, 3), ContractError);
}

// ---------------------------------------------------------------------------
// Run evaluation

TEST(Evaluate, OptimalRunHasZeroGap) {
    const auto rep = evaluate_run({{"a", 20, 3.5, 10, 1.0, 1, "knn"}}, {{"a", 3.5}}, Aggregation::MeanOverSeeds);
    ASSERT_EQ(rep.rows.size(), 1u);
    EXPECT_EQ(rep.rows[0].group, "20");
    ASSERT_TRUE(rep.rows[0].mean_gap);
    EXPECT_EQ(*rep.rows[0].mean_gap, 0.0);
    EXPECT_TRUE(rep.missing_optimum_ids.empty());
}

TEST(Evaluate, FiveSeedMeanIsMeanOfGaps) {
    std::vector<RunRecord> runs;
    const double lens[5] = {10.0, 10.5, 11.0, 10.2, 10.1};
    for (int s = 0; s < 5; ++s) runs.push_back({"u", 50, lens[s], 0, 2.0, std::uint64_t(s), "knn"});
    runs.push_back({"v", 50, 20.0, 0, 2.0, 0, "knn"});
    runs.push_back({"w", 100, 30.0, 0, 2.0, 0, "knn"});
    const auto rep = evaluate_run(runs, {{"u", 10.0}, {"v", 19.0}, {"w", 29.0}}, Aggregation::MeanOverSeeds);
    ASSERT_EQ(rep.rows.size(), 2u);
    EXPECT_EQ(rep.rows[0].group, "50");
    EXPECT_EQ(rep.rows[1].group, "100");
    const double gap_u = (0.0 + 0.05 + 0.1 + 0.02 + 0.01) / 5.0;
    EXPECT_NEAR(*rep.rows[0].mean_gap, (gap_u + 1.0 / 19.0) / 2.0, 1e-15);
    EXPECT_NEAR(rep.rows[0].mean_length, (10.36 + 20.0) / 2.0, 1e-12);
    EXPECT_EQ(rep.rows[0].runs, 6u);
    EXPECT_EQ(rep.rows[0].instances, 2u);
    EXPECT_DOUBLE_EQ(rep.rows[0].total_wall_ms, 12.0);
}

TEST(Evaluate, BestOverSeedsWithSizeBins) {
    std::vector<RunRecord> runs{{"eil51", 51, 430, 0, 1, 0, "heatmap"},   {"eil51", 51, 426, 0, 1, 1, "heatmap"},
                                {"kroA100", 100, 21282, 0, 1, 0, "heatmap"}, {"a280", 280, 2600, 0, 1, 0, "heatmap"},
                                {"pr1002", 1002, 260000, 0, 1, 0, "heatmap"}, {"rat575", 575, 6800, 0, 1, 0, "heatmap"}};
    const std::map<std::string, double> opt{{"eil51", 426}, {"kroA100", 21282}, {"a280", 2579}, {"pr1002", 259045}};
    const auto rep = evaluate_run(runs, opt, Aggregation::BestOverSeeds);
    std::vector<std::string> groups;
    for (const auto& r : rep.rows) groups.push_back(r.group);
    EXPECT_EQ(groups, (std::vector<std::string>{"<100", "[100,200)", "[200,500)", "[500,1K)", ">=1K", "All"}));
    EXPECT_EQ(*rep.rows[0].mean_gap, 0.0);
    EXPECT_FALSE(rep.rows[3].mean_gap);
    EXPECT_EQ(rep.rows[3].missing_optima, 1u);
    EXPECT_EQ(rep.missing_optimum_ids, (std::vector<std::string>{"rat575"}));
    EXPECT_EQ(rep.rows.back().instances, 5u);
    EXPECT_EQ(rep.rows.back().missing_optima, 1u);
    const double all = (0.0 + 0.0 + (2600.0 / 2579 - 1) + (260000.0 / 259045 - 1)) / 4.0;
    EXPECT_NEAR(*rep.rows.back().mean_gap, all, 1e-15);
}

TEST(Evaluate, EmptyAndInvalidInputs) {
    EXPECT_TRUE(evaluate_run({}, {}, Aggregation::BestOverSeeds).rows.empty());
    std::ostringstream os;
    write_report_csv(os, evaluate_run({}, {}, Aggregation::MeanOverSeeds));
    EXPECT_EQ(os.str(), "group,instances,runs,mean_length,mean_gap,missing_optima,total_wall_ms\n");
    EXPECT_THROW(evaluate_run({{"a", 10, std::nan(""), 0, 0, 0, ""}}, {}, Aggregation::MeanOverSeeds), NumericError);
    EXPECT_THROW(evaluate_run({{"a", 10, 1, 0, 0, 0, ""}, {"a", 11, 1, 0, 0, 1, ""}}, {}, Aggregation::MeanOverSeeds),
                 FormatError);
}

TEST(Evaluate, CsvLeavesMissingGapEmpty) {
    const auto rep = evaluate_run({{"a", 10, 2.5, 0, 4, 0, ""}}, {}, Aggregation::MeanOverSeeds);
    std::ostringstream os;
    write_report_csv(os, rep);
    EXPECT_EQ(os.str(), "group,instances,runs,mean_length,mean_gap,missing_optima,total_wall_ms\n10,1,1,2.5,,1,4\n");
}
