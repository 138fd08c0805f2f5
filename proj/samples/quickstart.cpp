// Generates an instance, builds a heatmap and runs the search on it.
//
//   quickstart [n] [weights.bin]

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>

#include "rstsp/rstsp.hpp"

int main(int argc, char** argv) {
    using namespace rstsp;
    const std::size_t n = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 200;
    try {
        const auto inst = generate_uniform(n, 2024);
        const auto sub = build_subgraphs(inst, default_k1(n));

        // Trained weights if given, otherwise inverse distances stand in.
        const Heatmap hm = argc > 2 ? forward(inst, sub, load_weights(std::string(argv[2]))) : inverse_distance_heatmap(sub);

        SolveConfig cfg;
        cfg.budget = Budget::parse("wall:0.01n");
        cfg.seed = 7;
        const auto base = greedy_two_opt(inst, &hm, cfg);
        const auto res = solve(inst, &hm, cfg);

        std::printf("n=%zu  greedy+2-opt %.4f  search %.4f  (%llu iterations, %.0f ms)\n", n, base.length, res.length,
                    static_cast<unsigned long long>(res.stats.iterations), res.stats.wall_ms);
        std::cout << result_json(inst, res, cfg.seed, cfg.candidate_mode).dump().substr(0, 160) << "...\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
