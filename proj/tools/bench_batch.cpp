// Benchmark: serial reference batch runner vs the OpenMP lane on the same
// Monte-Carlo workload, verifying identical outputs along the way.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#include <omp.h>

#include "dynoloc/batch.hpp"
#include "dynoloc/scenario.hpp"

using namespace dynoloc;

namespace {

Scenario desk_scenario(std::uint64_t seed) {
    Scenario s;
    s.name = "bench";
    s.arena_width = 50.0;
    s.arena_height = 40.0;
    s.walls = {{{12, 0}, {12, 28}},  {{25, 12}, {25, 40}}, {{38, 0}, {38, 28}},
               {{0, 20}, {10, 20}},  {{30, 20}, {40, 20}}, {{44, 8}, {50, 8}}};
    for (int i = 0; i < 12; ++i) {
        NodeSpec n;
        n.id = i;
        n.position = {4.0 + 3.7 * i, 4.0 + (i % 4) * 9.0};
        if (i % 2 == 0) {
            n.speed = 1.0;
            n.waypoints = {{4.0 + 3.7 * i, 34.0}, {46.0 - 3.0 * i, 20.0}};
        }
        if (i == 0) n.is_reference = true;
        s.nodes.push_back(std::move(n));
    }
    s.epochs = 30;
    s.seed = seed;
    return s;
}

double wall_seconds(const std::function<void()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(t1 - t0).count();
}

} // namespace

int main(int argc, char** argv) {
    int runs = 24;
    if (argc > 1) runs = std::atoi(argv[1]);

    std::vector<Scenario> jobs;
    for (int i = 0; i < runs; ++i) jobs.push_back(desk_scenario(1000 + i));

    std::vector<RunSummary> serial, parallel;
    const double t_serial = wall_seconds([&] { serial = run_batch_serial(jobs); });
    const double t_parallel = wall_seconds([&] { parallel = run_batch_parallel(jobs); });

    bool identical = serial.size() == parallel.size();
    for (std::size_t i = 0; identical && i < serial.size(); ++i)
        identical = serial[i].median_error == parallel[i].median_error &&
                    serial[i].mean_error == parallel[i].mean_error &&
                    serial[i].pct_localized == parallel[i].pct_localized;

    std::printf("runs                 %d\n", runs);
    std::printf("threads              %d\n", omp_get_max_threads());
    std::printf("serial reference     %.3f s  (%.1f runs/s)\n", t_serial, runs / t_serial);
    std::printf("openmp lane          %.3f s  (%.1f runs/s)\n", t_parallel, runs / t_parallel);
    std::printf("speedup              %.2fx\n", t_serial / t_parallel);
    std::printf("outputs identical    %s\n", identical ? "yes" : "NO");
    return identical ? 0 : 1;
}
