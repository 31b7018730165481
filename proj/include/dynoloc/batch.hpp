#pragma once

#include <vector>

#include "dynoloc/scenario.hpp"
#include "dynoloc/simulator.hpp"

namespace dynoloc {

// Batch Monte-Carlo runner. Each job is an independent world keyed by its
// own seed, so results are identical whichever lane executes it. The OpenMP
// lane parallelizes across jobs; the serial lane is the reference the tests
// and the benchmark compare against.
std::vector<RunSummary> run_batch_serial(const std::vector<Scenario>& jobs);
std::vector<RunSummary> run_batch_parallel(const std::vector<Scenario>& jobs,
                                           int threads = 0); // 0 = OpenMP default

// Dispatches to the parallel lane unless threads == 1.
std::vector<RunSummary> run_batch(const std::vector<Scenario>& jobs, int threads = 0);

} // namespace dynoloc
