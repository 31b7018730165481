#include "dynoloc/batch.hpp"

#include <omp.h>

namespace dynoloc {

namespace {
RunSummary run_one(const Scenario& job) {
    Simulator sim(job);
    const auto records = sim.run_all();
    return evaluate_run(job, records);
}
} // namespace

std::vector<RunSummary> run_batch_serial(const std::vector<Scenario>& jobs) {
    std::vector<RunSummary> out(jobs.size());
    for (std::size_t i = 0; i < jobs.size(); ++i) out[i] = run_one(jobs[i]);
    return out;
}

std::vector<RunSummary> run_batch_parallel(const std::vector<Scenario>& jobs, int threads) {
    std::vector<RunSummary> out(jobs.size());
    const int n = static_cast<int>(jobs.size());
#pragma omp parallel for schedule(dynamic) num_threads(threads > 0 ? threads : omp_get_max_threads())
    for (int i = 0; i < n; ++i) out[i] = run_one(jobs[i]);
    return out;
}

std::vector<RunSummary> run_batch(const std::vector<Scenario>& jobs, int threads) {
    if (threads == 1) return run_batch_serial(jobs);
    return run_batch_parallel(jobs, threads);
}

} // namespace dynoloc
