#pragma once

#include <string>
#include <vector>

#include "dynoloc/scenario.hpp"
#include "dynoloc/simulator.hpp"

namespace dynoloc {

// epochs.csv column set is fixed; any future additions are append-only.
inline constexpr const char* kEpochsCsvHeader =
    "epoch,node_id,truth_x,truth_y,est_x,est_y,error_m,localized,component_id,core_number";

std::string epochs_csv(const std::vector<EpochRecord>& records);
std::string trace_jsonl(const std::vector<EpochRecord>& records);
std::string summary_json(const Scenario& scenario, const RunSummary& summary,
                         bool with_timestamp = true);

struct CompareRow {
    std::string strategy;
    std::uint64_t seed = 0;
    double refresh_rate_hz = 0.0;
    double median = -1.0;
    double mean = -1.0;
    double p90 = -1.0;
    double pct_localized = 0.0;
};

std::string compare_csv(const std::vector<CompareRow>& rows);

void write_file(const std::string& path, const std::string& content);

} // namespace dynoloc
