#include "dynoloc/report.hpp"

#include <chrono>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace dynoloc {

namespace {
std::string fmt(double v) {
    std::ostringstream os;
    os.precision(9);
    os << v;
    return os.str();
}
} // namespace

std::string epochs_csv(const std::vector<EpochRecord>& records) {
    std::ostringstream os;
    os << kEpochsCsvHeader << "\n";
    for (const EpochRecord& r : records) {
        for (const auto& [id, loc] : r.localized) {
            const bool has_est = r.estimates.count(id) > 0;
            os << r.epoch << ',' << id << ',' << fmt(r.truth.at(id).x) << ','
               << fmt(r.truth.at(id).y) << ',' << (has_est ? fmt(r.estimates.at(id).x) : "")
               << ',' << (has_est ? fmt(r.estimates.at(id).y) : "") << ','
               << (r.error_m.count(id) ? fmt(r.error_m.at(id)) : "") << ','
               << (loc ? 1 : 0) << ',' << r.component_id.at(id) << ','
               << r.core_number.at(id) << "\n";
        }
    }
    return os.str();
}

namespace {
nlohmann::json record_to_json(const EpochRecord& r) {
    nlohmann::json j;
    j["epoch"] = r.epoch;
    j["strategy"] = r.strategy;
    j["slots_used"] = r.slots_used;
    j["budget_slots"] = r.budget_slots;
    j["rigid_component_sizes"] = r.rigid_component_sizes;
    j["sessions"] = {{"admission", r.sessions_admission},
                     {"refresh", r.sessions_refresh},
                     {"excluded_node", r.sessions_excluded}};
    if (r.relative_rmse >= 0.0) j["relative_rmse"] = r.relative_rmse;
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& [id, loc] : r.localized) {
        nlohmann::json n;
        n["id"] = id;
        n["truth"] = {r.truth.at(id).x, r.truth.at(id).y};
        if (r.estimates.count(id))
            n["estimate"] = {r.estimates.at(id).x, r.estimates.at(id).y};
        if (r.error_m.count(id)) n["error_m"] = r.error_m.at(id);
        n["localized"] = loc;
        n["component"] = r.component_id.at(id);
        n["core"] = r.core_number.at(id);
        nodes.push_back(std::move(n));
    }
    j["nodes"] = std::move(nodes);
    return j;
}
} // namespace

std::string trace_jsonl(const std::vector<EpochRecord>& records) {
    std::ostringstream os;
    for (const EpochRecord& r : records) os << record_to_json(r).dump() << "\n";
    return os.str();
}

std::string summary_json(const Scenario& scenario, const RunSummary& summary,
                         bool with_timestamp) {
    nlohmann::json j;
    j["scenario"] = scenario.name;
    j["strategy"] = summary.strategy;
    j["seed"] = summary.seed;
    j["epochs"] = summary.epochs;
    j["node_count"] = scenario.nodes.size();
    j["refresh_rate_hz"] = scenario.refresh_rate_hz;
    j["median_error_m"] = summary.median_error;
    j["mean_error_m"] = summary.mean_error;
    j["p90_error_m"] = summary.p90_error;
    j["pct_localized"] = summary.pct_localized;
    if (summary.median_relative_rmse >= 0.0)
        j["median_relative_rmse_m"] = summary.median_relative_rmse;
    j["median_error_per_epoch"] = summary.median_error_per_epoch;
    nlohmann::json cdf = nlohmann::json::array();
    for (const auto& [err, frac] : summary.error_cdf) cdf.push_back({err, frac});
    j["error_cdf"] = std::move(cdf);
    if (with_timestamp) {
        // wall-clock metadata lives only here so artifact files stay
        // hash-reproducible
        const auto now = std::chrono::system_clock::now().time_since_epoch();
        j["meta"] = {{"generated_unix_ms",
                      std::chrono::duration_cast<std::chrono::milliseconds>(now).count()}};
    }
    return j.dump(2) + "\n";
}

std::string compare_csv(const std::vector<CompareRow>& rows) {
    std::ostringstream os;
    os << "strategy,seed,refresh_rate_hz,median_m,mean_m,p90_m,pct_localized\n";
    for (const CompareRow& r : rows)
        os << r.strategy << ',' << r.seed << ',' << fmt(r.refresh_rate_hz) << ','
           << fmt(r.median) << ',' << fmt(r.mean) << ',' << fmt(r.p90) << ','
           << fmt(r.pct_localized) << "\n";
    return os.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << content;
}

} // namespace dynoloc
