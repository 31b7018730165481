#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dynoloc/batch.hpp"
#include "dynoloc/report.hpp"
#include "dynoloc/scenario.hpp"
#include "dynoloc/simulator.hpp"

namespace {

enum class LogLevel { Quiet = 0, Info = 1, Debug = 2 };

LogLevel log_level() {
    const char* env = std::getenv("DYNOLOC_LOG");
    if (!env) return LogLevel::Info;
    const std::string v(env);
    if (v == "quiet") return LogLevel::Quiet;
    if (v == "debug") return LogLevel::Debug;
    return LogLevel::Info;
}

void log_info(const std::string& msg) {
    if (log_level() >= LogLevel::Info) std::cerr << msg << "\n";
}
void log_debug(const std::string& msg) {
    if (log_level() >= LogLevel::Debug) std::cerr << msg << "\n";
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.push_back(tok);
    return out;
}

struct Overrides {
    std::string scenario_path;
    std::optional<std::string> strategy;
    std::optional<std::uint64_t> seed;
    std::optional<int> epochs;
    std::optional<double> refresh_rate;
    std::string out_dir = "out";
    int seeds = 1;
    int threads = 0;
};

int validate_or_report(const dynoloc::Scenario& s) {
    const auto issues = dynoloc::validate_scenario(s);
    for (const auto& issue : issues)
        std::cerr << "error: " << issue.field << " " << issue.message << "\n";
    return issues.empty() ? 0 : 2;
}

int cmd_run(const Overrides& opts) {
    dynoloc::Scenario scenario;
    try {
        scenario = dynoloc::load_scenario(opts.scenario_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    if (opts.strategy) scenario.strategy = dynoloc::strategy_from_string(*opts.strategy);
    if (opts.seed) scenario.seed = *opts.seed;
    if (opts.epochs) scenario.epochs = *opts.epochs;
    if (opts.refresh_rate) scenario.refresh_rate_hz = *opts.refresh_rate;
    if (int rc = validate_or_report(scenario)) return rc;

    log_info("running " + scenario.name + " strategy=" + to_string(scenario.strategy) +
             " seed=" + std::to_string(scenario.seed) +
             " epochs=" + std::to_string(scenario.epochs));

    dynoloc::Simulator sim(scenario);
    std::vector<dynoloc::EpochRecord> records;
    for (int i = 0; i < scenario.epochs; ++i) {
        records.push_back(sim.run_epoch());
        log_debug("epoch " + std::to_string(i) + " slots_used=" +
                  std::to_string(records.back().slots_used));
    }
    const auto summary = dynoloc::evaluate_run(scenario, records);

    std::filesystem::create_directories(opts.out_dir);
    const auto out = std::filesystem::path(opts.out_dir);
    dynoloc::write_file((out / "epochs.csv").string(), dynoloc::epochs_csv(records));
    dynoloc::write_file((out / "trace.jsonl").string(), dynoloc::trace_jsonl(records));
    dynoloc::write_file((out / "summary.json").string(),
                        dynoloc::summary_json(scenario, summary));

    std::cout << "median_error_m " << summary.median_error << "\n";
    return 0;
}

int cmd_compare(const Overrides& opts, const std::string& strategies_arg,
                const std::string& rates_arg) {
    const auto strategies = split_csv(strategies_arg);
    if (strategies.size() < 2) {
        std::cerr << "error: compare needs at least 2 strategies\n";
        return 2;
    }
    std::vector<double> rates;
    for (const std::string& r : split_csv(rates_arg)) rates.push_back(std::stod(r));

    dynoloc::Scenario base;
    try {
        base = dynoloc::load_scenario(opts.scenario_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    if (opts.epochs) base.epochs = opts.epochs.value();
    if (opts.seed) base.seed = *opts.seed;
    if (rates.empty()) rates.push_back(base.refresh_rate_hz);
    if (int rc = validate_or_report(base)) return rc;

    std::vector<dynoloc::Scenario> jobs;
    for (const std::string& strat : strategies)
        for (double rate : rates)
            for (int k = 0; k < opts.seeds; ++k) {
                dynoloc::Scenario s = base;
                s.strategy = dynoloc::strategy_from_string(strat);
                s.refresh_rate_hz = rate;
                s.seed = base.seed + static_cast<std::uint64_t>(k);
                jobs.push_back(std::move(s));
            }

    log_info("comparing " + std::to_string(strategies.size()) + " strategies x " +
             std::to_string(rates.size()) + " rates x " + std::to_string(opts.seeds) +
             " seeds (" + std::to_string(jobs.size()) + " runs)");

    const auto summaries = dynoloc::run_batch(jobs, opts.threads);

    std::vector<dynoloc::CompareRow> rows;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        dynoloc::CompareRow row;
        row.strategy = to_string(jobs[i].strategy);
        row.seed = jobs[i].seed;
        row.refresh_rate_hz = jobs[i].refresh_rate_hz;
        row.median = summaries[i].median_error;
        row.mean = summaries[i].mean_error;
        row.p90 = summaries[i].p90_error;
        row.pct_localized = summaries[i].pct_localized;
        rows.push_back(std::move(row));
    }

    std::filesystem::create_directories(opts.out_dir);
    dynoloc::write_file(
        (std::filesystem::path(opts.out_dir) / "compare.csv").string(),
        dynoloc::compare_csv(rows));

    // per-strategy aggregate table on stdout
    std::map<std::pair<std::string, double>, std::vector<double>> medians;
    for (const auto& row : rows)
        medians[{row.strategy, row.refresh_rate_hz}].push_back(row.median);
    std::cout << "strategy,refresh_rate_hz,median_of_medians_m,runs,confidence\n";
    for (auto& [key, values] : medians) {
        std::sort(values.begin(), values.end());
        std::cout << key.first << ',' << key.second << ','
                  << values[values.size() / 2] << ',' << values.size() << ','
                  << (values.size() >= 5 ? "ok" : "low") << "\n";
    }
    return 0;
}

int cmd_validate(const std::string& path) {
    dynoloc::Scenario scenario;
    try {
        scenario = dynoloc::load_scenario(path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    const auto issues = dynoloc::validate_scenario(scenario);
    if (!issues.empty()) {
        for (const auto& issue : issues)
            std::cerr << "error: " << issue.field << " " << issue.message << "\n";
        return 2;
    }
    int mobile = 0;
    for (const auto& n : scenario.nodes)
        if (n.speed > 0.0) ++mobile;
    std::cout << "scenario " << scenario.name << ": " << scenario.nodes.size()
              << " nodes (" << mobile << " mobile), " << scenario.walls.size()
              << " walls, arena " << scenario.arena_width << "x"
              << scenario.arena_height << " m, strategy "
              << to_string(scenario.strategy) << ", " << scenario.epochs
              << " epochs @ " << scenario.refresh_rate_hz << " Hz\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"latency-bounded infrastructure-free RF localization simulator"};
    app.require_subcommand(1);

    Overrides opts;
    std::string strategies_arg;
    std::string rates_arg;

    auto* run = app.add_subcommand("run", "simulate one scenario and write artifacts");
    run->add_option("--scenario", opts.scenario_path, "scenario file")->required();
    std::string run_strategy;
    run->add_option("--strategy", run_strategy, "override strategy");
    std::uint64_t seed_arg = 0;
    auto* seed_opt = run->add_option("--seed", seed_arg, "override seed");
    int epochs_arg = 0;
    auto* epochs_opt = run->add_option("--epochs", epochs_arg, "override epoch count");
    double rate_arg = 0.0;
    auto* rate_opt = run->add_option("--refresh-rate", rate_arg, "override refresh rate (Hz)");
    run->add_option("--out", opts.out_dir, "output directory");

    auto* compare = app.add_subcommand("compare", "run a strategy/seed cross product");
    compare->add_option("--scenario", opts.scenario_path, "scenario file")->required();
    compare->add_option("--strategy", strategies_arg, "comma-separated strategies")
        ->required();
    compare->add_option("--refresh-rate", rates_arg, "comma-separated refresh rates (Hz)");
    compare->add_option("--seeds", opts.seeds, "number of seeds per configuration");
    auto* cseed_opt = compare->add_option("--seed", seed_arg, "base seed");
    auto* cepochs_opt = compare->add_option("--epochs", epochs_arg, "override epoch count");
    compare->add_option("--threads", opts.threads, "worker threads (1 = serial)");
    compare->add_option("--out", opts.out_dir, "output directory");

    auto* validate = app.add_subcommand("validate", "check a scenario file");
    validate->add_option("--scenario", opts.scenario_path, "scenario file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            if (!run_strategy.empty()) opts.strategy = run_strategy;
            if (seed_opt->count()) opts.seed = seed_arg;
            if (epochs_opt->count()) opts.epochs = epochs_arg;
            if (rate_opt->count()) opts.refresh_rate = rate_arg;
            return cmd_run(opts);
        }
        if (compare->parsed()) {
            if (cseed_opt->count()) opts.seed = seed_arg;
            if (cepochs_opt->count()) opts.epochs = epochs_arg;
            return cmd_compare(opts, strategies_arg, rates_arg);
        }
        if (validate->parsed()) return cmd_validate(opts.scenario_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
