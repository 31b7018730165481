#include <doctest.h>

#include <cmath>

#include "dynoloc/batch.hpp"
#include "dynoloc/report.hpp"
#include "dynoloc/simulator.hpp"
#include "test_scenarios.hpp"

using namespace dynoloc;
using dynoloc::testing::office_floor;
using dynoloc::testing::static_clique_noiseless;

TEST_CASE("waypoint mobility advances at the scripted speed") {
    Scenario s;
    NodeSpec n;
    n.id = 0;
    n.position = {0, 0};
    n.waypoints = {{10, 0}, {10, 10}};
    n.speed = 1.0;
    s.nodes.push_back(n);
    NodeSpec st;
    st.id = 1;
    st.position = {3, 4};
    s.nodes.push_back(st);
    Simulator sim(s);

    const Point2 p1 = sim.truth_position(s.nodes[0], 1.0);
    CHECK(p1.x == doctest::Approx(1.0));
    CHECK(p1.y == doctest::Approx(0.0));

    // the loop is position -> (10,0) -> (10,10) -> position, total 40.4 m;
    // reaching the last waypoint wraps back to the start
    const double loop_len = 10.0 + 10.0 + std::hypot(10.0, 10.0);
    const Point2 wrapped = sim.truth_position(s.nodes[0], loop_len);
    CHECK(distance(wrapped, {0, 0}) < 1e-9);

    // static node never moves
    for (double t : {0.0, 5.0, 50.0}) {
        const Point2 p = sim.truth_position(s.nodes[1], t);
        CHECK(p.x == 3.0);
        CHECK(p.y == 4.0);
    }

    // heading is the direction of motion (East at t=1)
    CHECK(sim.truth_heading(s.nodes[0], 1.0) == doctest::Approx(M_PI / 2.0));
}

TEST_CASE("noiseless static clique localizes to sub-centimeter from epoch 1") {
    Simulator sim(static_clique_noiseless(7, 3));
    const auto records = sim.run_all();
    REQUIRE(records.size() == 3);
    for (const auto& rec : records) {
        for (const auto& [id, loc] : rec.localized) {
            CHECK(loc);
            CHECK(rec.error_m.at(id) < 0.01);
        }
    }
}

TEST_CASE("same seed replays bit-identical epochs.csv") {
    const auto scenario = office_floor(42, 0.5, 1.0, 6);
    Simulator a(scenario), b(scenario);
    const auto ra = a.run_all();
    const auto rb = b.run_all();
    CHECK(epochs_csv(ra) == epochs_csv(rb));
    CHECK(trace_jsonl(ra) == trace_jsonl(rb));
}

TEST_CASE("different seeds diverge") {
    const auto s1 = office_floor(1, 0.5, 1.0, 4);
    auto s2 = s1;
    s2.seed = 2;
    Simulator a(s1), b(s2);
    CHECK(epochs_csv(a.run_all()) != epochs_csv(b.run_all()));
}

TEST_CASE("budget is respected every epoch for every strategy") {
    for (Strategy strat :
         {Strategy::Dynoloc, Strategy::HAgnos, Strategy::HDyn, Strategy::Random}) {
        auto s = office_floor(5, 0.5, 1.0, 6);
        s.strategy = strat;
        Simulator sim(s);
        for (const auto& rec : sim.run_all()) {
            CHECK(rec.slots_used <= rec.budget_slots);
        }
    }
}

TEST_CASE("zero-budget starvation freezes estimates") {
    auto s = static_clique_noiseless(3, 3);
    s.refresh_rate_hz = 50.0; // 20 ms epoch, 8 ms slots -> 2 slots, nothing fits
    Simulator sim(s);
    const auto records = sim.run_all();
    for (const auto& rec : records)
        for (const auto& [id, loc] : rec.localized) CHECK_FALSE(loc);
}

TEST_CASE("relative alignment error never exceeds absolute rms error") {
    auto s = office_floor(11, 0.5, 1.0, 10);
    Simulator sim(s);
    for (const auto& rec : sim.run_all()) {
        if (rec.relative_rmse < 0.0) continue;
        double sq = 0.0;
        int n = 0;
        for (const auto& [id, e] : rec.error_m) {
            sq += e * e;
            ++n;
        }
        if (n < 2) continue;
        const double abs_rms = std::sqrt(sq / n);
        CHECK(rec.relative_rmse <= abs_rms + 1e-9);
    }
}

TEST_CASE("evaluate_run aggregates medians") {
    std::vector<EpochRecord> records(2);
    records[0].epoch = 0;
    records[0].error_m = {{0, 1.0}, {1, 1.0}};
    records[0].localized = {{0, true}, {1, true}};
    records[1].epoch = 1;
    records[1].error_m = {{0, 0.5}, {1, 1.5}};
    records[1].localized = {{0, true}, {1, true}};
    Scenario s;
    s.nodes.resize(2);
    const auto summary = evaluate_run(s, records);
    CHECK(summary.median_error == doctest::Approx(1.0));
    CHECK(summary.mean_error == doctest::Approx(1.0));
    CHECK(summary.pct_localized == doctest::Approx(1.0));
    CHECK(summary.median_error_per_epoch.size() == 2);
}

TEST_CASE("serial and parallel batch lanes agree") {
    std::vector<Scenario> jobs;
    for (int i = 0; i < 6; ++i) jobs.push_back(office_floor(100 + i, 0.5, 1.0, 4));
    const auto serial = run_batch_serial(jobs);
    const auto parallel = run_batch_parallel(jobs, 2);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i].median_error == parallel[i].median_error);
        CHECK(serial[i].mean_error == parallel[i].mean_error);
        CHECK(serial[i].pct_localized == parallel[i].pct_localized);
    }
}

TEST_CASE("csv and jsonl writers produce the documented shapes") {
    auto s = static_clique_noiseless(9, 2);
    Simulator sim(s);
    const auto records = sim.run_all();
    const std::string csv = epochs_csv(records);
    CHECK(csv.rfind(kEpochsCsvHeader, 0) == 0);
    // one line per node per epoch plus header
    const auto lines = std::count(csv.begin(), csv.end(), '\n');
    CHECK(lines == 1 + 12 * 2);

    const std::string jsonl = trace_jsonl(records);
    CHECK(std::count(jsonl.begin(), jsonl.end(), '\n') == 2);

    const auto summary = evaluate_run(s, records);
    const std::string json = summary_json(s, summary, false);
    CHECK(json.find("median_error_m") != std::string::npos);
}
