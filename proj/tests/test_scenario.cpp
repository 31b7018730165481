#include <doctest.h>

#include "dynoloc/scenario.hpp"

using namespace dynoloc;

namespace {
const char* kSample = R"(# sample floor
[arena]
width = 50.0
height = 40.0

[[walls]]
from = [10.0, 0.0]
to = [10.0, 25.0]

[[nodes]]
id = 0
position = [5.0, 5.0]
reference = true

[[nodes]]
id = 1
position = [20.0, 5.0]
waypoints = [[20.0, 30.0], [40.0, 30.0]]
speed = 1.0

[radio]
los_max_range = 70.0
data_rate = "low"

[run]
refresh_rate = 1.0
strategy = "dynoloc"
seed = 7
epochs = 10
heading_noise_sigma = 2.0
name = "sample"
)";
}

TEST_CASE("parse a well-formed scenario") {
    const Scenario s = parse_scenario(kSample);
    CHECK(s.arena_width == 50.0);
    CHECK(s.walls.size() == 1);
    REQUIRE(s.nodes.size() == 2);
    CHECK(s.nodes[0].is_reference);
    CHECK(s.nodes[1].waypoints.size() == 2);
    CHECK(s.nodes[1].speed == 1.0);
    CHECK(s.strategy == Strategy::Dynoloc);
    CHECK(s.seed == 7);
    CHECK(s.epochs == 10);
    CHECK(s.slot_time_ms == 8.0);
    CHECK(validate_scenario(s).empty());
}

TEST_CASE("parser reports line numbers for malformed input") {
    CHECK_THROWS_WITH_AS(parse_scenario("[arena]\nwidth == 5\n", "f"),
                         doctest::Contains("f:2"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_scenario("width = 5\n", "f"),
                         doctest::Contains("outside of any section"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_scenario("[nope]\nx = 1\n", "f"),
                         doctest::Contains("unknown section"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_scenario("[run]\nstrategy = \"bogus\"\n", "f"),
                         doctest::Contains("strategy"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_scenario("[arena]\nwidth = 5\nwidth = 6\n", "f"),
                         doctest::Contains("duplicate key"), std::runtime_error);
}

TEST_CASE("validation catches duplicate ids and speed range") {
    Scenario s = parse_scenario(kSample);
    s.nodes.push_back(s.nodes[1]); // duplicate id 1
    s.nodes.back().speed = 5.0;

    const auto issues = validate_scenario(s);
    REQUIRE(issues.size() == 2);
    CHECK(issues[0].field == "nodes[2].id");
    CHECK(issues[0].message == "duplicates nodes[1].id");
    CHECK(issues[1].field == "nodes[2].speed");
}

TEST_CASE("validation catches multiple references and bad run settings") {
    Scenario s = parse_scenario(kSample);
    s.nodes[1].is_reference = true;
    s.epochs = 0;
    const auto issues = validate_scenario(s);
    bool saw_ref = false, saw_epochs = false;
    for (const auto& i : issues) {
        if (i.field == "nodes") saw_ref = true;
        if (i.field == "run.epochs") saw_epochs = true;
    }
    CHECK(saw_ref);
    CHECK(saw_epochs);
}

TEST_CASE("moving node requires waypoints") {
    Scenario s = parse_scenario(kSample);
    s.nodes[1].waypoints.clear();
    const auto issues = validate_scenario(s);
    REQUIRE(issues.size() == 1);
    CHECK(issues[0].field == "nodes[1].waypoints");
}

TEST_CASE("scenario text round-trips") {
    Scenario s = parse_scenario(kSample);
    s.nodes[0].heading = 1.25;
    const Scenario again = parse_scenario(scenario_to_text(s));
    CHECK(again.nodes.size() == s.nodes.size());
    CHECK(again.nodes[0].heading.has_value());
    CHECK(*again.nodes[0].heading == doctest::Approx(1.25));
    CHECK(again.seed == s.seed);
    CHECK(again.strategy == s.strategy);
    CHECK(again.radio.los_max_range == s.radio.los_max_range);
    CHECK(validate_scenario(again).empty());
}

TEST_CASE("high data rate selects the short slot") {
    Scenario s = parse_scenario("[radio]\ndata_rate = \"high\"\n");
    CHECK(s.slot_time_ms == 2.0);
}
