#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dynoloc/ranging.hpp"
#include "dynoloc/scheduler.hpp"

namespace dynoloc {

struct NodeSpec {
    NodeId id = 0;
    Point2 position{0.0, 0.0};
    std::vector<Point2> waypoints; // closed circuit; empty = static
    double speed = 0.0;            // m/s
    bool is_reference = false;
    // optional facing for static nodes; when set, the heading feeds the
    // absolute-frame rotation even without motion
    std::optional<double> heading;
};

struct Scenario {
    double arena_width = 50.0;
    double arena_height = 40.0;
    std::vector<WallSegment> walls;
    std::vector<NodeSpec> nodes;
    ChannelParams radio;
    double slot_time_ms = 8.0;
    double refresh_rate_hz = 1.0;
    Strategy strategy = Strategy::Dynoloc;
    std::uint64_t seed = 1;
    int epochs = 30;
    double heading_noise_sigma_deg = 2.0;
    bool use_link_quality = true;
    double wifi_overhead_ms = 8.0;
    double interference_range = 0.0; // 0 -> defaults to the LOS range
    int smoothing_window = 3;
    std::string name = "scenario";

    double interference_range_or_default() const {
        return interference_range > 0.0 ? interference_range : radio.los_max_range;
    }
};

struct ValidationIssue {
    std::string field; // e.g. "nodes[3].id"
    std::string message;
};

std::vector<ValidationIssue> validate_scenario(const Scenario& s);

// Parses the scenario file format: [arena], [[walls]], [[nodes]], [radio]
// and [run] sections of key = value lines. Throws std::runtime_error with a
// line-numbered message on malformed input.
Scenario load_scenario(const std::string& path);
Scenario parse_scenario(const std::string& text, const std::string& origin = "<string>");

// Serializes a scenario back to the file format (used by tests and the
// bundled sample generator).
std::string scenario_to_text(const Scenario& s);

} // namespace dynoloc
