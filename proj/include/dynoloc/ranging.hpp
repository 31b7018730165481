#pragma once

#include <vector>

#include "dynoloc/geometry.hpp"
#include "dynoloc/metrics.hpp"
#include "dynoloc/rng.hpp"
#include "dynoloc/topology.hpp"

namespace dynoloc {

inline constexpr double kSpeedOfLightMetersPerUs = 299.792458;

// Interval measurements of a double-sided exchange. D1/R1 are the round and
// reply intervals on the initiator's clock, D2/R2 the same on the
// responder's clock.
struct TwrTimestamps {
    double d1 = 0.0; // microseconds
    double r1 = 0.0;
    double d2 = 0.0;
    double r2 = 0.0;
};

// Mean of (D1*D2 - R1*R2) / (2*(D1+R1)) and the same over 2*(D2+R2); exact
// for ideal clocks regardless of reply delays, and first-order immune to
// clock-frequency offset. Throws on a non-physical (non-positive) result.
double tof_from_timestamps(const TwrTimestamps& t);

// Builds the intervals of a full exchange with given true time of flight,
// reply delays and per-side fractional clock offsets (e.g. 20e-6 = 20 ppm).
TwrTimestamps simulate_twr_exchange(double tof_us, double reply_initiator_us,
                                    double reply_responder_us,
                                    double initiator_ppm_offset,
                                    double responder_ppm_offset);

// One initiator ranging N responders: Init, N polls, broadcast response,
// N finals.
int slots_for_aggregated_session(int responder_count);

struct ChannelParams {
    double los_max_range = 70.0;         // meters
    double nlos_base_range = 30.0;       // meters
    double per_wall_range_penalty = 2.0; // meters per wall, floored at 10 m
    double los_sigma = 0.08;             // meters
    double los_bias = 0.05;              // meters
    double nlos_bias_mean_per_wall = 0.5; // meters per wall
    double nlos_bias_base = 0.25;        // meters
    double bias_cap = 10.0;              // meters
    double slot_time_low_rate_ms = 8.0;
    double slot_time_high_rate_ms = 2.0;
    double clock_ppm_max = 20.0;         // per-node offset drawn in [-max, max]

    bool valid() const {
        return los_max_range > 0 && nlos_base_range > 0 && per_wall_range_penalty > 0 &&
               los_sigma > 0 && los_bias > 0 && nlos_bias_mean_per_wall > 0 &&
               nlos_bias_base > 0 && bias_cap >= nlos_bias_base &&
               slot_time_low_rate_ms > 0 && slot_time_high_rate_ms > 0;
    }
};

// Noiseless variant used by identity tests and analytic scenarios.
ChannelParams noiseless_channel();

struct WallSegment {
    Point2 a;
    Point2 b;
};

struct LinkState {
    bool connected = false;
    bool is_los = false;
    int wall_count = 0;
};

LinkState simulate_link(const Point2& pos_a, const Point2& pos_b,
                        const std::vector<WallSegment>& walls,
                        const ChannelParams& params);

// LOS: truth + clipped positive normal bias. NLOS: truth + capped
// exponential bias growing with wall count. Bias is never negative beyond
// the LOS clip.
double measure_range(double true_distance, bool is_los, int wall_count,
                     const ChannelParams& params, RngStream& rng);

// Synthesizes the four link-quality features so that LOS links separate
// from NLOS links and quality degrades with wall count.
CirFeatures synthesize_cir_features(bool is_los, int wall_count, RngStream& rng);

struct RangeMeasurement {
    NodeId a = 0;
    NodeId b = 0;
    double range = 0.0;       // meters
    double timestamp = 0.0;   // seconds
    double lq_at_measure = 0.0;
    double truth_range = 0.0; // simulator-only annotation
};

} // namespace dynoloc
