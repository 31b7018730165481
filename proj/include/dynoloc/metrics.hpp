#pragma once

#include "dynoloc/topology.hpp"

namespace dynoloc {

// Per-node kinematics proxy driving ranging priority. M accumulates
// dead-reckoned displacement while the node moves and grows as e^TsL - 1
// while it is static, so stale static nodes are eventually re-ranged.
struct NodeTelemetry {
    double mobility_metric = 0.0;    // M, meters of location uncertainty
    double velocity_estimate = 0.0;  // m/s, dead-reckoned
    double heading = 0.0;            // radians clockwise from North
    double time_since_localization = 0.0; // TsL, seconds
    double last_imu_read = 0.0;      // seconds
};

inline constexpr double kStaticThreshold = 1e-3; // m/s and m/s^2

NodeTelemetry update_mobility(const NodeTelemetry& t, double accel, double dt);
NodeTelemetry reset_on_localize(const NodeTelemetry& t);

// Scalar features extracted from a channel impulse response around the
// detected first path. All ratios; larger values mean more NLOS-like.
struct CirFeatures {
    double f1 = 0.0; // mean peak count in the pre-first-path window
    double f2 = 0.0; // noise std / first-path amplitude
    double f3 = 1.0; // peak amplitude / first-path amplitude
    double f4 = 1.0; // total received power / first-path power
};

inline constexpr double kLinkQualityEpsilon = 0.005;

// LQ = 1 / (eps + f1*f2*f3*f4); strictly decreasing in each feature.
LinkQuality link_quality_from_cir(const CirFeatures& c, double now = 0.0);

inline constexpr double kLinkStaleThreshold = 30.0; // seconds

// Any link not refreshed within the threshold gets LQ = 0 (unreachable).
ConnectivityGraph decay_stale_links(const ConnectivityGraph& g, double now,
                                    double threshold = kLinkStaleThreshold);

} // namespace dynoloc
