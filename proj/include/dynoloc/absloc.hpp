#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <vector>

#include "dynoloc/geometry.hpp"
#include "dynoloc/topology.hpp"

namespace dynoloc {

// Global frame convention: +x East, +y North; headings and bearings are
// measured clockwise from magnetic North, so a bearing b maps to the unit
// vector (sin b, cos b).

inline double bearing_to_cartesian(double bearing) { return M_PI / 2.0 - bearing; }
inline double cartesian_to_bearing(double angle) { return wrap_angle(M_PI / 2.0 - angle); }

// A pair of component members whose headings pin the global slope of their
// connecting edge (motion along the edge, e.g. nodes walking in file).
// Directed: the edge a->b points along the shared heading direction.
struct HeadingPair {
    NodeId a = 0;
    NodeId b = 0;
    double heading_a = 0.0; // radians clockwise from North
    double heading_b = 0.0;
    double range = 0.0;     // measured edge length, > 0
};

inline constexpr double kHeadingAgreementTol = M_PI / 4.0;
inline constexpr double kHeadingSpeedGate = 0.3; // m/s

// Per-edge rotation estimates: global slope (circular mean of the endpoint
// headings) minus the edge's slope in the embedding, one entry per usable
// pair. Pairs whose headings disagree beyond the tolerance are skipped.
std::vector<double> rotation_estimates(const std::map<NodeId, Point2>& embedding,
                                       const std::vector<HeadingPair>& pairs,
                                       bool flipped = false);

// Rotation that maps the relative frame onto the global frame: circular
// mean of the per-edge estimates. Throws std::runtime_error
// ("rotation unresolvable") with fewer than two usable pairs; the caller
// then falls back to the previous epoch's rotation.
double rotation_from_headings(const std::map<NodeId, Point2>& embedding,
                              const std::vector<HeadingPair>& pairs,
                              bool flipped = false);

struct FlipDecision {
    bool flip = false;
    bool low_confidence = false;
};

// Reflection test via vertex ordering about the centroid: nodes visited in
// the embedding's angular order should trace a same-orientation polygon in
// the heading-implied frame (e.g. dead-reckoned predictions). When proxy
// positions are unavailable, falls back to choosing the flip state whose
// per-edge rotation estimates agree best.
FlipDecision flip_correction(const std::map<NodeId, Point2>& embedding,
                             const std::vector<HeadingPair>& pairs,
                             const std::map<NodeId, Point2>& heading_implied_positions,
                             bool previous_flip = false);

struct AbsoluteFrame {
    NodeId reference_node = -1;
    Point2 reference_global{0.0, 0.0};
    std::map<int, RigidTransform> per_component_transform;
};

// Flip, rotate, then translate so the reference node lands on its known
// global position. Returns the applied transform alongside the coordinates.
struct AbsoluteResult {
    std::map<NodeId, Point2> positions;
    RigidTransform transform;
};
AbsoluteResult to_absolute(const std::map<NodeId, Point2>& embedding,
                           NodeId reference_node, const Point2& reference_global,
                           double theta, bool flip);

} // namespace dynoloc
