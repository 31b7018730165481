#pragma once

#include <deque>
#include <map>
#include <optional>
#include <vector>

#include "dynoloc/geometry.hpp"
#include "dynoloc/topology.hpp"

namespace dynoloc {

// Symmetric partial distance matrix with a presence mask and per-entry
// measurement timestamps. Node ids map to matrix indices via `index_of`.
class PartialEDM {
public:
    explicit PartialEDM(std::vector<NodeId> node_ids);

    int size() const { return static_cast<int>(ids_.size()); }
    const std::vector<NodeId>& ids() const { return ids_; }
    int index_of(NodeId id) const; // -1 when absent

    void set(NodeId a, NodeId b, double dist, double timestamp);
    bool measured(NodeId a, NodeId b) const;
    double dist(NodeId a, NodeId b) const;
    double dist_idx(int i, int j) const { return d_[at(i, j)]; }
    bool measured_idx(int i, int j) const { return mask_[at(i, j)]; }
    double timestamp_idx(int i, int j) const { return ts_[at(i, j)]; }
    void set_idx(int i, int j, double dist, double timestamp, bool measured);

    bool complete() const;

private:
    std::size_t at(int i, int j) const { return static_cast<std::size_t>(i) * ids_.size() + j; }
    std::vector<NodeId> ids_;
    std::map<NodeId, int> index_;
    std::vector<double> d_;
    std::vector<bool> mask_;
    std::vector<double> ts_;
};

struct MultilaterationOutput {
    std::map<NodeId, Point2> positions;
    std::vector<NodeId> inconsistent; // placed at least-squares point anyway
};

inline constexpr double kTrilaterationResidualTol = 0.5; // meters

// Canonical frame: first founding node at the origin, second on +x, third
// in the upper half-plane; later members trilaterated from their support
// edges in admission order.
MultilaterationOutput sequential_multilaterate(const RigidGraph& rigid);

// Same canonical frame and admission order, but each member is placed by
// least squares over every measured entry to already-placed members, which
// keeps chained placement error from compounding under range noise. Falls
// back to the support edges when the EDM offers fewer than 3 entries. When
// the anchors are nearly collinear the mirror solution is equally valid;
// side_hint (e.g. the previous epoch's frame-stable coordinates) breaks
// that tie.
MultilaterationOutput multilaterate_dense(const RigidGraph& rigid, const PartialEDM& edm,
                                          const std::map<NodeId, Point2>* side_hint = nullptr);

struct EdmCompletionParams {
    int max_iter = 200;
    double lambda0 = 1.0;
    double delta_lambda = 0.1;
    double min_improvement = 1e-5; // relative, 0.001%
};

// Iterative proximity adjustment: per sweep every measured pair is moved
// once (largest signed residual first), missing entries are refilled from
// the coordinates, and the step size decays as 1/(1 + c*delta_lambda).
// Measured entries are never modified.
PartialEDM complete_edm(const PartialEDM& edm,
                        const std::map<NodeId, Point2>& init_coords,
                        const EdmCompletionParams& params = {});

struct RelativeEmbedding {
    std::map<NodeId, Point2> coordinates; // centroid at the origin
    int component_id = 0;
    double strain = 0.0;
};

// Classical MDS: double-center the squared distances, eigendecompose, embed
// on the two leading positive eigenvectors. Throws std::runtime_error
// ("degenerate configuration") when the spectrum does not span 2D (except
// for the two-point case, which embeds on a line).
RelativeEmbedding cmds_embed(const PartialEDM& full_edm, int component_id = 0);

enum class PlacementMethod { TwoRangeDisambiguation, HeadingProjection };

struct NonRigidPlacement {
    NodeId node = 0;
    std::vector<Point2> candidates;
    Point2 chosen;
    PlacementMethod method = PlacementMethod::TwoRangeDisambiguation;
    bool low_confidence = false;
};

struct TwoCoreInput {
    NodeId node = 0;
    NodeId anchor_a = 0;
    double range_a = 0.0;
    NodeId anchor_b = 0;
    double range_b = 0.0;
};

// Intersects the two range circles and eliminates the candidate that sits
// next to an embedded node the 2-core node has no link to; falls back to
// the previous-epoch position, then to y-then-x order.
NonRigidPlacement resolve_two_core(const TwoCoreInput& input,
                                   const std::map<NodeId, Point2>& embedding,
                                   const ConnectivityGraph& graph,
                                   double proximity_range,
                                   const std::optional<Point2>& previous_position);

// Places a single-edge node along a North-referenced bearing from its
// anchor; the bearing comes from the node's own heading, with the sign that
// keeps it closest to its previous position.
std::optional<NonRigidPlacement> resolve_one_core(NodeId node, const Point2& anchor_abs,
                                                  double range,
                                                  const std::optional<double>& heading,
                                                  const std::optional<Point2>& previous_position);

using LocationHistory = std::map<NodeId, std::deque<Point2>>;

inline constexpr int kSmoothingWindow = 3;

// Per-node moving average over up to window_len most recent epochs.
std::map<NodeId, Point2> smooth_locations(const LocationHistory& history,
                                          int window_len = kSmoothingWindow);

} // namespace dynoloc
