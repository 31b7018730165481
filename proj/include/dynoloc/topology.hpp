#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <vector>

#include "dynoloc/geometry.hpp"

namespace dynoloc {

using NodeId = int;

struct LinkQuality {
    double value = 0.0;       // dimensionless, 0 means unreachable
    double last_update = 0.0; // seconds
};

// Undirected connectivity graph weighted by link quality. Edges with
// LQ == 0 are treated as absent for decomposition and admission.
class ConnectivityGraph {
public:
    void add_node(NodeId id);
    void set_link(NodeId a, NodeId b, LinkQuality lq);
    void remove_link(NodeId a, NodeId b);

    bool has_node(NodeId id) const { return adj_.count(id) > 0; }
    bool has_link(NodeId a, NodeId b) const;
    LinkQuality link(NodeId a, NodeId b) const; // zero LQ when absent

    const std::set<NodeId>& nodes() const { return node_ids_; }
    std::vector<NodeId> neighbors(NodeId id) const; // LQ > 0 only
    int degree(NodeId id) const;
    std::vector<std::pair<NodeId, NodeId>> edges() const; // a < b, LQ > 0

private:
    std::set<NodeId> node_ids_;
    std::map<NodeId, std::map<NodeId, LinkQuality>> adj_;
};

struct CoreDecomposition {
    std::map<NodeId, int> core_number;              // 1, 2 or 3
    std::vector<std::set<NodeId>> three_core_components;

    int core_of(NodeId id) const {
        auto it = core_number.find(id);
        return it == core_number.end() ? 0 : it->second;
    }
    // degree restricted to the 3-core subgraph
    std::map<NodeId, int> three_core_degree;
};

// Iterative peeling: degree<=1 nodes go to core 1, then degree<=2 nodes to
// core 2 (cascades re-examined after every deletion); the remainder is the
// 3-core, split into connected components.
CoreDecomposition k_core_decompose(const ConnectivityGraph& g);

struct RigidEdge {
    NodeId a = 0;
    NodeId b = 0;
    double range = 0.0;     // meters
    double timestamp = 0.0; // seconds, when last measured
};

struct AdmissionEntry {
    NodeId node = 0;
    std::vector<NodeId> support; // empty for founding members
};

// Incrementally built rigid graph: a founding triangle plus members admitted
// with three support edges to pairwise non-collinear prior members.
struct RigidGraph {
    std::vector<NodeId> members;          // admission order
    std::array<NodeId, 3> anchor_triangle{-1, -1, -1};
    std::map<std::pair<NodeId, NodeId>, RigidEdge> edges; // key a < b
    std::vector<AdmissionEntry> admission_log;

    bool empty() const { return members.empty(); }
    bool is_member(NodeId id) const;
    bool has_edge(NodeId a, NodeId b) const;
    const RigidEdge* edge(NodeId a, NodeId b) const;
    void put_edge(NodeId a, NodeId b, double range, double timestamp);
    std::vector<NodeId> edge_partners(NodeId id) const;
};

// True iff candidate has >= 3 usable edges into the rigid graph whose
// endpoints contain at least one non-collinear triple.
bool is_rigid_admissible(const ConnectivityGraph& g, NodeId candidate,
                         const RigidGraph& rigid,
                         const std::map<NodeId, Point2>& positions);

// Picks, among candidate's rigid-graph neighbors, the 3 support nodes with
// maximal link quality whose known positions are non-collinear. Returns an
// empty vector when no such triple exists.
std::vector<NodeId> select_support_nodes(const ConnectivityGraph& g, NodeId candidate,
                                         const RigidGraph& rigid,
                                         const std::map<NodeId, Point2>& positions);

using RangeOracle = std::function<double(NodeId, NodeId)>;

// Optional airtime gate: called with the responder count before each
// ranging session the bootstrap wants to run; returning false stops further
// ranging (the reservation is consumed either way).
using SessionGate = std::function<bool(int)>;

// Links below this quality are kept out of the founding triangle while any
// better triangle exists; a biased founding range shears the entire frame.
inline constexpr double kFoundingLqFloor = 8.0;

// Support triples flatter than this normalized-area threshold make the
// trilateration reflection-ambiguous and need extra evidence to admit.
inline constexpr double kConditionedAreaTol = 0.05;

// Grows a rigid graph over one 3-core component: ranks nodes by descending
// 3-core degree (ties by ascending id), founds a triangle on the best
// mutually connected non-degenerate triple, then greedily admits the rest.
// Throws std::runtime_error("no rigid seed") when no valid triangle exists.
// preferred_triangle, when given and still mutually connected, is tried
// before the ranked scan so a re-bootstrap keeps the previous canonical
// frame whenever possible.
RigidGraph bootstrap_rigid_graph(const ConnectivityGraph& g,
                                 const CoreDecomposition& decomp,
                                 const RangeOracle& measure,
                                 std::size_t component_index = 0,
                                 double timestamp = 0.0,
                                 const SessionGate& gate = {},
                                 const std::array<NodeId, 3>* preferred_triangle = nullptr);

// Removes members that left the 3-core or lost their admission edges;
// removal cascades through dependents. A broken founding triangle empties
// the graph (caller re-bootstraps).
RigidGraph purge_non_rigid(const RigidGraph& rigid, const ConnectivityGraph& g);

// Replays the admission log, multilaterating each member from its support
// edges; the founding triangle is placed canonically (first node at origin,
// second on +x, third in the upper half-plane).
std::map<NodeId, Point2> replay_positions(const RigidGraph& rigid);

} // namespace dynoloc
