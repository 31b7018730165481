#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dynoloc/metrics.hpp"
#include "dynoloc/ranging.hpp"
#include "dynoloc/topology.hpp"

namespace dynoloc {

struct RangingBudget {
    double epoch_duration = 1.0; // seconds
    double slot_time_ms = 8.0;
    int total_slots = 125;
    int slots_used = 0;
    // flat control-plane cost charged per scheduled session, in slots
    int overhead_slots_per_session = 0;

    static RangingBudget from_refresh_rate(double refresh_rate_hz, double slot_time_ms,
                                           double wifi_overhead_ms = 0.0);
    int session_cost(int responder_count) const;
};

enum class SessionPurpose { Admission, Refresh, ExcludedNode };

struct RangingSession {
    NodeId initiator = 0;
    std::vector<NodeId> responders;
    SessionPurpose purpose = SessionPurpose::Admission;
    int slot_cost = 0; // includes per-session overhead
};

struct RangingSchedule {
    std::vector<RangingSession> sessions;
    // indices into sessions, grouped into mutually non-interfering rounds
    std::vector<std::vector<std::size_t>> concurrency_rounds;
    int sequential_slot_cost = 0;

    // round-wise cost: sum over rounds of the max session cost per round;
    // falls back to the sequential cost when rounds were not formed
    int effective_slot_cost() const;
};

struct ExcludedNode {
    NodeId node = 0;
    std::vector<NodeId> available_edges; // rigid-graph endpoints, < 3 of them
};

struct EdgeSelectionResult {
    RangingSchedule schedule;
    std::vector<ExcludedNode> excluded;
};

struct SchedulerOptions {
    bool use_link_quality = true; // ablation switch for the L metric
};

// Node priority used for selection: descending mobility metric, ties by
// higher core number, higher degree, lower id.
std::vector<NodeId> selection_order(const ConnectivityGraph& graph,
                                    const CoreDecomposition& decomp,
                                    const std::map<NodeId, NodeTelemetry>& telemetry);

// One node's aggregated session: its 3 max-LQ edges into the rigid graph,
// or its few available edges when not admissible. Nullopt when the node has
// no usable edge.
std::optional<RangingSession> make_session_for_node(const ConnectivityGraph& graph,
                                                    const RigidGraph& rigid, NodeId node,
                                                    const RangingBudget& budget,
                                                    const SchedulerOptions& options = {});

// Mobility-first edge selection: nodes in descending-M order get one
// aggregated session each (3 max-LQ edges into the rigid graph, or their
// few available edges when not admissible); leftover slots refresh the
// stalest previously measured rigid edges.
EdgeSelectionResult select_edges_epoch(const ConnectivityGraph& graph,
                                       const CoreDecomposition& decomp,
                                       const RigidGraph& rigid,
                                       const std::map<NodeId, NodeTelemetry>& telemetry,
                                       const RangingBudget& budget,
                                       const SchedulerOptions& options = {});

// Greedy conflict-graph coloring; two sessions conflict when they share a
// node or any two members are within the interference range.
void form_concurrency_rounds(RangingSchedule& schedule, double interference_range,
                             const std::map<NodeId, Point2>& positions);

// Round-robin over every connectivity edge, one pair per session; the
// cursor persists across epochs.
RangingSchedule baseline_h_agnos(const ConnectivityGraph& graph,
                                 const RangingBudget& budget,
                                 std::size_t& round_robin_cursor);

// Mobility-ordered like the main selector but blind to rigidity and link
// quality: each node's edges taken in ascending-neighbor-id order.
RangingSchedule baseline_h_dyn(const ConnectivityGraph& graph,
                               const std::map<NodeId, NodeTelemetry>& telemetry,
                               const RangingBudget& budget);

// Uniform edge sample filling the budget.
RangingSchedule baseline_random(const ConnectivityGraph& graph,
                                const RangingBudget& budget, RngStream& rng);

enum class Strategy { Dynoloc, HAgnos, HDyn, Random };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& name); // throws on unknown

} // namespace dynoloc
