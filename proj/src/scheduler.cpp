#include "dynoloc/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace dynoloc {

RangingBudget RangingBudget::from_refresh_rate(double refresh_rate_hz, double slot_time_ms,
                                               double wifi_overhead_ms) {
    if (refresh_rate_hz <= 0.0 || slot_time_ms <= 0.0)
        throw std::invalid_argument("RangingBudget: rate and slot time must be > 0");
    RangingBudget b;
    b.epoch_duration = 1.0 / refresh_rate_hz;
    b.slot_time_ms = slot_time_ms;
    b.total_slots = static_cast<int>(std::floor(b.epoch_duration * 1000.0 / slot_time_ms));
    b.overhead_slots_per_session =
        static_cast<int>(std::ceil(wifi_overhead_ms / slot_time_ms));
    return b;
}

int RangingBudget::session_cost(int responder_count) const {
    return slots_for_aggregated_session(responder_count) + overhead_slots_per_session;
}

int RangingSchedule::effective_slot_cost() const {
    if (concurrency_rounds.empty()) return sequential_slot_cost;
    int total = 0;
    for (const auto& round : concurrency_rounds) {
        int worst = 0;
        for (std::size_t idx : round) worst = std::max(worst, sessions[idx].slot_cost);
        total += worst;
    }
    return total;
}

std::vector<NodeId> selection_order(const ConnectivityGraph& graph,
                                    const CoreDecomposition& decomp,
                                    const std::map<NodeId, NodeTelemetry>& telemetry) {
    std::vector<NodeId> order(graph.nodes().begin(), graph.nodes().end());
    auto mobility = [&telemetry](NodeId id) {
        auto it = telemetry.find(id);
        return it == telemetry.end() ? 0.0 : it->second.mobility_metric;
    };
    std::sort(order.begin(), order.end(), [&](NodeId a, NodeId b) {
        const double ma = mobility(a), mb = mobility(b);
        if (ma != mb) return ma > mb;
        const int ca = decomp.core_of(a), cb = decomp.core_of(b);
        if (ca != cb) return ca > cb;
        const int da = graph.degree(a), db = graph.degree(b);
        if (da != db) return da > db;
        return a < b;
    });
    return order;
}

std::optional<RangingSession> make_session_for_node(const ConnectivityGraph& graph,
                                                    const RigidGraph& rigid, NodeId node,
                                                    const RangingBudget& budget,
                                                    const SchedulerOptions& options) {
    struct Cand {
        NodeId id;
        double lq;
    };
    std::vector<Cand> cands;
    for (NodeId nb : graph.neighbors(node))
        if (rigid.is_member(nb) && nb != node)
            cands.push_back({nb, graph.link(node, nb).value});

    RangingSession session;
    session.initiator = node;
    if (cands.size() >= 3) {
        if (options.use_link_quality) {
            std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
                if (a.lq != b.lq) return a.lq > b.lq;
                return a.id < b.id;
            });
        } else {
            std::sort(cands.begin(), cands.end(),
                      [](const Cand& a, const Cand& b) { return a.id < b.id; });
        }
        session.responders = {cands[0].id, cands[1].id, cands[2].id};
        session.purpose =
            rigid.is_member(node) ? SessionPurpose::Refresh : SessionPurpose::Admission;
    } else {
        if (cands.empty()) return std::nullopt;
        for (const Cand& c : cands) session.responders.push_back(c.id);
        session.purpose = SessionPurpose::ExcludedNode;
    }
    session.slot_cost = budget.session_cost(static_cast<int>(session.responders.size()));
    return session;
}

namespace {
std::pair<NodeId, NodeId> ordered(NodeId a, NodeId b) {
    return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}
} // namespace

EdgeSelectionResult select_edges_epoch(const ConnectivityGraph& graph,
                                       const CoreDecomposition& decomp,
                                       const RigidGraph& rigid,
                                       const std::map<NodeId, NodeTelemetry>& telemetry,
                                       const RangingBudget& budget,
                                       const SchedulerOptions& options) {
    EdgeSelectionResult result;
    RangingSchedule& schedule = result.schedule;
    if (graph.nodes().empty()) return result;

    int remaining = budget.total_slots - budget.slots_used;
    std::set<NodeId> initiated;
    std::set<std::pair<NodeId, NodeId>> covered;

    for (NodeId node : selection_order(graph, decomp, telemetry)) {
        auto session = make_session_for_node(graph, rigid, node, budget, options);
        if (!session) continue;
        if (session->purpose == SessionPurpose::ExcludedNode)
            result.excluded.push_back({node, session->responders});
        if (session->slot_cost > remaining) break; // budget exhausted
        remaining -= session->slot_cost;
        initiated.insert(node);
        for (NodeId r : session->responders) covered.insert(ordered(node, r));
        schedule.sessions.push_back(std::move(*session));
    }

    // leftover budget refreshes the stalest measured rigid edges
    std::vector<const RigidEdge*> stale;
    for (const auto& [key, e] : rigid.edges)
        if (!covered.count(key)) stale.push_back(&e);
    std::sort(stale.begin(), stale.end(), [](const RigidEdge* a, const RigidEdge* b) {
        if (a->timestamp != b->timestamp) return a->timestamp < b->timestamp;
        return std::make_pair(a->a, a->b) < std::make_pair(b->a, b->b);
    });
    const int refresh_cost = budget.session_cost(1);
    for (const RigidEdge* e : stale) {
        if (remaining < refresh_cost) break;
        NodeId initiator, responder;
        if (!initiated.count(e->a)) {
            initiator = e->a;
            responder = e->b;
        } else if (!initiated.count(e->b)) {
            initiator = e->b;
            responder = e->a;
        } else {
            continue; // both endpoints already ran a session this epoch
        }
        RangingSession session;
        session.initiator = initiator;
        session.responders = {responder};
        session.purpose = SessionPurpose::Refresh;
        session.slot_cost = refresh_cost;
        remaining -= refresh_cost;
        initiated.insert(initiator);
        covered.insert(ordered(initiator, responder));
        schedule.sessions.push_back(std::move(session));
    }

    schedule.sequential_slot_cost = budget.total_slots - budget.slots_used - remaining;
    return result;
}

void form_concurrency_rounds(RangingSchedule& schedule, double interference_range,
                             const std::map<NodeId, Point2>& positions) {
    schedule.concurrency_rounds.clear();
    if (schedule.sessions.empty()) return;

    auto members_of = [](const RangingSession& s) {
        std::vector<NodeId> m = s.responders;
        m.push_back(s.initiator);
        return m;
    };
    auto conflicts = [&](const RangingSession& a, const RangingSession& b) {
        for (NodeId ma : members_of(a))
            for (NodeId mb : members_of(b)) {
                if (ma == mb) return true;
                auto ia = positions.find(ma);
                auto ib = positions.find(mb);
                if (ia == positions.end() || ib == positions.end())
                    return true; // unknown position, assume interference
                if (distance(ia->second, ib->second) <= interference_range) return true;
            }
        return false;
    };

    std::vector<std::size_t> order(schedule.sessions.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&schedule](std::size_t a, std::size_t b) {
        return schedule.sessions[a].slot_cost > schedule.sessions[b].slot_cost;
    });

    for (std::size_t idx : order) {
        bool placed = false;
        for (auto& round : schedule.concurrency_rounds) {
            bool ok = true;
            for (std::size_t other : round)
                if (conflicts(schedule.sessions[idx], schedule.sessions[other])) {
                    ok = false;
                    break;
                }
            if (ok) {
                round.push_back(idx);
                placed = true;
                break;
            }
        }
        if (!placed) schedule.concurrency_rounds.push_back({idx});
    }
}

RangingSchedule baseline_h_agnos(const ConnectivityGraph& graph,
                                 const RangingBudget& budget,
                                 std::size_t& round_robin_cursor) {
    RangingSchedule schedule;
    const auto edges = graph.edges();
    if (edges.empty()) return schedule;

    int remaining = budget.total_slots - budget.slots_used;
    const int cost = budget.session_cost(1);
    std::size_t scheduled = 0;
    while (remaining >= cost && scheduled < edges.size()) {
        const auto& [a, b] = edges[round_robin_cursor % edges.size()];
        round_robin_cursor = (round_robin_cursor + 1) % edges.size();
        RangingSession session;
        session.initiator = a;
        session.responders = {b};
        session.purpose = SessionPurpose::Refresh;
        session.slot_cost = cost;
        schedule.sessions.push_back(std::move(session));
        remaining -= cost;
        ++scheduled;
    }
    schedule.sequential_slot_cost = static_cast<int>(scheduled) * cost;
    return schedule;
}

RangingSchedule baseline_h_dyn(const ConnectivityGraph& graph,
                               const std::map<NodeId, NodeTelemetry>& telemetry,
                               const RangingBudget& budget) {
    RangingSchedule schedule;
    int remaining = budget.total_slots - budget.slots_used;
    std::set<std::pair<NodeId, NodeId>> covered;

    std::vector<NodeId> order(graph.nodes().begin(), graph.nodes().end());
    auto mobility = [&telemetry](NodeId id) {
        auto it = telemetry.find(id);
        return it == telemetry.end() ? 0.0 : it->second.mobility_metric;
    };
    std::sort(order.begin(), order.end(), [&](NodeId a, NodeId b) {
        const double ma = mobility(a), mb = mobility(b);
        if (ma != mb) return ma > mb;
        return a < b;
    });

    for (NodeId node : order) {
        std::vector<NodeId> targets;
        for (NodeId nb : graph.neighbors(node)) {
            if (covered.count(ordered(node, nb))) continue;
            targets.push_back(nb);
            if (targets.size() == 3) break;
        }
        if (targets.empty()) continue;
        const int cost = budget.session_cost(static_cast<int>(targets.size()));
        if (cost > remaining) break;
        remaining -= cost;
        for (NodeId t : targets) covered.insert(ordered(node, t));
        RangingSession session;
        session.initiator = node;
        session.responders = std::move(targets);
        session.purpose = SessionPurpose::Refresh;
        session.slot_cost = cost;
        schedule.sessions.push_back(std::move(session));
    }
    schedule.sequential_slot_cost = budget.total_slots - budget.slots_used - remaining;
    return schedule;
}

RangingSchedule baseline_random(const ConnectivityGraph& graph,
                                const RangingBudget& budget, RngStream& rng) {
    RangingSchedule schedule;
    auto edges = graph.edges();
    // Fisher-Yates with the caller's stream
    for (std::size_t i = edges.size(); i > 1; --i)
        std::swap(edges[i - 1], edges[rng.next_u64() % i]);

    int remaining = budget.total_slots - budget.slots_used;
    const int cost = budget.session_cost(1);
    for (const auto& [a, b] : edges) {
        if (remaining < cost) break;
        RangingSession session;
        session.initiator = a;
        session.responders = {b};
        session.purpose = SessionPurpose::Refresh;
        session.slot_cost = cost;
        schedule.sessions.push_back(std::move(session));
        remaining -= cost;
    }
    schedule.sequential_slot_cost = budget.total_slots - budget.slots_used - remaining;
    return schedule;
}

std::string to_string(Strategy s) {
    switch (s) {
    case Strategy::Dynoloc: return "dynoloc";
    case Strategy::HAgnos: return "h-agnos";
    case Strategy::HDyn: return "h-dyn";
    case Strategy::Random: return "random";
    }
    return "unknown";
}

Strategy strategy_from_string(const std::string& name) {
    if (name == "dynoloc") return Strategy::Dynoloc;
    if (name == "h-agnos") return Strategy::HAgnos;
    if (name == "h-dyn") return Strategy::HDyn;
    if (name == "random") return Strategy::Random;
    throw std::invalid_argument("unknown strategy: " + name);
}

} // namespace dynoloc
