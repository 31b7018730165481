#include "dynoloc/topology.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <stdexcept>

namespace dynoloc {

namespace {
std::pair<NodeId, NodeId> ordered(NodeId a, NodeId b) {
    return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}
} // namespace

void ConnectivityGraph::add_node(NodeId id) {
    node_ids_.insert(id);
    adj_.try_emplace(id);
}

void ConnectivityGraph::set_link(NodeId a, NodeId b, LinkQuality lq) {
    if (a == b) throw std::invalid_argument("ConnectivityGraph: self-loop");
    if (lq.value < 0.0) throw std::invalid_argument("ConnectivityGraph: negative LQ");
    add_node(a);
    add_node(b);
    adj_[a][b] = lq;
    adj_[b][a] = lq;
}

void ConnectivityGraph::remove_link(NodeId a, NodeId b) {
    auto ia = adj_.find(a);
    if (ia != adj_.end()) ia->second.erase(b);
    auto ib = adj_.find(b);
    if (ib != adj_.end()) ib->second.erase(a);
}

bool ConnectivityGraph::has_link(NodeId a, NodeId b) const {
    auto ia = adj_.find(a);
    if (ia == adj_.end()) return false;
    auto it = ia->second.find(b);
    return it != ia->second.end() && it->second.value > 0.0;
}

LinkQuality ConnectivityGraph::link(NodeId a, NodeId b) const {
    auto ia = adj_.find(a);
    if (ia == adj_.end()) return {};
    auto it = ia->second.find(b);
    return it == ia->second.end() ? LinkQuality{} : it->second;
}

std::vector<NodeId> ConnectivityGraph::neighbors(NodeId id) const {
    std::vector<NodeId> out;
    auto it = adj_.find(id);
    if (it == adj_.end()) return out;
    for (const auto& [nb, lq] : it->second)
        if (lq.value > 0.0) out.push_back(nb);
    return out;
}

int ConnectivityGraph::degree(NodeId id) const {
    return static_cast<int>(neighbors(id).size());
}

std::vector<std::pair<NodeId, NodeId>> ConnectivityGraph::edges() const {
    std::vector<std::pair<NodeId, NodeId>> out;
    for (const auto& [a, nbrs] : adj_)
        for (const auto& [b, lq] : nbrs)
            if (a < b && lq.value > 0.0) out.emplace_back(a, b);
    return out;
}

CoreDecomposition k_core_decompose(const ConnectivityGraph& g) {
    CoreDecomposition out;
    std::map<NodeId, std::set<NodeId>> adj;
    for (NodeId id : g.nodes()) {
        adj[id];
        for (NodeId nb : g.neighbors(id)) adj[id].insert(nb);
    }

    auto peel = [&adj](int max_degree) {
        std::vector<NodeId> removed;
        bool changed = true;
        while (changed) {
            changed = false;
            for (auto it = adj.begin(); it != adj.end();) {
                if (static_cast<int>(it->second.size()) <= max_degree) {
                    for (NodeId nb : it->second) adj[nb].erase(it->first);
                    removed.push_back(it->first);
                    it = adj.erase(it);
                    changed = true;
                } else {
                    ++it;
                }
            }
        }
        return removed;
    };

    for (NodeId id : peel(1)) out.core_number[id] = 1;
    for (NodeId id : peel(2)) out.core_number[id] = 2;
    for (const auto& [id, nbrs] : adj) {
        out.core_number[id] = 3;
        out.three_core_degree[id] = static_cast<int>(nbrs.size());
    }

    // connected components of the remaining 3-core
    std::set<NodeId> unvisited;
    for (const auto& [id, nbrs] : adj) unvisited.insert(id);
    while (!unvisited.empty()) {
        std::set<NodeId> comp;
        std::queue<NodeId> q;
        q.push(*unvisited.begin());
        unvisited.erase(unvisited.begin());
        while (!q.empty()) {
            NodeId cur = q.front();
            q.pop();
            comp.insert(cur);
            for (NodeId nb : adj[cur]) {
                if (unvisited.erase(nb)) q.push(nb);
            }
        }
        out.three_core_components.push_back(std::move(comp));
    }
    // deterministic component order: largest first, ties by smallest id
    std::sort(out.three_core_components.begin(), out.three_core_components.end(),
              [](const std::set<NodeId>& a, const std::set<NodeId>& b) {
                  if (a.size() != b.size()) return a.size() > b.size();
                  return *a.begin() < *b.begin();
              });
    return out;
}

bool RigidGraph::is_member(NodeId id) const {
    return std::find(members.begin(), members.end(), id) != members.end();
}

bool RigidGraph::has_edge(NodeId a, NodeId b) const {
    return edges.count(ordered(a, b)) > 0;
}

const RigidEdge* RigidGraph::edge(NodeId a, NodeId b) const {
    auto it = edges.find(ordered(a, b));
    return it == edges.end() ? nullptr : &it->second;
}

void RigidGraph::put_edge(NodeId a, NodeId b, double range, double timestamp) {
    if (range <= 0.0) throw std::invalid_argument("RigidGraph: non-positive range");
    auto key = ordered(a, b);
    edges[key] = RigidEdge{key.first, key.second, range, timestamp};
}

std::vector<NodeId> RigidGraph::edge_partners(NodeId id) const {
    std::vector<NodeId> out;
    for (const auto& [key, e] : edges) {
        if (key.first == id) out.push_back(key.second);
        else if (key.second == id) out.push_back(key.first);
    }
    return out;
}

bool is_rigid_admissible(const ConnectivityGraph& g, NodeId candidate,
                         const RigidGraph& rigid,
                         const std::map<NodeId, Point2>& positions) {
    return !select_support_nodes(g, candidate, rigid, positions).empty();
}

std::vector<NodeId> select_support_nodes(const ConnectivityGraph& g, NodeId candidate,
                                         const RigidGraph& rigid,
                                         const std::map<NodeId, Point2>& positions) {
    struct Cand {
        NodeId id;
        double lq;
    };
    std::vector<Cand> cands;
    for (NodeId nb : g.neighbors(candidate)) {
        if (nb == candidate || !rigid.is_member(nb)) continue;
        if (!positions.count(nb)) continue;
        cands.push_back({nb, g.link(candidate, nb).value});
    }
    if (cands.size() < 3) return {};
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.lq != b.lq) return a.lq > b.lq;
        return a.id < b.id;
    });
    // first acceptable triple in descending-LQ order; a barely non-collinear
    // triple amplifies range noise in trilateration, so a well-conditioned
    // triple is preferred and the bare collinearity threshold is the
    // fallback
    for (double tol : {kConditionedAreaTol, kCollinearTol}) {
        for (std::size_t i = 0; i + 2 < cands.size(); ++i)
            for (std::size_t j = i + 1; j + 1 < cands.size(); ++j)
                for (std::size_t k = j + 1; k < cands.size(); ++k) {
                    const Point2& a = positions.at(cands[i].id);
                    const Point2& b = positions.at(cands[j].id);
                    const Point2& c = positions.at(cands[k].id);
                    if (!are_collinear(a, b, c, tol))
                        return {cands[i].id, cands[j].id, cands[k].id};
                }
    }
    return {};
}

namespace {

// canonical placement from three ranges; nullopt when degenerate
std::optional<std::array<Point2, 3>> place_triangle(double d12, double d13, double d23) {
    if (d12 <= 0.0 || d13 <= 0.0 || d23 <= 0.0) return std::nullopt;
    const double longest = std::max({d12, d13, d23});
    const double sum = d12 + d13 + d23;
    if (longest >= 0.95 * (sum - longest)) return std::nullopt; // inequality slack
    const double x3 = (d12 * d12 + d13 * d13 - d23 * d23) / (2.0 * d12);
    const double y3sq = d13 * d13 - x3 * x3;
    if (y3sq <= 0.0) return std::nullopt;
    std::array<Point2, 3> pts{Point2{0.0, 0.0}, Point2{d12, 0.0}, Point2{x3, std::sqrt(y3sq)}};
    if (are_collinear(pts[0], pts[1], pts[2])) return std::nullopt;
    return pts;
}

} // namespace

RigidGraph bootstrap_rigid_graph(const ConnectivityGraph& g,
                                 const CoreDecomposition& decomp,
                                 const RangeOracle& measure,
                                 std::size_t component_index,
                                 double timestamp,
                                 const SessionGate& gate,
                                 const std::array<NodeId, 3>* preferred_triangle) {
    if (component_index >= decomp.three_core_components.size())
        throw std::runtime_error("no rigid seed");
    const std::set<NodeId>& comp = decomp.three_core_components[component_index];

    std::vector<NodeId> ranked(comp.begin(), comp.end());
    std::sort(ranked.begin(), ranked.end(), [&decomp](NodeId a, NodeId b) {
        const int da = decomp.three_core_degree.count(a) ? decomp.three_core_degree.at(a) : 0;
        const int db = decomp.three_core_degree.count(b) ? decomp.three_core_degree.at(b) : 0;
        if (da != db) return da > db;
        return a < b;
    });
    if (preferred_triangle) {
        // keep the previous frame alive: move the old founders to the front
        // of the ranking so the scan tries them first
        std::vector<NodeId> reordered;
        for (NodeId id : *preferred_triangle)
            if (comp.count(id)) reordered.push_back(id);
        if (reordered.size() == 3) {
            for (NodeId id : ranked)
                if (std::find(reordered.begin(), reordered.end(), id) == reordered.end())
                    reordered.push_back(id);
            ranked = std::move(reordered);
        }
    }

    RigidGraph rigid;
    std::map<NodeId, Point2> positions;

    // ranges measured once stay usable across founding attempts, so the
    // airtime gate is charged per newly measured pair
    std::set<std::pair<NodeId, NodeId>> paid;
    auto reserve = [&](std::initializer_list<std::pair<NodeId, NodeId>> pairs) {
        int fresh = 0;
        for (const auto& [a, b] : pairs)
            if (!paid.count(ordered(a, b))) ++fresh;
        if (fresh == 0) return true;
        if (gate && !gate(fresh)) return false;
        for (const auto& [a, b] : pairs) paid.insert(ordered(a, b));
        return true;
    };

    // Founding triangle: first mutually connected non-degenerate triple in
    // rank order. A range bias on a founding edge shears the whole frame,
    // so the first scan only considers triangles whose links clear an LQ
    // floor; the lenient scan is the fallback when none qualify.
    bool founded = false;
    for (double lq_floor : {kFoundingLqFloor, 0.0}) {
        for (std::size_t i = 0; i < ranked.size() && !founded; ++i)
            for (std::size_t j = i + 1; j < ranked.size() && !founded; ++j) {
                if (!g.has_link(ranked[i], ranked[j])) continue;
                for (std::size_t k = j + 1; k < ranked.size() && !founded; ++k) {
                    if (!g.has_link(ranked[i], ranked[k]) ||
                        !g.has_link(ranked[j], ranked[k]))
                        continue;
                    const NodeId n1 = ranked[i], n2 = ranked[j], n3 = ranked[k];
                    if (g.link(n1, n2).value < lq_floor ||
                        g.link(n1, n3).value < lq_floor ||
                        g.link(n2, n3).value < lq_floor)
                        continue;
                    if (!reserve({{n1, n2}, {n1, n3}, {n2, n3}}))
                        throw std::runtime_error("no rigid seed");
                    const double d12 = measure(n1, n2);
                    const double d13 = measure(n1, n3);
                    const double d23 = measure(n2, n3);
                    auto pts = place_triangle(d12, d13, d23);
                    if (!pts) continue;
                    rigid.members = {n1, n2, n3};
                    rigid.anchor_triangle = {n1, n2, n3};
                    rigid.put_edge(n1, n2, d12, timestamp);
                    rigid.put_edge(n1, n3, d13, timestamp);
                    rigid.put_edge(n2, n3, d23, timestamp);
                    rigid.admission_log.push_back({n1, {}});
                    rigid.admission_log.push_back({n2, {}});
                    rigid.admission_log.push_back({n3, {}});
                    positions[n1] = (*pts)[0];
                    positions[n2] = (*pts)[1];
                    positions[n3] = (*pts)[2];
                    founded = true;
                }
            }
        if (founded) break;
    }
    if (!founded) throw std::runtime_error("no rigid seed");

    // greedy admission; repeated passes because admitting one node can
    // unlock others
    bool progress = true;
    bool airtime_left = true;
    while (progress && airtime_left) {
        progress = false;
        for (NodeId cand : ranked) {
            if (rigid.is_member(cand)) continue;
            auto support = select_support_nodes(g, cand, rigid, positions);
            if (support.empty()) continue;

            const std::vector<Point2> anchor_pts{positions.at(support[0]),
                                                 positions.at(support[1]),
                                                 positions.at(support[2])};
            // a nearly flat support triple leaves the node's side ambiguous;
            // a fourth linked member settles it, otherwise the node waits
            // for the excluded-node pathway
            const bool marginal =
                are_collinear(anchor_pts[0], anchor_pts[1], anchor_pts[2],
                              kConditionedAreaTol);
            NodeId corroborator = -1;
            if (marginal) {
                double best_lq = 0.0;
                for (NodeId nb : g.neighbors(cand)) {
                    if (nb == support[0] || nb == support[1] || nb == support[2]) continue;
                    if (!rigid.is_member(nb) || !positions.count(nb)) continue;
                    const double lq = g.link(cand, nb).value;
                    if (lq > best_lq) {
                        best_lq = lq;
                        corroborator = nb;
                    }
                }
                if (corroborator < 0) continue;
            }

            std::initializer_list<std::pair<NodeId, NodeId>> want =
                {{cand, support[0]}, {cand, support[1]}, {cand, support[2]}};
            if (!reserve(want)) {
                airtime_left = false;
                break;
            }
            const double r1 = measure(cand, support[0]);
            const double r2 = measure(cand, support[1]);
            const double r3 = measure(cand, support[2]);
            if (r1 <= 0.0 || r2 <= 0.0 || r3 <= 0.0) continue;
            auto placed = least_squares_position(anchor_pts, {r1, r2, r3});
            Point2 pos = placed.position;

            double r4 = -1.0;
            if (marginal) {
                if (!reserve({{cand, corroborator}})) {
                    airtime_left = false;
                    break;
                }
                r4 = measure(cand, corroborator);
                if (r4 <= 0.0) continue;
                const Point2 mirror = reflect_across_line(anchor_pts, pos);
                const double gap_pos =
                    std::abs(distance(pos, positions.at(corroborator)) - r4);
                const double gap_mirror =
                    std::abs(distance(mirror, positions.at(corroborator)) - r4);
                if (std::abs(gap_pos - gap_mirror) < 0.3) continue; // still ambiguous
                if (gap_mirror < gap_pos) pos = mirror;
            }

            rigid.members.push_back(cand);
            rigid.admission_log.push_back({cand, support});
            rigid.put_edge(cand, support[0], r1, timestamp);
            rigid.put_edge(cand, support[1], r2, timestamp);
            rigid.put_edge(cand, support[2], r3, timestamp);
            if (r4 > 0.0) rigid.put_edge(cand, corroborator, r4, timestamp);
            positions[cand] = pos;
            progress = true;
        }
    }
    return rigid;
}

RigidGraph purge_non_rigid(const RigidGraph& rigid, const ConnectivityGraph& g) {
    if (rigid.empty()) return rigid;
    const CoreDecomposition decomp = k_core_decompose(g);

    std::set<NodeId> kept;
    RigidGraph out;

    for (const AdmissionEntry& entry : rigid.admission_log) {
        const NodeId id = entry.node;
        if (decomp.core_of(id) != 3) continue;
        if (entry.support.empty()) {
            // founding member: needs the other two founders and its triangle
            // edges intact
            bool ok = true;
            for (NodeId other : rigid.anchor_triangle) {
                if (other == id) continue;
                if (decomp.core_of(other) != 3 || !g.has_link(id, other)) ok = false;
            }
            if (!ok) continue;
        } else {
            bool ok = true;
            for (NodeId s : entry.support)
                if (!kept.count(s) || !g.has_link(id, s)) ok = false;
            if (!ok) continue;
        }
        kept.insert(id);
        out.admission_log.push_back(entry);
        out.members.push_back(id);
    }

    // a broken founding triangle invalidates the whole frame
    for (NodeId f : rigid.anchor_triangle)
        if (!kept.count(f)) return RigidGraph{};

    out.anchor_triangle = rigid.anchor_triangle;
    for (const auto& [key, e] : rigid.edges)
        if (kept.count(key.first) && kept.count(key.second) &&
            g.has_link(key.first, key.second))
            out.edges[key] = e;
    return out;
}

std::map<NodeId, Point2> replay_positions(const RigidGraph& rigid) {
    std::map<NodeId, Point2> positions;
    if (rigid.empty()) return positions;
    const NodeId n1 = rigid.anchor_triangle[0];
    const NodeId n2 = rigid.anchor_triangle[1];
    const NodeId n3 = rigid.anchor_triangle[2];
    const RigidEdge* e12 = rigid.edge(n1, n2);
    const RigidEdge* e13 = rigid.edge(n1, n3);
    const RigidEdge* e23 = rigid.edge(n2, n3);
    if (!e12 || !e13 || !e23) return positions;
    auto pts = place_triangle(e12->range, e13->range, e23->range);
    if (!pts) {
        // noisy refresh can degrade the triangle: fall back to a flat layout
        positions[n1] = {0.0, 0.0};
        positions[n2] = {e12->range, 0.0};
        positions[n3] = {e13->range, 1e-6};
    } else {
        positions[n1] = (*pts)[0];
        positions[n2] = (*pts)[1];
        positions[n3] = (*pts)[2];
    }
    for (const AdmissionEntry& entry : rigid.admission_log) {
        if (entry.support.empty()) continue;
        const RigidEdge* a = rigid.edge(entry.node, entry.support[0]);
        const RigidEdge* b = rigid.edge(entry.node, entry.support[1]);
        const RigidEdge* c = rigid.edge(entry.node, entry.support[2]);
        if (!a || !b || !c) continue;
        auto tri = trilaterate(positions.at(entry.support[0]), a->range,
                               positions.at(entry.support[1]), b->range,
                               positions.at(entry.support[2]), c->range);
        positions[entry.node] = tri.position;
    }
    return positions;
}

} // namespace dynoloc
