#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "dynoloc/geometry.hpp"
#include "dynoloc/rng.hpp"
#include "dynoloc/topology.hpp"

using namespace dynoloc;

namespace {

LinkQuality lq(double v) { return LinkQuality{v, 0.0}; }

ConnectivityGraph clique(int n) {
    ConnectivityGraph g;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) g.set_link(i, j, lq(1.0));
    return g;
}

// Independent oracle: the k-core is the maximal subgraph with min degree
// >= k, found by repeatedly deleting all low-degree vertices. A node's core
// number is the largest k in {1,2,3} whose k-core contains it.
std::map<NodeId, int> brute_force_cores(const ConnectivityGraph& g) {
    auto k_core_members = [&g](int k) {
        std::set<NodeId> alive(g.nodes().begin(), g.nodes().end());
        bool changed = true;
        while (changed) {
            changed = false;
            for (NodeId id : std::set<NodeId>(alive)) {
                int deg = 0;
                for (NodeId nb : g.neighbors(id))
                    if (alive.count(nb)) ++deg;
                if (deg < k) {
                    alive.erase(id);
                    changed = true;
                }
            }
        }
        return alive;
    };
    std::map<NodeId, int> core;
    for (NodeId id : g.nodes()) core[id] = 1;
    for (int k = 2; k <= 3; ++k)
        for (NodeId id : k_core_members(k)) core[id] = k;
    return core;
}

RangeOracle exact_oracle(const std::map<NodeId, Point2>& truth) {
    return [truth](NodeId a, NodeId b) { return distance(truth.at(a), truth.at(b)); };
}

} // namespace

TEST_CASE("k-core on K4 and P5") {
    const auto d4 = k_core_decompose(clique(4));
    for (int i = 0; i < 4; ++i) CHECK(d4.core_of(i) == 3);
    REQUIRE(d4.three_core_components.size() == 1);
    CHECK(d4.three_core_components[0].size() == 4);

    ConnectivityGraph path;
    for (int i = 0; i + 1 < 5; ++i) path.set_link(i, i + 1, lq(1.0));
    const auto dp = k_core_decompose(path);
    for (int i = 0; i < 5; ++i) CHECK(dp.core_of(i) == 1);
    CHECK(dp.three_core_components.empty());
}

TEST_CASE("k-core on K5 plus pendant") {
    ConnectivityGraph g = clique(5);
    g.set_link(1, 6, lq(1.0));
    const auto d = k_core_decompose(g);
    CHECK(d.core_of(6) == 1);
    for (int i = 0; i < 5; ++i) CHECK(d.core_of(i) == 3);
}

TEST_CASE("k-core matches brute force on random graphs") {
    RngStream rng(123);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = rng.uniform_int(2, 10);
        ConnectivityGraph g;
        for (int i = 0; i < n; ++i) g.add_node(i);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (rng.bernoulli(0.4)) g.set_link(i, j, lq(1.0));
        const auto got = k_core_decompose(g);
        const auto want = brute_force_cores(g);
        for (NodeId id : g.nodes()) CHECK(got.core_of(id) == want.at(id));
    }
}

TEST_CASE("3-core membership invariant to edge insertion order") {
    RngStream rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 8;
        std::vector<std::pair<NodeId, NodeId>> edges;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (rng.bernoulli(0.5)) edges.emplace_back(i, j);

        ConnectivityGraph fwd, rev;
        for (int i = 0; i < n; ++i) {
            fwd.add_node(i);
            rev.add_node(i);
        }
        for (const auto& [a, b] : edges) fwd.set_link(a, b, lq(1.0));
        for (auto it = edges.rbegin(); it != edges.rend(); ++it)
            rev.set_link(it->first, it->second, lq(1.0));

        const auto df = k_core_decompose(fwd);
        const auto dr = k_core_decompose(rev);
        for (int i = 0; i < n; ++i) CHECK(df.core_of(i) == dr.core_of(i));
    }
}

TEST_CASE("LQ zero edges are ignored") {
    ConnectivityGraph g = clique(4);
    g.set_link(0, 1, lq(0.0));
    g.set_link(0, 2, lq(0.0));
    g.set_link(0, 3, lq(0.0));
    const auto d = k_core_decompose(g);
    CHECK(d.core_of(0) == 1);
}

TEST_CASE("is_rigid_admissible") {
    // Fig-3-style: rigid square {1,2,3,4}, candidate 5
    std::map<NodeId, Point2> pos{{1, {0, 0}}, {2, {4, 0}}, {3, {4, 4}}, {4, {0, 4}}};
    RigidGraph rigid;
    rigid.members = {1, 2, 3, 4};
    rigid.anchor_triangle = {1, 2, 3};

    ConnectivityGraph g;
    g.set_link(5, 2, lq(1.0));
    g.set_link(5, 3, lq(1.0));

    SUBCASE("two edges are not enough") {
        CHECK_FALSE(is_rigid_admissible(g, 5, rigid, pos));
    }
    SUBCASE("three edges to non-collinear targets admit") {
        g.set_link(5, 4, lq(1.0));
        CHECK(is_rigid_admissible(g, 5, rigid, pos));
    }
    SUBCASE("four edges to collinear targets do not admit") {
        std::map<NodeId, Point2> line{
            {1, {0, 0}}, {2, {1, 0}}, {3, {2, 0}}, {4, {3, 0}}};
        g.set_link(5, 1, lq(1.0));
        g.set_link(5, 4, lq(1.0));
        CHECK_FALSE(is_rigid_admissible(g, 5, rigid, line));
    }
}

TEST_CASE("support node selection prefers link quality") {
    std::map<NodeId, Point2> pos{{1, {0, 0}}, {2, {4, 0}}, {3, {4, 4}}, {4, {0, 4}}};
    RigidGraph rigid;
    rigid.members = {1, 2, 3, 4};
    ConnectivityGraph g;
    g.set_link(9, 1, lq(9.0));
    g.set_link(9, 2, lq(7.0));
    g.set_link(9, 3, lq(5.0));
    g.set_link(9, 4, lq(3.0));
    const auto support = select_support_nodes(g, 9, rigid, pos);
    REQUIRE(support.size() == 3);
    CHECK(support[0] == 1);
    CHECK(support[1] == 2);
    CHECK(support[2] == 3);
}

TEST_CASE("bootstrap on K4 admits everything") {
    std::map<NodeId, Point2> truth{{0, {0, 0}}, {1, {5, 0}}, {2, {5, 5}}, {3, {0, 5}}};
    const auto g = clique(4);
    const auto decomp = k_core_decompose(g);
    const auto rigid = bootstrap_rigid_graph(g, decomp, exact_oracle(truth));
    CHECK(rigid.members.size() == 4);
    CHECK(rigid.edges.size() == 6);
}

TEST_CASE("bootstrap excludes a 2-edge node") {
    // square 1-4 fully connected, node 5 linked only to 2 and 3
    std::map<NodeId, Point2> truth{
        {1, {0, 0}}, {2, {4, 0}}, {3, {4, 4}}, {4, {0, 4}}, {5, {8, 2}}};
    ConnectivityGraph g = clique(0);
    for (int i = 1; i <= 4; ++i)
        for (int j = i + 1; j <= 4; ++j) g.set_link(i, j, lq(1.0));
    g.set_link(5, 2, lq(1.0));
    g.set_link(5, 3, lq(1.0));
    const auto decomp = k_core_decompose(g);
    const auto rigid = bootstrap_rigid_graph(g, decomp, exact_oracle(truth));
    CHECK(rigid.members.size() == 4);
    CHECK_FALSE(rigid.is_member(5));
}

TEST_CASE("bootstrap on K5 plus pendant keeps the clique") {
    std::map<NodeId, Point2> truth{
        {0, {0, 0}}, {1, {6, 0}}, {2, {6, 6}}, {3, {0, 6}}, {4, {3, 9}}, {5, {30, 30}}};
    ConnectivityGraph g;
    for (int i = 0; i < 5; ++i)
        for (int j = i + 1; j < 5; ++j) g.set_link(i, j, lq(1.0));
    g.set_link(0, 5, lq(1.0));
    const auto decomp = k_core_decompose(g);
    const auto rigid = bootstrap_rigid_graph(g, decomp, exact_oracle(truth));
    CHECK(rigid.members.size() == 5);
    CHECK_FALSE(rigid.is_member(5));
}

TEST_CASE("a tree never yields a rigid graph") {
    ConnectivityGraph g;
    g.set_link(0, 1, lq(1.0));
    g.set_link(0, 2, lq(1.0));
    g.set_link(1, 3, lq(1.0));
    g.set_link(1, 4, lq(1.0));
    const auto decomp = k_core_decompose(g);
    CHECK(decomp.three_core_components.empty());
    CHECK_THROWS_AS(bootstrap_rigid_graph(g, decomp, [](NodeId, NodeId) { return 1.0; }),
                    std::runtime_error);
}

TEST_CASE("random cliques are always fully admitted") {
    RngStream rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = rng.uniform_int(4, 9);
        std::map<NodeId, Point2> truth;
        for (int i = 0; i < n; ++i)
            truth[i] = {rng.uniform(0.0, 30.0), rng.uniform(0.0, 30.0)};
        const auto g = clique(n);
        const auto rigid =
            bootstrap_rigid_graph(g, k_core_decompose(g), exact_oracle(truth));
        CHECK(static_cast<int>(rigid.members.size()) == n);
    }
}

TEST_CASE("purge keeps an unchanged graph intact") {
    std::map<NodeId, Point2> truth{{0, {0, 0}}, {1, {5, 0}}, {2, {5, 5}}, {3, {0, 5}}};
    const auto g = clique(4);
    const auto rigid = bootstrap_rigid_graph(g, k_core_decompose(g), exact_oracle(truth));
    const auto purged = purge_non_rigid(rigid, g);
    CHECK(purged.members == rigid.members);
    CHECK(purged.edges.size() == rigid.edges.size());
}

TEST_CASE("purge drops a member that lost all edges") {
    std::map<NodeId, Point2> truth{
        {0, {0, 0}}, {1, {6, 0}}, {2, {6, 6}}, {3, {0, 6}}, {4, {3, 9}}};
    ConnectivityGraph g = clique(5);
    auto rigid = bootstrap_rigid_graph(g, k_core_decompose(g), exact_oracle(truth));
    REQUIRE(rigid.members.size() == 5);
    for (int j = 0; j < 5; ++j)
        if (j != 4) g.remove_link(4, j);
    const auto purged = purge_non_rigid(rigid, g);
    CHECK(purged.members.size() == 4);
    CHECK_FALSE(purged.is_member(4));
}

TEST_CASE("purge cascades through dependents") {
    // hand-built chain: 5 admitted on {0,1,2}, 6 admitted on {0,1,5}
    std::map<NodeId, Point2> truth{{0, {0, 0}},  {1, {6, 0}},  {2, {3, 5}},
                                   {5, {3, -4}}, {6, {7, -6}}};
    auto range = [&truth](NodeId a, NodeId b) { return distance(truth.at(a), truth.at(b)); };

    RigidGraph rigid;
    rigid.members = {0, 1, 2, 5, 6};
    rigid.anchor_triangle = {0, 1, 2};
    rigid.admission_log = {{0, {}}, {1, {}}, {2, {}}, {5, {0, 1, 2}}, {6, {0, 1, 5}}};
    for (auto [a, b] : std::vector<std::pair<NodeId, NodeId>>{
             {0, 1}, {0, 2}, {1, 2}, {5, 0}, {5, 1}, {5, 2}, {6, 0}, {6, 1}, {6, 5}})
        rigid.put_edge(a, b, range(a, b), 0.0);

    ConnectivityGraph g;
    for (const auto& [key, e] : rigid.edges) g.set_link(key.first, key.second, lq(5.0));
    g.set_link(2, 6, lq(5.0)); // keeps everyone in the 3-core after the cut

    // cutting one of node 5's support edges removes 5 and cascades to 6
    g.remove_link(5, 2);
    const auto purged = purge_non_rigid(rigid, g);
    CHECK(purged.is_member(0));
    CHECK(purged.is_member(1));
    CHECK(purged.is_member(2));
    CHECK_FALSE(purged.is_member(5));
    CHECK_FALSE(purged.is_member(6));
}

TEST_CASE("admission invariant holds after bootstrap and purge") {
    RngStream rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = rng.uniform_int(5, 10);
        std::map<NodeId, Point2> truth;
        for (int i = 0; i < n; ++i)
            truth[i] = {rng.uniform(0.0, 25.0), rng.uniform(0.0, 25.0)};
        ConnectivityGraph g;
        for (int i = 0; i < n; ++i) g.add_node(i);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (rng.bernoulli(0.7)) g.set_link(i, j, lq(rng.uniform(0.5, 10.0)));
        const auto decomp = k_core_decompose(g);
        if (decomp.three_core_components.empty()) continue;

        RigidGraph rigid;
        try {
            rigid = bootstrap_rigid_graph(g, decomp, exact_oracle(truth));
        } catch (const std::runtime_error&) {
            continue; // no valid seed in this draw
        }
        // drop a random edge, purge, and replay the admission log
        const auto edges = g.edges();
        const auto& cut = edges[rng.next_u64() % edges.size()];
        g.remove_link(cut.first, cut.second);
        const auto purged = purge_non_rigid(rigid, g);

        const auto pos = replay_positions(purged);
        for (const AdmissionEntry& entry : purged.admission_log) {
            if (entry.support.empty()) continue;
            REQUIRE(entry.support.size() == 3);
            for (NodeId s : entry.support) {
                CHECK(purged.is_member(s));
                CHECK(g.has_link(entry.node, s));
                CHECK(purged.has_edge(entry.node, s));
            }
            CHECK_FALSE(are_collinear(pos.at(entry.support[0]), pos.at(entry.support[1]),
                                      pos.at(entry.support[2])));
        }
    }
}
