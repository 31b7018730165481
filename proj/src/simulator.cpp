#include "dynoloc/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>

namespace dynoloc {

namespace {

constexpr double kMobilitySubstep = 0.01; // seconds
constexpr std::uint64_t kPpmStream = 0xA1;
constexpr std::uint64_t kHeadingStream = 0xA2;
constexpr std::uint64_t kCirStream = 0xA3;
constexpr std::uint64_t kMeasStream = 0xA4;
constexpr std::uint64_t kRandomStrategyStream = 0xA5;

std::pair<NodeId, NodeId> ordered(NodeId a, NodeId b) {
    return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

} // namespace

Simulator::Simulator(Scenario scenario)
    : scenario_(std::move(scenario)), run_rng_(scenario_.seed) {
    const auto issues = validate_scenario(scenario_);
    if (!issues.empty())
        throw std::invalid_argument("invalid scenario: " + issues.front().field + " " +
                                    issues.front().message);

    for (const NodeSpec& n : scenario_.nodes) {
        graph_.add_node(n.id);
        telemetry_[n.id] = NodeTelemetry{};
        heading_[n.id] = n.heading.value_or(0.0);
        const double max_ppm = scenario_.radio.clock_ppm_max;
        ppm_offset_[n.id] =
            max_ppm > 0.0
                ? run_rng_.fork(kPpmStream).fork(static_cast<std::uint64_t>(n.id))
                          .uniform(-max_ppm, max_ppm) * 1e-6
                : 0.0;
        if (n.is_reference) {
            reference_node_ = n.id;
            reference_global_ = n.position;
        }
    }
}

Point2 Simulator::truth_position(const NodeSpec& node, double t) const {
    if (node.speed <= 0.0 || node.waypoints.empty()) return node.position;

    // closed circuit: position -> waypoints -> position
    std::vector<Point2> loop;
    loop.push_back(node.position);
    for (const Point2& w : node.waypoints) loop.push_back(w);
    loop.push_back(node.position);

    double total = 0.0;
    std::vector<double> seg_len;
    for (std::size_t i = 0; i + 1 < loop.size(); ++i) {
        seg_len.push_back(distance(loop[i], loop[i + 1]));
        total += seg_len.back();
    }
    if (total < 1e-9) return node.position;

    double s = std::fmod(node.speed * t, total);
    for (std::size_t i = 0; i + 1 < loop.size(); ++i) {
        if (s <= seg_len[i] || i + 2 == loop.size()) {
            if (seg_len[i] < 1e-12) continue;
            const double f = std::min(1.0, s / seg_len[i]);
            return loop[i] + (loop[i + 1] - loop[i]) * f;
        }
        s -= seg_len[i];
    }
    return node.position;
}

double Simulator::truth_heading(const NodeSpec& node, double t) const {
    if (node.speed <= 0.0 || node.waypoints.empty()) return node.heading.value_or(0.0);
    const double eps = 1e-3;
    const Point2 here = truth_position(node, t);
    const Point2 ahead = truth_position(node, t + eps);
    const Point2 d = ahead - here;
    if (norm(d) < 1e-12) return node.heading.value_or(0.0);
    return cartesian_to_bearing(std::atan2(d.y, d.x));
}

void Simulator::advance_mobility(double epoch_start, double epoch_end) {
    const double sigma_rad = scenario_.heading_noise_sigma_deg * M_PI / 180.0;
    for (const NodeSpec& n : scenario_.nodes) {
        NodeTelemetry t = telemetry_[n.id];
        for (double s = epoch_start; s < epoch_end - 1e-9; s += kMobilitySubstep) {
            const double accel = (n.speed - t.velocity_estimate) / kMobilitySubstep;
            t = update_mobility(t, accel, kMobilitySubstep);
        }
        telemetry_[n.id] = t;

        RngStream rng = run_rng_.fork(kHeadingStream)
                            .fork(static_cast<std::uint64_t>(epoch_))
                            .fork(static_cast<std::uint64_t>(n.id));
        const double noise = sigma_rad > 0.0 ? rng.normal(0.0, sigma_rad) : 0.0;
        if (n.speed > 0.0 && !n.waypoints.empty())
            heading_[n.id] = wrap_angle(truth_heading(n, epoch_end) + noise);
        else if (n.heading)
            heading_[n.id] = wrap_angle(*n.heading + noise);
    }
}

void Simulator::refresh_connectivity(double now) {
    graph_ = decay_stale_links(graph_, now);
    for (std::size_t i = 0; i < scenario_.nodes.size(); ++i)
        for (std::size_t j = i + 1; j < scenario_.nodes.size(); ++j) {
            const NodeSpec& a = scenario_.nodes[i];
            const NodeSpec& b = scenario_.nodes[j];
            const LinkState ls = simulate_link(truth_position(a, now), truth_position(b, now),
                                               scenario_.walls, scenario_.radio);
            if (ls.connected) {
                RngStream rng = run_rng_.fork(kCirStream)
                                    .fork(static_cast<std::uint64_t>(epoch_))
                                    .fork(static_cast<std::uint64_t>(a.id) << 16 |
                                          static_cast<std::uint64_t>(b.id));
                const CirFeatures cir = synthesize_cir_features(ls.is_los, ls.wall_count, rng);
                LinkQuality lq = link_quality_from_cir(cir, now);
                if (!scenario_.use_link_quality) lq.value = 1.0; // ablation: flat quality
                graph_.set_link(a.id, b.id, lq);
            } else if (graph_.link(a.id, b.id).value > 0.0) {
                graph_.set_link(a.id, b.id, LinkQuality{0.0, now});
            }
        }
}

RigidGraph Simulator::merged_rigid() const {
    RigidGraph merged;
    for (const RigidGraph& r : rigids_) {
        merged.members.insert(merged.members.end(), r.members.begin(), r.members.end());
        for (const auto& [key, e] : r.edges) merged.edges[key] = e;
        merged.admission_log.insert(merged.admission_log.end(), r.admission_log.begin(),
                                    r.admission_log.end());
    }
    if (!rigids_.empty()) merged.anchor_triangle = rigids_.front().anchor_triangle;
    return merged;
}

void Simulator::bootstrap_components(const CoreDecomposition& decomp, int& remaining_slots,
                                     double now) {
    const RangingBudget budget = RangingBudget::from_refresh_rate(
        scenario_.refresh_rate_hz, scenario_.slot_time_ms, scenario_.wifi_overhead_ms);

    for (std::size_t c = 0; c < decomp.three_core_components.size(); ++c) {
        const auto& comp = decomp.three_core_components[c];
        bool covered = false;
        for (const RigidGraph& r : rigids_)
            for (NodeId id : comp)
                if (r.is_member(id)) covered = true;
        if (covered) continue;

        auto gate = [&](int responders) {
            const int cost = budget.session_cost(responders);
            if (remaining_slots < cost) return false;
            remaining_slots -= cost;
            return true;
        };
        auto oracle = [&](NodeId a, NodeId b) -> double {
            const NodeSpec* pa = nullptr;
            const NodeSpec* pb = nullptr;
            for (const NodeSpec& n : scenario_.nodes) {
                if (n.id == a) pa = &n;
                if (n.id == b) pb = &n;
            }
            const Point2 ta = truth_position(*pa, now);
            const Point2 tb = truth_position(*pb, now);
            const LinkState ls = simulate_link(ta, tb, scenario_.walls, scenario_.radio);
            if (!ls.connected) return -1.0;
            const double d_true = distance(ta, tb);
            const double tof_us = d_true / kSpeedOfLightMetersPerUs;
            const double slot_us = scenario_.slot_time_ms * 1000.0;
            const auto exchange = simulate_twr_exchange(tof_us, slot_us * 0.5, slot_us * 1.5,
                                                        ppm_offset_.at(a), ppm_offset_.at(b));
            const double d_twr = tof_from_timestamps(exchange) * kSpeedOfLightMetersPerUs;
            RngStream rng = run_rng_.fork(kMeasStream)
                                .fork(static_cast<std::uint64_t>(epoch_))
                                .fork(static_cast<std::uint64_t>(std::min(a, b)) << 16 |
                                      static_cast<std::uint64_t>(std::max(a, b)));
            const double r = measure_range(d_twr, ls.is_los, ls.wall_count, scenario_.radio, rng);
            RangeMeasurement m;
            const auto key = ordered(a, b);
            m.a = key.first;
            m.b = key.second;
            m.range = r;
            m.timestamp = now;
            m.lq_at_measure = graph_.link(a, b).value;
            m.truth_range = d_true;
            measurements_[key] = m;
            return r;
        };

        const std::array<NodeId, 3>* preferred = nullptr;
        for (const auto& anchor : prev_anchors_)
            if (comp.count(anchor[0]) && comp.count(anchor[1]) && comp.count(anchor[2])) {
                preferred = &anchor;
                break;
            }
        try {
            RigidGraph r = bootstrap_rigid_graph(graph_, decomp, oracle, c, now, gate,
                                                 preferred);
            if (!r.empty()) rigids_.push_back(std::move(r));
        } catch (const std::runtime_error&) {
            // no rigid seed for this component (or budget ran out)
        }
    }
}

std::optional<double> Simulator::usable_heading(NodeId id) const {
    auto it = telemetry_.find(id);
    if (it != telemetry_.end() && it->second.velocity_estimate > kHeadingSpeedGate)
        return heading_.at(id);
    for (const NodeSpec& n : scenario_.nodes)
        if (n.id == id && n.speed <= 0.0 && n.heading) return heading_.at(id);
    return std::nullopt;
}

void Simulator::apply_session_results(const RangingSession& session,
                                      const std::vector<RangeMeasurement>& measured) {
    if (scenario_.strategy != Strategy::Dynoloc) return;
    if (measured.empty()) return;

    // update ranges of existing member-member edges
    for (const RangeMeasurement& m : measured)
        for (RigidGraph& r : rigids_)
            if (r.is_member(m.a) && r.is_member(m.b) && r.has_edge(m.a, m.b))
                r.put_edge(m.a, m.b, m.range, m.timestamp);

    const NodeId init = session.initiator;
    bool is_member = false;
    for (RigidGraph& r : rigids_)
        if (r.is_member(init)) is_member = true;

    if (!is_member && measured.size() == 3) {
        // admission: all three responders must sit in one component and be
        // non-collinear at their replayed positions
        for (RigidGraph& r : rigids_) {
            bool all_members = true;
            for (const RangeMeasurement& m : measured) {
                const NodeId other = m.a == init ? m.b : m.a;
                if (!r.is_member(other)) all_members = false;
            }
            if (!all_members) continue;
            const auto pos = replay_positions(r);
            std::vector<NodeId> support;
            for (const RangeMeasurement& m : measured)
                support.push_back(m.a == init ? m.b : m.a);
            if (are_collinear(pos.at(support[0]), pos.at(support[1]), pos.at(support[2])))
                break;
            r.members.push_back(init);
            r.admission_log.push_back({init, support});
            for (const RangeMeasurement& m : measured)
                r.put_edge(m.a, m.b, m.range, m.timestamp);
            break;
        }
    } else if (is_member && session.purpose == SessionPurpose::Refresh &&
               measured.size() == 3) {
        // re-select the member's support edges when the replay order allows
        for (RigidGraph& r : rigids_) {
            if (!r.is_member(init)) continue;
            std::size_t init_pos = r.admission_log.size();
            std::map<NodeId, std::size_t> log_pos;
            for (std::size_t k = 0; k < r.admission_log.size(); ++k) {
                log_pos[r.admission_log[k].node] = k;
                if (r.admission_log[k].node == init) init_pos = k;
            }
            if (init_pos == r.admission_log.size() ||
                r.admission_log[init_pos].support.empty())
                break; // founding members keep their triangle
            std::vector<NodeId> support;
            bool ok = true;
            for (const RangeMeasurement& m : measured) {
                const NodeId other = m.a == init ? m.b : m.a;
                if (!log_pos.count(other) || log_pos[other] >= init_pos) ok = false;
                support.push_back(other);
            }
            if (ok) {
                const auto pos = replay_positions(r);
                if (!are_collinear(pos.at(support[0]), pos.at(support[1]),
                                   pos.at(support[2]))) {
                    for (const RangeMeasurement& m : measured)
                        r.put_edge(m.a, m.b, m.range, m.timestamp);
                    r.admission_log[init_pos].support = support;
                }
            }
            break;
        }
    }
}

EpochRecord Simulator::run_epoch() {
    const double epoch_duration = 1.0 / scenario_.refresh_rate_hz;
    const double epoch_start = epoch_ * epoch_duration;
    const double epoch_end = epoch_start + epoch_duration;

    EpochRecord rec;
    rec.epoch = epoch_;
    rec.strategy = to_string(scenario_.strategy);

    advance_mobility(epoch_start, epoch_end);
    refresh_connectivity(epoch_start);
    const CoreDecomposition decomp = k_core_decompose(graph_);

    RangingBudget budget = RangingBudget::from_refresh_rate(
        scenario_.refresh_rate_hz, scenario_.slot_time_ms, scenario_.wifi_overhead_ms);
    rec.budget_slots = budget.total_slots;
    int remaining_slots = budget.total_slots;

    // Range retention shrinks with endpoint speed: a range between static
    // nodes stays valid for several epochs, one touching a 1 m/s mover is
    // meters off after a single epoch. The baselines are mobility-blind by
    // definition and consume anything within a fixed window instead.
    const bool mobility_aware = scenario_.strategy == Strategy::Dynoloc;
    auto pair_cutoff = [&](NodeId a, NodeId b) {
        if (!mobility_aware) return 3.0; // fixed wall-clock window, seconds
        const double va = std::abs(telemetry_.at(a).velocity_estimate);
        const double vb = std::abs(telemetry_.at(b).velocity_estimate);
        // a range between two standing nodes stays valid until the link
        // itself goes stale; anything touching a mover decays fast
        if (va < kHeadingSpeedGate && vb < kHeadingSpeedGate) return kLinkStaleThreshold;
        return epoch_duration * std::clamp(3.0 / (1.0 + va + vb), 1.0, 3.0);
    };
    auto edge_fresh = [&](NodeId a, NodeId b, double timestamp) {
        return epoch_end - timestamp <= pair_cutoff(a, b) + 1e-9;
    };
    auto measurement_fresh = [&](const RangeMeasurement& m) {
        return edge_fresh(m.a, m.b, m.timestamp);
    };

    // --- rigid graph maintenance and edge selection -------------------------
    RangingSchedule schedule;
    if (scenario_.strategy == Strategy::Dynoloc) {
        for (RigidGraph& r : rigids_) r = purge_non_rigid(r, graph_);
        std::erase_if(rigids_, [](const RigidGraph& r) { return r.members.size() < 3; });
        bootstrap_components(decomp, remaining_slots, epoch_start);

        RangingBudget sel_budget = budget;
        sel_budget.slots_used = budget.total_slots - remaining_slots;
        auto sel = select_edges_epoch(graph_, decomp, merged_rigid(), telemetry_, sel_budget,
                                      SchedulerOptions{scenario_.use_link_quality});
        schedule = std::move(sel.schedule);
    } else if (scenario_.strategy == Strategy::HAgnos) {
        schedule = baseline_h_agnos(graph_, budget, h_agnos_cursor_);
    } else if (scenario_.strategy == Strategy::HDyn) {
        schedule = baseline_h_dyn(graph_, telemetry_, budget);
    } else {
        RngStream rng =
            run_rng_.fork(kRandomStrategyStream).fork(static_cast<std::uint64_t>(epoch_));
        schedule = baseline_random(graph_, budget, rng);
    }

    // Concurrent ranging and the reinvestment of its slot savings are part
    // of the adaptive strategy; the baselines run their sessions
    // sequentially, one pair after another.
    if (scenario_.strategy == Strategy::Dynoloc) {
        const double interference = scenario_.interference_range_or_default();
        form_concurrency_rounds(schedule, interference, last_estimate_);

        const RigidGraph merged = merged_rigid();
        std::set<NodeId> initiated;
        for (const RangingSession& s : schedule.sessions) initiated.insert(s.initiator);

        // concurrency compresses the round-wise cost; spend the gain first
        // on nodes the sequential pass could not fit
        const CoreDecomposition& sel_decomp = decomp;
        for (NodeId node : selection_order(graph_, sel_decomp, telemetry_)) {
            if (initiated.count(node)) continue;
            auto extra = make_session_for_node(graph_, merged, node, budget,
                                               SchedulerOptions{scenario_.use_link_quality});
            if (!extra) continue;
            if (schedule.effective_slot_cost() + extra->slot_cost > remaining_slots &&
                schedule.effective_slot_cost() >= remaining_slots)
                break;
            schedule.sessions.push_back(*extra);
            form_concurrency_rounds(schedule, interference, last_estimate_);
            if (schedule.effective_slot_cost() > remaining_slots) {
                schedule.sessions.pop_back();
                form_concurrency_rounds(schedule, interference, last_estimate_);
                break;
            }
            initiated.insert(node);
        }

        // then on refreshing the stalest measured member pairs, keeping the
        // EDM densely populated
        std::set<std::pair<NodeId, NodeId>> covered;
        for (const RangingSession& s : schedule.sessions)
            for (NodeId r : s.responders) covered.insert(ordered(s.initiator, r));
        std::vector<const RangeMeasurement*> stale;
        for (const auto& [key, m] : measurements_) {
            if (covered.count(key) || !merged.is_member(key.first) ||
                !merged.is_member(key.second))
                continue;
            const double lq = graph_.link(key.first, key.second).value;
            if (lq <= 0.0) continue;
            // refreshing an NLOS-suspect edge would only feed the solver a
            // biased constraint
            if (scenario_.use_link_quality && lq < kFoundingLqFloor) continue;
            stale.push_back(&m);
        }
        std::sort(stale.begin(), stale.end(),
                  [](const RangeMeasurement* x, const RangeMeasurement* y) {
                      if (x->timestamp != y->timestamp) return x->timestamp < y->timestamp;
                      return std::make_pair(x->a, x->b) < std::make_pair(y->a, y->b);
                  });
        for (const RangeMeasurement* m : stale) {
            const int budget_left =
                remaining_slots - schedule.effective_slot_cost();
            if (budget_left < budget.session_cost(1)) break;
            RangingSession extra;
            extra.initiator = m->a;
            extra.responders = {m->b};
            extra.purpose = SessionPurpose::Refresh;
            extra.slot_cost = budget.session_cost(1);
            schedule.sessions.push_back(std::move(extra));
            form_concurrency_rounds(schedule, scenario_.interference_range_or_default(),
                                    last_estimate_);
            if (remaining_slots - schedule.effective_slot_cost() < 0) {
                schedule.sessions.pop_back();
                form_concurrency_rounds(schedule,
                                        scenario_.interference_range_or_default(),
                                        last_estimate_);
                break;
            }
        }
    }
    if (schedule.concurrency_rounds.empty())
        for (std::size_t i = 0; i < schedule.sessions.size(); ++i)
            schedule.concurrency_rounds.push_back({i});

    // --- execute ranging sessions ------------------------------------------
    const double slot_sec = scenario_.slot_time_ms / 1000.0;
    const int bootstrap_slots = budget.total_slots - remaining_slots;
    double round_offset_slots = bootstrap_slots;
    auto node_spec = [this](NodeId id) -> const NodeSpec& {
        for (const NodeSpec& n : scenario_.nodes)
            if (n.id == id) return n;
        throw std::logic_error("unknown node id");
    };

    for (const auto& round : schedule.concurrency_rounds) {
        int round_cost = 0;
        for (std::size_t idx : round) {
            const RangingSession& session = schedule.sessions[idx];
            round_cost = std::max(round_cost, session.slot_cost);
            const double mid_t =
                epoch_start + (round_offset_slots + session.slot_cost * 0.5) * slot_sec;

            // whole session drops if any responder is unreachable mid-session
            bool all_connected = true;
            std::vector<LinkState> links;
            for (NodeId r : session.responders) {
                const LinkState ls = simulate_link(
                    truth_position(node_spec(session.initiator), mid_t),
                    truth_position(node_spec(r), mid_t), scenario_.walls, scenario_.radio);
                links.push_back(ls);
                if (!ls.connected) all_connected = false;
            }
            if (!all_connected) continue;

            std::vector<RangeMeasurement> measured;
            for (std::size_t k = 0; k < session.responders.size(); ++k) {
                const NodeId resp = session.responders[k];
                const Point2 pa = truth_position(node_spec(session.initiator), mid_t);
                const Point2 pb = truth_position(node_spec(resp), mid_t);
                const double d_true = distance(pa, pb);
                if (d_true < 1e-6) continue;
                const double tof_us = d_true / kSpeedOfLightMetersPerUs;
                const double slot_us = scenario_.slot_time_ms * 1000.0;
                const auto exchange = simulate_twr_exchange(
                    tof_us, slot_us * 0.5, slot_us * 1.5,
                    ppm_offset_.at(session.initiator), ppm_offset_.at(resp));
                const double d_twr =
                    tof_from_timestamps(exchange) * kSpeedOfLightMetersPerUs;
                RngStream rng =
                    run_rng_.fork(kMeasStream)
                        .fork(static_cast<std::uint64_t>(epoch_))
                        .fork(static_cast<std::uint64_t>(
                                  std::min(session.initiator, resp)) << 16 |
                              static_cast<std::uint64_t>(std::max(session.initiator, resp)));
                const double r =
                    measure_range(d_twr, links[k].is_los, links[k].wall_count,
                                  scenario_.radio, rng);
                RangeMeasurement m;
                const auto key = ordered(session.initiator, resp);
                m.a = key.first;
                m.b = key.second;
                m.range = r;
                m.timestamp = mid_t;
                m.lq_at_measure = graph_.link(session.initiator, resp).value;
                m.truth_range = d_true;
                measurements_[key] = m;
                measured.push_back(m);
            }
            apply_session_results(session, measured);

            switch (session.purpose) {
            case SessionPurpose::Admission: ++rec.sessions_admission; break;
            case SessionPurpose::Refresh: ++rec.sessions_refresh; break;
            case SessionPurpose::ExcludedNode: ++rec.sessions_excluded; break;
            }
        }
        round_offset_slots += round_cost;
    }
    rec.slots_used = bootstrap_slots + schedule.effective_slot_cost();

    // --- baselines rebuild their rigid structure from fresh measurements ----
    if (scenario_.strategy != Strategy::Dynoloc) {
        rigids_.clear();
        ConnectivityGraph mg;
        for (NodeId id : graph_.nodes()) mg.add_node(id);
        for (const auto& [key, m] : measurements_)
            if (measurement_fresh(m))
                mg.set_link(key.first, key.second, LinkQuality{1.0, m.timestamp});
        const CoreDecomposition mdecomp = k_core_decompose(mg);
        for (std::size_t c = 0; c < mdecomp.three_core_components.size(); ++c) {
            const auto& comp = mdecomp.three_core_components[c];
            const std::array<NodeId, 3>* preferred = nullptr;
            for (const auto& anchor : prev_anchors_)
                if (comp.count(anchor[0]) && comp.count(anchor[1]) && comp.count(anchor[2])) {
                    preferred = &anchor;
                    break;
                }
            try {
                RigidGraph r = bootstrap_rigid_graph(
                    mg, mdecomp,
                    [this](NodeId a, NodeId b) {
                        return measurements_.at(ordered(a, b)).range;
                    },
                    c, epoch_start, {}, preferred);
                if (!r.empty()) rigids_.push_back(std::move(r));
            } catch (const std::runtime_error&) {
            }
        }
    }

    // --- localization -------------------------------------------------------
    prev_anchors_.clear();
    for (const RigidGraph& r : rigids_)
        if (!r.empty()) prev_anchors_.push_back(r.anchor_triangle);

    const double epoch_t = epoch_end;
    std::map<NodeId, Point2> raw_abs;           // absolute estimates this epoch
    std::map<NodeId, int> placed_component;
    std::set<NodeId> members_all;
    for (const RigidGraph& r : rigids_)
        for (NodeId id : r.members) members_all.insert(id);

    for (std::size_t c = 0; c < rigids_.size(); ++c) {
        const RigidGraph& rigid = rigids_[c];
        if (rigid.members.size() < 3) continue;
        rec.rigid_component_sizes.push_back(static_cast<int>(rigid.members.size()));

        // fresh edge pool: rigid edges plus any other fresh measurement
        // between members; founding-triangle edges stay regardless of age
        // since they pin the canonical frame
        auto is_founder = [&rigid](NodeId id) {
            return id == rigid.anchor_triangle[0] || id == rigid.anchor_triangle[1] ||
                   id == rigid.anchor_triangle[2];
        };
        std::map<std::pair<NodeId, NodeId>, std::pair<double, double>> pool; // range, ts
        for (const auto& [key, e] : rigid.edges) {
            const bool triangle_edge = is_founder(key.first) && is_founder(key.second);
            if (triangle_edge || edge_fresh(key.first, key.second, e.timestamp))
                pool[key] = {e.range, e.timestamp};
        }
        for (const auto& [key, m] : measurements_) {
            if (pool.count(key) || !measurement_fresh(m)) continue;
            if (!rigid.is_member(key.first) || !rigid.is_member(key.second)) continue;
            // support edges enter regardless (they were picked max-LQ); an
            // extra entry has to look LOS-clean to become a constraint
            if (mobility_aware && scenario_.use_link_quality &&
                m.lq_at_measure < kFoundingLqFloor)
                continue;
            pool[key] = {m.range, m.timestamp};
        }

        // members without three fresh edges coast on their last estimate
        // this epoch instead of distorting the embedding; removal cascades
        std::set<NodeId> kept(rigid.members.begin(), rigid.members.end());
        bool peeled = true;
        while (peeled) {
            peeled = false;
            for (NodeId id : std::set<NodeId>(kept)) {
                if (is_founder(id)) continue;
                int deg = 0;
                for (const auto& [key, entry] : pool)
                    if ((key.first == id && kept.count(key.second)) ||
                        (key.second == id && kept.count(key.first)))
                        ++deg;
                if (deg < 3) {
                    kept.erase(id);
                    peeled = true;
                }
            }
        }
        if (kept.size() < 3) continue;

        std::vector<NodeId> kept_members;
        for (NodeId id : rigid.members)
            if (kept.count(id)) kept_members.push_back(id);

        PartialEDM edm(kept_members);
        for (const auto& [key, entry] : pool)
            if (kept.count(key.first) && kept.count(key.second))
                edm.set(key.first, key.second, entry.first, entry.second);

        // the previous canonical embedding, when one exists for this frame,
        // breaks mirror ties in the dense placement
        const std::map<NodeId, Point2>* hint = nullptr;
        {
            auto it = component_state_.find(rigid.anchor_triangle);
            if (it != component_state_.end() && it->second.prev_epoch == epoch_ - 1)
                hint = &it->second.prev_rel;
        }
        RelativeEmbedding emb;
        try {
            const auto init = multilaterate_dense(rigid, edm, hint);
            const PartialEDM full = complete_edm(edm, init.positions);
            emb = cmds_embed(full, static_cast<int>(c));
            // canonicalize onto the multilateration frame: the founding
            // triangle pins origin, +x direction and chirality, so the
            // relative frame stays stable across epochs
            std::vector<Point2> src, dst;
            for (NodeId id : kept_members) {
                src.push_back(emb.coordinates.at(id));
                dst.push_back(init.positions.at(id));
            }
            const auto canon = procrustes_align(src, dst, true);
            for (auto& [id, p] : emb.coordinates) p = apply_transform(canon.transform, p);
        } catch (const std::exception&) {
            continue; // degenerate component stays unlocalized this epoch
        }

        ComponentState& state = component_state_[rigid.anchor_triangle];
        const std::map<NodeId, Point2> prev_rel = state.prev_rel;
        const bool frame_continuous = state.prev_epoch == epoch_ - 1;
        state.prev_rel = emb.coordinates;
        state.prev_epoch = epoch_;

        // --- two-core attachments resolved in the relative frame ------------
        struct TwoCorePlacement {
            NodeId node;
            NonRigidPlacement placement;
        };
        std::vector<TwoCorePlacement> two_core;
        for (NodeId id : graph_.nodes()) {
            if (members_all.count(id)) continue;
            struct Edge {
                NodeId anchor;
                double range;
                double lq;
            };
            std::vector<Edge> edges;
            for (const auto& [key, m] : measurements_) {
                if (!measurement_fresh(m)) continue;
                NodeId other = -1;
                if (key.first == id) other = key.second;
                else if (key.second == id) other = key.first;
                if (other < 0 || !emb.coordinates.count(other)) continue;
                edges.push_back({other, m.range, m.lq_at_measure});
            }
            if (edges.size() < 2) continue;
            std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
                if (a.lq != b.lq) return a.lq > b.lq;
                return a.anchor < b.anchor;
            });
            // previous absolute estimate mapped into the current relative
            // frame via last epoch's transform, for the proximity tie-break
            std::optional<Point2> prev_rel_pos;
            if (last_estimate_.count(id) && state.has_transform)
                prev_rel_pos =
                    apply_transform(inverse(state.transform), last_estimate_.at(id));
            TwoCoreInput in{id, edges[0].anchor, edges[0].range, edges[1].anchor,
                            edges[1].range};
            const auto placement = resolve_two_core(in, emb.coordinates, graph_,
                                                    scenario_.radio.los_max_range, prev_rel_pos);
            two_core.push_back({id, placement});
        }

        // --- orientation ----------------------------------------------------
        // Two heading-derived rotation sources: declared facing pairs of
        // static nodes (exact whenever present), and per-node displacement
        // in the canonical relative frame matched against the node's motion
        // heading. Both come in a plain and a mirrored variant so the flip
        // state can be chosen by agreement.
        std::vector<HeadingPair> facing_pairs;
        {
            std::vector<NodeId> declared;
            for (const NodeSpec& n : scenario_.nodes)
                if (n.speed <= 0.0 && n.heading && emb.coordinates.count(n.id))
                    declared.push_back(n.id);
            for (std::size_t i = 0; i < declared.size(); ++i)
                for (std::size_t j = i + 1; j < declared.size(); ++j) {
                    const NodeId a = declared[i];
                    const NodeId b = declared[j];
                    const double ha = heading_.at(a);
                    const double hb = heading_.at(b);
                    if (std::abs(angle_diff(ha, hb)) > kHeadingAgreementTol) continue;
                    facing_pairs.push_back(
                        {a, b, ha, hb,
                         distance(emb.coordinates.at(a), emb.coordinates.at(b))});
                }
        }
        // (angle, weight) estimates; the angular noise of an estimate scales
        // with 1/baseline, so weights go with the squared baseline length
        std::vector<std::pair<double, double>> est_plain, est_mirror;
        {
            const auto plain = rotation_estimates(emb.coordinates, facing_pairs, false);
            const auto mirror = rotation_estimates(emb.coordinates, facing_pairs, true);
            for (std::size_t k = 0; k < plain.size(); ++k) {
                const double len = std::min(facing_pairs[k].range, 40.0);
                est_plain.emplace_back(plain[k], len * len);
                est_mirror.emplace_back(mirror[k], len * len);
            }
        }
        // Per-node displacements compare against the previous embedding
        // mapped into the current frame; when the founding triangle itself
        // moves, the raw canonical frames of successive epochs differ by a
        // rotation that would otherwise masquerade as node motion.
        if (frame_continuous) {
            std::vector<Point2> prev_pts, cur_pts;
            std::vector<NodeId> common;
            for (NodeId id : kept_members) {
                auto prev = prev_rel.find(id);
                if (prev == prev_rel.end() || !emb.coordinates.count(id)) continue;
                common.push_back(id);
                prev_pts.push_back(prev->second);
                cur_pts.push_back(emb.coordinates.at(id));
            }
            RigidTransform frame_shift; // identity unless alignment succeeds
            if (common.size() >= 3) {
                try {
                    frame_shift = procrustes_align(prev_pts, cur_pts, false).transform;
                } catch (const std::invalid_argument&) {
                }
            }
            for (NodeId id : common) {
                const double v = telemetry_.at(id).velocity_estimate;
                if (v <= kHeadingSpeedGate) continue;
                const Point2 delta = emb.coordinates.at(id) -
                                     apply_transform(frame_shift, prev_rel.at(id));
                const double len = norm(delta);
                if (len < std::max(0.3 * v * epoch_duration, 0.05)) continue;
                const double head_angle = bearing_to_cartesian(heading_.at(id));
                const double w = std::min(len, 5.0) * std::min(len, 5.0);
                est_plain.emplace_back(angle_diff(head_angle, std::atan2(delta.y, delta.x)),
                                       w);
                est_mirror.emplace_back(
                    angle_diff(head_angle, std::atan2(-delta.y, delta.x)), w);
            }
        }

        std::map<NodeId, Point2> proxies;
        for (NodeId id : kept_members) {
            auto est = last_estimate_.find(id);
            auto seen = last_localized_epoch_.find(id);
            if (est == last_estimate_.end() || seen == last_localized_epoch_.end()) continue;
            if (epoch_ - seen->second > 2) continue;
            Point2 proxy = est->second;
            const double v = telemetry_.at(id).velocity_estimate;
            if (v > kHeadingSpeedGate) {
                const double h = heading_.at(id);
                proxy = proxy + Point2{std::sin(h), std::cos(h)} * (v * epoch_duration);
            }
            proxies[id] = proxy;
        }

        auto weighted_resultant = [](const std::vector<std::pair<double, double>>& v,
                                     bool damp_weights) {
            double sx = 0, sy = 0, wsum = 0;
            for (const auto& [a, w] : v) {
                const double ww = damp_weights ? std::sqrt(w) : w;
                sx += ww * std::cos(a);
                sy += ww * std::sin(a);
                wsum += ww;
            }
            return std::tuple<double, double, double>{sx, sy, wsum};
        };

        // The mirror state under which the heading-derived estimates agree
        // is the strongest flip signal. The vote uses damped weights so a
        // single long-baseline pair cannot make both states look coherent,
        // and it must not be overridden by the centroid-ordering test (a
        // wrong flip would poison the proxies for the following epochs).
        const auto [px, py, pw] = weighted_resultant(est_plain, true);
        const auto [mx, my, mw] = weighted_resultant(est_mirror, true);
        const double rp = std::hypot(px, py) / std::max(pw, 1e-12);
        const double rm = std::hypot(mx, my) / std::max(mw, 1e-12);
        FlipDecision flip;
        if (est_plain.size() >= 2 && std::abs(rp - rm) > 0.25) {
            flip = {rm > rp, false};
        } else {
            flip = flip_correction(emb.coordinates, facing_pairs, proxies, state.flip);
            if (flip.low_confidence && est_plain.size() >= 2 && std::abs(rp - rm) > 1e-9)
                flip = {rm > rp, false};
        }

        const auto& est = flip.flip ? est_mirror : est_plain;
        double theta = 0.0;
        bool have_theta = false;
        if (!est.empty()) {
            const auto [sx, sy, wsum] = weighted_resultant(est, false);
            if (wsum > 1e-9 && std::hypot(sx, sy) > 1e-9) {
                theta = std::atan2(sy, sx);
                have_theta = true;
                // rotation varies slowly: blend with the previous epoch when
                // the frame and flip state carried over
                if (state.has_theta && frame_continuous && flip.flip == state.flip) {
                    const double bx = 0.5 * std::cos(theta) + 0.5 * std::cos(state.theta);
                    const double by = 0.5 * std::sin(theta) + 0.5 * std::sin(state.theta);
                    if (std::hypot(bx, by) > 1e-9) theta = std::atan2(by, bx);
                }
            }
        }
        if (!have_theta && state.has_theta) {
            theta = state.theta;
            have_theta = true;
        }
        if (std::getenv("DYNOLOC_DEBUG_ORIENT")) {
            std::fprintf(stderr,
                         "e%03d comp{%d,%d,%d} kept=%zu est=%zu flip=%d lowconf=%d "
                         "theta=%.1fdeg cont=%d\n",
                         epoch_, rigid.anchor_triangle[0], rigid.anchor_triangle[1],
                         rigid.anchor_triangle[2], kept.size(), est.size(), (int)flip.flip,
                         (int)flip.low_confidence, theta * 180.0 / M_PI,
                         (int)frame_continuous);
        }
        if (!have_theta) continue; // relative-only this epoch

        // --- absolute frame --------------------------------------------------
        std::map<NodeId, Point2> rel = emb.coordinates;
        for (const auto& tc : two_core) rel[tc.node] = tc.placement.chosen;

        if (!reference_node_) continue;
        AbsoluteResult abs_res;
        if (rel.count(*reference_node_)) {
            abs_res = to_absolute(rel, *reference_node_, reference_global_, theta, flip.flip);
        } else {
            // reference attached by a single edge: its known position, its
            // facing and one fresh range pin the translation
            const auto ref_heading = usable_heading(*reference_node_);
            NodeId partner = -1;
            double range = 0.0, best_lq = -1.0;
            for (const auto& [key, m] : measurements_) {
                if (!measurement_fresh(m)) continue;
                NodeId other = -1;
                if (key.first == *reference_node_) other = key.second;
                else if (key.second == *reference_node_) other = key.first;
                if (other < 0 || !rel.count(other)) continue;
                if (m.lq_at_measure > best_lq) {
                    best_lq = m.lq_at_measure;
                    partner = other;
                    range = m.range;
                }
            }
            if (partner < 0 || !ref_heading) continue; // relative-only
            const double b = *ref_heading;
            const Point2 target =
                reference_global_ + Point2{std::sin(b), std::cos(b)} * range;
            abs_res.transform.rotation_angle = theta;
            abs_res.transform.flipped = flip.flip;
            abs_res.transform.translation = {0.0, 0.0};
            abs_res.transform.translation =
                target - apply_transform(abs_res.transform, rel.at(partner));
            for (const auto& [id, p] : rel)
                abs_res.positions[id] = apply_transform(abs_res.transform, p);
        }

        state.theta = theta;
        state.flip = flip.flip;
        state.has_theta = true;
        state.transform = abs_res.transform;
        state.has_transform = true;

        for (const auto& [id, p] : abs_res.positions) {
            raw_abs[id] = p;
            placed_component[id] = static_cast<int>(c);
        }
    }

    // --- one-core attachments in the absolute frame -------------------------
    for (NodeId id : graph_.nodes()) {
        if (raw_abs.count(id) || members_all.count(id)) continue;
        struct Edge {
            NodeId anchor;
            double range;
            double lq;
        };
        std::vector<Edge> edges;
        for (const auto& [key, m] : measurements_) {
            if (!measurement_fresh(m)) continue;
            NodeId other = -1;
            if (key.first == id) other = key.second;
            else if (key.second == id) other = key.first;
            if (other < 0 || !raw_abs.count(other)) continue;
            edges.push_back({other, m.range, m.lq_at_measure});
        }
        if (edges.empty()) continue;
        std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
            if (a.lq != b.lq) return a.lq > b.lq;
            return a.anchor < b.anchor;
        });
        std::optional<Point2> prev;
        if (last_estimate_.count(id)) prev = last_estimate_.at(id);
        const auto placed = resolve_one_core(id, raw_abs.at(edges[0].anchor), edges[0].range,
                                             usable_heading(id), prev);
        if (placed) {
            raw_abs[id] = placed->chosen;
            placed_component[id] =
                placed_component.count(edges[0].anchor) ? placed_component[edges[0].anchor] : -1;
        }
    }

    // --- smoothing, bookkeeping, record --------------------------------------
    for (const auto& [id, p] : raw_abs) {
        auto& window = history_[id];
        window.push_back(p);
        while (static_cast<int>(window.size()) > scenario_.smoothing_window)
            window.pop_front();
    }
    const auto smoothed = smooth_locations(history_, scenario_.smoothing_window);

    for (const NodeSpec& n : scenario_.nodes) {
        rec.truth[n.id] = truth_position(n, epoch_t);
        rec.core_number[n.id] = decomp.core_of(n.id);
        const bool loc = raw_abs.count(n.id) > 0;
        rec.localized[n.id] = loc;
        if (loc) {
            last_estimate_[n.id] = smoothed.at(n.id);
            last_localized_epoch_[n.id] = epoch_;
            telemetry_[n.id] = reset_on_localize(telemetry_[n.id]);
        }
        // tracking error: the current estimate (possibly carried from an
        // earlier epoch) against the current truth, so starvation shows up
        // as growing error rather than missing samples
        if (last_estimate_.count(n.id)) {
            rec.estimates[n.id] = last_estimate_[n.id];
            rec.error_m[n.id] = distance(last_estimate_[n.id], rec.truth[n.id]);
        }
        rec.component_id[n.id] =
            placed_component.count(n.id) ? placed_component[n.id] : -1;
    }

    // relative-quality diagnostic: alignment-optimal RMSE over this epoch's
    // localized nodes
    {
        std::vector<Point2> est, truth;
        for (const auto& [id, p] : raw_abs) {
            if (!rec.truth.count(id)) continue;
            est.push_back(rec.estimates.at(id));
            truth.push_back(rec.truth.at(id));
        }
        if (est.size() >= 2) {
            try {
                rec.relative_rmse = procrustes_align(est, truth, true).rmse;
            } catch (const std::invalid_argument&) {
            }
        }
    }

    ++epoch_;
    return rec;
}

std::vector<EpochRecord> Simulator::run_all() {
    std::vector<EpochRecord> records;
    records.reserve(scenario_.epochs);
    for (int i = 0; i < scenario_.epochs; ++i) records.push_back(run_epoch());
    return records;
}

RunSummary evaluate_run(const Scenario& scenario, const std::vector<EpochRecord>& records) {
    RunSummary s;
    s.scenario_name = scenario.name;
    s.strategy = to_string(scenario.strategy);
    s.seed = scenario.seed;
    s.epochs = static_cast<int>(records.size());

    std::vector<double> errors;
    std::vector<double> rel;
    std::size_t localized = 0, total = 0;
    for (const EpochRecord& r : records) {
        std::vector<double> epoch_errors;
        for (const auto& [id, e] : r.error_m) {
            errors.push_back(e);
            epoch_errors.push_back(e);
        }
        for (const auto& [id, loc] : r.localized) {
            ++total;
            if (loc) ++localized;
        }
        if (!epoch_errors.empty()) {
            std::sort(epoch_errors.begin(), epoch_errors.end());
            s.median_error_per_epoch.push_back(epoch_errors[epoch_errors.size() / 2]);
        } else {
            s.median_error_per_epoch.push_back(-1.0);
        }
        if (r.relative_rmse >= 0.0) rel.push_back(r.relative_rmse);
    }
    if (total > 0) s.pct_localized = static_cast<double>(localized) / total;

    if (!errors.empty()) {
        std::sort(errors.begin(), errors.end());
        s.median_error = errors[errors.size() / 2];
        double sum = 0.0;
        for (double e : errors) sum += e;
        s.mean_error = sum / errors.size();
        s.p90_error = errors[static_cast<std::size_t>(0.9 * (errors.size() - 1))];
        const std::size_t points = std::min<std::size_t>(errors.size(), 100);
        for (std::size_t k = 0; k < points; ++k) {
            const std::size_t idx = k * (errors.size() - 1) / std::max<std::size_t>(points - 1, 1);
            s.error_cdf.emplace_back(errors[idx],
                                     static_cast<double>(idx + 1) / errors.size());
        }
    }
    if (!rel.empty()) {
        std::sort(rel.begin(), rel.end());
        s.median_relative_rmse = rel[rel.size() / 2];
    }
    return s;
}

} // namespace dynoloc
