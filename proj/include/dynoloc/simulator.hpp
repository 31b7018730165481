#pragma once

#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dynoloc/absloc.hpp"
#include "dynoloc/metrics.hpp"
#include "dynoloc/ranging.hpp"
#include "dynoloc/relloc.hpp"
#include "dynoloc/scenario.hpp"
#include "dynoloc/scheduler.hpp"
#include "dynoloc/topology.hpp"

namespace dynoloc {

struct EpochRecord {
    int epoch = 0;
    std::map<NodeId, Point2> truth;
    std::map<NodeId, Point2> estimates; // last known estimate per node
    std::map<NodeId, double> error_m;   // only for nodes localized this epoch
    std::map<NodeId, bool> localized;
    std::map<NodeId, int> component_id; // -1 when outside every rigid component
    std::map<NodeId, int> core_number;
    int slots_used = 0;
    int budget_slots = 0;
    std::vector<int> rigid_component_sizes;
    int sessions_admission = 0;
    int sessions_refresh = 0;
    int sessions_excluded = 0;
    double relative_rmse = -1.0; // Procrustes-aligned; -1 when undefined
    std::string strategy;
};

// Deterministic epoch-driven world: scripted waypoint mobility, simulated
// UWB channel, strategy-driven ranging, and the full localization pipeline.
class Simulator {
public:
    explicit Simulator(Scenario scenario);

    EpochRecord run_epoch();
    std::vector<EpochRecord> run_all();

    const Scenario& scenario() const { return scenario_; }

    // truth state is a pure function of time
    Point2 truth_position(const NodeSpec& node, double t) const;
    double truth_heading(const NodeSpec& node, double t) const; // noiseless

private:
    // keyed by the founding triangle, which pins the canonical relative
    // frame for as long as the component survives
    struct ComponentState {
        double theta = 0.0;
        bool flip = false;
        bool has_theta = false;
        RigidTransform transform; // previous epoch's relative->absolute map
        bool has_transform = false;
        std::map<NodeId, Point2> prev_rel; // previous canonical embedding
        int prev_epoch = -1000;
    };

    void advance_mobility(double epoch_start, double epoch_end);
    void refresh_connectivity(double now);
    RigidGraph merged_rigid() const;
    void bootstrap_components(const CoreDecomposition& decomp, int& remaining_slots,
                              double now);
    void apply_session_results(const RangingSession& session,
                               const std::vector<RangeMeasurement>& measured);
    std::optional<double> usable_heading(NodeId id) const;

    Scenario scenario_;
    RngStream run_rng_;
    int epoch_ = 0;
    std::map<NodeId, double> ppm_offset_;
    std::map<NodeId, NodeTelemetry> telemetry_;
    std::map<NodeId, double> heading_; // current noisy heading per node
    ConnectivityGraph graph_;
    std::vector<RigidGraph> rigids_;
    std::map<std::pair<NodeId, NodeId>, RangeMeasurement> measurements_;
    LocationHistory history_;
    std::map<NodeId, Point2> last_estimate_;
    std::map<NodeId, int> last_localized_epoch_;
    std::map<std::array<NodeId, 3>, ComponentState> component_state_;
    std::vector<std::array<NodeId, 3>> prev_anchors_;
    std::size_t h_agnos_cursor_ = 0;
    std::optional<NodeId> reference_node_;
    Point2 reference_global_{0.0, 0.0};
};

struct RunSummary {
    std::string scenario_name;
    std::string strategy;
    std::uint64_t seed = 0;
    int epochs = 0;
    double median_error = -1.0;
    double mean_error = -1.0;
    double p90_error = -1.0;
    double pct_localized = 0.0;
    double median_relative_rmse = -1.0;
    std::vector<double> median_error_per_epoch;
    std::vector<std::pair<double, double>> error_cdf; // (error, cumulative fraction)
};

RunSummary evaluate_run(const Scenario& scenario, const std::vector<EpochRecord>& records);

} // namespace dynoloc
