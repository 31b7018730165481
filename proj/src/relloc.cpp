#include "dynoloc/relloc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace dynoloc {

PartialEDM::PartialEDM(std::vector<NodeId> node_ids) : ids_(std::move(node_ids)) {
    const std::size_t n = ids_.size();
    for (std::size_t i = 0; i < n; ++i) index_[ids_[i]] = static_cast<int>(i);
    if (index_.size() != n) throw std::invalid_argument("PartialEDM: duplicate node ids");
    d_.assign(n * n, 0.0);
    mask_.assign(n * n, false);
    ts_.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) mask_[i * n + i] = true; // diagonal
}

int PartialEDM::index_of(NodeId id) const {
    auto it = index_.find(id);
    return it == index_.end() ? -1 : it->second;
}

void PartialEDM::set(NodeId a, NodeId b, double dist, double timestamp) {
    const int i = index_of(a);
    const int j = index_of(b);
    if (i < 0 || j < 0) throw std::invalid_argument("PartialEDM: unknown node id");
    if (i == j) throw std::invalid_argument("PartialEDM: diagonal entry");
    if (dist < 0.0) throw std::invalid_argument("PartialEDM: negative distance");
    set_idx(i, j, dist, timestamp, true);
}

void PartialEDM::set_idx(int i, int j, double dist, double timestamp, bool measured) {
    d_[at(i, j)] = d_[at(j, i)] = dist;
    mask_[at(i, j)] = mask_[at(j, i)] = measured;
    ts_[at(i, j)] = ts_[at(j, i)] = timestamp;
}

bool PartialEDM::measured(NodeId a, NodeId b) const {
    const int i = index_of(a);
    const int j = index_of(b);
    if (i < 0 || j < 0) return false;
    return mask_[at(i, j)];
}

double PartialEDM::dist(NodeId a, NodeId b) const {
    const int i = index_of(a);
    const int j = index_of(b);
    if (i < 0 || j < 0) throw std::invalid_argument("PartialEDM: unknown node id");
    return d_[at(i, j)];
}

bool PartialEDM::complete() const {
    return std::all_of(mask_.begin(), mask_.end(), [](bool m) { return m; });
}

MultilaterationOutput sequential_multilaterate(const RigidGraph& rigid) {
    if (rigid.empty()) throw std::invalid_argument("sequential_multilaterate: empty graph");
    MultilaterationOutput out;
    out.positions = replay_positions(rigid);
    for (const AdmissionEntry& entry : rigid.admission_log) {
        if (entry.support.empty()) continue;
        const Point2& p = out.positions.at(entry.node);
        double worst = 0.0;
        for (NodeId s : entry.support) {
            const RigidEdge* e = rigid.edge(entry.node, s);
            if (e) worst = std::max(worst, std::abs(distance(p, out.positions.at(s)) - e->range));
        }
        if (worst > kTrilaterationResidualTol) out.inconsistent.push_back(entry.node);
    }
    return out;
}

namespace {
// scatter aspect ratio: near-zero when the points sit on one line
bool anchors_nearly_collinear(const std::vector<Point2>& pts, double tol) {
    Point2 c{0.0, 0.0};
    for (const Point2& p : pts) c = c + p;
    c = c * (1.0 / static_cast<double>(pts.size()));
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const Point2& p : pts) {
        const Point2 d = p - c;
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
    }
    const double tr = sxx + syy;
    const double det = sxx * syy - sxy * sxy;
    const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
    const double lmax = tr / 2.0 + disc;
    const double lmin = tr / 2.0 - disc;
    if (lmax <= 1e-12) return true;
    return std::sqrt(std::max(0.0, lmin) / lmax) < tol;
}
} // namespace

MultilaterationOutput multilaterate_dense(const RigidGraph& rigid, const PartialEDM& edm,
                                          const std::map<NodeId, Point2>* side_hint) {
    MultilaterationOutput out;
    const MultilaterationOutput support = sequential_multilaterate(rigid);

    for (const AdmissionEntry& entry : rigid.admission_log) {
        const NodeId id = entry.node;
        if (entry.support.empty()) {
            out.positions[id] = support.positions.at(id); // founding triangle
            continue;
        }
        std::vector<Point2> anchors;
        std::vector<double> ranges;
        for (const auto& [placed, pos] : out.positions) {
            if (!edm.measured(id, placed)) continue;
            anchors.push_back(pos);
            ranges.push_back(edm.dist(id, placed));
        }
        if (anchors.size() < 3) {
            out.positions[id] = support.positions.at(id);
            continue;
        }
        const auto ls = least_squares_position(anchors, ranges);
        Point2 pos = ls.position;
        if (anchors_nearly_collinear(anchors, kConditionedAreaTol) && side_hint) {
            auto hint = side_hint->find(id);
            if (hint != side_hint->end()) {
                const Point2 mirror = reflect_across_line(anchors, pos);
                if (distance(mirror, hint->second) < distance(pos, hint->second))
                    pos = mirror;
            }
        }
        out.positions[id] = pos;
        if (ls.residual > kTrilaterationResidualTol) out.inconsistent.push_back(id);
    }
    return out;
}

PartialEDM complete_edm(const PartialEDM& edm,
                        const std::map<NodeId, Point2>& init_coords,
                        const EdmCompletionParams& params) {
    const int n = edm.size();
    PartialEDM out = edm;
    if (n <= 1) return out;

    std::vector<Point2> x(n);
    for (int i = 0; i < n; ++i) {
        auto it = init_coords.find(edm.ids()[i]);
        if (it == init_coords.end())
            throw std::invalid_argument("complete_edm: missing initial coordinate");
        x[i] = it->second;
    }

    std::vector<std::pair<int, int>> measured;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (edm.measured_idx(i, j)) measured.emplace_back(i, j);

    auto total_residual = [&]() {
        double sum = 0.0;
        for (const auto& [i, j] : measured)
            sum += std::abs(distance(x[i], x[j]) - edm.dist_idx(i, j));
        return sum;
    };

    double lambda = params.lambda0;
    double prev = total_residual();
    for (int iter = 1; iter <= params.max_iter; ++iter) {
        // one sweep: every measured pair moved once, worst residual first
        std::vector<bool> done(measured.size(), false);
        for (std::size_t step = 0; step < measured.size(); ++step) {
            double best = -1.0;
            std::size_t pick = measured.size();
            for (std::size_t k = 0; k < measured.size(); ++k) {
                if (done[k]) continue;
                const auto& [i, j] = measured[k];
                const double gap = std::abs(distance(x[i], x[j]) - edm.dist_idx(i, j));
                if (gap > best) {
                    best = gap;
                    pick = k;
                }
            }
            if (pick == measured.size()) break;
            done[pick] = true;
            auto [i, j] = measured[pick];
            Point2 diff = x[i] - x[j];
            double cur = norm(diff);
            if (cur < 1e-9) {
                x[i].x += 1e-6; // jitter coincident points apart
                diff = x[i] - x[j];
                cur = norm(diff);
            }
            // signed residual: positive when too far apart, pulling the
            // pair together; negative pushes them apart
            const double residual = (cur - edm.dist_idx(i, j)) / cur;
            const Point2 delta = diff * (residual * lambda * 0.5);
            x[i] = x[i] - delta;
            x[j] = x[j] + delta;
        }

        lambda = 1.0 / (1.0 + iter * params.delta_lambda);
        const double now = total_residual();
        const double improvement = prev > 1e-15 ? (prev - now) / prev : 0.0;
        prev = now;
        if (improvement >= 0.0 && improvement < params.min_improvement) break;
    }

    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (!edm.measured_idx(i, j))
                out.set_idx(i, j, distance(x[i], x[j]), 0.0, true);
    return out;
}

RelativeEmbedding cmds_embed(const PartialEDM& full_edm, int component_id) {
    if (!full_edm.complete())
        throw std::invalid_argument("cmds_embed: EDM has missing entries");
    const int n = full_edm.size();
    if (n < 2) throw std::invalid_argument("cmds_embed: need at least 2 nodes");

    Eigen::MatrixXd d2(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double d = full_edm.dist_idx(i, j);
            d2(i, j) = d * d;
        }

    const Eigen::MatrixXd centering =
        Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / n);
    const Eigen::MatrixXd gram = -0.5 * centering * d2 * centering;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success)
        throw std::runtime_error("cmds_embed: eigendecomposition failed");

    // eigenvalues ascending; take the two largest
    const Eigen::VectorXd evals = eig.eigenvalues();
    const double tol = 1e-9 * std::max(gram.trace(), 1e-30);
    const double l1 = evals(n - 1);
    const double l2 = n >= 2 ? evals(n - 2) : 0.0;

    if (l1 <= tol) throw std::runtime_error("degenerate configuration");
    const bool planar = l2 > tol;
    if (!planar && n > 2) throw std::runtime_error("degenerate configuration");

    RelativeEmbedding emb;
    emb.component_id = component_id;
    Eigen::MatrixXd coords(n, 2);
    coords.col(0) = eig.eigenvectors().col(n - 1) * std::sqrt(l1);
    if (planar)
        coords.col(1) = eig.eigenvectors().col(n - 2) * std::sqrt(l2);
    else
        coords.col(1).setZero(); // two collinear points embed on a line

    // enforce exact centering
    coords.rowwise() -= coords.colwise().mean();

    Eigen::MatrixXd reconstructed = coords * coords.transpose();
    emb.strain = (reconstructed - gram).norm();
    for (int i = 0; i < n; ++i)
        emb.coordinates[full_edm.ids()[i]] = {coords(i, 0), coords(i, 1)};
    return emb;
}

NonRigidPlacement resolve_two_core(const TwoCoreInput& input,
                                   const std::map<NodeId, Point2>& embedding,
                                   const ConnectivityGraph& graph,
                                   double proximity_range,
                                   const std::optional<Point2>& previous_position) {
    NonRigidPlacement out;
    out.node = input.node;
    out.method = PlacementMethod::TwoRangeDisambiguation;

    const Point2& ca = embedding.at(input.anchor_a);
    const Point2& cb = embedding.at(input.anchor_b);
    const auto hit = intersect_circles(ca, input.range_a, cb, input.range_b);
    if (!hit) {
        // inconsistent ranges: closest-approach midpoint on the center line
        const double d = distance(ca, cb);
        Point2 u = d > 1e-12 ? (cb - ca) * (1.0 / d) : Point2{1.0, 0.0};
        const double along = input.range_a + (d - input.range_a - input.range_b) * 0.5;
        out.chosen = ca + u * along;
        out.candidates = {out.chosen};
        out.low_confidence = true;
        return out;
    }

    out.candidates = {hit->first, hit->second};

    // a candidate sitting near an embedded node the 2-core node cannot hear
    // contradicts its 2-core status
    auto contradicted = [&](const Point2& cand) {
        for (const auto& [id, pos] : embedding) {
            if (id == input.anchor_a || id == input.anchor_b || id == input.node) continue;
            if (distance(cand, pos) <= proximity_range &&
                graph.link(input.node, id).value == 0.0)
                return true;
        }
        return false;
    };

    const bool bad_first = contradicted(out.candidates[0]);
    const bool bad_second = contradicted(out.candidates[1]);
    if (bad_first != bad_second) {
        out.chosen = bad_first ? out.candidates[1] : out.candidates[0];
        return out;
    }

    if (previous_position) {
        out.chosen = distance(out.candidates[0], *previous_position) <=
                             distance(out.candidates[1], *previous_position)
                         ? out.candidates[0]
                         : out.candidates[1];
        return out;
    }

    // first epoch: deterministic y-then-x order
    const auto yx_less = [](const Point2& a, const Point2& b) {
        if (a.y != b.y) return a.y < b.y;
        return a.x < b.x;
    };
    out.chosen = yx_less(out.candidates[0], out.candidates[1]) ? out.candidates[0]
                                                               : out.candidates[1];
    return out;
}

std::optional<NonRigidPlacement> resolve_one_core(NodeId node, const Point2& anchor_abs,
                                                  double range,
                                                  const std::optional<double>& heading,
                                                  const std::optional<Point2>& previous_position) {
    if (!heading) return std::nullopt; // unlocalized this epoch
    NonRigidPlacement out;
    out.node = node;
    out.method = PlacementMethod::HeadingProjection;

    // bearing measured clockwise from North: direction (sin b, cos b) with
    // +x East, +y North. Motion toward or away from the anchor flips the
    // sign; keep whichever lands nearer the previous position.
    const double b = *heading;
    const Point2 fwd = anchor_abs + Point2{std::sin(b), std::cos(b)} * range;
    const Point2 bwd = anchor_abs + Point2{std::sin(b + M_PI), std::cos(b + M_PI)} * range;
    out.candidates = {fwd, bwd};
    if (previous_position) {
        out.chosen = distance(fwd, *previous_position) <= distance(bwd, *previous_position)
                         ? fwd
                         : bwd;
    } else {
        out.chosen = fwd; // no history: take the bearing at face value
    }
    return out;
}

std::map<NodeId, Point2> smooth_locations(const LocationHistory& history, int window_len) {
    if (window_len < 1) throw std::invalid_argument("smooth_locations: window_len >= 1");
    std::map<NodeId, Point2> out;
    for (const auto& [id, window] : history) {
        if (window.empty()) continue;
        const std::size_t take = std::min<std::size_t>(window.size(), window_len);
        Point2 mean{0.0, 0.0};
        for (std::size_t k = window.size() - take; k < window.size(); ++k)
            mean = mean + window[k];
        out[id] = mean * (1.0 / static_cast<double>(take));
    }
    return out;
}

} // namespace dynoloc
