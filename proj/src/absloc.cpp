#include "dynoloc/absloc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dynoloc {

// pairs are directed, edge a->b pointing along the shared heading direction
std::vector<double> rotation_estimates(const std::map<NodeId, Point2>& embedding,
                                       const std::vector<HeadingPair>& pairs, bool flipped) {
    std::vector<double> thetas;
    for (const HeadingPair& p : pairs) {
        auto ia = embedding.find(p.a);
        auto ib = embedding.find(p.b);
        if (ia == embedding.end() || ib == embedding.end() || p.range <= 0.0) continue;
        if (std::abs(angle_diff(p.heading_a, p.heading_b)) > kHeadingAgreementTol) continue;

        const double global_bearing =
            circular_mean({p.heading_a, p.heading_b}); // edge slope vs North
        const double global_angle = bearing_to_cartesian(global_bearing);

        Point2 d = ib->second - ia->second;
        if (flipped) d.y = -d.y;
        if (norm(d) < 1e-9) continue;
        const double rel_angle = std::atan2(d.y, d.x);
        thetas.push_back(angle_diff(global_angle, rel_angle));
    }
    return thetas;
}

namespace {
double resultant_length(const std::vector<double>& angles) {
    double sx = 0.0, sy = 0.0;
    for (double a : angles) {
        sx += std::cos(a);
        sy += std::sin(a);
    }
    return std::hypot(sx, sy) / std::max<std::size_t>(angles.size(), 1);
}
} // namespace

double rotation_from_headings(const std::map<NodeId, Point2>& embedding,
                              const std::vector<HeadingPair>& pairs, bool flipped) {
    const auto thetas = rotation_estimates(embedding, pairs, flipped);
    if (thetas.size() < 2) throw std::runtime_error("rotation unresolvable");
    return circular_mean(thetas);
}

FlipDecision flip_correction(const std::map<NodeId, Point2>& embedding,
                             const std::vector<HeadingPair>& pairs,
                             const std::map<NodeId, Point2>& heading_implied_positions,
                             bool previous_flip) {
    // vertex ordering about the centroid: visit nodes in the embedding's
    // angular order and measure the signed area they trace in the
    // heading-implied frame; opposite orientation means a reflection
    std::vector<NodeId> common;
    for (const auto& [id, p] : embedding)
        if (heading_implied_positions.count(id)) common.push_back(id);

    if (common.size() >= 3) {
        Point2 ce{0, 0}, cp{0, 0};
        for (NodeId id : common) {
            ce = ce + embedding.at(id);
            cp = cp + heading_implied_positions.at(id);
        }
        ce = ce * (1.0 / static_cast<double>(common.size()));
        cp = cp * (1.0 / static_cast<double>(common.size()));

        std::sort(common.begin(), common.end(), [&](NodeId x, NodeId y) {
            const Point2 dx = embedding.at(x) - ce;
            const Point2 dy = embedding.at(y) - ce;
            return std::atan2(dx.y, dx.x) < std::atan2(dy.y, dy.x);
        });

        double area_emb = 0.0, area_proxy = 0.0;
        for (std::size_t k = 0; k < common.size(); ++k) {
            const std::size_t nxt = (k + 1) % common.size();
            const Point2 a = embedding.at(common[k]) - ce;
            const Point2 b = embedding.at(common[nxt]) - ce;
            area_emb += cross(a, b);
            const Point2 pa = heading_implied_positions.at(common[k]) - cp;
            const Point2 pb = heading_implied_positions.at(common[nxt]) - cp;
            area_proxy += cross(pa, pb);
        }
        const double scale = std::abs(area_emb) + std::abs(area_proxy);
        if (scale > 1e-9 && std::abs(area_emb) > 0.05 * scale &&
            std::abs(area_proxy) > 0.05 * scale)
            return {area_emb * area_proxy < 0.0, false};
        // near-degenerate (collinear) ordering: fall through
    }

    // fallback: whichever flip state makes the per-edge rotations agree
    const auto plain = rotation_estimates(embedding, pairs, false);
    const auto mirrored = rotation_estimates(embedding, pairs, true);
    if (plain.size() >= 2) {
        const double r_plain = resultant_length(plain);
        const double r_mirr = resultant_length(mirrored);
        if (std::abs(r_plain - r_mirr) > 1e-9) return {r_mirr > r_plain, false};
    }
    return {previous_flip, true};
}

AbsoluteResult to_absolute(const std::map<NodeId, Point2>& embedding,
                           NodeId reference_node, const Point2& reference_global,
                           double theta, bool flip) {
    auto ref = embedding.find(reference_node);
    if (ref == embedding.end())
        throw std::invalid_argument("to_absolute: reference node not in component");

    AbsoluteResult out;
    out.transform.rotation_angle = theta;
    out.transform.flipped = flip;
    out.transform.translation = {0.0, 0.0};
    const Point2 ref_mapped = apply_transform(out.transform, ref->second);
    out.transform.translation = reference_global - ref_mapped;

    for (const auto& [id, p] : embedding)
        out.positions[id] = apply_transform(out.transform, p);
    return out;
}

} // namespace dynoloc
