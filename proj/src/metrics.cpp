#include "dynoloc/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace dynoloc {

NodeTelemetry update_mobility(const NodeTelemetry& t, double accel, double dt) {
    if (dt <= 0.0) throw std::invalid_argument("update_mobility: dt must be > 0");
    NodeTelemetry out = t;
    out.time_since_localization += dt;
    out.last_imu_read += dt;
    if (std::abs(t.velocity_estimate) < kStaticThreshold &&
        std::abs(accel) < kStaticThreshold) {
        out.mobility_metric = std::exp(out.time_since_localization) - 1.0;
    } else {
        out.velocity_estimate += accel * dt;
        out.mobility_metric += std::abs(out.velocity_estimate) * dt;
    }
    return out;
}

NodeTelemetry reset_on_localize(const NodeTelemetry& t) {
    NodeTelemetry out = t;
    out.mobility_metric = 0.0;
    out.velocity_estimate = 0.0;
    out.time_since_localization = 0.0;
    return out;
}

LinkQuality link_quality_from_cir(const CirFeatures& c, double now) {
    if (!std::isfinite(c.f1) || !std::isfinite(c.f2) || !std::isfinite(c.f3) ||
        !std::isfinite(c.f4))
        throw std::invalid_argument("link_quality_from_cir: non-finite feature");
    const double p_nlos = c.f1 * c.f2 * c.f3 * c.f4;
    return LinkQuality{1.0 / (kLinkQualityEpsilon + p_nlos), now};
}

ConnectivityGraph decay_stale_links(const ConnectivityGraph& g, double now,
                                    double threshold) {
    if (threshold <= 0.0)
        throw std::invalid_argument("decay_stale_links: threshold must be > 0");
    ConnectivityGraph out = g;
    for (const auto& [a, b] : g.edges()) {
        const LinkQuality lq = g.link(a, b);
        if (now - lq.last_update > threshold)
            out.set_link(a, b, LinkQuality{0.0, lq.last_update});
    }
    return out;
}

} // namespace dynoloc
