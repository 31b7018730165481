#include "dynoloc/ranging.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dynoloc {

double tof_from_timestamps(const TwrTimestamps& t) {
    if (t.d1 <= 0.0 || t.r1 <= 0.0 || t.d2 <= 0.0 || t.r2 <= 0.0)
        throw std::invalid_argument("tof_from_timestamps: intervals must be positive");
    const double num = t.d1 * t.d2 - t.r1 * t.r2;
    const double est1 = num / (2.0 * (t.d1 + t.r1));
    const double est2 = num / (2.0 * (t.d2 + t.r2));
    const double tof = 0.5 * (est1 + est2);
    if (tof <= 0.0) throw std::runtime_error("tof_from_timestamps: non-physical exchange");
    return tof;
}

TwrTimestamps simulate_twr_exchange(double tof_us, double reply_initiator_us,
                                    double reply_responder_us,
                                    double initiator_ppm_offset,
                                    double responder_ppm_offset) {
    const double sa = 1.0 + initiator_ppm_offset;
    const double sb = 1.0 + responder_ppm_offset;
    TwrTimestamps t;
    t.d1 = (2.0 * tof_us + reply_responder_us) * sa; // poll tx .. response rx
    t.r1 = reply_initiator_us * sa;                  // response rx .. final tx
    t.d2 = (2.0 * tof_us + reply_initiator_us) * sb; // response tx .. final rx
    t.r2 = reply_responder_us * sb;                  // poll rx .. response tx
    return t;
}

int slots_for_aggregated_session(int responder_count) {
    if (responder_count < 1)
        throw std::invalid_argument("slots_for_aggregated_session: need >= 1 responder");
    return 2 * responder_count + 2;
}

ChannelParams noiseless_channel() {
    ChannelParams p;
    p.los_sigma = 1e-12;
    p.los_bias = 1e-12;
    p.nlos_bias_mean_per_wall = 1e-12;
    p.nlos_bias_base = 1e-12;
    p.bias_cap = 1e-12;
    p.clock_ppm_max = 0.0;
    return p;
}

LinkState simulate_link(const Point2& pos_a, const Point2& pos_b,
                        const std::vector<WallSegment>& walls,
                        const ChannelParams& params) {
    LinkState state;
    for (const WallSegment& w : walls)
        if (segments_intersect(pos_a, pos_b, w.a, w.b)) ++state.wall_count;
    state.is_los = state.wall_count == 0;
    const double d = distance(pos_a, pos_b);
    const double max_range =
        state.is_los ? params.los_max_range
                     : std::max(10.0, params.nlos_base_range -
                                          params.per_wall_range_penalty * state.wall_count);
    state.connected = d <= max_range;
    return state;
}

double measure_range(double true_distance, bool is_los, int wall_count,
                     const ChannelParams& params, RngStream& rng) {
    if (true_distance <= 0.0)
        throw std::invalid_argument("measure_range: true_distance must be > 0");
    double bias;
    if (is_los) {
        bias = std::max(0.0, rng.normal(params.los_bias, params.los_sigma));
    } else {
        const double mean =
            params.nlos_bias_base + params.nlos_bias_mean_per_wall * wall_count;
        bias = std::min(params.bias_cap, rng.exponential(mean));
    }
    return true_distance + bias;
}

CirFeatures synthesize_cir_features(bool is_los, int wall_count, RngStream& rng) {
    CirFeatures c;
    c.f1 = rng.uniform(0.0, 0.4);
    c.f2 = rng.uniform(0.05, 0.2);
    c.f3 = rng.uniform(1.0, 1.3);
    c.f4 = rng.uniform(1.0, 1.5);
    if (!is_los && wall_count > 0) {
        const double scale = 1.0 + 0.3 * wall_count;
        c.f1 *= scale * rng.uniform(0.8, 1.2);
        c.f2 *= scale * rng.uniform(0.8, 1.2);
        c.f3 *= scale * rng.uniform(0.8, 1.2);
        c.f4 *= scale * rng.uniform(0.8, 1.2);
    }
    return c;
}

} // namespace dynoloc
