#include <doctest.h>

#include <cmath>

#include "dynoloc/metrics.hpp"
#include "dynoloc/ranging.hpp"
#include "dynoloc/rng.hpp"

using namespace dynoloc;

TEST_CASE("constant-velocity integration accumulates M") {
    NodeTelemetry t;
    t.velocity_estimate = 1.0;
    for (int i = 0; i < 10; ++i) t = update_mobility(t, 0.0, 0.1);
    CHECK(t.mobility_metric == doctest::Approx(1.0));
    CHECK(t.velocity_estimate == doctest::Approx(1.0));
}

TEST_CASE("static node follows e^TsL - 1") {
    NodeTelemetry t;
    for (int i = 0; i < 10; ++i) t = update_mobility(t, 0.0, 0.1);
    CHECK(t.time_since_localization == doctest::Approx(1.0));
    CHECK(t.mobility_metric == doctest::Approx(std::exp(1.0) - 1.0));

    NodeTelemetry fresh;
    CHECK(fresh.mobility_metric == 0.0); // TsL = 0 -> e^0 - 1
}

TEST_CASE("static closed form matches stepped update within 1e-9") {
    NodeTelemetry t;
    const double dt = 0.05;
    for (int i = 1; i <= 200; ++i) {
        t = update_mobility(t, 0.0, dt);
        const double tsl = i * dt;
        CHECK(std::abs(t.mobility_metric - (std::exp(tsl) - 1.0)) < 1e-9);
    }
}

TEST_CASE("M is non-decreasing between localizations and resets to zero") {
    RngStream rng(3);
    NodeTelemetry t;
    double prev = 0.0;
    for (int i = 0; i < 50; ++i) {
        t = update_mobility(t, rng.uniform(0.0, 0.5), 0.1);
        CHECK(t.mobility_metric >= prev);
        prev = t.mobility_metric;
    }
    t = reset_on_localize(t);
    CHECK(t.mobility_metric == 0.0);
    CHECK(t.velocity_estimate == 0.0);
    CHECK(t.time_since_localization == 0.0);
}

TEST_CASE("acceleration drives velocity then M") {
    NodeTelemetry t;
    t = update_mobility(t, 2.0, 0.5); // v: 0 -> 1, M += 0.5
    CHECK(t.velocity_estimate == doctest::Approx(1.0));
    CHECK(t.mobility_metric == doctest::Approx(0.5));
}

TEST_CASE("update_mobility rejects non-positive dt") {
    NodeTelemetry t;
    CHECK_THROWS_AS(update_mobility(t, 0.0, 0.0), std::invalid_argument);
}

TEST_CASE("link quality worked example") {
    CirFeatures c;
    c.f1 = 1.0 / 3.0;
    c.f2 = c.f3 = c.f4 = 1.0;
    const auto lq = link_quality_from_cir(c);
    CHECK(lq.value == doctest::Approx(1.0 / (0.005 + 1.0 / 3.0)));
    CHECK(lq.value == doctest::Approx(2.955).epsilon(1e-3));
}

TEST_CASE("link quality epsilon floor") {
    CirFeatures zero;
    zero.f1 = zero.f2 = 0.0;
    zero.f3 = zero.f4 = 0.0;
    CHECK(link_quality_from_cir(zero).value == doctest::Approx(200.0));
}

TEST_CASE("link quality halves when a feature doubles (far from the floor)") {
    CirFeatures c;
    c.f1 = 0.5;
    c.f2 = 2.0;
    c.f3 = 1.5;
    c.f4 = 1.2;
    const double v1 = link_quality_from_cir(c).value;
    c.f2 *= 2.0;
    const double v2 = link_quality_from_cir(c).value;
    CHECK(v2 < v1);
    CHECK(v2 == doctest::Approx(1.0 / (0.005 + 0.5 * 4.0 * 1.5 * 1.2)));
}

TEST_CASE("link quality strictly decreasing in each feature") {
    RngStream rng(8);
    for (int i = 0; i < 200; ++i) {
        CirFeatures c;
        c.f1 = rng.uniform(0.01, 2.0);
        c.f2 = rng.uniform(0.01, 2.0);
        c.f3 = rng.uniform(1.0, 3.0);
        c.f4 = rng.uniform(1.0, 3.0);
        const double base = link_quality_from_cir(c).value;
        for (int f = 0; f < 4; ++f) {
            CirFeatures bumped = c;
            (f == 0 ? bumped.f1 : f == 1 ? bumped.f2 : f == 2 ? bumped.f3 : bumped.f4) += 0.1;
            CHECK(link_quality_from_cir(bumped).value < base);
        }
    }
}

TEST_CASE("stale links decay to zero") {
    ConnectivityGraph g;
    g.set_link(0, 1, LinkQuality{5.0, 100.0});
    g.set_link(0, 2, LinkQuality{5.0, 74.0});
    g.set_link(1, 2, LinkQuality{5.0, 105.0});

    const auto decayed = decay_stale_links(g, 105.0, 30.0);
    CHECK(decayed.link(0, 1).value == 5.0);  // 5 s old
    CHECK(decayed.link(0, 2).value == 0.0);  // 31 s old
    CHECK(decayed.link(1, 2).value == 5.0);

    const auto fresh = decay_stale_links(g, 106.0, 60.0);
    CHECK(fresh.link(0, 2).value == 5.0); // all within threshold
}

TEST_CASE("mean LQ separates LOS from NLOS links") {
    RngStream rng(2024);
    double los_sum = 0.0, nlos_sum = 0.0;
    const int n = 1000;
    for (int i = 0; i < n; ++i) {
        los_sum += link_quality_from_cir(synthesize_cir_features(true, 0, rng)).value;
        const int walls = 1 + (i % 4);
        nlos_sum += link_quality_from_cir(synthesize_cir_features(false, walls, rng)).value;
    }
    CHECK(los_sum / n > nlos_sum / n);
}
