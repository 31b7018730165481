#include <doctest.h>

#include <cmath>

#include "dynoloc/geometry.hpp"
#include "dynoloc/rng.hpp"

using namespace dynoloc;

namespace {
Point2 random_point(RngStream& rng, double span = 20.0) {
    return {rng.uniform(-span, span), rng.uniform(-span, span)};
}
RigidTransform random_transform(RngStream& rng) {
    RigidTransform t;
    t.rotation_angle = rng.uniform(-M_PI, M_PI);
    t.translation = random_point(rng, 10.0);
    t.flipped = rng.bernoulli(0.5);
    return t;
}
} // namespace

TEST_CASE("apply_transform basics") {
    RigidTransform identity;
    Point2 p{3.0, 4.0};
    Point2 q = apply_transform(identity, p);
    CHECK(q.x == doctest::Approx(3.0));
    CHECK(q.y == doctest::Approx(4.0));

    RigidTransform quarter;
    quarter.rotation_angle = M_PI / 2.0;
    q = apply_transform(quarter, {1.0, 0.0});
    CHECK(q.x == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(q.y == doctest::Approx(1.0));

    RigidTransform flip;
    flip.flipped = true;
    q = apply_transform(flip, {1.0, 2.0});
    CHECK(q.x == doctest::Approx(1.0));
    CHECK(q.y == doctest::Approx(-2.0));
}

TEST_CASE("transform inverse round-trips within 1e-9") {
    RngStream rng(42);
    for (int i = 0; i < 200; ++i) {
        const RigidTransform t = random_transform(rng);
        const RigidTransform inv = inverse(t);
        const Point2 p = random_point(rng);
        const Point2 back = apply_transform(inv, apply_transform(t, p));
        CHECK(distance(back, p) < 1e-9);
    }
}

TEST_CASE("transform composition is associative") {
    RngStream rng(7);
    for (int i = 0; i < 100; ++i) {
        const RigidTransform a = random_transform(rng);
        const RigidTransform b = random_transform(rng);
        const RigidTransform c = random_transform(rng);
        const Point2 p = random_point(rng);
        const Point2 lhs = apply_transform(compose(compose(a, b), c), p);
        const Point2 rhs = apply_transform(compose(a, compose(b, c)), p);
        const Point2 direct = apply_transform(a, apply_transform(b, apply_transform(c, p)));
        CHECK(distance(lhs, rhs) < 1e-9);
        CHECK(distance(lhs, direct) < 1e-9);
    }
}

TEST_CASE("are_collinear") {
    CHECK(are_collinear({0, 0}, {1, 0}, {2, 0}, 1e-3));
    CHECK_FALSE(are_collinear({0, 0}, {1, 0}, {0, 1}, 1e-3));
    // normalized area = 1e-6 / 4 < 1e-3
    CHECK(are_collinear({0, 0}, {1, 0}, {2, 1e-6}, 1e-3));
}

TEST_CASE("are_collinear is permutation-invariant") {
    RngStream rng(11);
    for (int i = 0; i < 100; ++i) {
        const Point2 a = random_point(rng), b = random_point(rng), c = random_point(rng);
        const bool expected = are_collinear(a, b, c);
        CHECK(are_collinear(a, c, b) == expected);
        CHECK(are_collinear(b, a, c) == expected);
        CHECK(are_collinear(b, c, a) == expected);
        CHECK(are_collinear(c, a, b) == expected);
        CHECK(are_collinear(c, b, a) == expected);
    }
}

TEST_CASE("procrustes on identical point sets") {
    std::vector<Point2> square{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    const auto res = procrustes_align(square, square, false);
    CHECK(res.rmse < 1e-12);
    CHECK(std::abs(res.transform.rotation_angle) < 1e-9);
}

TEST_CASE("procrustes recovers a known rotation") {
    std::vector<Point2> target{{0, 0}, {2, 0}, {2, 1}, {0.5, 2}};
    RigidTransform fwd;
    fwd.rotation_angle = 30.0 * M_PI / 180.0;
    std::vector<Point2> source;
    for (const Point2& p : target) source.push_back(apply_transform(fwd, p));
    const auto res = procrustes_align(source, target, false);
    CHECK(res.rmse < 1e-9);
    CHECK(res.transform.rotation_angle == doctest::Approx(-30.0 * M_PI / 180.0));
}

TEST_CASE("procrustes flip handling") {
    std::vector<Point2> target{{0, 0}, {2, 0}, {2, 1}, {0.5, 2}};
    std::vector<Point2> mirrored;
    for (const Point2& p : target) mirrored.push_back({p.x, -p.y});
    const auto without = procrustes_align(mirrored, target, false);
    const auto with = procrustes_align(mirrored, target, true);
    CHECK(with.rmse < 1e-9);
    CHECK(without.rmse > with.rmse);
    CHECK(with.transform.flipped);
}

TEST_CASE("procrustes recovers any random transform") {
    RngStream rng(99);
    for (int i = 0; i < 100; ++i) {
        std::vector<Point2> pts;
        for (int k = 0; k < 6; ++k) pts.push_back(random_point(rng));
        const RigidTransform t = random_transform(rng);
        std::vector<Point2> moved;
        for (const Point2& p : pts) moved.push_back(apply_transform(t, p));
        const auto res = procrustes_align(pts, moved, true);
        CHECK(res.rmse < 1e-9);
    }
}

TEST_CASE("procrustes rejects degenerate input") {
    std::vector<Point2> same{{1, 1}, {1, 1}, {1, 1}};
    std::vector<Point2> tgt{{0, 0}, {1, 0}, {2, 0}};
    CHECK_THROWS_AS(procrustes_align(same, tgt, false), std::invalid_argument);
    CHECK_THROWS_AS(procrustes_align({{0, 0}}, {{1, 1}}, false), std::invalid_argument);
}

TEST_CASE("trilaterate 3-4-5 triangle") {
    // anchors at (0,0), (5,0); third point from ranges 4 and 3
    const auto res = trilaterate({0, 0}, 4.0, {5, 0}, 3.0, {3.2, 2.4}, 0.0 + 1e-12);
    CHECK(res.position.x == doctest::Approx(3.2));
    CHECK(res.position.y == doctest::Approx(2.4));
}

TEST_CASE("circle intersection") {
    const auto hit = intersect_circles({0, 0}, 2.5, {4, 0}, 2.5);
    REQUIRE(hit.has_value());
    CHECK(hit->first.x == doctest::Approx(2.0));
    CHECK(std::abs(hit->first.y) == doctest::Approx(1.5));
    CHECK(hit->second.y == doctest::Approx(-hit->first.y));

    CHECK_FALSE(intersect_circles({0, 0}, 1.0, {4, 0}, 1.0).has_value());
}

TEST_CASE("segment intersection") {
    CHECK(segments_intersect({0, 0}, {2, 2}, {0, 2}, {2, 0}));
    CHECK_FALSE(segments_intersect({0, 0}, {1, 0}, {0, 1}, {1, 1}));
    CHECK(segments_intersect({0, 0}, {2, 0}, {1, 0}, {1, 1})); // touching
}

TEST_CASE("angle helpers") {
    CHECK(wrap_angle(-M_PI / 2.0) == doctest::Approx(1.5 * M_PI));
    CHECK(angle_diff(0.1, 2 * M_PI - 0.1) == doctest::Approx(0.2));
    const double mean = circular_mean({10.0 * M_PI / 180.0, 14.0 * M_PI / 180.0});
    CHECK(mean == doctest::Approx(12.0 * M_PI / 180.0));
}
