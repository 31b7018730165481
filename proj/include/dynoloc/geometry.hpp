#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

namespace dynoloc {

struct Point2 {
    double x = 0.0; // meters
    double y = 0.0; // meters

    Point2 operator+(const Point2& o) const { return {x + o.x, y + o.y}; }
    Point2 operator-(const Point2& o) const { return {x - o.x, y - o.y}; }
    Point2 operator*(double s) const { return {x * s, y * s}; }
};

double norm(const Point2& p);
double distance(const Point2& a, const Point2& b);
double dot(const Point2& a, const Point2& b);
double cross(const Point2& a, const Point2& b);

// Reflection across the x-axis (if flipped), then rotation, then translation.
struct RigidTransform {
    double rotation_angle = 0.0; // radians
    Point2 translation{0.0, 0.0};
    bool flipped = false;
};

Point2 apply_transform(const RigidTransform& t, const Point2& p);
RigidTransform inverse(const RigidTransform& t);
RigidTransform compose(const RigidTransform& outer, const RigidTransform& inner);

// Scale-normalized collinearity test: twice the triangle area divided by the
// squared longest side. Scale invariance keeps the threshold meaningful for
// 1 m and 50 m triangles alike.
inline constexpr double kCollinearTol = 1e-3;
bool are_collinear(const Point2& a, const Point2& b, const Point2& c,
                   double tol = kCollinearTol);

struct ProcrustesResult {
    RigidTransform transform;
    double rmse = 0.0; // meters
};

// Closed-form 2D rigid alignment (centroids + cross-covariance angle).
// With allow_flip, the reflected solution is also evaluated and the better
// of the two returned. Throws std::invalid_argument on degenerate input.
ProcrustesResult procrustes_align(const std::vector<Point2>& source,
                                  const std::vector<Point2>& target,
                                  bool allow_flip);

// Least-squares position from three anchors and ranges; residual is the
// worst absolute range mismatch at the solution.
struct TrilaterationResult {
    Point2 position;
    double residual = 0.0;
};
TrilaterationResult trilaterate(const Point2& p1, double r1,
                                const Point2& p2, double r2,
                                const Point2& p3, double r3);

// Weighted nonlinear least squares over any number of range constraints:
// linearized seed plus a few Gauss-Newton steps on sum w_k (|x-a_k| - r_k)^2.
TrilaterationResult least_squares_position(const std::vector<Point2>& anchors,
                                           const std::vector<double>& ranges,
                                           const std::vector<double>& weights = {});

// Both intersection points of two circles, or nullopt when they do not meet.
struct CircleIntersection {
    Point2 first;
    Point2 second;
};
std::optional<CircleIntersection> intersect_circles(const Point2& c1, double r1,
                                                    const Point2& c2, double r2);

// True if segments ab and cd properly intersect (shared endpoints count).
bool segments_intersect(const Point2& a, const Point2& b,
                        const Point2& c, const Point2& d);

// Mirror image of p across the least-squares line through the given points.
Point2 reflect_across_line(const std::vector<Point2>& line_points, const Point2& p);

// Wrap an angle into [0, 2*pi).
double wrap_angle(double radians);
// Smallest signed difference a-b wrapped into (-pi, pi].
double angle_diff(double a, double b);
// Circular mean of a set of angles.
double circular_mean(const std::vector<double>& angles);

} // namespace dynoloc
