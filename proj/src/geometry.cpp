#include "dynoloc/geometry.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace dynoloc {

double norm(const Point2& p) { return std::hypot(p.x, p.y); }
double distance(const Point2& a, const Point2& b) { return norm(a - b); }
double dot(const Point2& a, const Point2& b) { return a.x * b.x + a.y * b.y; }
double cross(const Point2& a, const Point2& b) { return a.x * b.y - a.y * b.x; }

Point2 apply_transform(const RigidTransform& t, const Point2& p) {
    Point2 q = p;
    if (t.flipped) q.y = -q.y;
    const double c = std::cos(t.rotation_angle);
    const double s = std::sin(t.rotation_angle);
    Point2 r{c * q.x - s * q.y, s * q.x + c * q.y};
    return r + t.translation;
}

RigidTransform inverse(const RigidTransform& t) {
    // inverse of p -> R * F * p + T is p -> F * R^-1 * (p - T)
    RigidTransform inv;
    inv.flipped = t.flipped;
    inv.rotation_angle = t.flipped ? t.rotation_angle : -t.rotation_angle;
    Point2 mt{-t.translation.x, -t.translation.y};
    const double c = std::cos(-t.rotation_angle);
    const double s = std::sin(-t.rotation_angle);
    Point2 r{c * mt.x - s * mt.y, s * mt.x + c * mt.y};
    if (t.flipped) r.y = -r.y;
    inv.translation = r;
    return inv;
}

RigidTransform compose(const RigidTransform& outer, const RigidTransform& inner) {
    // (outer . inner)(p) = outer(inner(p))
    RigidTransform out;
    out.flipped = outer.flipped != inner.flipped;
    out.rotation_angle = outer.flipped ? outer.rotation_angle - inner.rotation_angle
                                       : outer.rotation_angle + inner.rotation_angle;
    out.translation = apply_transform(outer, inner.translation);
    // translation above is outer applied to inner's translation, which is
    // exactly where inner maps the origin
    return out;
}

bool are_collinear(const Point2& a, const Point2& b, const Point2& c, double tol) {
    const double twice_area = std::abs(cross(b - a, c - a));
    const double lab = distance(a, b);
    const double lbc = distance(b, c);
    const double lca = distance(c, a);
    const double longest = std::max({lab, lbc, lca});
    if (longest < 1e-12) return true; // coincident points
    return twice_area / (longest * longest) < tol;
}

namespace {

ProcrustesResult align_no_flip(const std::vector<Point2>& source,
                               const std::vector<Point2>& target,
                               bool flip_source) {
    const std::size_t n = source.size();
    Point2 sc{0, 0}, tc{0, 0};
    for (std::size_t i = 0; i < n; ++i) {
        Point2 s = source[i];
        if (flip_source) s.y = -s.y;
        sc = sc + s;
        tc = tc + target[i];
    }
    sc = sc * (1.0 / static_cast<double>(n));
    tc = tc * (1.0 / static_cast<double>(n));

    double sum_dot = 0.0, sum_cross = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        Point2 s = source[i];
        if (flip_source) s.y = -s.y;
        const Point2 sd = s - sc;
        const Point2 td = target[i] - tc;
        sum_dot += dot(sd, td);
        sum_cross += cross(sd, td);
    }

    ProcrustesResult res;
    res.transform.flipped = flip_source;
    res.transform.rotation_angle = std::atan2(sum_cross, sum_dot);
    const double c = std::cos(res.transform.rotation_angle);
    const double s = std::sin(res.transform.rotation_angle);
    res.transform.translation = {tc.x - (c * sc.x - s * sc.y),
                                 tc.y - (s * sc.x + c * sc.y)};

    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Point2 mapped = apply_transform(res.transform, source[i]);
        const Point2 d = mapped - target[i];
        sq += dot(d, d);
    }
    res.rmse = std::sqrt(sq / static_cast<double>(n));
    return res;
}

} // namespace

ProcrustesResult procrustes_align(const std::vector<Point2>& source,
                                  const std::vector<Point2>& target,
                                  bool allow_flip) {
    if (source.size() != target.size() || source.size() < 2)
        throw std::invalid_argument("procrustes_align: need equal lengths >= 2");

    double spread = 0.0;
    for (std::size_t i = 1; i < source.size(); ++i)
        spread = std::max(spread, distance(source[i], source[0]));
    if (spread < 1e-12)
        throw std::invalid_argument("procrustes_align: degenerate source (coincident points)");

    ProcrustesResult best = align_no_flip(source, target, false);
    if (allow_flip) {
        ProcrustesResult flipped = align_no_flip(source, target, true);
        if (flipped.rmse < best.rmse) best = flipped;
    }
    return best;
}

TrilaterationResult trilaterate(const Point2& p1, double r1,
                                const Point2& p2, double r2,
                                const Point2& p3, double r3) {
    return least_squares_position({p1, p2, p3}, {r1, r2, r3});
}

TrilaterationResult least_squares_position(const std::vector<Point2>& anchors,
                                           const std::vector<double>& ranges,
                                           const std::vector<double>& weights) {
    const std::size_t n = anchors.size();
    if (n < 3 || ranges.size() != n)
        throw std::invalid_argument("least_squares_position: need >= 3 anchors");
    std::vector<double> w = weights.empty() ? std::vector<double>(n, 1.0) : weights;
    if (w.size() != n)
        throw std::invalid_argument("least_squares_position: weight count mismatch");

    // problem scale caps solutions and steps: collinear anchors make the
    // normal equations near-singular and would otherwise shoot to infinity
    Point2 centroid{0.0, 0.0};
    for (const Point2& a : anchors) centroid = centroid + a;
    centroid = centroid * (1.0 / static_cast<double>(n));
    double spread = 0.0, max_range = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        spread = std::max(spread, distance(anchors[k], centroid));
        max_range = std::max(max_range, ranges[k]);
    }
    const double scale = spread + max_range;

    // linear seed from pairwise circle differences
    const std::size_t rows = n * (n - 1) / 2;
    Eigen::MatrixXd A(rows, 2);
    Eigen::VectorXd b(rows);
    std::size_t row = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double wij = std::sqrt(w[i] * w[j]);
            A(row, 0) = 2.0 * (anchors[j].x - anchors[i].x) * wij;
            A(row, 1) = 2.0 * (anchors[j].y - anchors[i].y) * wij;
            b(row) = (ranges[i] * ranges[i] - ranges[j] * ranges[j] +
                      anchors[j].x * anchors[j].x - anchors[i].x * anchors[i].x +
                      anchors[j].y * anchors[j].y - anchors[i].y * anchors[i].y) *
                     wij;
            ++row;
        }
    const Eigen::Matrix2d ata = A.transpose() * A;
    const double damping = 1e-9 * std::max(1.0, ata.trace());
    Eigen::Vector2d x = (ata + damping * Eigen::Matrix2d::Identity())
                            .ldlt()
                            .solve(A.transpose() * b);
    if (!x.allFinite() || std::hypot(x(0) - centroid.x, x(1) - centroid.y) > 2.0 * scale) {
        x(0) = centroid.x;
        x(1) = centroid.y + 0.1 * std::max(scale, 1.0); // off-line nudge
    }

    // damped Gauss-Newton polish on the true range residuals
    for (int iter = 0; iter < 6; ++iter) {
        Eigen::MatrixXd J(n, 2);
        Eigen::VectorXd r(n);
        for (std::size_t k = 0; k < n; ++k) {
            const double dx = x(0) - anchors[k].x;
            const double dy = x(1) - anchors[k].y;
            const double d = std::max(std::hypot(dx, dy), 1e-9);
            const double sw = std::sqrt(w[k]);
            J(k, 0) = dx / d * sw;
            J(k, 1) = dy / d * sw;
            r(k) = (d - ranges[k]) * sw;
        }
        const Eigen::Matrix2d jtj = J.transpose() * J;
        const double mu = 1e-6 * std::max(1.0, jtj.trace());
        Eigen::Vector2d step =
            (jtj + mu * Eigen::Matrix2d::Identity()).ldlt().solve(J.transpose() * r);
        if (!step.allFinite()) break;
        const double limit = std::max(scale, 1.0);
        if (step.norm() > limit) step *= limit / step.norm();
        x -= step;
        if (step.norm() < 1e-10) break;
    }

    TrilaterationResult res;
    res.position = {x(0), x(1)};
    for (std::size_t k = 0; k < n; ++k)
        res.residual = std::max(
            res.residual, std::abs(distance(res.position, anchors[k]) - ranges[k]));
    return res;
}

std::optional<CircleIntersection> intersect_circles(const Point2& c1, double r1,
                                                    const Point2& c2, double r2) {
    const double d = distance(c1, c2);
    if (d < 1e-12) return std::nullopt;
    if (d > r1 + r2 || d < std::abs(r1 - r2)) return std::nullopt;
    const double a = (r1 * r1 - r2 * r2 + d * d) / (2.0 * d);
    const double h2 = r1 * r1 - a * a;
    const double h = h2 > 0.0 ? std::sqrt(h2) : 0.0;
    const Point2 u = (c2 - c1) * (1.0 / d);
    const Point2 mid = c1 + u * a;
    const Point2 perp{-u.y, u.x};
    return CircleIntersection{mid + perp * h, mid - perp * h};
}

namespace {
int orientation_sign(const Point2& a, const Point2& b, const Point2& c) {
    const double v = cross(b - a, c - a);
    if (v > 1e-12) return 1;
    if (v < -1e-12) return -1;
    return 0;
}
bool on_segment(const Point2& a, const Point2& b, const Point2& p) {
    return std::min(a.x, b.x) - 1e-12 <= p.x && p.x <= std::max(a.x, b.x) + 1e-12 &&
           std::min(a.y, b.y) - 1e-12 <= p.y && p.y <= std::max(a.y, b.y) + 1e-12;
}
} // namespace

bool segments_intersect(const Point2& a, const Point2& b,
                        const Point2& c, const Point2& d) {
    const int o1 = orientation_sign(a, b, c);
    const int o2 = orientation_sign(a, b, d);
    const int o3 = orientation_sign(c, d, a);
    const int o4 = orientation_sign(c, d, b);
    if (o1 != o2 && o3 != o4) return true;
    if (o1 == 0 && on_segment(a, b, c)) return true;
    if (o2 == 0 && on_segment(a, b, d)) return true;
    if (o3 == 0 && on_segment(c, d, a)) return true;
    if (o4 == 0 && on_segment(c, d, b)) return true;
    return false;
}

Point2 reflect_across_line(const std::vector<Point2>& line_points, const Point2& p) {
    if (line_points.size() < 2)
        throw std::invalid_argument("reflect_across_line: need >= 2 points");
    Point2 c{0.0, 0.0};
    for (const Point2& q : line_points) c = c + q;
    c = c * (1.0 / static_cast<double>(line_points.size()));
    // dominant direction via the 2x2 scatter matrix
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const Point2& q : line_points) {
        const Point2 d = q - c;
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
    }
    const double theta = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
    const Point2 u{std::cos(theta), std::sin(theta)};
    const Point2 d = p - c;
    const Point2 proj = c + u * dot(d, u);
    return proj + (proj - p);
}

double wrap_angle(double radians) {
    double w = std::fmod(radians, 2.0 * M_PI);
    if (w < 0.0) w += 2.0 * M_PI;
    return w;
}

double angle_diff(double a, double b) {
    double d = std::fmod(a - b, 2.0 * M_PI);
    if (d > M_PI) d -= 2.0 * M_PI;
    if (d <= -M_PI) d += 2.0 * M_PI;
    return d;
}

double circular_mean(const std::vector<double>& angles) {
    double sx = 0.0, sy = 0.0;
    for (double a : angles) {
        sx += std::cos(a);
        sy += std::sin(a);
    }
    return std::atan2(sy, sx);
}

} // namespace dynoloc
