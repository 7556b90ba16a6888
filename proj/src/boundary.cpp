#include "hmcgap/boundary.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hmcgap/quadrature.hpp"

namespace hmcgap {

// ------------------------------------------------------------------ Boundary

Boundary Boundary::points(std::vector<double> pts) {
    if (pts.empty()) throw std::invalid_argument("Boundary::points: need at least one point");
    for (double c : pts) {
        if (!std::isfinite(c)) throw DomainError("Boundary::points: non-finite point");
    }
    std::sort(pts.begin(), pts.end());
    if (std::adjacent_find(pts.begin(), pts.end()) != pts.end())
        throw std::invalid_argument("Boundary::points: duplicate points");
    Boundary b;
    b.kind_ = Kind::point_set;
    b.dim_ = 1;
    b.points_ = std::move(pts);
    b.label_ = "point1d";
    return b;
}

Boundary Boundary::hyperplane(std::vector<double> normal, double offset) {
    double norm = 0.0;
    for (double v : normal) norm += v * v;
    norm = std::sqrt(norm);
    if (normal.empty() || !(norm > 1e-12) || !std::isfinite(norm) || !std::isfinite(offset))
        throw DegenerateBoundary("Boundary::hyperplane: normal must be a finite non-zero vector");
    for (double& v : normal) v /= norm;
    Boundary b;
    b.kind_ = Kind::hyperplane;
    b.dim_ = normal.size();
    b.normal_ = std::move(normal);
    b.offset_ = offset / norm;
    b.label_ = "hyperplane";
    return b;
}

Boundary Boundary::level_set(std::size_t dim, SideFn g, GradFn grad_g, std::string label) {
    if (!g || !grad_g) throw std::invalid_argument("Boundary::level_set: side function and gradient required");
    Boundary b;
    b.kind_ = Kind::level_set;
    b.dim_ = dim;
    b.g_ = std::move(g);
    b.grad_g_ = std::move(grad_g);
    b.label_ = std::move(label);
    return b;
}

Boundary Boundary::circle(std::vector<double> center, double radius) {
    if (!(radius > 0.0)) throw DomainError("Boundary::circle: radius must be positive");
    const double r2 = radius * radius;
    auto c = center;
    Boundary b = level_set(
        center.size(),
        [c, r2](std::span<const double> q) {
            double s = 0.0;
            for (std::size_t i = 0; i < c.size(); ++i) s += (q[i] - c[i]) * (q[i] - c[i]);
            return s - r2;
        },
        [c](std::span<const double> q, std::span<double> out) {
            for (std::size_t i = 0; i < c.size(); ++i) out[i] = 2.0 * (q[i] - c[i]);
        },
        "levelset-circle");
    b.center_ = std::move(center);
    b.radius_ = radius;
    return b;
}

namespace {

// Index of the nearest point and the sign of the side function just right of it.
std::pair<std::size_t, double> nearest_point(const std::vector<double>& pts, double x) {
    auto it = std::lower_bound(pts.begin(), pts.end(), x);
    std::size_t k = static_cast<std::size_t>(std::distance(pts.begin(), it));
    if (k == pts.size() || (k > 0 && x - pts[k - 1] <= pts[k] - x)) --k;
    return {k, (k % 2 == 0) ? 1.0 : -1.0};
}

}  // namespace

double Boundary::side(std::span<const double> q) const {
    switch (kind_) {
        case Kind::point_set: {
            const double x = q[0];
            const auto [k, right_sign] = nearest_point(points_, x);
            return right_sign * (x - points_[k]);
        }
        case Kind::hyperplane: {
            double s = -offset_;
            for (std::size_t i = 0; i < dim_; ++i) s += normal_[i] * q[i];
            return s;
        }
        case Kind::level_set:
            return g_(q);
    }
    return 0.0;
}

void Boundary::side_gradient(std::span<const double> q, std::span<double> out) const {
    switch (kind_) {
        case Kind::point_set:
            out[0] = nearest_point(points_, q[0]).second;
            return;
        case Kind::hyperplane:
            std::copy(normal_.begin(), normal_.end(), out.begin());
            return;
        case Kind::level_set:
            grad_g_(q, out);
            return;
    }
}

std::vector<double> Boundary::unit_normal(std::span<const double> q) const {
    if (std::abs(side(q)) > 1e-8) throw std::invalid_argument("unit_normal: point is not on the boundary");
    const std::size_t d = kind_ == Kind::point_set ? 1 : dim_;
    std::vector<double> g(d);
    side_gradient(q, g);
    double norm = 0.0;
    for (double v : g) norm += v * v;
    norm = std::sqrt(norm);
    if (!(norm >= 1e-12)) throw DegenerateBoundary("unit_normal: side function has a vanishing gradient");
    for (double& v : g) v /= norm;
    return g;
}

double normal_momentum(std::span<const double> p, std::span<const double> q, const Boundary& boundary,
                       const MetricField* metric) {
    const auto eta = boundary.unit_normal(q);
    const std::size_t d = eta.size();
    if (metric == nullptr || metric->is_identity()) {
        double s = 0.0;
        for (std::size_t i = 0; i < d; ++i) s += p[i] * eta[i];
        return s;
    }
    const auto n = static_cast<Eigen::Index>(d);
    const Eigen::VectorXd v = metric->G_inv(q) * Eigen::Map<const Eigen::VectorXd>(p.data(), n);
    return v.dot(Eigen::Map<const Eigen::VectorXd>(eta.data(), n));
}

// ------------------------------------------------------------ count_crossings

bool CrossingRecord::non_transverse() const {
    return std::any_of(tangency_flags.begin(), tangency_flags.end(), [](bool b) { return b; });
}

namespace {

struct Scanner {
    const Trajectory& traj;
    const Boundary& boundary;
    std::size_t d;
    std::vector<double> q, v, g;

    Scanner(const Trajectory& t, const Boundary& b) : traj(t), boundary(b), d(t.dim()), q(d), v(d), g(d) {}

    double side(double t) {
        traj.position(t, q);
        return boundary.side(q);
    }

    // d side / dt and |grad side| * |v|.
    std::pair<double, double> rate(double t) {
        traj.position(t, q);
        traj.velocity(t, v);
        boundary.side_gradient(q, g);
        double dot = 0.0, gn = 0.0, vn = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            dot += g[i] * v[i];
            gn += g[i] * g[i];
            vn += v[i] * v[i];
        }
        return {dot, std::sqrt(gn * vn)};
    }
};

std::vector<double> scan_mesh(const Trajectory& traj) {
    std::vector<double> out;
    const auto& mesh = traj.mesh();
    constexpr double kArc = std::numbers::pi / 8.0;
    out.push_back(0.0);
    for (std::size_t k = 0; k + 1 < mesh.size(); ++k) {
        const double a = mesh[k], b = mesh[k + 1];
        if (!(b > a)) continue;
        std::size_t pieces = 4;
        if (traj.method() != Trajectory::Method::numeric && traj.max_frequency() > 0.0)
            pieces = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((b - a) * traj.max_frequency() / kArc)));
        for (std::size_t j = 1; j <= pieces; ++j) out.push_back(j == pieces ? b : a + (b - a) * double(j) / double(pieces));
    }
    if (out.back() < traj.horizon()) out.push_back(traj.horizon());
    return out;
}

}  // namespace

CrossingRecord count_crossings(const Trajectory& traj, const Boundary& boundary, double refine_tol) {
    if (!(refine_tol > 0.0)) throw std::invalid_argument("count_crossings: refine_tol must be positive");
    if (boundary.kind() != Boundary::Kind::point_set && boundary.dim() != traj.dim())
        throw std::invalid_argument("count_crossings: boundary dimension does not match trajectory");
    if (boundary.kind() == Boundary::Kind::point_set && traj.dim() != 1)
        throw std::invalid_argument("count_crossings: point boundaries need a one-dimensional trajectory");

    Scanner sc(traj, boundary);
    const auto grid = scan_mesh(traj);
    std::vector<double> sides(grid.size()), rates(grid.size());
    double velocity_scale = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        sides[k] = sc.side(grid[k]);
        const auto [r, scale] = sc.rate(grid[k]);
        rates[k] = r;
        velocity_scale = std::max(velocity_scale, scale);
    }
    const double tangent_rate = 1e-6 * velocity_scale;

    CrossingRecord rec;
    rec.starts_in_set = sides.front() < 0.0;
    rec.ends_in_set = sides.back() < 0.0;

    auto record = [&](double t, bool leaving, bool tangent) {
        rec.times.push_back(t);
        rec.directions.push_back(leaving ? 1 : -1);
        const double r = sc.rate(t).first;
        rec.tangency_flags.push_back(tangent || std::abs(r) < tangent_rate);
    };

    // Bisection on the in-set predicate over [lo, hi] whose endpoints differ.
    auto refine_root = [&](double lo, double hi, bool in_lo) {
        while (hi - lo > refine_tol) {
            const double mid = 0.5 * (lo + hi);
            if ((sc.side(mid) < 0.0) == in_lo)
                lo = mid;
            else
                hi = mid;
        }
        return 0.5 * (lo + hi);
    };

    auto process_monotone = [&](double a, double b, double sa, double sb) {
        const bool ia = sa < 0.0, ib = sb < 0.0;
        if (ia != ib) record(refine_root(a, b, ia), ia, false);
    };

    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
        const double a = grid[k], b = grid[k + 1];
        const double sa = sides[k], sb = sides[k + 1];
        const double ra = rates[k], rb = rates[k + 1];
        if (ra * rb < 0.0) {
            // Side function has an interior extremum: split there.
            double lo = a, hi = b;
            const bool pos_lo = ra > 0.0;
            while (hi - lo > refine_tol) {
                const double mid = 0.5 * (lo + hi);
                if ((sc.rate(mid).first > 0.0) == pos_lo)
                    lo = mid;
                else
                    hi = mid;
            }
            const double te = 0.5 * (lo + hi);
            const double se = sc.side(te);
            const bool ia = sa < 0.0, ie = se < 0.0, ib = sb < 0.0;
            if (ia == ie && ie == ib && std::abs(se) <= 1e-12 * (1.0 + velocity_scale)) {
                // Touch without changing side.
                rec.times.push_back(te);
                rec.directions.push_back(0);
                rec.tangency_flags.push_back(true);
                continue;
            }
            process_monotone(a, te, sa, se);
            process_monotone(te, b, se, sb);
        } else {
            process_monotone(a, b, sa, sb);
        }
    }
    rec.count = rec.times.size();
    rec.parity = static_cast<int>(rec.count % 2);
    return rec;
}

// ------------------------------------------------------------ boundary masses

namespace {

// Integrates f along the line {offset * n + s * t}, t perpendicular to n (2D only).
double line_integral(const TargetDensity& target, const Boundary& b, const std::function<double(std::span<const double>)>& f) {
    const auto& n = b.normal();
    const double tx = -n[1], ty = n[0];
    auto [lo0, hi0] = target.span(0, 12.0);
    auto [lo1, hi1] = target.span(1, 12.0);
    const double reach = std::max({std::abs(lo0), std::abs(hi0), std::abs(lo1), std::abs(hi1)}) + std::abs(b.offset());
    std::vector<double> q(2);
    auto integrand = [&](double s) {
        q[0] = b.offset() * n[0] + s * tx;
        q[1] = b.offset() * n[1] + s * ty;
        return f(q);
    };
    return integrate_adaptive(integrand, -reach, 0.0, 1e-13).value + integrate_adaptive(integrand, 0.0, reach, 1e-13).value;
}

double circle_integral(const Boundary& b, const std::function<double(std::span<const double>, std::span<const double>)>& f) {
    // Periodic trapezoid rule converges geometrically for smooth integrands.
    constexpr int kNodes = 2048;
    const auto& c = b.circle_center();
    const double r = b.circle_radius();
    std::vector<double> q(2), eta(2);
    double s = 0.0;
    for (int k = 0; k < kNodes; ++k) {
        const double th = 2.0 * std::numbers::pi * k / kNodes;
        eta[0] = std::cos(th);
        eta[1] = std::sin(th);
        q[0] = c[0] + r * eta[0];
        q[1] = c[1] + r * eta[1];
        s += f(q, eta);
    }
    return s * 2.0 * std::numbers::pi * r / kNodes;
}

void require_circle_2d(const Boundary& b, const TargetDensity& target) {
    if (b.circle_center().size() != 2 || target.dim() != 2)
        throw std::invalid_argument("boundary integrals over level sets are supported for planar circles only");
}

}  // namespace

double set_mass(const TargetDensity& target, const Boundary& b) {
    switch (b.kind()) {
        case Boundary::Kind::point_set: {
            if (target.dim() != 1) throw std::invalid_argument("set_mass: point boundary needs a 1D target");
            const auto& c = b.points_list();
            double m = halfline_mass(target, c[0]);
            for (std::size_t i = 1; i < c.size(); i += 2) {
                const double upper = (i + 1 < c.size()) ? halfline_mass(target, c[i + 1]) : 1.0;
                m += upper - halfline_mass(target, c[i]);
            }
            return m;
        }
        case Boundary::Kind::hyperplane: {
            if (b.dim() != target.dim()) throw std::invalid_argument("set_mass: dimension mismatch");
            if (auto proj = target.projection(b.normal())) return proj->cdf(b.offset());
            if (target.dim() == 1) {
                return b.normal()[0] > 0 ? halfline_mass(target, b.offset() / b.normal()[0])
                                         : 1.0 - halfline_mass(target, b.offset() / b.normal()[0]);
            }
            throw std::invalid_argument("set_mass: target has no projection along this normal");
        }
        case Boundary::Kind::level_set: {
            require_circle_2d(b, target);
            // Polar Gauss-Legendre in the radius, trapezoid in the angle.
            const auto& c = b.circle_center();
            const double r = b.circle_radius();
            const auto gl = gauss_legendre(96);
            constexpr int kAngles = 512;
            std::vector<double> q(2);
            double total = 0.0;
            for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
                const double rho = 0.5 * r * (gl.nodes[i] + 1.0);
                double ring = 0.0;
                for (int k = 0; k < kAngles; ++k) {
                    const double th = 2.0 * std::numbers::pi * k / kAngles;
                    q[0] = c[0] + rho * std::cos(th);
                    q[1] = c[1] + rho * std::sin(th);
                    ring += density(target, q);
                }
                total += 0.5 * r * gl.weights[i] * rho * ring * 2.0 * std::numbers::pi / kAngles;
            }
            return total;
        }
    }
    return 0.0;
}

double boundary_integral(const TargetDensity& target, const Boundary& b,
                         const std::function<double(std::span<const double>, std::span<const double>)>& weight) {
    switch (b.kind()) {
        case Boundary::Kind::point_set: {
            if (target.dim() != 1) throw std::invalid_argument("boundary_integral: point boundary needs a 1D target");
            double s = 0.0;
            for (double c : b.points_list()) {
                const auto eta = b.unit_normal(std::span<const double>(&c, 1));
                s += density(target, c) * weight(std::span<const double>(&c, 1), eta);
            }
            return s;
        }
        case Boundary::Kind::hyperplane: {
            if (target.dim() == 1) {
                const double c = b.offset() / b.normal()[0];
                return density(target, c) * weight(std::span<const double>(&c, 1), b.normal());
            }
            if (target.dim() != 2) throw std::invalid_argument("boundary_integral: hyperplanes supported for d <= 2");
            return line_integral(target, b, [&](std::span<const double> q) {
                return density(target, q) * weight(q, b.normal());
            });
        }
        case Boundary::Kind::level_set:
            require_circle_2d(b, target);
            return circle_integral(b, [&](std::span<const double> q, std::span<const double> eta) {
                return density(target, q) * weight(q, eta);
            });
    }
    return 0.0;
}

double boundary_density_integral(const TargetDensity& target, const Boundary& b) {
    if (b.kind() == Boundary::Kind::hyperplane && b.dim() == target.dim()) {
        if (auto proj = target.projection(b.normal())) return proj->pdf(b.offset());
    }
    return boundary_integral(target, b, [](std::span<const double>, std::span<const double>) { return 1.0; });
}

}  // namespace hmcgap
