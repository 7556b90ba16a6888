#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hmcgap/dynamics.hpp"
#include "hmcgap/metric.hpp"
#include "hmcgap/targets.hpp"

namespace hmcgap {

/// Raised when the side function has a vanishing gradient where a normal is requested.
class DegenerateBoundary : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Oriented boundary of a set S = {q : side(q) < 0}.
///
/// Point sets in one dimension use the signed distance to the nearest point, with the
/// sign alternating across points so that S = (-inf, c_1) u (c_2, c_3) u ...
class Boundary {
public:
    enum class Kind { point_set, hyperplane, level_set };

    using SideFn = std::function<double(std::span<const double>)>;
    using GradFn = std::function<void(std::span<const double>, std::span<double>)>;

    static Boundary points(std::vector<double> points);
    static Boundary point(double c) { return points({c}); }
    /// side(q) = <normal, q> - offset; `normal` is normalized on construction.
    static Boundary hyperplane(std::vector<double> normal, double offset);
    static Boundary level_set(std::size_t dim, SideFn g, GradFn grad_g, std::string label = "levelset");
    /// S = open disk of the given radius: side(q) = |q - center|^2 - radius^2.
    static Boundary circle(std::vector<double> center, double radius);

    Kind kind() const { return kind_; }
    /// 1 for point sets.
    std::size_t dim() const { return dim_; }
    const std::string& label() const { return label_; }

    double side(std::span<const double> q) const;
    void side_gradient(std::span<const double> q, std::span<double> out) const;
    bool in_set(std::span<const double> q) const { return side(q) < 0.0; }

    /// Outward unit normal at a boundary point (|side(q)| <= 1e-8).
    std::vector<double> unit_normal(std::span<const double> q) const;

    const std::vector<double>& points_list() const { return points_; }
    const std::vector<double>& normal() const { return normal_; }
    double offset() const { return offset_; }
    const std::vector<double>& circle_center() const { return center_; }
    double circle_radius() const { return radius_; }

private:
    Kind kind_ = Kind::hyperplane;
    std::size_t dim_ = 0;
    std::string label_;
    std::vector<double> points_;
    std::vector<double> normal_;
    double offset_ = 0.0;
    std::vector<double> center_;
    double radius_ = 0.0;
    SideFn g_;
    GradFn grad_g_;
};

/// <G^{-1}(q) p, eta(q)>; positive iff p points out of S. `metric` may be null (identity).
double normal_momentum(std::span<const double> p, std::span<const double> q, const Boundary& boundary,
                       const MetricField* metric = nullptr);

struct CrossingRecord {
    std::size_t count = 0;
    std::vector<double> times;
    /// +1 when leaving S, -1 when entering, 0 for a touch that stays on one side.
    std::vector<int> directions;
    std::vector<bool> tangency_flags;
    int parity = 0;
    bool starts_in_set = false;
    bool ends_in_set = false;

    bool non_transverse() const;
};

/// Counts the instants in [0, T] at which the trajectory meets the boundary.
///
/// The trajectory is scanned on a dense sub-mesh (four sub-intervals per integrator step,
/// or arcs of at most pi/8 in phase for closed-form segments). Sign changes of the side
/// function are bracketed and bisected to `refine_tol`; interior extrema of the side
/// function are located first, so two crossings inside one sub-interval are not missed.
/// A root where |d side/dt| < 1e-6 times the trajectory's velocity scale is flagged as
/// tangential; touches that do not change side are also reported with the flag set.
CrossingRecord count_crossings(const Trajectory& trajectory, const Boundary& boundary, double refine_tol = 1e-10);

/// pi(S).
double set_mass(const TargetDensity& target, const Boundary& boundary);

/// Surface integral of pi over the boundary; for point sets, the sum of pi at the points.
double boundary_density_integral(const TargetDensity& target, const Boundary& boundary);

/// Integral over the boundary of pi(q) * w(q, eta(q)); hyperplanes need a target with
/// a projection and w independent of position along the plane is not assumed, so
/// hyperplanes are only supported in dimension <= 2 here.
double boundary_integral(const TargetDensity& target, const Boundary& boundary,
                         const std::function<double(std::span<const double>, std::span<const double>)>& weight);

}  // namespace hmcgap
