#include "hmcgap/dynamics.hpp"

#include <algorithm>
#include <boost/numeric/odeint/stepper/controlled_runge_kutta.hpp>
#include <boost/numeric/odeint/stepper/runge_kutta_fehlberg78.hpp>
#include <cmath>
#include <limits>
#include <numbers>

#include "hmcgap/normal.hpp"

namespace hmcgap {

namespace odeint = boost::numeric::odeint;

// ------------------------------------------------------------ HamiltonianSystem

HamiltonianSystem::HamiltonianSystem(HamiltonianKind kind, std::shared_ptr<const TargetDensity> target,
                                     std::shared_ptr<const MetricField> metric)
    : kind_(kind), target_(std::move(target)), metric_(std::move(metric)) {
    if (!target_) throw std::invalid_argument("HamiltonianSystem: null target");
    if (kind_ == HamiltonianKind::riemannian) {
        if (!metric_) throw std::invalid_argument("HamiltonianSystem: Riemannian system needs a metric");
        if (metric_->dim() != target_->dim()) throw std::invalid_argument("HamiltonianSystem: metric dimension mismatch");
    }
}

HamiltonianSystem HamiltonianSystem::isotropic(std::shared_ptr<const TargetDensity> target) {
    return HamiltonianSystem(HamiltonianKind::isotropic, std::move(target), nullptr);
}

HamiltonianSystem HamiltonianSystem::riemannian(std::shared_ptr<const TargetDensity> target,
                                                std::shared_ptr<const MetricField> metric) {
    return HamiltonianSystem(HamiltonianKind::riemannian, std::move(target), std::move(metric));
}

bool HamiltonianSystem::flows_isotropically() const {
    return kind_ == HamiltonianKind::isotropic || metric_->is_identity();
}

double HamiltonianSystem::energy(std::span<const double> q, std::span<const double> p) const {
    const double potential = -target_->log_density(q);
    if (kind_ == HamiltonianKind::isotropic) {
        double k = 0.0;
        for (double v : p) k += v * v;
        return potential + 0.5 * k;
    }
    const auto d = static_cast<Eigen::Index>(dim());
    Eigen::Map<const Eigen::VectorXd> pv(p.data(), d);
    const Eigen::MatrixXd ginv = metric_->G_inv(q);
    const double log_norm = 0.5 * (2.0 * static_cast<double>(d) * kLogSqrt2Pi + metric_->log_det_G(q));
    return potential + log_norm + 0.5 * pv.dot(ginv * pv);
}

void HamiltonianSystem::rhs(std::span<const double> q, std::span<const double> p, std::span<double> dq,
                            std::span<double> dp) const {
    const std::size_t d = dim();
    target_->grad_log_density(q, dp);
    for (std::size_t i = 0; i < d; ++i) {
        if (!std::isfinite(dp[i])) throw IntegratorFailure("non-finite gradient of log density", 0.0);
    }
    if (flows_isotropically()) {
        std::copy(p.begin(), p.end(), dq.begin());
        return;
    }
    const auto n = static_cast<Eigen::Index>(d);
    Eigen::Map<const Eigen::VectorXd> pv(p.data(), n);
    const Eigen::MatrixXd ginv = metric_->G_inv(q);
    const Eigen::VectorXd v = ginv * pv;
    const auto derivs = metric_derivatives(*metric_, q);
    for (std::size_t i = 0; i < d; ++i) {
        const Eigen::MatrixXd& dg = derivs[i];
        const double trace_term = (ginv * dg).trace();
        dp[i] += -0.5 * trace_term + 0.5 * v.dot(dg * v);
        dq[i] = v[static_cast<Eigen::Index>(i)];
        if (!std::isfinite(dp[i]) || !std::isfinite(dq[i]))
            throw IntegratorFailure("non-finite Riemannian force", 0.0);
    }
}

PhaseVelocity hamiltonian_rhs(const HamiltonianSystem& system, const PhasePoint& x) {
    PhaseVelocity out{std::vector<double>(system.dim()), std::vector<double>(system.dim())};
    system.rhs(x.q, x.p, out.dq, out.dp);
    return out;
}

// --------------------------------------------------------------- exact flows

PhasePoint exact_flow_gaussian(double q, double p, double T) {
    const double c = std::cos(T);
    const double s = std::sin(T);
    return {{q * c + p * s}, {p * c - q * s}};
}

namespace {

struct HarmonicState {
    double q;
    double p;
};

inline HarmonicState harmonic_advance(double center, double omega, double q0, double p0, double tau) {
    if (omega == 0.0) return {q0 + p0 * tau, p0};
    const double c = std::cos(omega * tau);
    const double s = std::sin(omega * tau);
    const double x = q0 - center;
    return {center + x * c + (p0 / omega) * s, p0 * c - omega * x * s};
}

// First time tau in (0, limit] at which the unit-frequency orbit about `center` started at
// (q0, p0) reaches q = 0; +inf if it does not. `on_switch` marks q0 == 0.
double first_switch_time(double center, double q0, double p0, bool on_switch, double limit) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double tau = std::numeric_limits<double>::infinity();
    if (on_switch) {
        // center (1 - cos t) + p0 sin t = 0  =>  t = 2 atan2(-p0, center) mod 2 pi.
        tau = 2.0 * std::atan2(-p0, center);
        if (tau <= 0.0) tau += two_pi;
    } else {
        const double a = q0 - center;
        const double r = std::hypot(a, p0);
        if (r < std::abs(center) || r == 0.0) return tau;
        const double phase = std::atan2(p0, a);
        const double spread = std::acos(std::clamp(-center / r, -1.0, 1.0));
        for (double root : {phase - spread, phase + spread}) {
            root = std::fmod(root, two_pi);
            if (root < 0.0) root += two_pi;
            if (root > 0.0 && root < tau) tau = root;
        }
    }
    return tau <= limit ? tau : std::numeric_limits<double>::infinity();
}

}  // namespace

// ---------------------------------------------------------------- Trajectory

std::size_t Trajectory::segment_index(double t) const {
    if (mesh_.size() <= 2) return 0;
    auto it = std::upper_bound(mesh_.begin(), mesh_.end(), t);
    std::size_t k = static_cast<std::size_t>(std::distance(mesh_.begin(), it));
    if (k == 0) return 0;
    k -= 1;
    const std::size_t last = mesh_.size() - 2;
    return std::min(k, last);
}

void Trajectory::harmonic_eval(double t, std::span<double> q, std::span<double> p) const {
    const HarmonicSegment& seg = segments_[segment_index(t)];
    const double tau = t - seg.t0;
    for (std::size_t i = 0; i < dim_; ++i) {
        const auto s = harmonic_advance(seg.center[i], seg.omega[i], seg.q0[i], seg.p0[i], tau);
        q[i] = s.q;
        p[i] = s.p;
    }
}

void Trajectory::numeric_eval(double t, std::span<double> q, std::span<double> p, std::span<double> v) const {
    const std::size_t k = segment_index(t);
    const std::size_t w = 2 * dim_;
    const double t0 = mesh_[k];
    const double h = mesh_[k + 1] - t0;
    const double s = h > 0.0 ? (t - t0) / h : 0.0;
    const double* y0 = &y_[k * w];
    const double* y1 = &y_[(k + 1) * w];
    const double* f0 = &f_[k * w];
    const double* f1 = &f_[(k + 1) * w];

    const double s2 = s * s, s3 = s2 * s, s4 = s3 * s, s5 = s4 * s;
    // Cubic Hermite basis and derivatives (d/ds).
    const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s, h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
    const double d00 = 6 * s2 - 6 * s, d10 = 3 * s2 - 4 * s + 1, d01 = -6 * s2 + 6 * s, d11 = 3 * s2 - 2 * s;
    // Quintic Hermite basis (value, slope, curvature at both ends) and derivatives.
    const double q0b = 1 - 10 * s3 + 15 * s4 - 6 * s5, q1b = s - 6 * s3 + 8 * s4 - 3 * s5;
    const double q2b = 0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5, q3b = 0.5 * s3 - s4 + 0.5 * s5;
    const double q4b = -4 * s3 + 7 * s4 - 3 * s5, q5b = 10 * s3 - 15 * s4 + 6 * s5;
    const double e0 = -30 * s2 + 60 * s3 - 30 * s4, e1 = 1 - 18 * s2 + 32 * s3 - 15 * s4;
    const double e2 = s - 4.5 * s2 + 6 * s3 - 2.5 * s4, e3 = 1.5 * s2 - 4 * s3 + 2.5 * s4;
    const double e4 = -12 * s2 + 28 * s3 - 15 * s4, e5 = 30 * s2 - 60 * s3 + 30 * s4;

    for (std::size_t i = 0; i < dim_; ++i) {
        const double qa = y0[i], qb = y1[i];
        const double va = f0[i], vb = f1[i];
        if (quintic_) {
            const double aa = f0[dim_ + i], ab = f1[dim_ + i];
            if (!q.empty()) q[i] = q0b * qa + q1b * h * va + q2b * h * h * aa + q3b * h * h * ab + q4b * h * vb + q5b * qb;
            if (!v.empty() && h > 0.0)
                v[i] = (e0 * qa + e1 * h * va + e2 * h * h * aa + e3 * h * h * ab + e4 * h * vb + e5 * qb) / h;
            else if (!v.empty())
                v[i] = va;
        } else {
            if (!q.empty()) q[i] = h00 * qa + h10 * h * va + h01 * qb + h11 * h * vb;
            if (!v.empty() && h > 0.0)
                v[i] = (d00 * qa + d10 * h * va + d01 * qb + d11 * h * vb) / h;
            else if (!v.empty())
                v[i] = va;
        }
        if (!p.empty()) {
            const double pa = y0[dim_ + i], pb = y1[dim_ + i];
            const double ga = f0[dim_ + i], gb = f1[dim_ + i];
            p[i] = h00 * pa + h10 * h * ga + h01 * pb + h11 * h * gb;
        }
    }
}

PhasePoint Trajectory::at(double t) const {
    t = std::clamp(t, 0.0, horizon_);
    PhasePoint out{std::vector<double>(dim_), std::vector<double>(dim_)};
    if (t == 0.0) return initial_;
    if (method_ == Method::numeric)
        numeric_eval(t, out.q, out.p, {});
    else
        harmonic_eval(t, out.q, out.p);
    return out;
}

void Trajectory::position(double t, std::span<double> out) const {
    t = std::clamp(t, 0.0, horizon_);
    if (method_ == Method::numeric) {
        numeric_eval(t, out, {}, {});
        return;
    }
    const HarmonicSegment& seg = segments_[segment_index(t)];
    const double tau = t - seg.t0;
    for (std::size_t i = 0; i < dim_; ++i)
        out[i] = harmonic_advance(seg.center[i], seg.omega[i], seg.q0[i], seg.p0[i], tau).q;
}

std::vector<double> Trajectory::position(double t) const {
    std::vector<double> out(dim_);
    position(t, out);
    return out;
}

void Trajectory::velocity(double t, std::span<double> out) const {
    t = std::clamp(t, 0.0, horizon_);
    if (method_ == Method::numeric) {
        numeric_eval(t, {}, {}, out);
        return;
    }
    const HarmonicSegment& seg = segments_[segment_index(t)];
    const double tau = t - seg.t0;
    for (std::size_t i = 0; i < dim_; ++i)
        out[i] = harmonic_advance(seg.center[i], seg.omega[i], seg.q0[i], seg.p0[i], tau).p;
}

// ---------------------------------------------------------------------- flow

namespace {

using State = std::vector<double>;

struct OdeRhs {
    const HamiltonianSystem* system;
    std::size_t dim;
    std::size_t* nonsmooth;

    void operator()(const State& y, State& dy, double /*t*/) const {
        std::span<const double> q(y.data(), dim);
        if (system->target().nonsmooth_at(q)) ++*nonsmooth;
        system->rhs(q, std::span<const double>(y.data() + dim, dim), std::span<double>(dy.data(), dim),
                    std::span<double>(dy.data() + dim, dim));
    }
};

double curvature_cap(const HamiltonianSystem& system, std::span<const double> q, std::span<const double> grad,
                     double factor) {
    double gnorm = 0.0, qnorm = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        gnorm += grad[i] * grad[i];
        qnorm += q[i] * q[i];
    }
    const double proxy = std::sqrt(gnorm) / (1.0 + std::sqrt(qnorm));
    (void)system;
    if (!(proxy > 0.0)) return std::numeric_limits<double>::infinity();
    return factor / std::sqrt(proxy);
}

}  // namespace

Trajectory flow(const HamiltonianSystem& system, const PhasePoint& start, double T, const FlowConfig& config) {
    const std::size_t d = system.dim();
    if (start.q.size() != d || start.p.size() != d) throw std::invalid_argument("flow: start dimension mismatch");
    if (!(T >= 0.0) || !std::isfinite(T)) throw std::invalid_argument("flow: T must be finite and >= 0");
    for (std::size_t i = 0; i < d; ++i) {
        if (!std::isfinite(start.q[i]) || !std::isfinite(start.p[i])) throw DomainError("flow: non-finite start");
    }
    if (!(config.energy_tolerance > 0.0 && config.max_step > 0.0 && config.rel_tol > 0.0 && config.abs_tol > 0.0))
        throw std::invalid_argument("flow: FlowConfig fields must be positive");

    Trajectory traj;
    traj.dim_ = d;
    traj.horizon_ = T;
    traj.initial_ = start;
    const double h0 = system.energy(start);

    const auto model = system.target().harmonic_model();
    if (model && system.flows_isotropically() && !config.force_numeric) {
        traj.method_ = model->above ? Trajectory::Method::piecewise_harmonic : Trajectory::Method::harmonic;
        for (const auto* piece : {&model->below, model->above ? &*model->above : nullptr}) {
            if (!piece) continue;
            for (double w : piece->omega) traj.max_frequency_ = std::max(traj.max_frequency_, w);
        }
        traj.mesh_.push_back(0.0);
        if (!model->above) {
            traj.segments_.push_back({0.0, T, model->below.center, model->below.omega, start.q, start.p});
            traj.mesh_.push_back(T);
        } else {
            // One-dimensional piecewise harmonic potential with a switch at q = 0.
            double t = 0.0;
            double q = start.q[0], p = start.p[0];
            while (true) {
                const bool on_switch = (q == 0.0);
                const bool upper = on_switch ? (p > 0.0) : (q > 0.0);
                const HarmonicPiece& piece = upper ? *model->above : model->below;
                double center = piece.center[0], omega = piece.omega[0];
                if (on_switch && p == 0.0) {
                    center = 0.0;
                    omega = 0.0;  // resting on the ridge: gradient is defined as 0 there
                    ++traj.nonsmooth_evaluations_;
                }
                const double remaining = T - t;
                const double tau = omega == 0.0 ? std::numeric_limits<double>::infinity()
                                                : first_switch_time(center, q, p, on_switch, remaining);
                const double t_end = std::isfinite(tau) ? t + tau : T;
                traj.segments_.push_back({t, t_end, {center}, {omega}, {q}, {p}});
                traj.mesh_.push_back(t_end);
                if (!std::isfinite(tau)) break;
                const auto s = harmonic_advance(center, omega, q, p, tau);
                q = 0.0;
                p = s.p;
                t = t_end;
                if (t >= T) break;
            }
        }
        for (double t : traj.mesh_) {
            const PhasePoint x = traj.at(t);
            traj.max_energy_drift_ = std::max(traj.max_energy_drift_, std::abs(system.energy(x) - h0));
        }
        return traj;
    }

    // Numeric integration.
    traj.method_ = Trajectory::Method::numeric;
    traj.quintic_ = config.dense_output_order >= 5 && system.flows_isotropically();
    const std::size_t w = 2 * d;
    State y(w);
    std::copy(start.q.begin(), start.q.end(), y.begin());
    std::copy(start.p.begin(), start.p.end(), y.begin() + static_cast<std::ptrdiff_t>(d));
    State f(w);
    OdeRhs rhs{&system, d, &traj.nonsmooth_evaluations_};
    rhs(y, f, 0.0);

    traj.mesh_.push_back(0.0);
    traj.y_.insert(traj.y_.end(), y.begin(), y.end());
    traj.f_.insert(traj.f_.end(), f.begin(), f.end());
    if (T == 0.0) {
        traj.mesh_.push_back(0.0);
        traj.y_.insert(traj.y_.end(), y.begin(), y.end());
        traj.f_.insert(traj.f_.end(), f.begin(), f.end());
        return traj;
    }

    using Stepper = odeint::runge_kutta_fehlberg78<State>;
    using Checker = odeint::default_error_checker<double, odeint::range_algebra, odeint::default_operations>;
    odeint::controlled_runge_kutta<Stepper> stepper{Checker(config.abs_tol, config.rel_tol, 1.0, 1.0)};

    std::vector<double> grad(d);
    auto step_cap = [&](const State& state, const State& deriv) {
        std::span<const double> q(state.data(), d);
        std::span<const double> g;
        if (system.flows_isotropically()) {
            g = std::span<const double>(deriv.data() + d, d);
        } else {
            system.target().grad_log_density(q, grad);
            g = grad;
        }
        return std::min(config.max_step, curvature_cap(system, q, g, config.curvature_step_factor));
    };

    double t = 0.0;
    double dt = std::min({T, step_cap(y, f), 0.1});
    const double min_dt = 1e-12 * std::max(1.0, T);
    constexpr std::size_t kMaxSteps = 2'000'000;
    std::size_t attempts = 0;
    State y_prev(w);
    double h_prev = h0;
    while (t < T) {
        if (++attempts > kMaxSteps) throw IntegratorFailure("step budget exhausted", t);
        const double cap = std::min(step_cap(y, f), T - t);
        dt = std::min(dt, cap);
        double t_try = t;
        const double dt_try = dt;
        y_prev = y;
        const auto result = stepper.try_step(rhs, y, t_try, dt);
        if (result == odeint::fail) {
            ++traj.rejected_steps_;
            if (dt < min_dt) throw IntegratorFailure("step-size underflow", t);
            continue;
        }
        const double h_new = system.energy(std::span<const double>(y.data(), d), std::span<const double>(y.data() + d, d));
        // Energy acts as a second acceptance test: each step may use its share of the budget,
        // but never less than the rounding noise of evaluating H itself.
        const double roundoff = 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(h_new));
        if (std::abs(h_new - h_prev) > std::max(0.5 * config.energy_tolerance * dt_try / T, roundoff)) {
            ++traj.rejected_steps_;
            y = y_prev;
            dt = 0.5 * dt_try;
            if (dt < min_dt) throw IntegratorFailure("step-size underflow", t);
            continue;
        }
        h_prev = h_new;
        t = (T - t_try <= 1e-13 * std::max(1.0, T)) ? T : t_try;
        rhs(y, f, t);
        const double drift = std::abs(h_new - h0);
        traj.max_energy_drift_ = std::max(traj.max_energy_drift_, drift);
        if (!(drift <= config.energy_tolerance)) throw IntegratorFailure("integrator failure: energy drift", t);
        traj.mesh_.push_back(t);
        traj.y_.insert(traj.y_.end(), y.begin(), y.end());
        traj.f_.insert(traj.f_.end(), f.begin(), f.end());
    }
    return traj;
}

// ----------------------------------------------------------- linearization

LinearizationReport check_linearization(const Trajectory& traj, double s, double t) {
    if (!(0.0 <= s && s <= t && t <= traj.horizon())) throw std::invalid_argument("check_linearization: need 0 <= s <= t <= T");
    LinearizationReport report;
    if (t == s) return report;
    const std::size_t d = traj.dim();
    std::vector<double> qs(d), vs(d), qu(d), vu_plus(d), vu_minus(d);
    traj.position(s, qs);
    traj.velocity(s, vs);
    constexpr int kSamples = 128;
    const double delta = std::min(1e-5, 0.25 * (t - s));
    for (int k = 1; k <= kSamples; ++k) {
        const double u = s + (t - s) * k / kSamples;
        traj.position(u, qu);
        double dev = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double e = qu[i] - qs[i] - (u - s) * vs[i];
            dev += e * e;
        }
        report.deviation = std::max(report.deviation, std::sqrt(dev));
    }
    for (int k = 0; k <= kSamples; ++k) {
        const double u = s + (t - s) * k / kSamples;
        const double lo = std::max(0.0, u - delta), hi = std::min(traj.horizon(), u + delta);
        traj.velocity(hi, vu_plus);
        traj.velocity(lo, vu_minus);
        double acc = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double a = (vu_plus[i] - vu_minus[i]) / (hi - lo);
            acc += a * a;
        }
        report.half_sup_accel = std::max(report.half_sup_accel, 0.5 * std::sqrt(acc));
    }
    report.ratio = report.deviation / ((t - s) * (t - s));
    report.within_bound = report.ratio <= report.half_sup_accel * (1.0 + 1e-6) + 1e-12;
    return report;
}

}  // namespace hmcgap
