#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "ndbc/elliptic.hpp"
#include "ndbc/error.hpp"
#include "ndbc/fields.hpp"
#include "ndbc/graph_energy.hpp"
#include "ndbc/kernel.hpp"

namespace ndbc {

/// The five strip evolution problems. The *Star variants let the strip
/// exchange mass with itself (Full edge mode).
enum class Variant { LinearP, LinearPStar, PLaplaceP, PLaplacePStar, SingularP3 };

inline const char* to_string(Variant v) {
    switch (v) {
        case Variant::LinearP: return "LinearP";
        case Variant::LinearPStar: return "LinearPStar";
        case Variant::PLaplaceP: return "PLaplaceP";
        case Variant::PLaplacePStar: return "PLaplacePStar";
        case Variant::SingularP3: return "SingularP3";
    }
    return "?";
}

struct ProblemSpec {
    Variant variant = Variant::LinearP;
    double p = 2.0;

    /// Linear variants always run with p = 2 whatever is passed.
    static ProblemSpec make(Variant v, double p = 2.0) {
        ProblemSpec s{v, p};
        if (v == Variant::LinearP || v == Variant::LinearPStar) s.p = 2.0;
        require(s.p > 1.0 && std::isfinite(s.p), ErrorCode::NonConvexExponent, "p must exceed 1");
        return s;
    }

    EdgeMode edge_mode() const {
        return (variant == Variant::LinearPStar || variant == Variant::PLaplacePStar) ? EdgeMode::Full
                                                                                      : EdgeMode::ExcludeStripStrip;
    }

    bool is_linear_variant() const { return variant == Variant::LinearP || variant == Variant::LinearPStar; }

    void check_compatible(const NonlocalOperator& op) const {
        const bool singular = op.spec().family == KernelFamily::Singular;
        require(!(variant == Variant::SingularP3) || singular, ErrorCode::InvalidArgument,
                "SingularP3 needs a singular kernel");
        require(!is_linear_variant() || !singular, ErrorCode::InvalidArgument, "linear variants need a smooth kernel");
        require(op.edge_mode() == edge_mode(), ErrorCode::InvalidArgument,
                std::string("operator edge mode ") + to_string(op.edge_mode()) + " does not match variant " +
                    to_string(variant));
        require(op.grid().n_interior() > 0 || edge_mode() == EdgeMode::Full, ErrorCode::EmptyInterior,
                "variant needs a nonempty interior");
    }
};

struct SolverSettings {
    double tol = 1e-12;
    int max_iter = 200;
};

/// Per-state diagnostics; distances are mu-weighted deviations from the strip mean.
struct DiagRow {
    double mass = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
    double dp = 0.0;
    double dq = 0.0;
    double dinf = 0.0;
    double energy = 0.0;
};

struct Trajectory {
    double p = 2.0;
    double q = 2.0;
    std::vector<double> times;
    std::vector<StripField> states;
    std::vector<DiagRow> diag;
    std::vector<std::string> warnings;
};

/// Evolution failed part way; the trajectory up to the failure is attached.
class EvolveError : public Error {
public:
    EvolveError(const Error& cause, Trajectory partial)
        : Error(cause.code(), std::string("evolution aborted: ") + cause.what()), partial_(std::move(partial)) {}

    const Trajectory& partial() const noexcept { return partial_; }

private:
    Trajectory partial_;
};

inline double mu_mean(const Grid& g, const StripField& u) {
    double m = 0.0;
    for (std::size_t k = 0; k < g.n_strip(); ++k) m += g.mu(g.strip()[k]) * u[static_cast<Eigen::Index>(k)];
    return m / g.strip_measure();
}

/// (sum mu |u - mean|^q)^{1/q}; q = infinity gives the plain max deviation.
inline double deviation_norm(const Grid& g, const StripField& u, double q) {
    const double mean = mu_mean(g, u);
    if (std::isinf(q)) {
        double m = 0.0;
        for (Eigen::Index k = 0; k < u.size(); ++k) m = std::max(m, std::abs(u[k] - mean));
        return m;
    }
    double s = 0.0;
    for (std::size_t k = 0; k < g.n_strip(); ++k) {
        s += g.mu(g.strip()[k]) * std::pow(std::abs(u[static_cast<Eigen::Index>(k)] - mean), q);
    }
    return std::pow(s, 1.0 / q);
}

/// Strip dynamics of one problem on one operator.
///
/// Caches the linear factorisation (p = 2) and the last extension, which is
/// reused as a warm start for the nonlinear solves. Holds a reference to the
/// operator; the operator must outlive it.
class StripDynamics {
public:
    StripDynamics(const NonlocalOperator& op, ProblemSpec spec, SolverSettings settings = {})
        : op_(op), spec_(spec), settings_(settings), law_(spec.p) {
        spec_.check_compatible(op);
        if (op.grid().n_interior() > 0) linear_.emplace(op);
    }

    const NonlocalOperator& op() const { return op_; }
    const ProblemSpec& spec() const { return spec_; }
    const SolverSettings& settings() const { return settings_; }

    /// Extension of u into the interior for this problem's exponent.
    const FullField& extend(const StripField& u) {
        const Grid& g = op_.grid();
        check_field(g, u);
        if (cached_.has_value() && cached_strip_.values == u.values) return *cached_;
        if (g.n_interior() == 0) {
            cached_ = scatter_strip(g, u);
        } else {
            // Extend u - u[0] and shift back, so constant data extend exactly.
            const double shift = u.size() ? u[0] : 0.0;
            const StripField w(u.values.array() - shift);
            FullField ext;
            if (w.values.isZero(0.0)) {
                ext = FullField(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.size())));
            } else if (spec_.p == 2.0) {
                ext = linear_->extend(w);
            } else {
                FullField start = cached_.has_value() ? FullField(cached_->values.array() - shift) : linear_->extend(w);
                ext = extend_plaplace_from(op_, w, spec_.p, std::move(start), settings_.tol, settings_.max_iter).first;
            }
            ext.values.array() += shift;
            for (std::size_t k = 0; k < g.n_strip(); ++k) ext[static_cast<Eigen::Index>(g.strip()[k])] = u[static_cast<Eigen::Index>(k)];
            cached_ = std::move(ext);
        }
        cached_strip_ = u;
        return *cached_;
    }

    /// du/dt on the strip: sum over active y of W[x][y] phi_p(uhat[y] - u[x]).
    StripField rhs(const StripField& u) {
        const FullField& uhat = extend(u);
        const Grid& g = op_.grid();
        const SparseMatrix& w = op_.weights();
        Eigen::VectorXd out(static_cast<Eigen::Index>(g.n_strip()));
        for (std::size_t k = 0; k < g.n_strip(); ++k) {
            const std::size_t x = g.strip()[k];
            const auto xi = static_cast<Eigen::Index>(x);
            double acc = 0.0;
            for (SparseMatrix::InnerIterator it(w, xi); it; ++it) {
                if (!op_.active(x, static_cast<std::size_t>(it.col()))) continue;
                acc += it.value() * law_.phi(uhat[it.col()] - uhat[xi]);
            }
            out[static_cast<Eigen::Index>(k)] = acc;
        }
        return StripField(std::move(out));
    }

    /// Forward Euler step.
    StripField step_explicit(const StripField& u, double dt) {
        require(dt > 0.0, ErrorCode::InvalidArgument, "dt must be positive");
        StripField du = rhs(u);
        return StripField(u.values + dt * du.values);
    }

    /// Resolvent step: strip part of the joint minimiser of
    /// dt E_p(v) + 1/2 sum_{x in strip} mu_x (v_x - u_x)^2 over all node values.
    StripField step_implicit(const StripField& u, double dt) {
        require(dt > 0.0, ErrorCode::InvalidArgument, "dt must be positive");
        const Grid& g = op_.grid();
        check_field(g, u);
        ConvexProblem pb{&op_, law_, dt, {}, {}, {}};
        pb.free.assign(g.size(), 1);
        pb.prox.assign(g.size(), 0);
        for (auto x : g.strip()) pb.prox[x] = 1;
        pb.target = scatter_strip(g, u).values;

        Eigen::VectorXd start = cached_.has_value() ? cached_->values : extend(u).values;
        for (std::size_t k = 0; k < g.n_strip(); ++k) start[static_cast<Eigen::Index>(g.strip()[k])] = u[static_cast<Eigen::Index>(k)];

        const double scale = 1.0 + u.values.cwiseAbs().maxCoeff();
        MinimizeResult res = minimize_convex(pb, std::move(start), settings_.tol * scale, settings_.max_iter);
        if (!res.converged) {
            throw NoConvergenceError("implicit step stalled at residual " + std::to_string(res.residual), res.v,
                                     res.iterations);
        }
        FullField v(std::move(res.v));
        StripField next = restrict_to_strip(g, v);
        cached_ = std::move(v);
        cached_strip_ = next;
        return next;
    }

    /// Gershgorin bound for forward Euler: 1 / max strip degree over the active set.
    double stability_limit() const {
        const Grid& g = op_.grid();
        double dmax = 0.0;
        for (std::size_t x : g.strip()) dmax = std::max(dmax, op_.d_full()[static_cast<Eigen::Index>(x)]);
        return dmax > 0.0 ? 1.0 / dmax : std::numeric_limits<double>::infinity();
    }

    DiagRow diagnostics(const StripField& u, double q) {
        const Grid& g = op_.grid();
        DiagRow row;
        for (std::size_t k = 0; k < g.n_strip(); ++k) row.mass += g.mu(g.strip()[k]) * u[static_cast<Eigen::Index>(k)];
        row.d1 = deviation_norm(g, u, 1.0);
        row.d2 = deviation_norm(g, u, 2.0);
        row.dp = deviation_norm(g, u, spec_.p);
        row.dq = deviation_norm(g, u, q);
        row.dinf = deviation_norm(g, u, std::numeric_limits<double>::infinity());
        row.energy = energy(op_, extend(u), spec_.p);
        return row;
    }

private:
    const NonlocalOperator& op_;
    ProblemSpec spec_;
    SolverSettings settings_;
    PowerLaw law_;
    std::optional<LinearExtension> linear_;
    std::optional<FullField> cached_;
    StripField cached_strip_;
};

inline StripField rhs(const NonlocalOperator& op, const ProblemSpec& spec, const StripField& u,
                      SolverSettings settings = {}) {
    return StripDynamics(op, spec, settings).rhs(u);
}

inline StripField step_explicit(const NonlocalOperator& op, const ProblemSpec& spec, const StripField& u, double dt,
                                SolverSettings settings = {}) {
    return StripDynamics(op, spec, settings).step_explicit(u, dt);
}

inline StripField step_implicit(const NonlocalOperator& op, const ProblemSpec& spec, const StripField& u, double dt,
                                SolverSettings settings = {}) {
    return StripDynamics(op, spec, settings).step_implicit(u, dt);
}

enum class Integrator { Explicit, Implicit };

inline const char* to_string(Integrator i) { return i == Integrator::Explicit ? "explicit" : "implicit"; }

/// Number of steps n with n dt = t_end (within 1e-9), or BadSpacing-style InvalidArgument.
inline std::size_t step_count(double t_end, double dt) {
    require(t_end > 0.0 && dt > 0.0, ErrorCode::InvalidArgument, "t_end and dt must be positive");
    const double n = std::round(t_end / dt);
    require(n >= 1.0 && std::abs(n * dt - t_end) <= 1e-9 * std::max(1.0, t_end), ErrorCode::InvalidArgument,
            "dt does not divide t_end");
    return static_cast<std::size_t>(n);
}

/// Runs the integrator from u0 to t_end, recording state and diagnostics at
/// every step. Times are k dt exactly.
inline Trajectory evolve(const NonlocalOperator& op, const ProblemSpec& spec, const StripField& u0, double t_end,
                         double dt, Integrator integrator, SolverSettings settings = {}, double q = 2.0) {
    require(q >= 1.0, ErrorCode::InvalidArgument, "diagnostic exponent q must be >= 1");
    check_field(op.grid(), u0);
    const std::size_t steps = step_count(t_end, dt);
    StripDynamics dyn(op, spec, settings);

    Trajectory traj;
    traj.p = spec.p;
    traj.q = q;
    traj.times.reserve(steps + 1);
    traj.states.reserve(steps + 1);
    traj.diag.reserve(steps + 1);
    if (integrator == Integrator::Explicit && dt > dyn.stability_limit()) {
        traj.warnings.push_back("dt = " + std::to_string(dt) + " exceeds the forward Euler advisory limit " +
                                std::to_string(dyn.stability_limit()));
    }

    StripField u = u0;
    try {
        traj.times.push_back(0.0);
        traj.diag.push_back(dyn.diagnostics(u, q));
        traj.states.push_back(u);
        for (std::size_t k = 1; k <= steps; ++k) {
            u = integrator == Integrator::Explicit ? dyn.step_explicit(u, dt) : dyn.step_implicit(u, dt);
            require(u.values.allFinite(), ErrorCode::NoConvergence, "state became non-finite");
            DiagRow row = dyn.diagnostics(u, q);
            traj.times.push_back(static_cast<double>(k) * dt);
            traj.states.push_back(u);
            traj.diag.push_back(row);
        }
    } catch (const Error& e) {
        const auto n = std::min(traj.times.size(), traj.diag.size());
        traj.times.resize(n);
        traj.states.resize(n);
        traj.diag.resize(n);
        throw EvolveError(e, std::move(traj));
    }
    return traj;
}

struct PicardResult {
    Trajectory trajectory;
    int iterations = 0;
};

/// Fixed-point iteration of the integrated strip equation on [0, window]:
///
///   u^{m+1}(t_k) = u0 + int_0^{t_k} F(u^m(s)) ds,
///
/// with F the linear strip right-hand side and the time integral done by the
/// composite trapezoid rule on nt equally spaced nodes. Stops when
/// sup_k ||u^{m+1}(t_k) - u^m(t_k)||_{norm_p, mu} <= tol.
inline PicardResult picard_solve(const NonlocalOperator& op, const ProblemSpec& spec, const StripField& u0,
                                 double window, int nt, double tol = 1e-12, int max_iter = 200, double norm_p = 2.0) {
    require(spec.is_linear_variant(), ErrorCode::InvalidArgument, "Picard integrator is defined for linear variants");
    require(window > 0.0, ErrorCode::InvalidArgument, "window must be positive");
    require(nt >= 11, ErrorCode::InvalidArgument, "Picard needs at least 11 time nodes");
    require(max_iter >= 1, ErrorCode::InvalidArgument, "max_iter must be positive");
    const Grid& g = op.grid();
    check_field(g, u0);
    StripDynamics dyn(op, spec);

    const auto nodes = static_cast<std::size_t>(nt);
    const double dtq = window / static_cast<double>(nt - 1);
    std::vector<Eigen::VectorXd> cur(nodes, u0.values), next(nodes);
    std::vector<Eigen::VectorXd> f(nodes);

    auto weighted_norm = [&](const Eigen::VectorXd& d) {
        double s = 0.0;
        for (std::size_t k = 0; k < g.n_strip(); ++k) s += g.mu(g.strip()[k]) * std::pow(std::abs(d[static_cast<Eigen::Index>(k)]), norm_p);
        return std::pow(s, 1.0 / norm_p);
    };

    int iter = 0;
    bool converged = false;
    while (iter < max_iter) {
        ++iter;
        for (std::size_t k = 0; k < nodes; ++k) f[k] = dyn.rhs(StripField(cur[k])).values;
        next[0] = u0.values;
        Eigen::VectorXd integral = Eigen::VectorXd::Zero(u0.size());
        double diff = weighted_norm(next[0] - cur[0]);
        for (std::size_t k = 1; k < nodes; ++k) {
            integral += 0.5 * dtq * (f[k - 1] + f[k]);
            next[k] = u0.values + integral;
            diff = std::max(diff, weighted_norm(next[k] - cur[k]));
        }
        cur.swap(next);
        if (!std::isfinite(diff) || diff > 1e150) break;
        if (diff <= tol) {
            converged = true;
            break;
        }
    }
    require(converged, ErrorCode::NoContraction,
            "Picard iteration did not contract within " + std::to_string(iter) + " iterations; shrink the window");

    PicardResult out;
    out.iterations = iter;
    out.trajectory.p = spec.p;
    out.trajectory.q = norm_p;
    for (std::size_t k = 0; k < nodes; ++k) {
        StripField s(cur[k]);
        out.trajectory.times.push_back(static_cast<double>(k) * dtq);
        out.trajectory.diag.push_back(dyn.diagnostics(s, norm_p));
        out.trajectory.states.push_back(std::move(s));
    }
    return out;
}

}  // namespace ndbc
