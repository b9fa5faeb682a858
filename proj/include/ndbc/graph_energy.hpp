#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "ndbc/error.hpp"
#include "ndbc/kernel.hpp"

namespace ndbc {

/// Regularisation of |d| used inside gradients and Hessians when 1 < p < 2.
inline constexpr double kModulusEpsilon = 1e-10;

/// psi(d) = |d|^p / p and its derivatives phi = psi', dphi = psi''.
///
/// For 1 < p < 2 the modulus is replaced by sqrt(d^2 + eps^2) in phi and dphi
/// (and in psi when used as a line-search objective); exact() is unregularised.
struct PowerLaw {
    double p = 2.0;
    double eps = kModulusEpsilon;

    explicit PowerLaw(double exponent, double epsilon = kModulusEpsilon) : p(exponent), eps(epsilon) {
        require(p > 1.0 && std::isfinite(p), ErrorCode::NonConvexExponent,
                "exponent p = " + std::to_string(p) + " must exceed 1");
    }

    bool regularized() const { return p < 2.0; }

    double exact(double d) const { return std::pow(std::abs(d), p) / p; }

    double psi(double d) const {
        if (p == 2.0) return 0.5 * d * d;
        if (!regularized()) return exact(d);
        return (std::pow(d * d + eps * eps, 0.5 * p) - std::pow(eps, p)) / p;
    }

    double phi(double d) const {
        if (p == 2.0) return d;
        if (!regularized()) return std::pow(std::abs(d), p - 2.0) * d;
        return d * std::pow(d * d + eps * eps, 0.5 * (p - 2.0));
    }

    /// phi(d) / d, the chord slope through the origin (>= dphi when p < 2).
    double chord(double d) const {
        if (p == 2.0) return 1.0;
        if (!regularized()) return d == 0.0 ? 0.0 : std::pow(std::abs(d), p - 2.0);
        return std::pow(d * d + eps * eps, 0.5 * (p - 2.0));
    }

    double dphi(double d) const {
        if (p == 2.0) return 1.0;
        if (!regularized()) return (p - 1.0) * std::pow(std::abs(d), p - 2.0);
        const double s = d * d + eps * eps;
        return std::pow(s, 0.5 * (p - 4.0)) * ((p - 1.0) * d * d + eps * eps);
    }
};

/// Objective  scale * E(v) + 1/2 sum_{x in prox} mu_x (v_x - target_x)^2
/// with E(v) = 1/2 sum over ordered active edges of K_xy psi(v_y - v_x).
/// Only nodes flagged free are unknowns; the others stay at their initial value.
struct ConvexProblem {
    const NonlocalOperator* op = nullptr;
    PowerLaw law{2.0};
    double scale = 1.0;
    std::vector<char> free;
    std::vector<char> prox;
    Eigen::VectorXd target;
};

struct MinimizeResult {
    Eigen::VectorXd v;
    double objective = 0.0;
    double residual = 0.0;
    int iterations = 0;
    bool converged = false;
};

namespace detail {

inline double objective(const ConvexProblem& pb, const Eigen::VectorXd& v) {
    const SparseMatrix& k = pb.op->conductance();
    const Grid& g = pb.op->grid();
    double e = 0.0;
    for (Eigen::Index x = 0; x < k.outerSize(); ++x) {
        for (SparseMatrix::InnerIterator it(k, x); it; ++it) {
            if (it.col() <= x) continue;
            e += it.value() * pb.law.psi(v[it.col()] - v[x]);
        }
    }
    double f = pb.scale * e;
    for (std::size_t x = 0; x < g.size(); ++x) {
        if (!pb.prox[x]) continue;
        const double d = v[static_cast<Eigen::Index>(x)] - pb.target[static_cast<Eigen::Index>(x)];
        f += 0.5 * g.mu(x) * d * d;
    }
    return f;
}

/// Gradient on every node plus a per-node rounding-noise floor for the scaled residual.
inline void gradient(const ConvexProblem& pb, const Eigen::VectorXd& v, Eigen::VectorXd& grad, Eigen::VectorXd& noise) {
    const SparseMatrix& k = pb.op->conductance();
    const Grid& g = pb.op->grid();
    grad.setZero(v.size());
    noise.setZero(v.size());
    for (Eigen::Index x = 0; x < k.outerSize(); ++x) {
        double acc = 0.0, mag = 0.0;
        for (SparseMatrix::InnerIterator it(k, x); it; ++it) {
            const double d = v[x] - v[it.col()];
            const double t = it.value() * pb.law.phi(d);
            acc += t;
            // rounding in d is amplified by the local slope of phi
            mag += std::abs(t) + it.value() * pb.law.dphi(d) * (std::abs(v[x]) + std::abs(v[it.col()]));
        }
        grad[x] = pb.scale * acc;
        noise[x] = pb.scale * mag;
        const auto xs = static_cast<std::size_t>(x);
        if (pb.prox[xs]) {
            const double t = g.mu(xs) * (v[x] - pb.target[x]);
            grad[x] += t;
            noise[x] += std::abs(t) + g.mu(xs) * std::abs(v[x]);
        }
    }
}

inline double scaled_residual(const ConvexProblem& pb, const Eigen::VectorXd& grad, const Eigen::VectorXd& noise,
                              double* floor_out = nullptr) {
    const Grid& g = pb.op->grid();
    double res = 0.0, flo = 0.0;
    constexpr double eps = std::numeric_limits<double>::epsilon();
    for (std::size_t x = 0; x < g.size(); ++x) {
        if (!pb.free[x]) continue;
        const auto xi = static_cast<Eigen::Index>(x);
        res = std::max(res, std::abs(grad[xi]) / g.mu(x));
        flo = std::max(flo, 64.0 * eps * noise[xi] / g.mu(x));
    }
    if (floor_out) *floor_out = flo;
    return res;
}

}  // namespace detail

/// Damped Newton with Armijo backtracking; falls back to a Jacobi-scaled
/// gradient step whenever the Hessian factorisation is not positive definite.
/// For p < 2 each iteration also tries the chord-weighted (reweighted
/// least-squares) step and keeps the lower of the two.
///
/// Converged when max over free x of |dPhi/dv_x| / mu_x <= tol (or the
/// rounding floor of that quantity, whichever is larger).
inline MinimizeResult minimize_convex(const ConvexProblem& pb, Eigen::VectorXd v, double tol, int max_iter) {
    const Grid& g = pb.op->grid();
    const SparseMatrix& k = pb.op->conductance();
    const std::size_t n = g.size();

    std::vector<int> compact(n, -1);
    std::vector<std::size_t> unknowns;
    for (std::size_t x = 0; x < n; ++x) {
        if (pb.free[x]) {
            compact[x] = static_cast<int>(unknowns.size());
            unknowns.push_back(x);
        }
    }
    const auto m = static_cast<Eigen::Index>(unknowns.size());

    MinimizeResult out;
    Eigen::VectorXd grad, noise;
    double f = detail::objective(pb, v);
    detail::gradient(pb, v, grad, noise);
    double floor = 0.0;
    double res = detail::scaled_residual(pb, grad, noise, &floor);

    if (m == 0) {
        out.v = std::move(v);
        out.objective = f;
        out.converged = true;
        return out;
    }

    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
    Eigen::VectorXd gc(m), dir(m), precond(m);
    std::vector<Eigen::Triplet<double>> trips;

    // Newton direction from the exact Hessian, or (secant = true) from the
    // chord weights phi(d)/d, which majorise the curvature when p < 2.
    auto solve_direction = [&](bool secant) {
        trips.clear();
        for (Eigen::Index c = 0; c < m; ++c) {
            const auto x = static_cast<Eigen::Index>(unknowns[static_cast<std::size_t>(c)]);
            gc[c] = grad[x];
            double diag = pb.prox[static_cast<std::size_t>(x)] ? g.mu(static_cast<std::size_t>(x)) : 0.0;
            double plain = diag;
            for (SparseMatrix::InnerIterator e(k, x); e; ++e) {
                const double d = v[x] - v[e.col()];
                const double curv = secant ? pb.law.chord(d) : pb.law.dphi(d);
                const double h = pb.scale * e.value() * curv;
                diag += h;
                plain += pb.scale * e.value();
                const int cy = compact[static_cast<std::size_t>(e.col())];
                if (cy >= 0) trips.emplace_back(static_cast<int>(c), cy, -h);
            }
            trips.emplace_back(static_cast<int>(c), static_cast<int>(c), diag);
            precond[c] = plain > 0.0 ? plain : 1.0;
        }
        Eigen::SparseMatrix<double> hess(m, m);
        hess.setFromTriplets(trips.begin(), trips.end());
        ldlt.compute(hess);
        if (ldlt.info() == Eigen::Success) {
            const Eigen::VectorXd dvals = ldlt.vectorD();
            const double dmax = dvals.cwiseAbs().maxCoeff();
            if (dvals.minCoeff() > 1e-13 * dmax && dmax > 0.0) {
                dir = ldlt.solve(-gc);
                if (dir.allFinite() && gc.dot(dir) < 0.0) return;
            }
        }
        dir = -gc.cwiseQuotient(precond);
    };

    // Backtracking along dir; returns the accepted step (0 when none).
    Eigen::VectorXd trial = v;
    auto line_search = [&](int max_halvings) {
        const double slope = gc.dot(dir);
        double step = 1.0;
        for (int ls = 0; ls <= max_halvings; ++ls) {
            for (Eigen::Index c = 0; c < m; ++c) {
                const auto x = static_cast<Eigen::Index>(unknowns[static_cast<std::size_t>(c)]);
                trial[x] = v[x] + step * dir[c];
            }
            const double ft = detail::objective(pb, trial);
            bool accepted = ft <= f + 1e-4 * step * slope;
            if (!accepted && ft <= f + 1e-13 * (1.0 + std::abs(f))) {
                // objective change below rounding: judge by the residual instead
                Eigen::VectorXd gt, nt;
                detail::gradient(pb, trial, gt, nt);
                accepted = detail::scaled_residual(pb, gt, nt) < res;
            }
            if (accepted) {
                f = ft;
                return step;
            }
            step *= 0.5;
        }
        return 0.0;
    };

    int it = 0;
    for (; it < max_iter; ++it) {
        if (res <= std::max(tol, floor)) break;
        const double f_start = f;
        solve_direction(false);
        double step = line_search(60);
        if (pb.law.regularized()) {
            // Newton oscillates across coinciding values; try the chord model too
            // and keep whichever lands lower.
            const Eigen::VectorXd newton_point = trial;
            const double newton_f = f;
            const double newton_step = step;
            f = f_start;
            trial = v;
            solve_direction(true);
            step = line_search(60);
            if (newton_step > 0.0 && (step == 0.0 || newton_f <= f)) {
                trial = newton_point;
                f = newton_f;
                step = newton_step;
            }
        }
        if (step == 0.0) break;
        v.swap(trial);
        trial = v;
        detail::gradient(pb, v, grad, noise);
        res = detail::scaled_residual(pb, grad, noise, &floor);
    }

    out.v = std::move(v);
    out.objective = f;
    out.residual = res;
    out.iterations = it;
    out.converged = res <= std::max(tol, floor);
    return out;
}

}  // namespace ndbc
