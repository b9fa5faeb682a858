#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>

#include "ndbc/error.hpp"
#include "ndbc/fields.hpp"
#include "ndbc/graph_energy.hpp"
#include "ndbc/kernel.hpp"

namespace ndbc {

struct EnergyReport {
    double energy = 0.0;
    double grad_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Interior node counts above this use preconditioned CG instead of a dense Cholesky.
inline constexpr std::size_t kDenseInteriorLimit = 3000;

/// Factorised interior system for the linear extension.
///
/// Solves (D_I - W_II) u_I = W_IS g, where D_I holds interior row sums over all
/// nodes. The system is scaled by mu row-wise so the matrix is symmetric.
class LinearExtension {
public:
    explicit LinearExtension(const NonlocalOperator& op) : op_(&op) {
        const Grid& g = op.grid();
        const auto ni = static_cast<Eigen::Index>(g.n_interior());
        if (ni == 0) return;
        const Eigen::VectorXd& d_all = op.d_all();
        for (std::size_t k = 0; k < g.n_interior(); ++k) {
            require(d_all[static_cast<Eigen::Index>(g.interior()[k])] > 0.0, ErrorCode::SingularSystem,
                    "interior node " + std::to_string(g.interior()[k]) + " has no neighbours");
        }
        std::vector<Triplet> trips;
        for (Eigen::Index x = 0; x < op.w_ii().outerSize(); ++x) {
            const std::size_t node = g.interior()[static_cast<std::size_t>(x)];
            const double mu = g.mu(node);
            trips.emplace_back(static_cast<int>(x), static_cast<int>(x), mu * d_all[static_cast<Eigen::Index>(node)]);
            for (SparseMatrix::InnerIterator it(op.w_ii(), x); it; ++it) {
                trips.emplace_back(static_cast<int>(x), static_cast<int>(it.col()), -mu * it.value());
            }
        }
        Eigen::SparseMatrix<double> l_ii(ni, ni);
        l_ii.setFromTriplets(trips.begin(), trips.end());

        if (g.n_interior() <= kDenseInteriorLimit) {
            Eigen::MatrixXd dense(l_ii);
            dense = 0.5 * (dense + dense.transpose()).eval();
            // LDLT rather than LLT: no square roots, so exact means stay exact
            ldlt_.compute(dense);
            bool ok = ldlt_.info() == Eigen::Success;
            if (ok) {
                const Eigen::VectorXd piv = ldlt_.vectorD();
                ok = piv.minCoeff() > 1e-14 * piv.cwiseAbs().maxCoeff();
            }
            require(ok, ErrorCode::SingularSystem, "interior system is numerically singular");
            dense_ = true;
        } else {
            l_ii_sparse_ = l_ii;
            cg_.setTolerance(1e-14);
            cg_.setMaxIterations(10 * static_cast<int>(ni));
            cg_.compute(l_ii_sparse_);
            require(cg_.info() == Eigen::Success, ErrorCode::SingularSystem, "interior system setup failed");
        }
    }

    /// Interior values (interior-local order) for strip data g (strip-local order).
    Eigen::VectorXd interior_values(const Eigen::VectorXd& g_strip) const {
        const Grid& g = op_->grid();
        if (g.n_interior() == 0) return {};
        Eigen::VectorXd rhs = op_->w_is() * g_strip;
        for (std::size_t k = 0; k < g.n_interior(); ++k) rhs[static_cast<Eigen::Index>(k)] *= g.mu(g.interior()[k]);
        if (dense_) return ldlt_.solve(rhs);
        Eigen::VectorXd u = cg_.solve(rhs);
        require(cg_.info() == Eigen::Success, ErrorCode::SingularSystem, "CG did not converge on the interior system");
        return u;
    }

    FullField extend(const StripField& g_strip) const {
        const Grid& g = op_->grid();
        check_field(g, g_strip);
        FullField u = scatter_strip(g, g_strip);
        const Eigen::VectorXd ui = interior_values(g_strip.values);
        for (std::size_t k = 0; k < g.n_interior(); ++k) u[static_cast<Eigen::Index>(g.interior()[k])] = ui[static_cast<Eigen::Index>(k)];
        return u;
    }

private:
    const NonlocalOperator* op_;
    bool dense_ = false;
    Eigen::LDLT<Eigen::MatrixXd> ldlt_;
    Eigen::SparseMatrix<double> l_ii_sparse_;
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg_;
};

/// max over interior x of | sum_{y != x} W[x][y] phi_p(u[y] - u[x]) |.
inline double interior_residual(const NonlocalOperator& op, const FullField& u, double p) {
    const Grid& g = op.grid();
    check_field(g, u);
    require(p > 1.0, ErrorCode::NonConvexExponent, "p must exceed 1");
    const SparseMatrix& w = op.weights();
    double worst = 0.0;
    for (std::size_t x : g.interior()) {
        const auto xi = static_cast<Eigen::Index>(x);
        double acc = 0.0;
        for (SparseMatrix::InnerIterator it(w, xi); it; ++it) {
            const double d = u[it.col()] - u[xi];
            acc += it.value() * (p == 2.0 ? d : std::copysign(std::pow(std::abs(d), p - 1.0), d));
        }
        worst = std::max(worst, std::abs(acc));
    }
    return worst;
}

/// Linear extension of strip data into the interior.
inline FullField extend_linear(const NonlocalOperator& op, const StripField& g) {
    LinearExtension ext(op);
    FullField u = ext.extend(g);
    const double res = interior_residual(op, u, 2.0);
    require(res <= 1e-10 * (1.0 + g.values.cwiseAbs().maxCoeff()), ErrorCode::SingularSystem,
            "interior residual " + std::to_string(res) + " too large after solve");
    return u;
}

/// E_p(u) = (1/2p) sum over ordered active edges of mu_x W_xy |u_y - u_x|^p.
inline double energy(const NonlocalOperator& op, const FullField& u, double p) {
    const Grid& g = op.grid();
    check_field(g, u);
    require(p > 1.0, ErrorCode::NonConvexExponent, "p must exceed 1");
    const SparseMatrix& w = op.weights();
    double e = 0.0;
    for (Eigen::Index x = 0; x < w.outerSize(); ++x) {
        const auto xs = static_cast<std::size_t>(x);
        double row = 0.0;
        for (SparseMatrix::InnerIterator it(w, x); it; ++it) {
            if (!op.active(xs, static_cast<std::size_t>(it.col()))) continue;
            row += it.value() * std::pow(std::abs(u[it.col()] - u[x]), p);
        }
        e += g.mu(xs) * row;
    }
    return e / (2.0 * p);
}

/// dE_p/du on every node (eps-regularised modulus when p < 2).
inline FullField energy_gradient(const NonlocalOperator& op, const FullField& u, double p) {
    check_field(op.grid(), u);
    const PowerLaw law(p);
    const SparseMatrix& k = op.conductance();
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(u.size());
    for (Eigen::Index x = 0; x < k.outerSize(); ++x) {
        double acc = 0.0;
        for (SparseMatrix::InnerIterator it(k, x); it; ++it) acc += it.value() * law.phi(u[x] - u[it.col()]);
        grad[x] = acc;
    }
    return FullField(std::move(grad));
}

/// Minimiser of E_p with the strip pinned to g, started from `initial`
/// (whose strip entries are overwritten by g).
inline std::pair<FullField, EnergyReport> extend_plaplace_from(const NonlocalOperator& op, const StripField& g,
                                                               double p, FullField initial, double tol,
                                                               int max_iter) {
    const Grid& grid = op.grid();
    check_field(grid, g);
    check_field(grid, initial);
    require(p > 1.0, ErrorCode::NonConvexExponent, "p = " + std::to_string(p) + " must exceed 1");
    for (std::size_t k = 0; k < grid.n_strip(); ++k) initial[static_cast<Eigen::Index>(grid.strip()[k])] = g[static_cast<Eigen::Index>(k)];

    ConvexProblem pb{&op, PowerLaw(p), 1.0, {}, {}, {}};
    pb.free.assign(grid.size(), 0);
    pb.prox.assign(grid.size(), 0);
    for (auto x : grid.interior()) pb.free[x] = 1;

    const double scale = 1.0 + (g.size() ? g.values.cwiseAbs().maxCoeff() : 0.0);
    MinimizeResult res = minimize_convex(pb, std::move(initial.values), tol * scale, max_iter);
    FullField u(std::move(res.v));
    EnergyReport report{energy(op, u, p), res.residual, res.iterations, res.converged};
    if (!res.converged) {
        throw NoConvergenceError("p-Laplace extension stalled at residual " + std::to_string(res.residual),
                                 u.values, res.iterations);
    }
    return {std::move(u), report};
}

/// Minimiser of E_p over interior values with the strip pinned to g.
/// Starts from the linear extension.
inline std::pair<FullField, EnergyReport> extend_plaplace(const NonlocalOperator& op, const StripField& g, double p,
                                                          double tol = 1e-12, int max_iter = 200) {
    require(p > 1.0, ErrorCode::NonConvexExponent, "p = " + std::to_string(p) + " must exceed 1");
    check_field(op.grid(), g);
    FullField start = op.grid().n_interior() ? LinearExtension(op).extend(g) : scatter_strip(op.grid(), g);
    return extend_plaplace_from(op, g, p, std::move(start), tol, max_iter);
}

}  // namespace ndbc
