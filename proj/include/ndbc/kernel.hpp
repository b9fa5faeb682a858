#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "ndbc/error.hpp"
#include "ndbc/fields.hpp"
#include "ndbc/geometry.hpp"

namespace ndbc {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;

enum class KernelFamily { Tent, Bump, Singular };

inline const char* to_string(KernelFamily f) {
    switch (f) {
        case KernelFamily::Tent: return "tent";
        case KernelFamily::Bump: return "bump";
        case KernelFamily::Singular: return "singular";
    }
    return "?";
}

/// Constant making the smooth kernel integrate to one over R^dim.
/// The singular family has no integrability; it returns 1 (the C(s) default).
inline double normalization(KernelFamily family, double R, int dim) {
    require(dim == 1 || dim == 2, ErrorCode::InvalidArgument, "kernel dim must be 1 or 2");
    if (family == KernelFamily::Singular) return 1.0;
    require(R > 0.0, ErrorCode::InvalidArgument, "kernel radius must be positive");
    constexpr double pi = std::numbers::pi;
    if (family == KernelFamily::Tent) {
        return dim == 1 ? 1.0 / (R * R) : 3.0 / (pi * R * R * R);
    }
    const double r5 = std::pow(R, 5);
    return dim == 1 ? 15.0 / (16.0 * r5) : 3.0 / (pi * r5 * R);
}

/// Radial kernel description.
///
/// Tent:     J(z) = c (R - |z|)       for |z| < R
/// Bump:     J(z) = c (R^2 - |z|^2)^2 for |z| < R
/// Singular: J(z) = c / |z|^(dim + p s)
struct KernelSpec {
    KernelFamily family = KernelFamily::Tent;
    int dim = 1;
    double radius = 0.0;  // Tent/Bump support
    double s = 0.5;       // Singular only
    double p = 2.0;       // Singular exponent dim + p s
    double cnorm = 1.0;

    static KernelSpec tent(double R, int dim) {
        return {KernelFamily::Tent, dim, R, 0.5, 2.0, normalization(KernelFamily::Tent, R, dim)};
    }
    static KernelSpec bump(double R, int dim) {
        return {KernelFamily::Bump, dim, R, 0.5, 2.0, normalization(KernelFamily::Bump, R, dim)};
    }
    static KernelSpec singular(double s, double p, int dim, double c_s = 1.0) {
        require(s > 0.0 && s < 1.0, ErrorCode::InvalidArgument, "singular kernel needs s in (0,1)");
        require(p > 1.0, ErrorCode::InvalidArgument, "singular kernel needs p > 1");
        require(dim == 1 || dim == 2, ErrorCode::InvalidArgument, "kernel dim must be 1 or 2");
        return {KernelFamily::Singular, dim, 0.0, s, p, c_s};
    }

    bool is_smooth() const { return family != KernelFamily::Singular; }

    /// Interaction range; infinite for the singular family.
    double support() const {
        return is_smooth() ? radius : std::numeric_limits<double>::infinity();
    }
};

/// Kernel value as a function of |z|.
inline double eval_kernel_radial(const KernelSpec& spec, double dist) {
    switch (spec.family) {
        case KernelFamily::Tent:
            return dist < spec.radius ? spec.cnorm * (spec.radius - dist) : 0.0;
        case KernelFamily::Bump: {
            if (dist >= spec.radius) return 0.0;
            const double q = spec.radius * spec.radius - dist * dist;
            return spec.cnorm * q * q;
        }
        case KernelFamily::Singular:
            require(dist > 0.0, ErrorCode::SingularAtOrigin, "singular kernel evaluated at z = 0");
            return spec.cnorm / std::pow(dist, static_cast<double>(spec.dim) + spec.p * spec.s);
    }
    return 0.0;
}

inline double eval_kernel(const KernelSpec& spec, std::span<const double> z) {
    double s = 0.0;
    for (double c : z) s += c * c;
    return eval_kernel_radial(spec, std::sqrt(s));
}

enum class EdgeMode { ExcludeStripStrip, Full };

inline const char* to_string(EdgeMode m) {
    return m == EdgeMode::Full ? "Full" : "ExcludeStripStrip";
}

/// Assembled nonlocal operator on a grid.
///
/// W[x][y] = J(x - y) mu[y] with zero diagonal, stored as a node-indexed sparse
/// matrix plus the four interior/strip blocks in local indices. The active edge
/// set H is every ordered pair except strip-strip pairs in ExcludeStripStrip
/// mode, and every pair in Full mode. W_SS is always assembled.
class NonlocalOperator {
public:
    /// Quadrature assembly from a kernel.
    static NonlocalOperator assemble(std::shared_ptr<const Grid> grid, const KernelSpec& spec, EdgeMode mode) {
        require(grid != nullptr, ErrorCode::InvalidArgument, "null grid");
        require(spec.dim == grid->dim(), ErrorCode::InvalidArgument, "kernel dim does not match grid dim");
        const Grid& g = *grid;
        const double cutoff = spec.support();
        std::vector<Triplet> entries;
        for (std::size_t i = 0; i < g.size(); ++i) {
            for (std::size_t j = 0; j < g.size(); ++j) {
                if (i == j) continue;
                const double d = g.distance(i, j);
                if (d >= cutoff) continue;
                const double w = eval_kernel_radial(spec, d) * g.mu(j);
                if (w > 0.0) entries.emplace_back(static_cast<int>(i), static_cast<int>(j), w);
            }
        }
        require(!entries.empty(), ErrorCode::EmptySupport, "kernel support contains no node pair (R < h?)");
        return NonlocalOperator(std::move(grid), spec, mode, entries);
    }

    /// Fixture constructor from explicit weights W[x][y] (node indices).
    /// Diagonal entries are ignored; duplicates are summed.
    static NonlocalOperator from_weights(std::shared_ptr<const Grid> grid, const KernelSpec& spec, EdgeMode mode,
                                         const std::vector<Triplet>& entries) {
        require(grid != nullptr, ErrorCode::InvalidArgument, "null grid");
        std::vector<Triplet> clean;
        for (const auto& t : entries) {
            require(t.row() >= 0 && t.col() >= 0 && static_cast<std::size_t>(t.row()) < grid->size() &&
                        static_cast<std::size_t>(t.col()) < grid->size(),
                    ErrorCode::InvalidArgument, "weight index out of range");
            require(t.value() >= 0.0 && std::isfinite(t.value()), ErrorCode::InvalidArgument,
                    "weights must be finite and nonnegative");
            if (t.row() != t.col() && t.value() > 0.0) clean.push_back(t);
        }
        require(!clean.empty(), ErrorCode::EmptySupport, "no nonzero weights");
        return NonlocalOperator(std::move(grid), spec, mode, clean);
    }

    NonlocalOperator with_edge_mode(EdgeMode mode) const {
        NonlocalOperator copy = *this;
        copy.mode_ = mode;
        copy.build_derived();
        return copy;
    }

    const Grid& grid() const { return *grid_; }
    const std::shared_ptr<const Grid>& grid_ptr() const { return grid_; }
    const KernelSpec& spec() const { return spec_; }
    EdgeMode edge_mode() const { return mode_; }

    const SparseMatrix& weights() const { return w_; }
    const SparseMatrix& w_ii() const { return w_ii_; }
    const SparseMatrix& w_is() const { return w_is_; }
    const SparseMatrix& w_si() const { return w_si_; }
    const SparseMatrix& w_ss() const { return w_ss_; }

    /// Per strip node: sum of W[x][y] over interior y.
    const Eigen::VectorXd& d_omega_s() const { return d_omega_s_; }
    /// Per node: row sum of W over the active edge set.
    const Eigen::VectorXd& d_full() const { return d_full_; }
    /// Per node: row sum of W over all nodes (the interior equation's degree).
    const Eigen::VectorXd& d_all() const { return d_all_; }

    /// Symmetric edge conductances K[x][y] = (mu_x W_xy + mu_y W_yx) / 2 on active
    /// edges. The energy and its gradient are written in terms of K.
    const SparseMatrix& conductance() const { return k_; }

    bool active(std::size_t x, std::size_t y) const {
        if (x == y) return false;
        return mode_ == EdgeMode::Full || !(grid_->is_strip(x) && grid_->is_strip(y));
    }

    std::size_t nnz() const { return static_cast<std::size_t>(w_.nonZeros()); }

private:
    NonlocalOperator(std::shared_ptr<const Grid> grid, const KernelSpec& spec, EdgeMode mode,
                     const std::vector<Triplet>& entries)
        : grid_(std::move(grid)), spec_(spec), mode_(mode) {
        const auto n = static_cast<Eigen::Index>(grid_->size());
        w_.resize(n, n);
        w_.setFromTriplets(entries.begin(), entries.end());
        w_.makeCompressed();
        build_blocks();
        build_derived();
    }

    void build_blocks() {
        const Grid& g = *grid_;
        const auto ni = static_cast<Eigen::Index>(g.n_interior());
        const auto ns = static_cast<Eigen::Index>(g.n_strip());
        std::vector<Triplet> ii, is, si, ss;
        for (Eigen::Index x = 0; x < w_.outerSize(); ++x) {
            const auto xs = static_cast<std::size_t>(x);
            const int lx = static_cast<int>(g.local_index(xs));
            for (SparseMatrix::InnerIterator it(w_, x); it; ++it) {
                const auto ys = static_cast<std::size_t>(it.col());
                const int ly = static_cast<int>(g.local_index(ys));
                const bool sx = g.is_strip(xs), sy = g.is_strip(ys);
                auto& dst = sx ? (sy ? ss : si) : (sy ? is : ii);
                dst.emplace_back(lx, ly, it.value());
            }
        }
        w_ii_.resize(ni, ni);
        w_is_.resize(ni, ns);
        w_si_.resize(ns, ni);
        w_ss_.resize(ns, ns);
        w_ii_.setFromTriplets(ii.begin(), ii.end());
        w_is_.setFromTriplets(is.begin(), is.end());
        w_si_.setFromTriplets(si.begin(), si.end());
        w_ss_.setFromTriplets(ss.begin(), ss.end());

        d_all_ = Eigen::VectorXd::Zero(w_.rows());
        for (Eigen::Index x = 0; x < w_.outerSize(); ++x) {
            for (SparseMatrix::InnerIterator it(w_, x); it; ++it) d_all_[x] += it.value();
        }
        d_omega_s_ = Eigen::VectorXd::Zero(ns);
        for (Eigen::Index x = 0; x < w_si_.outerSize(); ++x) {
            for (SparseMatrix::InnerIterator it(w_si_, x); it; ++it) d_omega_s_[x] += it.value();
        }
    }

    void build_derived() {
        const Grid& g = *grid_;
        d_full_ = Eigen::VectorXd::Zero(w_.rows());
        std::vector<Triplet> kt;
        for (Eigen::Index x = 0; x < w_.outerSize(); ++x) {
            const auto xs = static_cast<std::size_t>(x);
            for (SparseMatrix::InnerIterator it(w_, x); it; ++it) {
                const auto ys = static_cast<std::size_t>(it.col());
                if (!active(xs, ys)) continue;
                d_full_[x] += it.value();
                const double half = 0.5 * g.mu(xs) * it.value();
                kt.emplace_back(static_cast<int>(x), static_cast<int>(ys), half);
                kt.emplace_back(static_cast<int>(ys), static_cast<int>(x), half);
            }
        }
        k_.resize(w_.rows(), w_.cols());
        k_.setFromTriplets(kt.begin(), kt.end());
        k_.makeCompressed();
    }

    std::shared_ptr<const Grid> grid_;
    KernelSpec spec_;
    EdgeMode mode_ = EdgeMode::ExcludeStripStrip;
    SparseMatrix w_, w_ii_, w_is_, w_si_, w_ss_, k_;
    Eigen::VectorXd d_omega_s_, d_full_, d_all_;
};

inline NonlocalOperator assemble(std::shared_ptr<const Grid> grid, const KernelSpec& spec, EdgeMode mode) {
    return NonlocalOperator::assemble(std::move(grid), spec, mode);
}

/// (Lu)[x] = mu[x] * sum over active y of W[x][y] (u[x] - u[y]).
inline FullField apply_graph_laplacian(const NonlocalOperator& op, const FullField& u) {
    const Grid& g = op.grid();
    check_field(g, u);
    const SparseMatrix& w = op.weights();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(u.size());
    for (Eigen::Index x = 0; x < w.outerSize(); ++x) {
        const auto xs = static_cast<std::size_t>(x);
        double acc = 0.0;
        for (SparseMatrix::InnerIterator it(w, x); it; ++it) {
            if (!op.active(xs, static_cast<std::size_t>(it.col()))) continue;
            acc += it.value() * (u[x] - u[it.col()]);
        }
        out[x] = g.mu(xs) * acc;
    }
    return FullField(std::move(out));
}

}  // namespace ndbc
