#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "ndbc/elliptic.hpp"
#include "ndbc/error.hpp"
#include "ndbc/evolution.hpp"
#include "ndbc/fields.hpp"
#include "ndbc/kernel.hpp"
#include "ndbc/seeding.hpp"

namespace ndbc {

// ---------------------------------------------------------------------------
// Norm diagnostics

inline double mass(const Grid& g, const StripField& u) {
    check_field(g, u);
    double m = 0.0;
    for (std::size_t k = 0; k < g.n_strip(); ++k) m += g.mu(g.strip()[k]) * u[static_cast<Eigen::Index>(k)];
    return m;
}

/// (sum_x mu_x |u_x - mean|^q)^{1/q}, mean = mass / strip measure. q may be infinite.
inline double lq_distance_to_mean(const Grid& g, const StripField& u, double q) {
    check_field(g, u);
    require(q >= 1.0, ErrorCode::InvalidArgument, "q must be >= 1");
    return deviation_norm(g, u, q);
}

/// (sum_x mu_x |u_x|^q)^{1/q}; q = infinity gives max |u_x|.
inline double lq_norm(const Grid& g, const StripField& u, double q) {
    if (std::isinf(q)) return u.size() ? u.values.cwiseAbs().maxCoeff() : 0.0;
    double s = 0.0;
    for (std::size_t k = 0; k < g.n_strip(); ++k) s += g.mu(g.strip()[k]) * std::pow(std::abs(u[static_cast<Eigen::Index>(k)]), q);
    return std::pow(s, 1.0 / q);
}

// ---------------------------------------------------------------------------
// Schur complement and the p = 2 gap

/// Strip-reduced quadratic form of the mu-weighted active-edge Laplacian,
/// S = L_SS - L_SI L_II^{-1} L_IS, in strip-local indices. With an empty
/// interior S = L_SS.
inline Eigen::MatrixXd schur_complement(const NonlocalOperator& op) {
    const Grid& g = op.grid();
    const auto ns = static_cast<Eigen::Index>(g.n_strip());
    const auto ni = static_cast<Eigen::Index>(g.n_interior());

    Eigen::MatrixXd l_ss = Eigen::MatrixXd::Zero(ns, ns);
    Eigen::MatrixXd l_si = Eigen::MatrixXd::Zero(ns, ni);
    Eigen::MatrixXd l_is = Eigen::MatrixXd::Zero(ni, ns);
    Eigen::MatrixXd l_ii = Eigen::MatrixXd::Zero(ni, ni);
    const SparseMatrix& w = op.weights();
    for (Eigen::Index x = 0; x < w.outerSize(); ++x) {
        const auto xs = static_cast<std::size_t>(x);
        const auto lx = static_cast<Eigen::Index>(g.local_index(xs));
        const double mu = g.mu(xs);
        for (SparseMatrix::InnerIterator it(w, x); it; ++it) {
            const auto ys = static_cast<std::size_t>(it.col());
            if (!op.active(xs, ys)) continue;
            const auto ly = static_cast<Eigen::Index>(g.local_index(ys));
            const double c = mu * it.value();
            if (g.is_strip(xs)) {
                l_ss(lx, lx) += c;
                if (g.is_strip(ys)) l_ss(lx, ly) -= c;
                else l_si(lx, ly) -= c;
            } else {
                l_ii(lx, lx) += c;
                if (g.is_strip(ys)) l_is(lx, ly) -= c;
                else l_ii(lx, ly) -= c;
            }
        }
    }
    Eigen::MatrixXd s = l_ss;
    if (ni > 0) {
        Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (l_ii + l_ii.transpose()));
        bool ok = llt.info() == Eigen::Success;
        if (ok) {
            const Eigen::VectorXd piv = llt.matrixLLT().diagonal();
            ok = piv.minCoeff() > 1e-7 * piv.maxCoeff();
        }
        require(ok, ErrorCode::SingularInterior, "interior block of the Laplacian is singular");
        s -= l_si * llt.solve(l_is);
    }
    return 0.5 * (s + s.transpose());
}

enum class GapMethod { SchurEig, VariationalDescent };

inline const char* to_string(GapMethod m) { return m == GapMethod::SchurEig ? "SchurEig" : "VariationalDescent"; }

struct GapResult {
    double beta = 0.0;
    StripField mode;
    GapMethod method = GapMethod::SchurEig;
};

/// Eigenpairs of the pencil (S, M) on the mu-mean-zero subspace, ascending.
/// Each mode has mu-weighted L2 norm one and its largest-magnitude entry positive.
struct GapSpectrum {
    Eigen::VectorXd values;
    std::vector<StripField> modes;
};

inline constexpr std::size_t kMaxDenseStripNodes = 2000;

inline GapSpectrum gap_spectrum(const NonlocalOperator& op) {
    const Grid& g = op.grid();
    const auto ns = static_cast<Eigen::Index>(g.n_strip());
    require(ns >= 2, ErrorCode::TooFewStripNodes, "need at least two strip nodes");
    require(g.n_strip() <= kMaxDenseStripNodes, ErrorCode::InvalidArgument, "dense gap path capped at 2000 strip nodes");

    const Eigen::MatrixXd s = schur_complement(op);
    Eigen::VectorXd sqrt_mu(ns);
    for (Eigen::Index k = 0; k < ns; ++k) sqrt_mu[k] = std::sqrt(g.mu(g.strip()[static_cast<std::size_t>(k)]));
    const Eigen::MatrixXd s_hat = sqrt_mu.cwiseInverse().asDiagonal() * s * sqrt_mu.cwiseInverse().asDiagonal();

    // Orthonormal complement of M^{1/2} 1, the image of the constants.
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(sqrt_mu.normalized());
    const Eigen::MatrixXd q_full = qr.householderQ() * Eigen::MatrixXd::Identity(ns, ns);
    const Eigen::MatrixXd basis = q_full.rightCols(ns - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(basis.transpose() * s_hat * basis);
    require(eig.info() == Eigen::Success, ErrorCode::NoConvergence, "symmetric eigensolver failed");

    GapSpectrum out;
    out.values = eig.eigenvalues().cwiseMax(0.0);
    for (Eigen::Index k = 0; k < ns - 1; ++k) {
        Eigen::VectorXd v = sqrt_mu.cwiseInverse().cwiseProduct(basis * eig.eigenvectors().col(k));
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v[arg] < 0.0) v = -v;
        out.modes.emplace_back(std::move(v));
    }
    return out;
}

/// Smallest eigenvalue of (S, M) on the mu-mean-zero subspace: the p = 2 gap with
/// the 1/2-weighted energy numerator, so ||u - mean||_2^2 decays like exp(-2 beta t).
inline GapResult spectral_gap_beta(const NonlocalOperator& op) {
    GapSpectrum spec = gap_spectrum(op);
    return {spec.values[0], std::move(spec.modes[0]), GapMethod::SchurEig};
}

// ---------------------------------------------------------------------------
// Rayleigh quotient

namespace detail {

inline FullField quotient_extension(const NonlocalOperator& op, const StripField& g, double p, const SolverSettings& s) {
    if (op.grid().n_interior() == 0) return scatter_strip(op.grid(), g);
    if (p == 2.0) return LinearExtension(op).extend(g);
    return extend_plaplace(op, g, p, s.tol, s.max_iter).first;
}

inline double quotient_value(const NonlocalOperator& op, const StripField& g, const FullField& uhat, double p) {
    const Grid& grid = op.grid();
    const double num = p * energy(op, uhat, p);
    double den = 0.0;
    for (std::size_t k = 0; k < grid.n_strip(); ++k) den += grid.mu(grid.strip()[k]) * std::pow(std::abs(g[static_cast<Eigen::Index>(k)]), p);
    return num / den;
}

}  // namespace detail

/// 1/2 sum over ordered active edges of mu_x W_xy |uhat_y - uhat_x|^p divided by
/// sum_x mu_x |g_x|^p, with uhat the p-extension of g. g must be mu-mean-zero.
inline double rayleigh_quotient(const NonlocalOperator& op, const StripField& g, double p, SolverSettings settings = {}) {
    const Grid& grid = op.grid();
    check_field(grid, g);
    require(p > 1.0, ErrorCode::NonConvexExponent, "p must exceed 1");
    const double gmax = g.size() ? g.values.cwiseAbs().maxCoeff() : 0.0;
    require(gmax > 0.0 && g.values.maxCoeff() - g.values.minCoeff() > 1e-12 * gmax, ErrorCode::ConstantField,
            "quotient undefined for a constant field");
    require(std::abs(mu_mean(grid, g)) <= 1e-9 * gmax, ErrorCode::NotMeanZero, "field must have zero mu-mean");
    return detail::quotient_value(op, g, detail::quotient_extension(op, g, p, settings), p);
}

// ---------------------------------------------------------------------------
// Variational estimate for general p

/// Generator for restart k of the variational gap estimate.
inline std::mt19937_64 restart_rng(std::uint64_t seed, int restart) {
    return stream_rng(seed, Stream::BetaRestart, static_cast<std::uint32_t>(restart));
}

namespace detail {

/// Removes the mu-mean and rescales to unit mu-weighted L^p norm.
inline void project_normalize(const Grid& g, Eigen::VectorXd& v, double p) {
    StripField f(v);
    v.array() -= mu_mean(g, f);
    double s = 0.0;
    for (std::size_t k = 0; k < g.n_strip(); ++k) s += g.mu(g.strip()[k]) * std::pow(std::abs(v[static_cast<Eigen::Index>(k)]), p);
    v /= std::pow(s, 1.0 / p);
}

struct QuotientState {
    Eigen::VectorXd g;
    FullField uhat;
    double value = 0.0;
};

}  // namespace detail

/// Projected gradient descent of the Rayleigh quotient over
/// {mu-mean 0, ||g||_{p,mu} = 1}, best of `restarts` seeded random starts.
/// The result is an upper bound on the infimum.
inline GapResult estimate_beta_p(const NonlocalOperator& op, double p, int restarts, double tol = 1e-9,
                                 std::uint64_t seed = 0, int max_iter = 20000, SolverSettings settings = {}) {
    require(restarts >= 1, ErrorCode::InvalidArgument, "restarts must be at least 1");
    require(p > 1.0, ErrorCode::NonConvexExponent, "p must exceed 1");
    const Grid& grid = op.grid();
    const auto ns = static_cast<Eigen::Index>(grid.n_strip());
    require(ns >= 2, ErrorCode::TooFewStripNodes, "need at least two strip nodes");

    const PowerLaw law(p);
    std::optional<LinearExtension> linear;
    if (grid.n_interior() > 0 && p == 2.0) linear.emplace(op);

    auto evaluate = [&](const Eigen::VectorXd& g, const FullField* warm) {
        detail::QuotientState st;
        st.g = g;
        StripField gs(g);
        if (grid.n_interior() == 0) {
            st.uhat = scatter_strip(grid, gs);
        } else if (linear) {
            st.uhat = linear->extend(gs);
        } else {
            FullField start = warm ? *warm : LinearExtension(op).extend(gs);
            st.uhat = extend_plaplace_from(op, gs, p, std::move(start), settings.tol, settings.max_iter).first;
        }
        st.value = detail::quotient_value(op, gs, st.uhat, p);
        return st;
    };

    // Descent direction in the mu metric, projected onto mean-zero fields.
    auto direction = [&](const detail::QuotientState& st, double& norm) {
        const SparseMatrix& k = op.conductance();
        Eigen::VectorXd d(ns);
        for (Eigen::Index c = 0; c < ns; ++c) {
            const auto x = static_cast<Eigen::Index>(grid.strip()[static_cast<std::size_t>(c)]);
            double gn = 0.0;
            for (SparseMatrix::InnerIterator it(k, x); it; ++it) gn += it.value() * law.phi(st.uhat[x] - st.uhat[it.col()]);
            const double mu = grid.mu(static_cast<std::size_t>(x));
            const double grad = p * gn - st.value * p * mu * law.phi(st.g[c]);
            d[c] = -grad / mu;
        }
        d.array() -= mu_mean(grid, StripField(d));
        double s = 0.0;
        for (Eigen::Index c = 0; c < ns; ++c) s += grid.mu(grid.strip()[static_cast<std::size_t>(c)]) * d[c] * d[c];
        norm = std::sqrt(s);
        return d;
    };

    GapResult best;
    best.method = GapMethod::VariationalDescent;
    best.beta = std::numeric_limits<double>::infinity();
    bool any_converged = false;
    Eigen::VectorXd best_g;

    for (int r = 0; r < restarts; ++r) {
        auto rng = restart_rng(seed, r);
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        Eigen::VectorXd g0(ns);
        for (Eigen::Index c = 0; c < ns; ++c) g0[c] = unif(rng);
        detail::project_normalize(grid, g0, p);
        detail::QuotientState st = evaluate(g0, nullptr);

        double step = 1.0;
        bool converged = false;
        for (int it = 0; it < max_iter; ++it) {
            double gnorm = 0.0;
            const Eigen::VectorXd d = direction(st, gnorm);
            if (gnorm <= tol) {
                converged = true;
                break;
            }
            bool improved = false;
            step = std::min(step * 2.0, 1e6);
            for (int ls = 0; ls < 80; ++ls) {
                Eigen::VectorXd trial = st.g + step * d;
                detail::project_normalize(grid, trial, p);
                detail::QuotientState cand = evaluate(trial, &st.uhat);
                if (cand.value <= st.value - 1e-4 * step * gnorm * gnorm) {
                    st = std::move(cand);
                    improved = true;
                    break;
                }
                step *= 0.5;
            }
            if (!improved) {
                // no measurable decrease left: at the rounding floor of the quotient
                converged = gnorm <= std::sqrt(tol);
                break;
            }
        }
        any_converged = any_converged || converged;
        if (st.value < best.beta) {
            best.beta = st.value;
            best_g = st.g;
        }
    }
    if (!any_converged) {
        throw NoConvergenceError("Rayleigh quotient descent did not converge", best_g, max_iter);
    }
    best.mode = StripField(std::move(best_g));
    return best;
}

// ---------------------------------------------------------------------------
// Vanishing-gap sequence for r = R

struct CounterexampleAnchors {
    std::size_t x0 = 0;
    std::size_t x1 = 0;
};

/// Two strip nodes closest to the outer boundary (farthest from the interior),
/// and as far apart from each other as possible. Ties go to the lower index.
inline CounterexampleAnchors counterexample_anchors(const Grid& g) {
    double dmin = std::numeric_limits<double>::infinity();
    for (auto x : g.strip()) dmin = std::min(dmin, g.bdist(x));
    const double tie = 1e-12 * std::max(1.0, dmin);
    std::vector<std::size_t> cand;
    for (auto x : g.strip()) {
        if (g.bdist(x) <= dmin + tie) cand.push_back(x);
    }
    CounterexampleAnchors a{cand.front(), cand.front()};
    double far = -1.0;
    for (auto x : cand) {
        const double d = g.distance(a.x0, x);
        if (d > far + tie) {
            far = d;
            a.x1 = x;
        }
    }
    return a;
}

/// Normalised (mu-mean 0, unit mu-L2) difference of indicator bumps of radius 1/n
/// around the two anchors.
inline StripField counterexample_field(const NonlocalOperator& op, int n) {
    const Grid& g = op.grid();
    require(n >= 1, ErrorCode::InvalidArgument, "n must be positive");
    const double radius = 1.0 / static_cast<double>(n);
    require(radius >= 0.5 * g.h(), ErrorCode::EmptyBump, "bump radius 1/n is below h/2");
    const CounterexampleAnchors a = counterexample_anchors(g);
    require(a.x0 != a.x1, ErrorCode::TooFewStripNodes, "need two distinct anchor nodes");

    Eigen::VectorXd f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.n_strip()));
    const double slack = 1e-12 * radius;
    for (std::size_t k = 0; k < g.n_strip(); ++k) {
        const std::size_t x = g.strip()[k];
        if (g.distance(x, a.x0) <= radius + slack) f[static_cast<Eigen::Index>(k)] += 1.0;
        if (g.distance(x, a.x1) <= radius + slack) f[static_cast<Eigen::Index>(k)] -= 1.0;
    }
    f.array() -= mu_mean(g, StripField(f));
    double s = 0.0;
    for (std::size_t k = 0; k < g.n_strip(); ++k) s += g.mu(g.strip()[k]) * f[static_cast<Eigen::Index>(k)] * f[static_cast<Eigen::Index>(k)];
    require(s > 0.0, ErrorCode::ConstantField, "bumps cancel; choose a larger n");
    return StripField(f / std::sqrt(s));
}

/// (n, quotient) for each n; the grid must have r equal to the kernel radius.
inline std::vector<std::pair<int, double>> counterexample_sequence(const NonlocalOperator& op,
                                                                   const std::vector<int>& n_list) {
    const Grid& g = op.grid();
    require(op.spec().is_smooth(), ErrorCode::InvalidArgument, "counterexample needs a compactly supported kernel");
    require(std::abs(g.r() - op.spec().radius) <= 1e-12 * op.spec().radius, ErrorCode::InvalidArgument,
            "counterexample needs r = R");
    std::vector<std::pair<int, double>> out;
    out.reserve(n_list.size());
    for (int n : n_list) out.emplace_back(n, rayleigh_quotient(op, counterexample_field(op, n), 2.0));
    return out;
}

// ---------------------------------------------------------------------------
// Decay fits

enum class DecayModel { Exponential, Polynomial };

inline const char* to_string(DecayModel m) { return m == DecayModel::Exponential ? "exponential" : "polynomial"; }

struct DecayFit {
    DecayModel model = DecayModel::Exponential;
    double rate = 0.0;
    double t_lo = 0.0;
    double t_hi = 0.0;
    double r2 = 0.0;
};

/// Least-squares slope of -log y against t (Exponential) or log t (Polynomial)
/// over samples with t in [t_lo, t_hi].
inline DecayFit fit_decay(std::span<const double> t, std::span<const double> y, DecayModel model, double t_lo,
                          double t_hi) {
    require(t.size() == y.size(), ErrorCode::InvalidArgument, "t and y lengths differ");
    require(t_lo < t_hi, ErrorCode::WindowTooSmall, "window needs t_lo < t_hi");
    const double slack = 1e-12 * std::max(1.0, std::abs(t_hi));
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] < t_lo - slack || t[i] > t_hi + slack) continue;
        require(y[i] > 0.0 && std::isfinite(y[i]), ErrorCode::NonPositiveData, "decay data must be positive");
        if (model == DecayModel::Polynomial) {
            require(t[i] > 0.0, ErrorCode::NonPositiveData, "polynomial fit needs t > 0");
        }
        xs.push_back(model == DecayModel::Exponential ? t[i] : std::log(t[i]));
        ys.push_back(-std::log(y[i]));
    }
    require(xs.size() >= 10, ErrorCode::WindowTooSmall,
            "window holds " + std::to_string(xs.size()) + " samples, need at least 10");

    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    require(sxx > 0.0, ErrorCode::WindowTooSmall, "window samples share one abscissa");
    const double slope = sxy / sxx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double e = ys[i] - (my + slope * (xs[i] - mx));
        ss_res += e * e;
    }
    const double r2 = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
    return {model, slope, t_lo, t_hi, r2};
}

enum class DiagColumn { Mass, D1, D2, Dp, Dq, Dinf, Energy };

inline double column_value(const DiagRow& row, DiagColumn c) {
    switch (c) {
        case DiagColumn::Mass: return row.mass;
        case DiagColumn::D1: return row.d1;
        case DiagColumn::D2: return row.d2;
        case DiagColumn::Dp: return row.dp;
        case DiagColumn::Dq: return row.dq;
        case DiagColumn::Dinf: return row.dinf;
        case DiagColumn::Energy: return row.energy;
    }
    return 0.0;
}

/// Fit on column^power, e.g. power 2 on D2 for the squared L2 deviation.
inline DecayFit fit_decay(const Trajectory& traj, DiagColumn column, DecayModel model, double t_lo, double t_hi,
                          double power = 1.0) {
    std::vector<double> y;
    y.reserve(traj.diag.size());
    for (const auto& row : traj.diag) y.push_back(std::pow(column_value(row, column), power));
    return fit_decay(traj.times, y, model, t_lo, t_hi);
}

// ---------------------------------------------------------------------------
// Sign check of the monotonicity products

struct MonotonicityReport {
    bool pass = true;
    double min_first = 0.0;   // min of (a-b)(|a|^{q-2}a - |b|^{q-2}b)
    double min_second = 0.0;  // min of |a-b|^{p-2}(a-b)(|a|^{q-2}a - |b|^{q-2}b)
};

inline MonotonicityReport monotonicity_spot_check(double p, double q, int samples, std::uint64_t seed = 0) {
    require(p >= 1.0 && q >= 1.0, ErrorCode::InvalidArgument, "p and q must be >= 1");
    require(samples >= 0, ErrorCode::InvalidArgument, "samples must be nonnegative");
    auto signed_pow = [](double v, double e) { return v == 0.0 ? 0.0 : std::copysign(std::pow(std::abs(v), e), v); };
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-4.0, 4.0);
    MonotonicityReport rep;
    rep.min_first = std::numeric_limits<double>::infinity();
    rep.min_second = std::numeric_limits<double>::infinity();
    for (int i = 0; i < samples; ++i) {
        const double a = unif(rng);
        const double b = (i % 16 == 0) ? a : unif(rng);
        const double fq = signed_pow(a, q - 1.0) - signed_pow(b, q - 1.0);
        const double first = (a - b) * fq;
        const double second = signed_pow(a - b, p - 1.0) * fq;
        rep.min_first = std::min(rep.min_first, first);
        rep.min_second = std::min(rep.min_second, second);
    }
    if (samples == 0) rep.min_first = rep.min_second = 0.0;
    rep.pass = rep.min_first >= -1e-12 && rep.min_second >= -1e-12;
    return rep;
}

}  // namespace ndbc
