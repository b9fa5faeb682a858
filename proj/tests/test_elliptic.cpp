#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <Eigen/SVD>

#include "ndbc/elliptic.hpp"
#include "ndbc/fixtures.hpp"

using namespace ndbc;

namespace {

std::shared_ptr<const Grid> unit_grid(double h, double r) {
    return std::make_shared<const Grid>(build_grid(DomainBox::interval(0.0, 1.0), h, r));
}

Eigen::VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::VectorXd v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

// Bisection root of f on [a, b], f(a) and f(b) of opposite sign.
template <class F>
double bisect(F f, double a, double b) {
    double fa = f(a);
    for (int i = 0; i < 200; ++i) {
        const double m = 0.5 * (a + b);
        const double fm = f(m);
        if ((fm > 0) == (fa > 0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    return 0.5 * (a + b);
}

struct Case {
    NonlocalOperator op;
    const char* name;
};

std::vector<Case> kernel_cases() {
    auto g = unit_grid(1.0 / 32, 0.125);
    std::vector<Case> out;
    out.push_back({assemble(g, KernelSpec::tent(0.25, 1), EdgeMode::ExcludeStripStrip), "tent"});
    out.push_back({assemble(g, KernelSpec::bump(0.25, 1), EdgeMode::ExcludeStripStrip), "bump"});
    out.push_back({assemble(g, KernelSpec::singular(0.5, 2.0, 1), EdgeMode::ExcludeStripStrip), "singular"});
    return out;
}

}  // namespace

TEST(Elliptic, Toy3Extensions) {
    const NonlocalOperator op = toy3_operator();
    const FullField u = extend_linear(op, StripField(Eigen::Vector2d(0, 1)));
    EXPECT_DOUBLE_EQ(u[0], 0.5);
    EXPECT_EQ(u[1], 0.0);
    EXPECT_EQ(u[2], 1.0);

    const NonlocalOperator asym = toy3_operator(EdgeMode::ExcludeStripStrip, 2.0, 1.0);
    const StripField g(Eigen::Vector2d(1, 0));
    EXPECT_NEAR(extend_linear(asym, g)[0], 2.0 / 3.0, 1e-14);
    EXPECT_NEAR(extend_plaplace(asym, g, 2.0).first[0], 2.0 / 3.0, 1e-12);

    const double root = bisect([](double v) { return 2 * std::pow(1 - v, 3) - v * v * v; }, 0.0, 1.0);
    EXPECT_NEAR(root, 1.0 / (1.0 + std::cbrt(0.5)), 1e-14);
    EXPECT_NEAR(root, 0.5575067, 1e-7);
    const auto [u4, rep] = extend_plaplace(asym, g, 4.0);
    EXPECT_NEAR(u4[0], root, 1e-10);
    EXPECT_TRUE(rep.converged);
    EXPECT_LE(rep.grad_norm, 1e-12 * 2.0);
    EXPECT_EQ(u4[1], 1.0);
    EXPECT_EQ(u4[2], 0.0);
}

TEST(Elliptic, Toy3EnergyGradientResidual) {
    const NonlocalOperator op = toy3_operator();
    const FullField u(Eigen::Vector3d(0, 1, -1));
    EXPECT_DOUBLE_EQ(energy(op, u, 2.0), 1.0);
    const FullField grad = energy_gradient(op, u, 2.0);
    EXPECT_DOUBLE_EQ(grad[0], 0.0);
    EXPECT_DOUBLE_EQ(grad[1], 1.0);
    EXPECT_DOUBLE_EQ(grad[2], -1.0);
    EXPECT_EQ(interior_residual(op, u, 2.0), 0.0);
}

TEST(Elliptic, ConstantsAreFixed) {
    for (const auto& c : kernel_cases()) {
        const Grid& g = c.op.grid();
        const StripField s(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(g.n_strip()), -2.5));
        const FullField lin = extend_linear(c.op, s);
        EXPECT_LE((lin.values.array() + 2.5).abs().maxCoeff(), 1e-12) << c.name;
        for (double p : {1.5, 3.0}) {
            const auto [u, rep] = extend_plaplace(c.op, s, p);
            EXPECT_LE((u.values.array() + 2.5).abs().maxCoeff(), 1e-12) << c.name;
            EXPECT_LE(rep.energy, 1e-20);
        }
        const FullField k(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(g.size()), 4.0));
        for (double p : {1.5, 2.0, 4.0}) {
            EXPECT_EQ(energy(c.op, k, p), 0.0);
            EXPECT_EQ(energy_gradient(c.op, k, p).values.cwiseAbs().maxCoeff(), 0.0);
            EXPECT_EQ(interior_residual(c.op, k, p), 0.0);
        }
    }
}

TEST(Elliptic, LinearDataReproducedWhenStripWidthEqualsRadius) {
    auto g = unit_grid(1.0 / 32, 0.25);
    const NonlocalOperator op = assemble(g, KernelSpec::tent(0.25, 1), EdgeMode::ExcludeStripStrip);
    Eigen::VectorXd s(static_cast<Eigen::Index>(g->n_strip()));
    for (std::size_t k = 0; k < g->n_strip(); ++k) s[static_cast<Eigen::Index>(k)] = g->node(g->strip()[k])[0];
    const FullField u = extend_linear(op, StripField(s));
    for (std::size_t x : g->interior()) {
        EXPECT_NEAR(u[static_cast<Eigen::Index>(x)], g->node(x)[0], 1e-10);
        // brute-force residual of the identity field straight from the kernel
        double acc = 0.0;
        for (std::size_t y = 0; y < g->size(); ++y) {
            if (y == x) continue;
            const double z[] = {g->node(x)[0] - g->node(y)[0]};
            acc += eval_kernel(op.spec(), z) * g->mu(y) * (g->node(y)[0] - g->node(x)[0]);
        }
        EXPECT_NEAR(acc, 0.0, 1e-12);
    }
}

TEST(Elliptic, SingularInteriorRejected) {
    // interior node 0 coupled to nothing
    auto grid = std::make_shared<const Grid>(
        Grid::from_nodes(DomainBox::interval(0.0, 3.0), 1.0, 0.5, {{1.5, 0.0}, {0.5, 0.0}, {2.5, 0.0}}));
    const NonlocalOperator op =
        NonlocalOperator::from_weights(grid, KernelSpec::tent(1.0, 1), EdgeMode::ExcludeStripStrip, {{1, 2, 1.0}, {2, 1, 1.0}});
    try {
        extend_linear(op, StripField(Eigen::Vector2d(0, 1)));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SingularSystem);
    }
    EXPECT_THROW(extend_plaplace(toy3_operator(), StripField(Eigen::Vector2d(0, 1)), 1.0), Error);
}

TEST(Elliptic, NoConvergenceCarriesBestIterate) {
    auto g = unit_grid(1.0 / 32, 0.125);
    const NonlocalOperator op = assemble(g, KernelSpec::tent(0.25, 1), EdgeMode::ExcludeStripStrip);
    std::mt19937_64 rng(3);
    const StripField s(random_vector(rng, static_cast<Eigen::Index>(g->n_strip())));
    try {
        extend_plaplace(op, s, 4.0, 1e-14, 1);
        FAIL();
    } catch (const NoConvergenceError& e) {
        EXPECT_EQ(e.code(), ErrorCode::NoConvergence);
        EXPECT_EQ(e.best_iterate().size(), static_cast<Eigen::Index>(g->size()));
    }
}

TEST(Elliptic, MaximumPrincipleOrderAndHomogeneity) {
    std::mt19937_64 rng(11);
    for (const auto& c : kernel_cases()) {
        const Grid& g = c.op.grid();
        const auto ns = static_cast<Eigen::Index>(g.n_strip());
        for (double p : {1.5, 2.0, 3.0, 4.0}) {
            for (int trial = 0; trial < 3; ++trial) {
                const Eigen::VectorXd a = random_vector(rng, ns);
                const Eigen::VectorXd bump = random_vector(rng, ns, 0.0, 1.0);
                const FullField ua = extend_plaplace(c.op, StripField(a), p).first;
                for (std::size_t x : g.interior()) {
                    EXPECT_GE(ua[static_cast<Eigen::Index>(x)], a.minCoeff() - 1e-9) << c.name << " p=" << p;
                    EXPECT_LE(ua[static_cast<Eigen::Index>(x)], a.maxCoeff() + 1e-9) << c.name << " p=" << p;
                }
                if (p == 2.0 || p == 3.0) {
                    const FullField ub = extend_plaplace(c.op, StripField(a + bump), p).first;
                    EXPECT_GE((ub.values - ua.values).minCoeff(), -1e-9) << c.name;
                }
                const double scale = -3.0;
                const FullField uc = extend_plaplace(c.op, StripField(scale * a), p).first;
                EXPECT_LE((uc.values - scale * ua.values).cwiseAbs().maxCoeff(), 1e-9) << c.name << " p=" << p;
            }
        }
    }
}

TEST(Elliptic, LinearAndVariationalAgree) {
    std::mt19937_64 rng(5);
    for (const auto& c : kernel_cases()) {
        const auto ns = static_cast<Eigen::Index>(c.op.grid().n_strip());
        for (int trial = 0; trial < 5; ++trial) {
            const StripField s(random_vector(rng, ns));
            const FullField a = extend_linear(c.op, s);
            const FullField b = extend_plaplace(c.op, s, 2.0).first;
            EXPECT_LE((a.values - b.values).cwiseAbs().maxCoeff(), 1e-8) << c.name;
            EXPECT_LE(interior_residual(c.op, a, 2.0), 1e-10 * (1 + s.values.cwiseAbs().maxCoeff()));
        }
    }
}

TEST(Elliptic, ExtensionBoundIsStable) {
    std::mt19937_64 rng(17);
    for (const auto& c : kernel_cases()) {
        const Grid& g = c.op.grid();
        const LinearExtension ext(c.op);
        const auto ns = static_cast<Eigen::Index>(g.n_strip());
        const auto ni = static_cast<Eigen::Index>(g.n_interior());
        // M measured once: mu-weighted operator norm of the extension matrix
        Eigen::MatrixXd e(ni, ns);
        for (Eigen::Index k = 0; k < ns; ++k) {
            e.col(k) = ext.interior_values(Eigen::VectorXd::Unit(ns, k)) *
                       (1.0 / std::sqrt(g.mu(g.strip()[static_cast<std::size_t>(k)])));
        }
        for (Eigen::Index k = 0; k < ni; ++k) e.row(k) *= std::sqrt(g.mu(g.interior()[static_cast<std::size_t>(k)]));
        const double m_bound = Eigen::JacobiSVD<Eigen::MatrixXd>(e).singularValues()[0];
        ASSERT_TRUE(std::isfinite(m_bound));

        auto norm = [&](const Eigen::VectorXd& v, const std::vector<std::size_t>& nodes) {
            double s = 0.0;
            for (std::size_t k = 0; k < nodes.size(); ++k) s += g.mu(nodes[k]) * v[static_cast<Eigen::Index>(k)] * v[static_cast<Eigen::Index>(k)];
            return std::sqrt(s);
        };
        double first_half = 0.0, second_half = 0.0;
        for (int trial = 0; trial < 100; ++trial) {
            const Eigen::VectorXd s = random_vector(rng, ns);
            const double ratio = norm(ext.interior_values(s), g.interior()) / norm(s, g.strip());
            EXPECT_LE(ratio, m_bound * (1 + 1e-9)) << c.name;
            double& slot = trial < 50 ? first_half : second_half;
            slot = std::max(slot, ratio);
        }
        EXPECT_LE(second_half, 1.5 * first_half) << c.name;
        EXPECT_LE(first_half, 1.5 * second_half) << c.name;
    }
}

TEST(Elliptic, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(23);
    for (const auto& c : kernel_cases()) {
        const auto n = static_cast<Eigen::Index>(c.op.grid().size());
        for (double p : {1.5, 2.0, 3.0, 4.0}) {
            for (int trial = 0; trial < 5; ++trial) {
                const Eigen::VectorXd u = random_vector(rng, n);
                const FullField grad = energy_gradient(c.op, FullField(u), p);
                const double step = 1e-6 * (1.0 + u.cwiseAbs().maxCoeff());
                Eigen::VectorXd fd(n);
                for (Eigen::Index i = 0; i < n; ++i) {
                    Eigen::VectorXd up = u, dn = u;
                    up[i] += step;
                    dn[i] -= step;
                    fd[i] = (energy(c.op, FullField(up), p) - energy(c.op, FullField(dn), p)) / (2 * step);
                }
                const double rel = (fd - grad.values).norm() / grad.values.norm();
                EXPECT_LE(rel, 1e-6) << c.name << " p=" << p;
            }
        }
    }
}
