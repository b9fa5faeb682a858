#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "ndbc/fixtures.hpp"
#include "ndbc/kernel.hpp"

using namespace ndbc;

namespace {

// Composite Simpson on [a, b] with n (even) panels.
template <class F>
double simpson(F f, double a, double b, int n) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0;
}

std::shared_ptr<const Grid> grid1d(double h, double r) {
    return std::make_shared<const Grid>(build_grid(DomainBox::interval(0.0, 1.0), h, r));
}

}  // namespace

TEST(Kernel, PointValues) {
    const KernelSpec tent = KernelSpec::tent(0.5, 1);
    const double zero[] = {0.0};
    const double far[] = {0.6};
    EXPECT_DOUBLE_EQ(eval_kernel(tent, zero), 2.0);
    EXPECT_DOUBLE_EQ(eval_kernel(tent, far), 0.0);

    const KernelSpec sing = KernelSpec::singular(0.5, 2.0, 1);
    const double half[] = {0.5};
    EXPECT_DOUBLE_EQ(eval_kernel(sing, half), 4.0);
    try {
        eval_kernel(sing, zero);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SingularAtOrigin);
    }
}

TEST(Kernel, NormalizationConstants) {
    EXPECT_DOUBLE_EQ(normalization(KernelFamily::Tent, 1.0, 1), 1.0);
    EXPECT_DOUBLE_EQ(normalization(KernelFamily::Tent, 2.0, 1), 0.25);
    EXPECT_DOUBLE_EQ(normalization(KernelFamily::Singular, 1.0, 2), 1.0);

    // Oracle: radial quadrature of the unnormalised profile, inverted.
    const double bump2d = simpson([](double r) { return (1 - r * r) * (1 - r * r) * 2 * std::numbers::pi * r; }, 0, 1, 2000);
    EXPECT_NEAR(normalization(KernelFamily::Bump, 1.0, 2), 1.0 / bump2d, 1e-12);
    EXPECT_NEAR(normalization(KernelFamily::Bump, 1.0, 2), 0.954930, 1e-6);

    for (double R : {0.3, 1.0, 2.5}) {
        const double t1 = simpson([R](double z) { return R - std::abs(z); }, -R, R, 2000);
        const double t2 = simpson([R](double r) { return (R - r) * 2 * std::numbers::pi * r; }, 0, R, 2000);
        const double b1 = simpson([R](double z) { return std::pow(R * R - z * z, 2); }, -R, R, 2000);
        EXPECT_NEAR(normalization(KernelFamily::Tent, R, 1) * t1, 1.0, 1e-10);
        EXPECT_NEAR(normalization(KernelFamily::Tent, R, 2) * t2, 1.0, 1e-10);
        EXPECT_NEAR(normalization(KernelFamily::Bump, R, 1) * b1, 1.0, 1e-10);
    }
}

TEST(Kernel, Toy3Assembly) {
    const NonlocalOperator op = toy3_operator();
    ASSERT_EQ(op.w_is().rows(), 1);
    ASSERT_EQ(op.w_is().cols(), 2);
    EXPECT_DOUBLE_EQ(op.w_is().coeff(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(op.w_is().coeff(0, 1), 1.0);
    EXPECT_DOUBLE_EQ(op.d_full()[0], 2.0);
    EXPECT_DOUBLE_EQ(op.d_omega_s()[0], 1.0);
    EXPECT_DOUBLE_EQ(op.d_omega_s()[1], 1.0);
    // W_SS is assembled but only the Full mode counts it.
    EXPECT_DOUBLE_EQ(op.w_ss().coeff(0, 1), 1.0);
    EXPECT_DOUBLE_EQ(op.d_full()[1], op.d_omega_s()[0]);
    EXPECT_DOUBLE_EQ(op.d_full()[2], op.d_omega_s()[1]);
    const NonlocalOperator full = op.with_edge_mode(EdgeMode::Full);
    EXPECT_DOUBLE_EQ(full.d_full()[1], 2.0);
}

TEST(Kernel, TentSupportCouplesOnlyNeighbours) {
    auto g = grid1d(0.25, 0.25);
    const NonlocalOperator op = assemble(g, KernelSpec::tent(0.3, 1), EdgeMode::Full);
    for (std::size_t i = 0; i < g->size(); ++i) {
        for (std::size_t j = 0; j < g->size(); ++j) {
            const double w = op.weights().coeff(static_cast<int>(i), static_cast<int>(j));
            if (g->distance(i, j) >= 0.3 || i == j) EXPECT_EQ(w, 0.0);
            else EXPECT_GT(w, 0.0);
        }
    }
    EXPECT_THROW(assemble(g, KernelSpec::tent(0.2, 1), EdgeMode::Full), Error);
}

TEST(Kernel, GraphLaplacianToy3) {
    const NonlocalOperator op = toy3_operator();
    const FullField a = apply_graph_laplacian(op, FullField(Eigen::Vector3d(0, 1, -1)));
    EXPECT_DOUBLE_EQ(a[0], 0.0);
    EXPECT_DOUBLE_EQ(a[1], 1.0);
    EXPECT_DOUBLE_EQ(a[2], -1.0);
    const FullField b = apply_graph_laplacian(op, FullField(Eigen::Vector3d(0, 1, 1)));
    EXPECT_DOUBLE_EQ(b[0], -2.0);
    EXPECT_DOUBLE_EQ(b[1], 1.0);
    EXPECT_DOUBLE_EQ(b[2], 1.0);
}

TEST(Kernel, ReciprocityQuadraticFormAndConstants) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd;
    const std::vector<KernelSpec> specs{KernelSpec::tent(0.25, 1), KernelSpec::bump(0.25, 1),
                                        KernelSpec::singular(0.5, 2.0, 1)};
    const std::vector<KernelSpec> specs2d{KernelSpec::tent(0.3, 2), KernelSpec::bump(0.3, 2),
                                          KernelSpec::singular(0.3, 1.5, 2)};
    auto g1 = grid1d(1.0 / 32, 0.125);
    auto g2 = std::make_shared<const Grid>(build_grid(DomainBox::rectangle({0, 0}, {1, 1}), 0.1, 0.15));
    for (int dim : {1, 2}) {
        auto g = dim == 1 ? g1 : g2;
        for (const auto& spec : dim == 1 ? specs : specs2d) {
            for (EdgeMode mode : {EdgeMode::ExcludeStripStrip, EdgeMode::Full}) {
                const NonlocalOperator op = assemble(g, spec, mode);
                const SparseMatrix& w = op.weights();
                for (Eigen::Index x = 0; x < w.outerSize(); ++x) {
                    for (SparseMatrix::InnerIterator it(w, x); it; ++it) {
                        const double lhs = it.value() * g->mu(static_cast<std::size_t>(x));
                        const double rhs = w.coeff(it.col(), x) * g->mu(static_cast<std::size_t>(it.col()));
                        EXPECT_NEAR(lhs, rhs, 1e-15 * std::abs(lhs));
                    }
                }
                const Eigen::Index n = static_cast<Eigen::Index>(g->size());
                const FullField c(Eigen::VectorXd::Constant(n, 3.7));
                EXPECT_LE(apply_graph_laplacian(op, c).values.cwiseAbs().maxCoeff(), 1e-10);

                for (int trial = 0; trial < 3; ++trial) {
                    Eigen::VectorXd u(n);
                    for (auto& v : u) v = nd(rng);
                    const double form = u.dot(apply_graph_laplacian(op, FullField(u)).values);
                    double ref = 0.0;
                    for (Eigen::Index x = 0; x < n; ++x) {
                        for (Eigen::Index y = 0; y < n; ++y) {
                            if (!op.active(static_cast<std::size_t>(x), static_cast<std::size_t>(y))) continue;
                            const double d = u[y] - u[x];
                            ref += g->mu(static_cast<std::size_t>(x)) * w.coeff(x, y) * d * d;
                        }
                    }
                    EXPECT_NEAR(form, 0.5 * ref, 1e-12 * std::abs(ref));
                }
            }
        }
    }
}

TEST(Kernel, DiscreteMassNearOneAwayFromBoundary) {
    for (int dim : {1, 2}) {
        const double R = 0.4;
        const double h = dim == 1 ? 1.0 / 80 : 1.0 / 40;  // h <= R/8 (2D: R/16)
        auto g = std::make_shared<const Grid>(dim == 1 ? build_grid(DomainBox::interval(0, 2), h, 0.45)
                                                       : build_grid(DomainBox::rectangle({0, 0}, {2, 2}), h, 0.45));
        for (auto spec : {KernelSpec::tent(R, dim), KernelSpec::bump(R, dim)}) {
            const NonlocalOperator op = assemble(g, spec, EdgeMode::Full);
            for (std::size_t x : g->interior()) {
                EXPECT_NEAR(op.d_all()[static_cast<Eigen::Index>(x)], 1.0, 0.05);
            }
        }
    }
}
