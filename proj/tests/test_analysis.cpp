#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "ndbc/analysis.hpp"
#include "ndbc/fixtures.hpp"

using namespace ndbc;

namespace {

std::shared_ptr<const Grid> unit_grid(double h, double r) {
    return std::make_shared<const Grid>(build_grid(DomainBox::interval(0.0, 1.0), h, r));
}

Eigen::VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::VectorXd v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

StripField mean_free(const Grid& g, Eigen::VectorXd v) {
    v.array() -= mu_mean(g, StripField(v));
    return StripField(std::move(v));
}

std::vector<std::pair<int, double>> read_golden(const std::string& name) {
    std::ifstream in(std::string(NDBC_GOLDEN_DIR) + "/" + name);
    std::string line;
    std::getline(in, line);
    std::vector<std::pair<int, double>> out;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string a, b;
        std::getline(ss, a, ',');
        std::getline(ss, b);
        out.emplace_back(std::stoi(a), std::stod(b));
    }
    return out;
}

}  // namespace

TEST(Analysis, MassAndDistances) {
    const NonlocalOperator op = toy3_operator();
    const Grid& g = op.grid();
    const StripField a(Eigen::Vector2d(1, -1));
    EXPECT_EQ(mass(g, a), 0.0);
    EXPECT_DOUBLE_EQ(lq_distance_to_mean(g, a, 2.0), std::sqrt(2.0));
    const StripField b(Eigen::Vector2d(1, 0));
    EXPECT_EQ(mass(g, b), 1.0);
    EXPECT_DOUBLE_EQ(lq_distance_to_mean(g, b, 1.0), 1.0);
    const StripField c(Eigen::Vector2d(4, 4));
    EXPECT_EQ(mass(g, c), 8.0);
    for (double q : {1.0, 2.0, 3.5, std::numeric_limits<double>::infinity()}) EXPECT_EQ(lq_distance_to_mean(g, c, q), 0.0);
    EXPECT_DOUBLE_EQ(lq_norm(g, a, 2.0), std::sqrt(2.0));
    EXPECT_THROW(lq_distance_to_mean(g, a, 0.5), Error);
}

TEST(Analysis, Toy3Schur) {
    const NonlocalOperator op = toy3_operator();
    const Eigen::MatrixXd s = schur_complement(op);
    ASSERT_EQ(s.rows(), 2);
    EXPECT_NEAR(s(0, 0), 0.5, 1e-15);
    EXPECT_NEAR(s(0, 1), -0.5, 1e-15);
    EXPECT_NEAR(s(1, 0), -0.5, 1e-15);
    EXPECT_NEAR(s(1, 1), 0.5, 1e-15);
    const Eigen::Vector2d flow = -(s * Eigen::Vector2d(1, -1));
    EXPECT_NEAR(flow[0], -1.0, 1e-15);
    EXPECT_NEAR(flow[1], 1.0, 1e-15);
}

TEST(Analysis, SchurPathMatchesRhs) {
    std::mt19937_64 rng(53);
    auto g1 = unit_grid(1.0 / 32, 0.125);
    auto g2 = std::make_shared<const Grid>(build_grid(DomainBox::rectangle({0, 0}, {1, 1}), 0.1, 0.15));
    for (auto g : {g1, g2}) {
        for (Variant v : {Variant::LinearP, Variant::LinearPStar}) {
            const ProblemSpec spec = ProblemSpec::make(v);
            const NonlocalOperator op = assemble(g, KernelSpec::bump(0.3, g->dim()), spec.edge_mode());
            const Eigen::MatrixXd s = schur_complement(op);
            EXPECT_LE((s - s.transpose()).cwiseAbs().maxCoeff(), 1e-14 * s.cwiseAbs().maxCoeff());
            EXPECT_LE((s * Eigen::VectorXd::Ones(s.rows())).cwiseAbs().maxCoeff(), 1e-12 * s.cwiseAbs().maxCoeff());
            EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s).eigenvalues().minCoeff(), -1e-12);
            StripDynamics dyn(op, spec);
            for (int trial = 0; trial < 5; ++trial) {
                const Eigen::VectorXd u = random_vector(rng, s.rows());
                Eigen::VectorXd schur = -(s * u);
                for (std::size_t k = 0; k < g->n_strip(); ++k) schur[static_cast<Eigen::Index>(k)] /= g->mu(g->strip()[k]);
                const Eigen::VectorXd direct = dyn.rhs(StripField(u)).values;
                EXPECT_LE((schur - direct).norm(), 1e-12 * direct.norm());
            }
        }
    }
}

TEST(Analysis, GapOnFixtures) {
    const GapResult toy = spectral_gap_beta(toy3_operator());
    EXPECT_NEAR(toy.beta, 1.0, 1e-12);
    EXPECT_EQ(toy.method, GapMethod::SchurEig);
    EXPECT_NEAR(toy.mode[0], 1.0 / std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(toy.mode[1], -1.0 / std::sqrt(2.0), 1e-12);

    // Two strip nodes joined by one edge of weight w: the difference a - b obeys
    // d/dt (a - b) = -2w (a - b), so ||v||^2 decays at 4w = 2 beta.
    for (double w : {0.5, 1.0, 3.0}) {
        const NonlocalOperator pair = pair_operator(w);
        EXPECT_NEAR(spectral_gap_beta(pair).beta, 2.0 * w, 1e-12);
        const StripField u0(Eigen::Vector2d(1, -1));
        const Trajectory t = evolve(pair, ProblemSpec::make(Variant::LinearPStar), u0, 0.5, 1e-4, Integrator::Explicit);
        const DecayFit fit = fit_decay(t, DiagColumn::D2, DecayModel::Exponential, 0.0, 0.5, 2.0);
        EXPECT_NEAR(fit.rate, 4.0 * w, 4.0 * w * 1e-3);
    }
    EXPECT_THROW(spectral_gap_beta(NonlocalOperator::from_weights(
                     std::make_shared<const Grid>(Grid::from_nodes(DomainBox::interval(0, 3), 1.0, 0.5,
                                                                   {{1.5, 0.0}, {0.5, 0.0}}, GridOptions{false})),
                     KernelSpec::tent(1.0, 1), EdgeMode::ExcludeStripStrip, {{0, 1, 1.0}, {1, 0, 1.0}})),
                 Error);
}

TEST(Analysis, GapPositiveWhenStripThinnerThanKernel) {
    std::vector<std::shared_ptr<const Grid>> grids{
        unit_grid(1.0 / 32, 0.125), unit_grid(1.0 / 64, 0.125),
        std::make_shared<const Grid>(build_grid(DomainBox::interval(-1, 1), 1.0 / 20, 0.1)),
        std::make_shared<const Grid>(build_grid(DomainBox::rectangle({0, 0}, {1, 1}), 1.0 / 16, 0.15)),
        std::make_shared<const Grid>(build_grid(DomainBox::rectangle({0, 0}, {2, 1}), 0.1, 0.2))};
    for (const auto& g : grids) {
        const double R = 2.0 * g->r();
        for (auto spec : {KernelSpec::tent(R, g->dim()), KernelSpec::bump(R, g->dim())}) {
            const NonlocalOperator op = assemble(g, spec, EdgeMode::ExcludeStripStrip);
            ASSERT_GT(op.d_omega_s().minCoeff(), 0.0);
            const GapResult r = spectral_gap_beta(op);
            EXPECT_GT(r.beta, 1e-8);

            // mode invariants
            EXPECT_LE(std::abs(mu_mean(*g, r.mode)), 1e-12);
            EXPECT_NEAR(lq_norm(*g, r.mode, 2.0), 1.0, 1e-12);
            for (double c : {1.0, -1.0, 2.0}) {
                EXPECT_NEAR(rayleigh_quotient(op, StripField(c * r.mode.values), 2.0), r.beta, 1e-8);
            }
        }
    }
}

TEST(Analysis, SchurAndVariationalAgree) {
    auto g = unit_grid(1.0 / 32, 0.125);
    const NonlocalOperator op = assemble(g, KernelSpec::tent(0.25, 1), EdgeMode::ExcludeStripStrip);
    const GapResult exact = spectral_gap_beta(op);
    const GapResult desc = estimate_beta_p(op, 2.0, 3, 1e-9, 7);
    EXPECT_EQ(desc.method, GapMethod::VariationalDescent);
    EXPECT_NEAR(desc.beta, exact.beta, 1e-6);
    EXPECT_GE(desc.beta, exact.beta - 1e-12);
}

TEST(Analysis, QuotientsOnToy3) {
    const NonlocalOperator op = toy3_operator();
    const StripField g(Eigen::Vector2d(1, -1));
    EXPECT_NEAR(rayleigh_quotient(op, g, 2.0), 1.0, 1e-14);
    EXPECT_NEAR(rayleigh_quotient(op, StripField(Eigen::Vector2d(-7, 7)), 2.0), 1.0, 1e-14);
    EXPECT_NEAR(rayleigh_quotient(op, g, 4.0), 1.0, 1e-12);

    auto code = [&](const StripField& f) {
        try {
            rayleigh_quotient(op, f, 2.0);
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::InvalidArgument;
    };
    EXPECT_EQ(code(StripField(Eigen::Vector2d(1, 0))), ErrorCode::NotMeanZero);
    EXPECT_EQ(code(StripField(Eigen::Vector2d(0, 0))), ErrorCode::ConstantField);
    EXPECT_EQ(code(StripField(Eigen::Vector2d(2, 2))), ErrorCode::ConstantField);

    EXPECT_NEAR(estimate_beta_p(op, 2.0, 4).beta, 1.0, 1e-6);
    EXPECT_LE(estimate_beta_p(op, 4.0, 4).beta, 1.0 + 1e-6);
    EXPECT_THROW(estimate_beta_p(op, 2.0, 0), Error);
}

TEST(Analysis, RestartSeedsAreReproducible) {
    auto a = restart_rng(42, 3);
    auto b = restart_rng(42, 3);
    auto c = restart_rng(42, 4);
    const auto va = a();
    EXPECT_EQ(va, b());
    EXPECT_NE(va, c());
    auto g = unit_grid(1.0 / 32, 0.125);
    const NonlocalOperator op = assemble(g, KernelSpec::tent(0.25, 1), EdgeMode::ExcludeStripStrip);
    const GapResult x = estimate_beta_p(op, 3.0, 2, 1e-8, 9);
    const GapResult y = estimate_beta_p(op, 3.0, 2, 1e-8, 9);
    EXPECT_EQ(x.beta, y.beta);
    EXPECT_EQ(x.mode.values, y.mode.values);
}

TEST(Analysis, CounterexampleMatchesGolden) {
    for (auto [h, file] : {std::pair{1.0 / 128, "counterexample_h128.csv"}, std::pair{1.0 / 64, "counterexample_h64.csv"}}) {
        auto g = unit_grid(h, 0.25);
        const NonlocalOperator op = assemble(g, KernelSpec::tent(0.25, 1), EdgeMode::ExcludeStripStrip);
        const auto golden = read_golden(file);
        ASSERT_EQ(golden.size(), 4u);
        std::vector<int> ns;
        for (auto [n, q] : golden) ns.push_back(n);
        const auto seq = counterexample_sequence(op, ns);
        for (std::size_t i = 0; i < seq.size(); ++i) {
            EXPECT_EQ(seq[i].first, golden[i].first);
            EXPECT_NEAR(seq[i].second, golden[i].second, 1e-9 * golden[i].second);
            if (i) {
                EXPECT_LT(seq[i].second, seq[i - 1].second);
            }
        }
        EXPECT_LE(seq.back().second / seq.front().second, 0.2);
        for (int n : ns) {
            const StripField f = counterexample_field(op, n);
            EXPECT_LE(std::abs(mu_mean(*g, f)), 1e-12);
            EXPECT_NEAR(lq_norm(*g, f, 2.0), 1.0, 1e-12);
        }
    }
}

TEST(Analysis, CounterexampleEdgeCases) {
    auto g = unit_grid(1.0 / 64, 0.25);
    const NonlocalOperator op = assemble(g, KernelSpec::tent(0.25, 1), EdgeMode::ExcludeStripStrip);
    const CounterexampleAnchors a = counterexample_anchors(*g);
    EXPECT_EQ(a.x0, 0u);
    EXPECT_EQ(a.x1, g->size() - 1);
    try {
        counterexample_field(op, 200);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyBump);
    }
    // radius 1 reaches every strip node from both anchors: the bumps cancel
    try {
        counterexample_field(op, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ConstantField);
    }
    // radius 1/2 splits the strip into its two halves: the sequence entry is the plain quotient
    const StripField halves = counterexample_field(op, 2);
    for (std::size_t k = 0; k < g->n_strip(); ++k) {
        EXPECT_NEAR(std::abs(halves[static_cast<Eigen::Index>(k)]), 1.0 / std::sqrt(g->strip_measure()), 1e-12);
    }
    EXPECT_EQ(counterexample_sequence(op, {2}).front().second, rayleigh_quotient(op, halves, 2.0));
    const NonlocalOperator thin = assemble(unit_grid(1.0 / 64, 0.125), KernelSpec::tent(0.25, 1), EdgeMode::ExcludeStripStrip);
    EXPECT_THROW(counterexample_sequence(thin, {4}), Error);
}

TEST(Analysis, FitDecayExactData) {
    std::vector<double> t, y;
    for (int i = 0; i <= 50; ++i) {
        t.push_back(0.1 * i);
        y.push_back(std::exp(-2.0 * t.back()));
    }
    const DecayFit e = fit_decay(t, y, DecayModel::Exponential, 0.0, 5.0);
    EXPECT_NEAR(e.rate, 2.0, 1e-9);
    EXPECT_NEAR(e.r2, 1.0, 1e-12);

    t.clear();
    y.clear();
    for (int i = 0; i <= 99; ++i) {
        t.push_back(1.0 + i);
        y.push_back(1.0 / t.back());
    }
    const DecayFit p = fit_decay(t, y, DecayModel::Polynomial, 1.0, 100.0);
    EXPECT_NEAR(p.rate, 1.0, 1e-9);

    auto code = [](auto&& f) {
        try {
            f();
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::InvalidArgument;
    };
    EXPECT_EQ(code([&] { fit_decay(t, y, DecayModel::Polynomial, 1.0, 5.0); }), ErrorCode::WindowTooSmall);
    std::vector<double> bad = y;
    bad[3] = 0.0;
    EXPECT_EQ(code([&] { fit_decay(t, bad, DecayModel::Polynomial, 1.0, 100.0); }), ErrorCode::NonPositiveData);
}

TEST(Analysis, FitDecayOnToy3Trajectory) {
    const NonlocalOperator op = toy3_operator();
    const Trajectory t = evolve(op, ProblemSpec::make(Variant::LinearP), StripField(Eigen::Vector2d(1, -1)), 1.0, 1e-3,
                                Integrator::Explicit);
    const DecayFit fit = fit_decay(t, DiagColumn::D2, DecayModel::Exponential, 0.0, 1.0, 2.0);
    EXPECT_NEAR(fit.rate, 2.0, 0.04);
    EXPECT_GE(fit.r2, 0.999);
}

TEST(Analysis, ExponentialBoundAlongTrajectories) {
    std::mt19937_64 rng(59);
    auto g = unit_grid(1.0 / 32, 0.125);
    const NonlocalOperator op = assemble(g, KernelSpec::tent(0.25, 1), EdgeMode::ExcludeStripStrip);
    const double beta = spectral_gap_beta(op).beta;
    const double dt = 1e-3;
    for (int run = 0; run < 5; ++run) {
        const StripField u0 = mean_free(*g, random_vector(rng, static_cast<Eigen::Index>(g->n_strip())));
        const Trajectory t = evolve(op, ProblemSpec::make(Variant::LinearP), u0, 2.0, dt, Integrator::Explicit);
        const double d0 = t.diag[0].d2 * t.diag[0].d2;
        for (std::size_t k = 0; k < t.diag.size(); ++k) {
            const double bound = d0 * std::exp(-2.0 * beta * (t.times[k] - 3 * dt)) + 1e-9;
            EXPECT_LE(t.diag[k].d2 * t.diag[k].d2, bound);
        }
    }
}

TEST(Analysis, MonotonicitySigns) {
    for (double p : {1.5, 2.0, 3.0, 4.0}) {
        for (double q : {1.5, 2.0, 3.0, 4.0}) {
            const MonotonicityReport r = monotonicity_spot_check(p, q, 10000, 1);
            EXPECT_TRUE(r.pass) << p << " " << q;
        }
    }
    // a = 2, b = 1, q = 3: (2-1)(4-1) = 3
    const double first = (2.0 - 1.0) * (2.0 * 2.0 - 1.0 * 1.0);
    EXPECT_EQ(first, 3.0);
    EXPECT_THROW(monotonicity_spot_check(0.5, 2.0, 10), Error);
}
