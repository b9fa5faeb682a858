#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ndbc/analysis.hpp"
#include "ndbc/config.hpp"
#include "ndbc/elliptic.hpp"
#include "ndbc/evolution.hpp"
#include "ndbc/fixtures.hpp"
#include "ndbc/geometry.hpp"
#include "ndbc/io.hpp"
#include "ndbc/kernel.hpp"
#include "ndbc/seeding.hpp"
#include "ndbc/svg.hpp"

namespace ndbc {

inline std::string fmt_g(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline KernelSpec kernel_spec(const ExperimentConfig& c) {
    switch (c.kernel) {
        case KernelFamily::Tent: return KernelSpec::tent(c.R, c.dim);
        case KernelFamily::Bump: return KernelSpec::bump(c.R, c.dim);
        case KernelFamily::Singular: return KernelSpec::singular(c.s, c.problem().p, c.dim, c.c_s);
    }
    fail(ErrorCode::ConfigInvalid, "(kernel) unknown family");
}

inline std::shared_ptr<const Grid> build_config_grid(const ExperimentConfig& c) {
    return std::make_shared<const Grid>(build_grid(c.domain(), c.h, c.r, GridOptions{c.allow_empty_interior}));
}

/// Grid, kernel and operator for the configured problem, checked against the variant.
inline NonlocalOperator build_operator(const ExperimentConfig& c) {
    const ProblemSpec spec = c.problem();
    NonlocalOperator op = c.fixture == "toy3" ? toy3_operator(spec.edge_mode())
                                              : assemble(build_config_grid(c), kernel_spec(c), spec.edge_mode());
    spec.check_compatible(op);
    return op;
}

inline bool r_equals_R(const ExperimentConfig& c) {
    return c.fixture.empty() && c.kernel != KernelFamily::Singular && std::abs(c.r - c.R) <= 1e-12 * c.R;
}

// ---------------------------------------------------------------------------
// Initial conditions

namespace detail {

inline double point_distance(const Point& a, const Point& b, int dim) {
    double s = 0.0;
    for (int k = 0; k < dim; ++k) s += (a[static_cast<std::size_t>(k)] - b[static_cast<std::size_t>(k)]) * (a[static_cast<std::size_t>(k)] - b[static_cast<std::size_t>(k)]);
    return std::sqrt(s);
}

inline double default_width(const Grid& g) {
    double side = g.domain().side(0);
    if (g.dim() == 2) side = std::min(side, g.domain().side(1));
    return 0.25 * side;
}

/// c * max(0, 1 - |x - center| / width) on the strip.
inline Eigen::VectorXd tent_profile(const Grid& g, const Point& center, double width, double c) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(g.n_strip()));
    for (std::size_t k = 0; k < g.n_strip(); ++k) {
        const double d = point_distance(g.node(g.strip()[k]), center, g.dim());
        v[static_cast<Eigen::Index>(k)] = c * std::max(0.0, 1.0 - d / width);
    }
    return v;
}

}  // namespace detail

/// Strip initial data for the configured preset. Bump centres default to the
/// strip nodes nearest the outer boundary that lie farthest apart.
inline StripField initial_condition(const ExperimentConfig& c, const NonlocalOperator& op) {
    const Grid& g = op.grid();
    const auto ns = static_cast<Eigen::Index>(g.n_strip());
    const double width = c.initial_width > 0.0 ? c.initial_width : detail::default_width(g);
    switch (c.initial) {
        case InitialPreset::Constant: return StripField(Eigen::VectorXd::Constant(ns, c.initial_c));
        case InitialPreset::Random: {
            auto rng = stream_rng(c.seed, Stream::InitialCondition);
            std::uniform_real_distribution<double> unif(-c.initial_c, c.initial_c);
            Eigen::VectorXd v(ns);
            for (Eigen::Index k = 0; k < ns; ++k) v[k] = unif(rng);
            return StripField(std::move(v));
        }
        case InitialPreset::Eigenmode: {
            const GapSpectrum spec = gap_spectrum(op);
            require(static_cast<std::size_t>(c.initial_k) <= spec.modes.size(), ErrorCode::ConfigInvalid,
                    "(initial_k) only " + std::to_string(spec.modes.size()) + " nonconstant modes exist");
            return StripField(c.initial_c * spec.modes[static_cast<std::size_t>(c.initial_k - 1)].values);
        }
        case InitialPreset::Bump:
        case InitialPreset::TwoBump: {
            std::vector<Point> centers = c.centers;
            if (centers.empty()) {
                const CounterexampleAnchors a = counterexample_anchors(g);
                centers = {g.node(a.x0), g.node(a.x1)};
            }
            Eigen::VectorXd v = detail::tent_profile(g, centers[0], width, c.initial_c);
            if (c.initial == InitialPreset::TwoBump) v -= detail::tent_profile(g, centers[1], width, c.initial_c);
            return StripField(std::move(v));
        }
    }
    fail(ErrorCode::ConfigInvalid, "(initial) unknown preset");
}

// ---------------------------------------------------------------------------
// Evolution run

struct RunResult {
    Trajectory trajectory;
    std::optional<DecayFit> fit;
    std::string summary;
};

inline std::pair<double, double> fit_window(const ExperimentConfig& c, const Trajectory& t) {
    if (c.fit_window) return *c.fit_window;
    return {t.times.front(), t.times.back()};
}

/// Decay curve of the chosen column, log scale when every value is positive.
inline std::string trajectory_svg(const Trajectory& t, DiagColumn column, const std::string& title) {
    static const char* names[] = {"mass", "d1", "d2", "dp", "dq", "dinf", "energy"};
    Series s{names[static_cast<int>(column)], t.times, {}};
    bool positive = true;
    for (const auto& row : t.diag) {
        s.y.push_back(column_value(row, column));
        positive = positive && s.y.back() > 0.0;
    }
    PlotStyle style;
    style.title = title;
    style.y_label = s.label;
    style.log_y = positive;
    return emit_svg({s}, style);
}

/// Builds the problem, evolves it, writes the trajectory CSV and optional SVG.
/// A failed evolution still writes the partial trajectory before rethrowing.
inline RunResult run_experiment(const ExperimentConfig& c) {
    const NonlocalOperator op = build_operator(c);
    const ProblemSpec spec = c.problem();
    const StripField u0 = initial_condition(c, op);

    RunResult res;
    try {
        res.trajectory = evolve(op, spec, u0, c.t_end, c.dt, c.integrator, SolverSettings{c.tol, c.max_iter}, c.q);
    } catch (const EvolveError& e) {
        if (!c.out.empty() && !e.partial().diag.empty()) write_file_atomic(c.out, trajectory_csv(e.partial()));
        throw;
    }
    const Trajectory& t = res.trajectory;
    if (!c.out.empty()) write_file_atomic(c.out, trajectory_csv(t));
    if (!c.svg.empty()) {
        write_file_atomic(c.svg, trajectory_svg(t, DiagColumn::D2, std::string(to_string(spec.variant)) + " d2(t)"));
    }

    double drift = 0.0;
    for (const auto& row : t.diag) drift = std::max(drift, std::abs(row.mass - t.diag.front().mass));
    const DiagRow& last = t.diag.back();
    res.summary = std::string("variant=") + to_string(spec.variant) + " integrator=" + to_string(c.integrator) +
                  " steps=" + std::to_string(t.times.size() - 1) + " t_end=" + fmt_g(t.times.back()) +
                  " mass=" + fmt_g(t.diag.front().mass) + " mass_drift=" + fmt_g(drift) + " d2_final=" +
                  fmt_g(last.d2) + " dinf_final=" + fmt_g(last.dinf);
    if (c.fit_model) {
        const auto [lo, hi] = fit_window(c, t);
        res.fit = fit_decay(t, c.fit_column, *c.fit_model, lo, hi, c.fit_power);
        res.summary += std::string(" fit=") + to_string(res.fit->model) + " rate=" + fmt_g(res.fit->rate) +
                       " r2=" + fmt_g(res.fit->r2);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Validation report

struct CheckLine {
    std::string name;
    std::string status;  // PASS, FAIL, INFO or WARN
    std::string detail;
};

struct ValidationReport {
    std::vector<CheckLine> lines;

    bool passed() const {
        return std::none_of(lines.begin(), lines.end(), [](const CheckLine& l) { return l.status == "FAIL"; });
    }

    std::string text() const {
        std::string out;
        for (const auto& l : lines) out += l.status + " " + l.name + ": " + l.detail + "\n";
        return out;
    }
};

/// The configured problem on a coarser grid (at most about 400 nodes, at
/// least two cells across the strip).
inline ExperimentConfig reduced_config(ExperimentConfig c) {
    if (!c.fixture.empty()) return c;
    auto nodes = [&](double h) {
        double n = 1.0;
        for (int k = 0; k < c.dim; ++k) n *= std::round((c.hi[static_cast<std::size_t>(k)] - c.lo[static_cast<std::size_t>(k)]) / h);
        return n;
    };
    auto tiles = [&](double h) {
        for (int k = 0; k < c.dim; ++k) {
            const double len = c.hi[static_cast<std::size_t>(k)] - c.lo[static_cast<std::size_t>(k)];
            if (std::abs(std::round(len / h) * h - len) > 1e-12 * len) return false;
        }
        return true;
    };
    while (nodes(c.h) > 400.0 && 2.0 * c.h <= 0.5 * c.r && tiles(2.0 * c.h)) c.h *= 2.0;
    return c;
}

namespace detail {

inline double weighted_l2(const Grid& g, const Eigen::VectorXd& v) {
    double s = 0.0;
    for (std::size_t k = 0; k < g.n_strip(); ++k) s += g.mu(g.strip()[k]) * v[static_cast<Eigen::Index>(k)] * v[static_cast<Eigen::Index>(k)];
    return std::sqrt(s);
}

inline CheckLine judged(const std::string& name, bool ok, const std::string& detail) {
    return {name, ok ? "PASS" : "FAIL", detail};
}

}  // namespace detail

/// Cross-checks on the configured problem at reduced size. Failures become
/// report lines; only configuration errors escape.
inline ValidationReport validate(const ExperimentConfig& config) {
    ValidationReport rep;
    const ExperimentConfig c = reduced_config(config);
    const ProblemSpec spec = c.problem();

    std::optional<NonlocalOperator> built;
    try {
        built.emplace(build_operator(c));
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigInvalid) throw;
        rep.lines.push_back({"setup", "FAIL", e.what()});
        return rep;
    }
    const NonlocalOperator& op = *built;
    const Grid& g = op.grid();
    rep.lines.push_back({"size", "INFO",
                         "h=" + fmt_g(g.h()) + " nodes=" + std::to_string(g.size()) + " strip=" + std::to_string(g.n_strip()) +
                             " interior=" + std::to_string(g.n_interior())});

    StripDynamics dyn(op, spec, SolverSettings{c.tol, c.max_iter});
    const double limit = dyn.stability_limit();
    if (c.integrator == Integrator::Explicit && c.dt > limit) {
        rep.lines.push_back({"stability", "WARN",
                             "dt=" + fmt_g(c.dt) + " exceeds the forward Euler advisory limit " + fmt_g(limit)});
    } else {
        rep.lines.push_back({"stability", "PASS", "dt=" + fmt_g(c.dt) + " advisory limit " + fmt_g(limit)});
    }

    // short runs use a step inside the advisory limit
    const double dt = std::min(c.dt, 0.5 * limit);
    const int steps = 20;
    const double window = steps * dt;

    StripField u0;
    try {
        u0 = initial_condition(c, op);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigInvalid) throw;
        rep.lines.push_back({"initial", "FAIL", e.what()});
        return rep;
    }

    try {
        const Trajectory t = evolve(op, spec, u0, window, dt, Integrator::Explicit, SolverSettings{c.tol, c.max_iter}, c.q);
        double drift = 0.0;
        for (const auto& row : t.diag) drift = std::max(drift, std::abs(row.mass - t.diag.front().mass));
        const double bound = 1e-10 * (1.0 + std::abs(t.diag.front().mass));
        rep.lines.push_back(detail::judged("mass-drift", drift <= bound, "max drift " + fmt_g(drift) + " over " +
                                                                            std::to_string(steps) + " steps, bound " + fmt_g(bound)));
    } catch (const Error& e) {
        rep.lines.push_back({"mass-drift", "FAIL", e.what()});
    }

    if (spec.is_linear_variant()) {
        try {
            const Eigen::VectorXd ex = evolve(op, spec, u0, window, dt, Integrator::Explicit).states.back().values;
            const Eigen::VectorXd im = evolve(op, spec, u0, window, dt, Integrator::Implicit).states.back().values;
            const Eigen::VectorXd pc = picard_solve(op, spec, u0, window, steps + 1).trajectory.states.back().values;
            const double rate = std::isfinite(limit) ? 1.0 / limit : 0.0;
            const double bound = 5.0 * dt * std::max(1.0, rate * window) * detail::weighted_l2(g, u0.values) + 1e-12;
            const double worst = std::max({detail::weighted_l2(g, ex - im), detail::weighted_l2(g, ex - pc),
                                           detail::weighted_l2(g, im - pc)});
            rep.lines.push_back(detail::judged("integrators", worst <= bound,
                                               "explicit/implicit/Picard spread " + fmt_g(worst) + ", bound " + fmt_g(bound)));
        } catch (const Error& e) {
            rep.lines.push_back({"integrators", "FAIL", e.what()});
        }

        try {
            const Eigen::MatrixXd s = schur_complement(op);
            double worst = 0.0;
            for (std::uint32_t trial = 0; trial < 5; ++trial) {
                auto rng = stream_rng(c.seed, Stream::Validation, trial);
                std::uniform_real_distribution<double> unif(-1.0, 1.0);
                Eigen::VectorXd u(s.rows());
                for (Eigen::Index k = 0; k < u.size(); ++k) u[k] = unif(rng);
                Eigen::VectorXd schur = -(s * u);
                for (std::size_t k = 0; k < g.n_strip(); ++k) schur[static_cast<Eigen::Index>(k)] /= g.mu(g.strip()[k]);
                const Eigen::VectorXd direct = dyn.rhs(StripField(u)).values;
                worst = std::max(worst, (schur - direct).norm() / std::max(direct.norm(), 1e-300));
            }
            rep.lines.push_back(detail::judged("schur-path", worst <= 1e-12, "relative gap " + fmt_g(worst)));
        } catch (const Error& e) {
            rep.lines.push_back({"schur-path", "FAIL", e.what()});
        }
    } else {
        rep.lines.push_back({"integrators", "INFO", "Picard cross-check applies to linear variants only"});
        rep.lines.push_back({"schur-path", "INFO", "Schur reduction applies to linear variants only"});
    }

    try {
        const double beta = spectral_gap_beta(op).beta;
        if (r_equals_R(c)) {
            rep.lines.push_back({"beta", "INFO", "near-zero gap expected for r = R (linear gap " + fmt_g(beta) + ")"});
        } else {
            rep.lines.push_back(detail::judged("beta", beta > 1e-8, "linear gap " + fmt_g(beta)));
        }
    } catch (const Error& e) {
        rep.lines.push_back({"beta", "FAIL", e.what()});
    }
    return rep;
}

}  // namespace ndbc
