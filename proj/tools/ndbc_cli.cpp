#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ndbc/ndbc.hpp"

namespace {

using namespace ndbc;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitIo = 4;

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::ConfigInvalid:
        case ErrorCode::BadSpacing:
        case ErrorCode::NoStripNodes:
        case ErrorCode::EmptyInterior:
        case ErrorCode::EmptySupport:
        case ErrorCode::InvalidArgument: return kExitConfig;
        case ErrorCode::Io: return kExitIo;
        default: return kExitSolver;
    }
}

struct CommonFlags {
    std::string config;
    std::string out;
    std::string svg;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "experiment config (flat JSON)");
    cmd->add_option("--out", f.out, "output CSV path (overrides config 'out')");
    cmd->add_option("--svg", f.svg, "output SVG path (overrides config 'svg')");
    cmd->add_option("--seed", f.seed, "64-bit seed (overrides config 'seed')");
    cmd->add_flag("--quiet", f.quiet, "suppress summary lines on stdout");
}

ExperimentConfig load(const CommonFlags& f, bool required = true) {
    ExperimentConfig c;
    if (!f.config.empty()) {
        c = load_config(f.config);
    } else if (required) {
        fail(ErrorCode::ConfigInvalid, "(config) --config is required for this subcommand");
    }
    if (!f.out.empty()) c.out = f.out;
    if (!f.svg.empty()) c.svg = f.svg;
    if (f.seed) c.seed = *f.seed;
    return c;
}

void say(const CommonFlags& f, const std::string& line) {
    if (!f.quiet) std::printf("%s\n", line.c_str());
}

int cmd_grid(const CommonFlags& f) {
    const ExperimentConfig c = load(f);
    const NonlocalOperator op = build_operator(c);
    const Grid& g = op.grid();
    if (!c.out.empty()) write_file_atomic(c.out, grid_csv(g));
    say(f, "nodes=" + std::to_string(g.size()) + " strip=" + std::to_string(g.n_strip()) + " interior=" +
               std::to_string(g.n_interior()) + " h=" + fmt_g(g.h()) + " r=" + fmt_g(g.r()) + " strip_measure=" +
               fmt_g(g.strip_measure()) + " edges=" + std::to_string(op.weights().nonZeros()));
    return kExitOk;
}

int cmd_solve_elliptic(const CommonFlags& f, const std::string& input) {
    const ExperimentConfig c = load(f);
    const NonlocalOperator op = build_operator(c);
    const StripField g = input.empty() ? initial_condition(c, op) : read_strip_values(input, op.grid());
    const double p = c.problem().p;
    FullField u;
    EnergyReport rep;
    if (p == 2.0) {
        u = extend_linear(op, g);
        rep = EnergyReport{energy(op, u, 2.0), interior_residual(op, u, 2.0), 1, true};
    } else {
        std::tie(u, rep) = extend_plaplace(op, g, p, c.tol, c.max_iter);
    }
    if (!c.out.empty()) write_file_atomic(c.out, full_field_csv(op.grid(), u));
    say(f, "p=" + fmt_g(p) + " energy=" + format_double(rep.energy) + " grad_norm=" + fmt_g(rep.grad_norm) +
               " iterations=" + std::to_string(rep.iterations) + " converged=" + (rep.converged ? "true" : "false"));
    return kExitOk;
}

int cmd_evolve(const CommonFlags& f) {
    const ExperimentConfig c = load(f);
    const RunResult res = run_experiment(c);
    for (const auto& w : res.trajectory.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    say(f, res.summary);
    return kExitOk;
}

int cmd_beta(const CommonFlags& f) {
    const ExperimentConfig c = load(f);
    const NonlocalOperator op = build_operator(c);
    const double p = c.problem().p;
    const GapResult gap = p == 2.0 ? spectral_gap_beta(op) : estimate_beta_p(op, p, c.restarts, 1e-9, c.seed);
    if (!c.out.empty()) write_file_atomic(c.out, strip_field_csv(op.grid(), gap.mode));
    std::printf("beta=%s method=%s\n", format_double(gap.beta).c_str(), to_string(gap.method));
    return kExitOk;
}

int cmd_counterexample(const CommonFlags& f) {
    const ExperimentConfig c = load(f);
    const NonlocalOperator op = build_operator(c);
    const auto seq = counterexample_sequence(op, c.n_list);
    if (!c.out.empty()) write_file_atomic(c.out, counterexample_csv(seq));
    for (const auto& [n, q] : seq) say(f, "n=" + std::to_string(n) + " quotient=" + format_double(q));
    return kExitOk;
}

struct FitFlags {
    std::string input;
    std::string model;
    std::string column;
    std::optional<double> power;
    std::optional<double> t_lo;
    std::optional<double> t_hi;
};

int cmd_decay_fit(const CommonFlags& f, const FitFlags& ff) {
    ExperimentConfig c = load(f, false);
    if (ff.input.empty()) fail(ErrorCode::ConfigInvalid, "(input) --input trajectory CSV is required");
    // flag overrides go through the config parser so they get the same checks
    nlohmann::json doc = nlohmann::json::object();
    if (!ff.model.empty()) doc["fit_model"] = ff.model;
    if (!ff.column.empty()) doc["fit_column"] = ff.column;
    if (ff.power) doc["fit_power"] = *ff.power;
    const ExperimentConfig o = parse_config(doc);
    if (!ff.model.empty()) c.fit_model = o.fit_model;
    if (!ff.column.empty()) c.fit_column = o.fit_column;
    if (ff.power) c.fit_power = o.fit_power;

    const Trajectory t = read_trajectory(ff.input);
    auto [lo, hi] = fit_window(c, t);
    if (ff.t_lo) lo = *ff.t_lo;
    if (ff.t_hi) hi = *ff.t_hi;
    const DecayFit fit = fit_decay(t, c.fit_column, c.fit_model.value_or(DecayModel::Exponential), lo, hi, c.fit_power);
    const std::string row = decay_fit_row(fit);
    if (!c.out.empty()) write_file_atomic(c.out, row + "\n");
    std::printf("%s\n", row.c_str());
    return kExitOk;
}

int cmd_validate(const CommonFlags& f) {
    const ExperimentConfig c = load(f);
    const ValidationReport rep = validate(c);
    if (!c.out.empty()) write_file_atomic(c.out, rep.text());
    if (!f.quiet) std::fputs(rep.text().c_str(), stdout);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ndbc: nonlocal diffusion with dynamical boundary conditions"};
    app.require_subcommand(1);
    app.footer(
        "Exit codes:\n"
        "  0  success\n"
        "  2  config error (ConfigInvalid, BadSpacing, NoStripNodes, EmptyInterior, EmptySupport,\n"
        "     InvalidArgument, bad command line)\n"
        "  3  solver error (NoConvergence, SingularSystem, NonPositiveData, WindowTooSmall, ...)\n"
        "  4  I/O error (unreadable input, malformed CSV, unwritable output)\n"
        "Errors print as 'error: <Category>: <detail>' on stderr.");

    CommonFlags flags;
    std::string elliptic_input;
    FitFlags fit;

    auto* grid = app.add_subcommand("grid", "build the grid; write index,x,(y,)class,bdist,mu");
    auto* ell = app.add_subcommand("solve-elliptic", "extend strip data into the interior");
    auto* evo = app.add_subcommand("evolve", "evolve the strip problem; write the trajectory CSV");
    auto* beta = app.add_subcommand("beta", "spectral gap; print beta and write the mode CSV");
    auto* cex = app.add_subcommand("counterexample", "quotients of the bump sequence (needs r = R)");
    auto* dfit = app.add_subcommand("decay-fit", "fit a decay model to a trajectory CSV");
    auto* val = app.add_subcommand("validate", "cross-checks at reduced size; one line per check");
    for (auto* cmd : {grid, ell, evo, beta, cex, dfit, val}) add_common(cmd, flags);
    ell->add_option("--input", elliptic_input, "strip data CSV (index,value); default: the initial preset");
    dfit->add_option("--input", fit.input, "trajectory CSV written by evolve");
    dfit->add_option("--model", fit.model, "exponential or polynomial");
    dfit->add_option("--column", fit.column, "mass, d1, d2, dp, dq, dinf or energy");
    dfit->add_option("--power", fit.power, "fit column^power");
    dfit->add_option("--t-lo", fit.t_lo, "window start");
    dfit->add_option("--t-hi", fit.t_hi, "window end");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*grid) return cmd_grid(flags);
        if (*ell) return cmd_solve_elliptic(flags, elliptic_input);
        if (*evo) return cmd_evolve(flags);
        if (*beta) return cmd_beta(flags);
        if (*cex) return cmd_counterexample(flags);
        if (*dfit) return cmd_decay_fit(flags, fit);
        if (*val) return cmd_validate(flags);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: Internal: %s\n", e.what());
        return kExitSolver;
    }
    return kExitConfig;
}
