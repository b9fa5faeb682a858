#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ndbc/analysis.hpp"
#include "ndbc/error.hpp"
#include "ndbc/evolution.hpp"
#include "ndbc/geometry.hpp"
#include "ndbc/io.hpp"
#include "ndbc/kernel.hpp"

namespace ndbc {

enum class InitialPreset { Bump, TwoBump, Random, Eigenmode, Constant };

inline const char* to_string(InitialPreset p) {
    switch (p) {
        case InitialPreset::Bump: return "bump";
        case InitialPreset::TwoBump: return "two-bump";
        case InitialPreset::Random: return "random";
        case InitialPreset::Eigenmode: return "eigenmode";
        case InitialPreset::Constant: return "constant";
    }
    return "?";
}

/// One experiment, read from a single flat JSON object. Every key is optional;
/// the defaults describe the standard unit-interval desk problem.
struct ExperimentConfig {
    // domain and grid
    int dim = 1;
    Point lo{0.0, 0.0};
    Point hi{1.0, 1.0};
    double h = 1.0 / 64;
    double r = 0.125;
    std::string fixture;  // "" or "toy3"

    // kernel
    KernelFamily kernel = KernelFamily::Tent;
    double R = 0.25;
    double s = 0.5;
    double c_s = 1.0;

    // problem
    Variant variant = Variant::LinearP;
    double p = 2.0;
    double q = 2.0;

    // time
    double t_end = 1.0;
    double dt = 1e-3;
    Integrator integrator = Integrator::Explicit;

    // initial condition
    InitialPreset initial = InitialPreset::Random;
    double initial_c = 1.0;
    int initial_k = 1;
    double initial_width = 0.0;  // 0: a quarter of the shortest side
    std::vector<Point> centers;
    std::uint64_t seed = 0;

    // outputs
    std::string out;
    std::string svg;

    // solver
    double tol = 1e-12;
    int max_iter = 200;
    int restarts = 8;

    // flags
    bool allow_empty_interior = false;
    bool allow_r_equals_R = false;

    // analysis
    std::optional<DecayModel> fit_model;
    DiagColumn fit_column = DiagColumn::D2;
    double fit_power = 1.0;
    std::optional<std::pair<double, double>> fit_window;
    std::vector<int> n_list{4, 8, 16, 32};

    ProblemSpec problem() const { return ProblemSpec::make(variant, p); }
    DomainBox domain() const { return dim == 1 ? DomainBox::interval(lo[0], hi[0]) : DomainBox::rectangle(lo, hi); }
};

namespace detail {

[[noreturn]] inline void config_fail(const std::string& field, const std::string& msg) {
    fail(ErrorCode::ConfigInvalid, "(" + field + ") " + msg);
}

inline void config_require(bool ok, const std::string& field, const std::string& msg) {
    if (!ok) config_fail(field, msg);
}

inline double get_number(const nlohmann::json& j, const std::string& key) {
    config_require(j.is_number(), key, "must be a number");
    const double v = j.get<double>();
    config_require(std::isfinite(v), key, "must be finite");
    return v;
}

inline int get_int(const nlohmann::json& j, const std::string& key) {
    config_require(j.is_number_integer(), key, "must be an integer");
    return j.get<int>();
}

inline bool get_bool(const nlohmann::json& j, const std::string& key) {
    config_require(j.is_boolean(), key, "must be true or false");
    return j.get<bool>();
}

inline std::string get_string(const nlohmann::json& j, const std::string& key) {
    config_require(j.is_string(), key, "must be a string");
    return j.get<std::string>();
}

/// A number (1D) or an array of `dim` numbers.
inline Point get_point(const nlohmann::json& j, const std::string& key, int dim) {
    Point p{0.0, 0.0};
    if (j.is_number()) {
        config_require(dim == 1, key, "needs " + std::to_string(dim) + " coordinates");
        p[0] = get_number(j, key);
        return p;
    }
    config_require(j.is_array() && static_cast<int>(j.size()) == dim, key,
                   "must be an array of " + std::to_string(dim) + " numbers");
    for (int k = 0; k < dim; ++k) p[static_cast<std::size_t>(k)] = get_number(j[static_cast<std::size_t>(k)], key);
    return p;
}

template <class E>
E get_enum(const nlohmann::json& j, const std::string& key, std::initializer_list<std::pair<const char*, E>> table) {
    const std::string v = get_string(j, key);
    std::string options;
    for (const auto& [name, value] : table) {
        if (v == name) return value;
        options += (options.empty() ? "" : ", ") + std::string(name);
    }
    config_fail(key, "'" + v + "' is not one of " + options);
}

}  // namespace detail

/// Parses and validates a config document. Unknown keys are rejected.
inline ExperimentConfig parse_config(const nlohmann::json& doc) {
    using namespace detail;
    config_require(doc.is_object(), "document", "config must be a single JSON object");
    static const std::set<std::string> known{
        "dim",        "lo",          "hi",        "h",          "r",          "fixture",      "kernel",
        "R",          "s",           "c_s",       "variant",    "p",          "q",            "t_end",
        "dt",         "integrator",  "initial",   "initial_c",  "initial_k",  "initial_width", "centers",
        "seed",       "out",         "svg",       "tol",        "max_iter",   "restarts",     "allow_empty_interior",
        "allow_r_equals_R", "fit_model", "fit_column", "fit_power", "fit_window", "n_list"};
    for (const auto& [key, value] : doc.items()) config_require(known.count(key) > 0, key, "unknown key");

    ExperimentConfig c;
    if (doc.contains("dim")) c.dim = get_int(doc["dim"], "dim");
    config_require(c.dim == 1 || c.dim == 2, "dim", "must be 1 or 2");
    if (doc.contains("lo")) c.lo = get_point(doc["lo"], "lo", c.dim);
    if (doc.contains("hi")) c.hi = get_point(doc["hi"], "hi", c.dim);
    for (int k = 0; k < c.dim; ++k) config_require(c.lo[static_cast<std::size_t>(k)] < c.hi[static_cast<std::size_t>(k)], "hi", "must exceed lo");
    if (doc.contains("h")) c.h = get_number(doc["h"], "h");
    config_require(c.h > 0.0, "h", "must be positive");
    if (doc.contains("r")) c.r = get_number(doc["r"], "r");
    config_require(c.r > 0.0, "r", "must be positive");
    if (doc.contains("fixture")) c.fixture = get_string(doc["fixture"], "fixture");
    config_require(c.fixture.empty() || c.fixture == "toy3", "fixture", "only 'toy3' is available");

    if (doc.contains("kernel")) {
        c.kernel = get_enum<KernelFamily>(doc["kernel"], "kernel",
                                          {{"tent", KernelFamily::Tent}, {"bump", KernelFamily::Bump}, {"singular", KernelFamily::Singular}});
    }
    if (doc.contains("R")) c.R = get_number(doc["R"], "R");
    if (doc.contains("s")) c.s = get_number(doc["s"], "s");
    if (doc.contains("c_s")) c.c_s = get_number(doc["c_s"], "c_s");
    if (doc.contains("variant")) {
        c.variant = get_enum<Variant>(doc["variant"], "variant",
                                      {{"LinearP", Variant::LinearP},
                                       {"LinearPStar", Variant::LinearPStar},
                                       {"PLaplaceP", Variant::PLaplaceP},
                                       {"PLaplacePStar", Variant::PLaplacePStar},
                                       {"SingularP3", Variant::SingularP3}});
    }
    if (doc.contains("p")) c.p = get_number(doc["p"], "p");
    config_require(c.p > 1.0, "p", "must exceed 1");
    if (c.variant == Variant::LinearP || c.variant == Variant::LinearPStar) c.p = 2.0;
    if (doc.contains("q")) c.q = get_number(doc["q"], "q");
    config_require(c.q >= 1.0, "q", "must be at least 1");

    const bool singular = c.kernel == KernelFamily::Singular;
    config_require(singular == (c.variant == Variant::SingularP3), "kernel",
                   std::string("kernel '") + to_string(c.kernel) + "' does not match variant " + to_string(c.variant));
    if (singular) {
        config_require(c.s > 0.0 && c.s < 1.0, "s", "must lie in (0, 1)");
        config_require(c.c_s > 0.0, "c_s", "must be positive");
    } else if (c.fixture.empty()) {
        config_require(c.R > 0.0, "R", "must be positive");
        config_require(c.r <= c.R * (1.0 + 1e-12), "r", "strip width must not exceed the kernel radius R");
        const bool equal = std::abs(c.r - c.R) <= 1e-12 * c.R;
        config_require(!equal || (doc.contains("allow_r_equals_R") && get_bool(doc["allow_r_equals_R"], "allow_r_equals_R")),
                       "r", "r = R needs allow_r_equals_R = true");
    }

    if (doc.contains("t_end")) c.t_end = get_number(doc["t_end"], "t_end");
    config_require(c.t_end > 0.0, "t_end", "must be positive");
    if (doc.contains("dt")) c.dt = get_number(doc["dt"], "dt");
    config_require(c.dt > 0.0, "dt", "must be positive");
    try {
        step_count(c.t_end, c.dt);
    } catch (const Error&) {
        config_fail("dt", "must divide t_end");
    }
    if (doc.contains("integrator")) {
        c.integrator = get_enum<Integrator>(doc["integrator"], "integrator",
                                            {{"explicit", Integrator::Explicit}, {"implicit", Integrator::Implicit}});
    }

    if (doc.contains("initial")) {
        c.initial = get_enum<InitialPreset>(doc["initial"], "initial",
                                            {{"bump", InitialPreset::Bump},
                                             {"two-bump", InitialPreset::TwoBump},
                                             {"random", InitialPreset::Random},
                                             {"eigenmode", InitialPreset::Eigenmode},
                                             {"constant", InitialPreset::Constant}});
    }
    if (doc.contains("initial_c")) c.initial_c = get_number(doc["initial_c"], "initial_c");
    if (doc.contains("initial_k")) c.initial_k = get_int(doc["initial_k"], "initial_k");
    config_require(c.initial_k >= 1, "initial_k", "must be at least 1");
    if (doc.contains("initial_width")) c.initial_width = get_number(doc["initial_width"], "initial_width");
    config_require(c.initial_width >= 0.0, "initial_width", "must be nonnegative");
    if (doc.contains("centers")) {
        const auto& arr = doc["centers"];
        config_require(arr.is_array(), "centers", "must be an array of points");
        for (const auto& pt : arr) c.centers.push_back(get_point(pt, "centers", c.dim));
    }
    if (c.initial == InitialPreset::Bump) config_require(c.centers.size() <= 1, "centers", "bump takes one center");
    if (c.initial == InitialPreset::TwoBump) {
        config_require(c.centers.empty() || c.centers.size() == 2, "centers", "two-bump takes two centers");
    }
    if (doc.contains("seed")) {
        config_require(doc["seed"].is_number_unsigned() || (doc["seed"].is_number_integer() && doc["seed"].get<long long>() >= 0),
                       "seed", "must be a nonnegative integer");
        c.seed = doc["seed"].get<std::uint64_t>();
    }

    if (doc.contains("out")) c.out = get_string(doc["out"], "out");
    if (doc.contains("svg")) c.svg = get_string(doc["svg"], "svg");
    if (doc.contains("tol")) c.tol = get_number(doc["tol"], "tol");
    config_require(c.tol > 0.0, "tol", "must be positive");
    if (doc.contains("max_iter")) c.max_iter = get_int(doc["max_iter"], "max_iter");
    config_require(c.max_iter >= 1, "max_iter", "must be at least 1");
    if (doc.contains("restarts")) c.restarts = get_int(doc["restarts"], "restarts");
    config_require(c.restarts >= 1, "restarts", "must be at least 1");
    if (doc.contains("allow_empty_interior")) c.allow_empty_interior = get_bool(doc["allow_empty_interior"], "allow_empty_interior");
    if (doc.contains("allow_r_equals_R")) c.allow_r_equals_R = get_bool(doc["allow_r_equals_R"], "allow_r_equals_R");

    if (doc.contains("fit_model")) {
        c.fit_model = get_enum<DecayModel>(doc["fit_model"], "fit_model",
                                           {{"exponential", DecayModel::Exponential}, {"polynomial", DecayModel::Polynomial}});
    }
    if (doc.contains("fit_column")) {
        c.fit_column = get_enum<DiagColumn>(doc["fit_column"], "fit_column",
                                            {{"mass", DiagColumn::Mass}, {"d1", DiagColumn::D1}, {"d2", DiagColumn::D2},
                                             {"dp", DiagColumn::Dp}, {"dq", DiagColumn::Dq}, {"dinf", DiagColumn::Dinf},
                                             {"energy", DiagColumn::Energy}});
    }
    if (doc.contains("fit_power")) c.fit_power = get_number(doc["fit_power"], "fit_power");
    config_require(c.fit_power > 0.0, "fit_power", "must be positive");
    if (doc.contains("fit_window")) {
        const auto& w = doc["fit_window"];
        config_require(w.is_array() && w.size() == 2, "fit_window", "must be [t_lo, t_hi]");
        c.fit_window = std::make_pair(get_number(w[0], "fit_window"), get_number(w[1], "fit_window"));
        config_require(c.fit_window->first < c.fit_window->second, "fit_window", "needs t_lo < t_hi");
    }
    if (doc.contains("n_list")) {
        const auto& arr = doc["n_list"];
        config_require(arr.is_array() && !arr.empty(), "n_list", "must be a nonempty array of integers");
        c.n_list.clear();
        for (const auto& n : arr) {
            c.n_list.push_back(get_int(n, "n_list"));
            config_require(c.n_list.back() >= 1, "n_list", "entries must be positive");
        }
    }
    return c;
}

inline ExperimentConfig parse_config_text(const std::string& text, const std::string& origin = "config") {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorCode::ConfigInvalid, "(document) " + origin + " is not valid JSON: " + e.what());
    }
    return parse_config(doc);
}

inline ExperimentConfig load_config(const std::string& path) { return parse_config_text(read_text_file(path), path); }

}  // namespace ndbc
