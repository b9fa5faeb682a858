#pragma once

#include <cmath>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "ndbc/error.hpp"
#include "ndbc/geometry.hpp"

namespace ndbc {

/// Nodal values on the strip nodes, in Grid::strip() order.
struct StripField {
    Eigen::VectorXd values;

    StripField() = default;
    explicit StripField(Eigen::VectorXd v) : values(std::move(v)) {}

    Eigen::Index size() const { return values.size(); }
    double operator[](Eigen::Index i) const { return values[i]; }
    double& operator[](Eigen::Index i) { return values[i]; }
};

/// Nodal values on every grid node, in node order.
struct FullField {
    Eigen::VectorXd values;

    FullField() = default;
    explicit FullField(Eigen::VectorXd v) : values(std::move(v)) {}

    Eigen::Index size() const { return values.size(); }
    double operator[](Eigen::Index i) const { return values[i]; }
    double& operator[](Eigen::Index i) { return values[i]; }
};

inline void check_field(const Grid& g, const StripField& f) {
    require(static_cast<std::size_t>(f.size()) == g.n_strip(), ErrorCode::InvalidArgument,
            "strip field has " + std::to_string(f.size()) + " entries, grid has " +
                std::to_string(g.n_strip()) + " strip nodes");
    require(f.values.allFinite(), ErrorCode::InvalidArgument, "strip field has non-finite entries");
}

inline void check_field(const Grid& g, const FullField& f) {
    require(static_cast<std::size_t>(f.size()) == g.size(), ErrorCode::InvalidArgument,
            "full field has " + std::to_string(f.size()) + " entries, grid has " +
                std::to_string(g.size()) + " nodes");
    require(f.values.allFinite(), ErrorCode::InvalidArgument, "full field has non-finite entries");
}

inline StripField restrict_to_strip(const Grid& g, const FullField& u) {
    Eigen::VectorXd s(static_cast<Eigen::Index>(g.n_strip()));
    for (std::size_t k = 0; k < g.n_strip(); ++k) s[static_cast<Eigen::Index>(k)] = u[static_cast<Eigen::Index>(g.strip()[k])];
    return StripField(std::move(s));
}

/// Full field equal to g on the strip and `fill` on the interior.
inline FullField scatter_strip(const Grid& g, const StripField& s, double fill = 0.0) {
    Eigen::VectorXd u = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(g.size()), fill);
    for (std::size_t k = 0; k < g.n_strip(); ++k) u[static_cast<Eigen::Index>(g.strip()[k])] = s[static_cast<Eigen::Index>(k)];
    return FullField(std::move(u));
}

}  // namespace ndbc
