#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "ndbc/error.hpp"

namespace ndbc {

using Point = std::array<double, 2>;

/// Axis-aligned box in one or two dimensions. Unused trailing coordinates are zero.
struct DomainBox {
    int dim = 1;
    Point lo{0.0, 0.0};
    Point hi{1.0, 0.0};

    static DomainBox interval(double lo, double hi) { return {1, {lo, 0.0}, {hi, 0.0}}; }
    static DomainBox rectangle(Point lo, Point hi) { return {2, lo, hi}; }

    double side(int k) const { return hi[k] - lo[k]; }

    double volume() const {
        double v = 1.0;
        for (int k = 0; k < dim; ++k) v *= side(k);
        return v;
    }

    /// Distance from a point inside the box to the nearest face.
    double boundary_distance(const Point& x) const {
        double d = std::numeric_limits<double>::infinity();
        for (int k = 0; k < dim; ++k) {
            d = std::min({d, x[k] - lo[k], hi[k] - x[k]});
        }
        return d;
    }

    void check() const {
        require(dim == 1 || dim == 2, ErrorCode::InvalidArgument, "domain dim must be 1 or 2");
        for (int k = 0; k < dim; ++k) {
            require(std::isfinite(lo[k]) && std::isfinite(hi[k]) && lo[k] < hi[k],
                    ErrorCode::InvalidArgument, "domain requires lo < hi in every coordinate");
        }
    }
};

enum class NodeClass { Interior, Strip };

inline const char* to_string(NodeClass c) { return c == NodeClass::Strip ? "Strip" : "Interior"; }

struct GridOptions {
    bool allow_empty_interior = false;
};

/// Cell-centred uniform grid split into the interior region and the boundary strip.
///
/// Node i is Strip iff its distance to the box boundary is <= r (closed strip).
/// Every node carries the same measure h^dim. The strip and interior index lists
/// are sorted; local_index(i) maps a node to its position within its own list.
class Grid {
public:
    /// Fixture constructor: arbitrary node positions inside the box, classified
    /// by the same rule as the tensor grid. Used for hand-built test graphs.
    static Grid from_nodes(const DomainBox& domain, double h, double r, std::vector<Point> nodes,
                           GridOptions options = {}) {
        domain.check();
        require(h > 0.0 && std::isfinite(h), ErrorCode::InvalidArgument, "h must be positive");
        require(r > 0.0 && std::isfinite(r), ErrorCode::InvalidArgument, "r must be positive");
        require(!nodes.empty(), ErrorCode::InvalidArgument, "grid needs at least one node");
        Grid g;
        g.domain_ = domain;
        g.h_ = h;
        g.r_ = r;
        g.nodes_ = std::move(nodes);
        g.classify(options);
        return g;
    }

    const DomainBox& domain() const { return domain_; }
    int dim() const { return domain_.dim; }
    double h() const { return h_; }
    double r() const { return r_; }
    std::size_t size() const { return nodes_.size(); }

    const Point& node(std::size_t i) const { return nodes_[i]; }
    const std::vector<Point>& nodes() const { return nodes_; }
    NodeClass klass(std::size_t i) const { return klass_[i]; }
    bool is_strip(std::size_t i) const { return klass_[i] == NodeClass::Strip; }
    double mu(std::size_t i) const { return mu_[i]; }
    const std::vector<double>& mu() const { return mu_; }
    double bdist(std::size_t i) const { return bdist_[i]; }

    const std::vector<std::size_t>& strip() const { return strip_; }
    const std::vector<std::size_t>& interior() const { return interior_; }
    std::size_t n_strip() const { return strip_.size(); }
    std::size_t n_interior() const { return interior_.size(); }
    std::size_t local_index(std::size_t i) const { return local_[i]; }

    double strip_measure() const {
        double m = 0.0;
        for (auto i : strip_) m += mu_[i];
        return m;
    }

    double distance(std::size_t i, std::size_t j) const {
        double s = 0.0;
        for (int k = 0; k < dim(); ++k) {
            const double d = nodes_[i][k] - nodes_[j][k];
            s += d * d;
        }
        return std::sqrt(s);
    }

private:
    friend Grid build_grid(const DomainBox&, double, double, GridOptions);

    void classify(GridOptions options) {
        const std::size_t n = nodes_.size();
        const double cell = std::pow(h_, dim());
        klass_.assign(n, NodeClass::Interior);
        mu_.assign(n, cell);
        bdist_.assign(n, 0.0);
        local_.assign(n, 0);
        strip_.clear();
        interior_.clear();
        for (std::size_t i = 0; i < n; ++i) {
            for (int k = 0; k < dim(); ++k) {
                require(nodes_[i][k] > domain_.lo[k] && nodes_[i][k] < domain_.hi[k],
                        ErrorCode::InvalidArgument, "node outside the open domain box");
            }
            bdist_[i] = domain_.boundary_distance(nodes_[i]);
            if (bdist_[i] <= r_) {
                klass_[i] = NodeClass::Strip;
                local_[i] = strip_.size();
                strip_.push_back(i);
            } else {
                local_[i] = interior_.size();
                interior_.push_back(i);
            }
        }
        require(!strip_.empty(), ErrorCode::NoStripNodes, "no node lies within distance r of the boundary");
        require(options.allow_empty_interior || !interior_.empty(), ErrorCode::EmptyInterior,
                "interior is empty; pass allow_empty_interior to permit it");
    }

    DomainBox domain_;
    double h_ = 0.0;
    double r_ = 0.0;
    std::vector<Point> nodes_;
    std::vector<NodeClass> klass_;
    std::vector<double> mu_;
    std::vector<double> bdist_;
    std::vector<std::size_t> strip_;
    std::vector<std::size_t> interior_;
    std::vector<std::size_t> local_;
};

/// Tensor grid of cell centres lo[k] + (j + 1/2) h, ordered lexicographically
/// with the first coordinate varying fastest.
inline Grid build_grid(const DomainBox& domain, double h, double r, GridOptions options = {}) {
    domain.check();
    require(h > 0.0 && std::isfinite(h), ErrorCode::InvalidArgument, "h must be positive");
    require(r > 0.0 && std::isfinite(r), ErrorCode::InvalidArgument, "r must be positive");

    std::array<std::size_t, 2> counts{1, 1};
    for (int k = 0; k < domain.dim; ++k) {
        const double len = domain.side(k);
        const double cells = std::round(len / h);
        require(cells >= 1.0 && std::abs(cells * h - len) <= 1e-12 * len, ErrorCode::BadSpacing,
                "h = " + std::to_string(h) + " does not tile side " + std::to_string(k));
        counts[k] = static_cast<std::size_t>(cells);
    }

    std::vector<Point> nodes;
    nodes.reserve(counts[0] * counts[1]);
    for (std::size_t j1 = 0; j1 < counts[1]; ++j1) {
        for (std::size_t j0 = 0; j0 < counts[0]; ++j0) {
            Point x{domain.lo[0] + (static_cast<double>(j0) + 0.5) * h, 0.0};
            if (domain.dim == 2) x[1] = domain.lo[1] + (static_cast<double>(j1) + 0.5) * h;
            nodes.push_back(x);
        }
    }

    Grid g;
    g.domain_ = domain;
    g.h_ = h;
    g.r_ = r;
    g.nodes_ = std::move(nodes);
    g.classify(options);
    return g;
}

inline std::vector<std::size_t> strip_indices(const Grid& g) { return g.strip(); }
inline std::vector<std::size_t> interior_indices(const Grid& g) { return g.interior(); }

}  // namespace ndbc
