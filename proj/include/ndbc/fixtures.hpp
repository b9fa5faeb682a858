#pragma once

#include <memory>
#include <vector>

#include "ndbc/geometry.hpp"
#include "ndbc/kernel.hpp"

namespace ndbc {

/// Three-node graph: interior node 0 at x = 1.5 and strip nodes 1, 2 at x = 0.5
/// and x = 2.5 on [0, 3] with h = 1 (so mu = 1). Weights are set directly:
/// w01 between node 0 and node 1, w02 between 0 and 2, w12 between the strip nodes.
inline NonlocalOperator toy3_operator(EdgeMode mode = EdgeMode::ExcludeStripStrip, double w01 = 1.0,
                                      double w02 = 1.0, double w12 = 1.0) {
    auto grid = std::make_shared<const Grid>(
        Grid::from_nodes(DomainBox::interval(0.0, 3.0), 1.0, 0.5, {{1.5, 0.0}, {0.5, 0.0}, {2.5, 0.0}}));
    std::vector<Triplet> w{{0, 1, w01}, {1, 0, w01}, {0, 2, w02}, {2, 0, w02}, {1, 2, w12}, {2, 1, w12}};
    return NonlocalOperator::from_weights(grid, KernelSpec::tent(1.0, 1), mode, w);
}

/// Two strip nodes joined by one edge, no interior, Full edge mode.
inline NonlocalOperator pair_operator(double w = 1.0) {
    auto grid = std::make_shared<const Grid>(Grid::from_nodes(DomainBox::interval(0.0, 2.0), 1.0, 0.5,
                                                              {{0.5, 0.0}, {1.5, 0.0}}, GridOptions{true}));
    return NonlocalOperator::from_weights(grid, KernelSpec::tent(1.0, 1), EdgeMode::Full, {{0, 1, w}, {1, 0, w}});
}

}  // namespace ndbc
