// SPDX-License-Identifier: Apache-2.0
#pragma once

// Small hand-built networks and queries shared by the test suites.

#include "bnnv/network.hpp"
#include "bnnv/properties.hpp"

namespace fixtures {

using bnnv::Layer;
using bnnv::Network;

/// Two inputs, a ReLU hidden layer of width 2, one output.
inline Network relu_net()
{
    return { { Layer::input(2), Layer::weighted_sum({ { 1, 2 }, { -5, 1 } }, { 1, 2 }), Layer::relu(2),
               Layer::weighted_sum({ { 1, -2 } }, { 0 }) },
             "" };
}

/// Weighted sum, batch norm, sign, output weighted sum.
inline Network binary_block()
{
    return { { Layer::input(2), Layer::weighted_sum({ { 1, -1 } }, { 1 }), Layer::weighted_sum({ { 0.5 } }, { 0 }),
               Layer::sign(1), Layer::weighted_sum({ { 2 } }, { 0 }) },
             "" };
}

/// Two stacked weighted sums over one input.
inline Network two_sums()
{
    return { { Layer::input(1), Layer::weighted_sum({ { 1 }, { -2 } }, { 0, 0 }),
               Layer::weighted_sum({ { -1, 2 }, { 3, 1 } }, { 0, 0 }) },
             "" };
}

/// y = sign(3x + 1) + sign(-4x + 2).
inline Network two_signs()
{
    return { { Layer::input(1), Layer::weighted_sum({ { 3 }, { -4 } }, { 1, 2 }), Layer::sign(2),
               Layer::weighted_sum({ { 1, 1 } }, { 0 }) },
             "" };
}

inline bnnv::IoInequality output_bound(std::size_t j, bnnv::Relation rel, double rhs)
{
    return { { { { bnnv::IoVariable::Side::Output, j }, 1.0 } }, rel, rhs };
}

/// x1 in [1, 2], x2 in [-1, 1], y1 (rel) rhs over binary_block().
inline bnnv::Property block_property(bnnv::Relation rel, double rhs)
{
    bnnv::Property p;
    p.input_box = { { 1, 2 }, { -1, 1 } };
    p.output_linear.push_back(output_bound(0, rel, rhs));
    return p;
}

} // namespace fixtures
