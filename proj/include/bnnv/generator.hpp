// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "bnnv/network.hpp"

#include <cstdint>
#include <vector>

namespace bnnv {

struct GeneratorOptions
{
    std::uint64_t seed = 1;
    std::size_t inputs = 16;
    std::size_t outputs = 4;
    std::vector<std::size_t> widths{ 12, 12 }; // one binary block per entry
    bool omit_first_sign = false;
};

/// Deterministic random BNN: each block is a +-1 weighted sum, a diagonal
/// batch-norm weighted sum and a sign layer; the output layer is a +-1
/// weighted sum. Inputs are assumed to live in [0, 1], which is used to
/// center the first block's batch norm. Throws PreconditionError on zero
/// sizes.
Network gen_random_bnn(const GeneratorOptions &options);

} // namespace bnnv
