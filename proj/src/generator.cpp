// SPDX-License-Identifier: Apache-2.0
#include "bnnv/generator.hpp"

#include "bnnv/error.hpp"

#include <cmath>
#include <random>
#include <string>

namespace bnnv {

namespace {

// Distribution code is spelled out (instead of <random> distributions) so
// the output is identical across standard libraries.
class Rng
{
public:
    explicit Rng(std::uint64_t seed)
        : _engine(seed)
    {
    }

    double unit() { return static_cast<double>(_engine() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + unit() * (hi - lo); }
    double plus_minus_one() { return (_engine() >> 63) ? 1.0 : -1.0; }

private:
    std::mt19937_64 _engine;
};

// Keeps generated files short and exactly reproducible.
double round_to(double v, double step) { return std::round(v / step) * step; }

} // namespace

Network gen_random_bnn(const GeneratorOptions &options)
{
    if ( options.inputs == 0 || options.outputs == 0 )
        throw PreconditionError("generator: inputs and outputs must be positive");
    for ( std::size_t w : options.widths )
        if ( w == 0 )
            throw PreconditionError("generator: block widths must be positive");

    Rng rng(options.seed);
    Network net;
    net.layers.push_back(Layer::input(options.inputs));

    std::size_t prev = options.inputs;
    for ( std::size_t block = 0; block < options.widths.size(); ++block )
    {
        const std::size_t width = options.widths[block];
        std::vector<std::vector<double>> weights(width, std::vector<double>(prev));
        std::vector<double> row_sums(width, 0.0);
        for ( std::size_t r = 0; r < width; ++r )
            for ( std::size_t c = 0; c < prev; ++c )
            {
                weights[r][c] = rng.plus_minus_one();
                row_sums[r] += weights[r][c];
            }
        net.layers.push_back(Layer::weighted_sum(std::move(weights), std::vector<double>(width, 0.0)));

        // Batch norm gamma * (v - mean): center on the expected pre-activation
        // (inputs uniform on [0, 1] in the first block, centered afterwards).
        std::vector<std::vector<double>> diagonal(width, std::vector<double>(width, 0.0));
        std::vector<double> shift(width);
        for ( std::size_t r = 0; r < width; ++r )
        {
            const double gamma = round_to(rng.uniform(0.5, 1.5), 1.0 / 64);
            const double mean = block == 0 ? 0.5 * row_sums[r] : 0.0;
            const double jitter = rng.uniform(-1.0, 1.0);
            diagonal[r][r] = gamma;
            shift[r] = round_to(-gamma * (mean + jitter), 1.0 / 64);
        }
        net.layers.push_back(Layer::weighted_sum(std::move(diagonal), std::move(shift)));

        if ( block != 0 || !options.omit_first_sign )
            net.layers.push_back(Layer::sign(width));
        prev = width;
    }

    std::vector<std::vector<double>> weights(options.outputs, std::vector<double>(prev));
    std::vector<double> biases(options.outputs);
    for ( std::size_t r = 0; r < options.outputs; ++r )
    {
        for ( std::size_t c = 0; c < prev; ++c )
            weights[r][c] = rng.plus_minus_one();
        biases[r] = round_to(rng.uniform(-0.5, 0.5), 1.0 / 64);
    }
    net.layers.push_back(Layer::weighted_sum(std::move(weights), std::move(biases)));
    net.metadata = "generated bnn seed=" + std::to_string(options.seed);
    require_valid(net);
    return net;
}

} // namespace bnnv
