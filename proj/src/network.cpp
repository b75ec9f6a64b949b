// SPDX-License-Identifier: Apache-2.0
#include "bnnv/network.hpp"

#include "bnnv/error.hpp"

#include <algorithm>
#include <limits>
#include <string>

namespace bnnv {

std::string_view to_string(LayerKind kind)
{
    switch ( kind )
    {
    case LayerKind::Input:
        return "input";
    case LayerKind::WeightedSum:
        return "weighted_sum";
    case LayerKind::ReLU:
        return "relu";
    case LayerKind::Sign:
        return "sign";
    case LayerKind::Max:
        return "max";
    }
    return "unknown";
}

Layer Layer::input(std::size_t size)
{
    Layer layer;
    layer.kind = LayerKind::Input;
    layer.size = size;
    return layer;
}

Layer Layer::weighted_sum(std::vector<std::vector<double>> weights, std::vector<double> biases)
{
    Layer layer;
    layer.kind = LayerKind::WeightedSum;
    layer.size = weights.size();
    layer.weights = std::move(weights);
    layer.biases = std::move(biases);
    return layer;
}

Layer Layer::relu(std::size_t size)
{
    Layer layer;
    layer.kind = LayerKind::ReLU;
    layer.size = size;
    return layer;
}

Layer Layer::sign(std::size_t size)
{
    Layer layer;
    layer.kind = LayerKind::Sign;
    layer.size = size;
    return layer;
}

Layer Layer::max(std::vector<std::vector<std::size_t>> sources)
{
    Layer layer;
    layer.kind = LayerKind::Max;
    layer.size = sources.size();
    layer.sources = std::move(sources);
    return layer;
}

std::vector<Violation> validate(const Network &net)
{
    std::vector<Violation> out;
    auto report = [&out](std::size_t layer, std::string message) {
        out.push_back({ layer, std::move(message) });
    };

    if ( net.layers.size() < 2 )
        report(0, "network needs at least an input and an output layer");
    if ( net.layers.empty() )
        return out;

    if ( net.layers.front().kind != LayerKind::Input )
        report(1, "first layer must be the input layer");
    if ( net.layers.size() >= 2 && net.layers.back().kind != LayerKind::WeightedSum )
        report(net.layers.size(), "output layer must be a weighted sum");

    for ( std::size_t i = 0; i < net.layers.size(); ++i )
    {
        const Layer &layer = net.layers[i];
        const std::size_t index = i + 1;
        if ( layer.size == 0 )
            report(index, "layer size must be positive");
        if ( i > 0 && layer.kind == LayerKind::Input )
            report(index, "input layer may only appear first");
        if ( i == 0 )
            continue;

        const std::size_t prev = net.layers[i - 1].size;
        switch ( layer.kind )
        {
        case LayerKind::Input:
            break;
        case LayerKind::WeightedSum:
            if ( layer.weights.size() != layer.size )
                report(index,
                       "weight matrix has " + std::to_string(layer.weights.size()) + " rows, expected " +
                           std::to_string(layer.size));
            for ( std::size_t r = 0; r < layer.weights.size(); ++r )
                if ( layer.weights[r].size() != prev )
                {
                    report(index,
                           "weight row " + std::to_string(r + 1) + " has " + std::to_string(layer.weights[r].size()) +
                               " columns, expected " + std::to_string(prev));
                    break;
                }
            if ( layer.biases.size() != layer.size )
                report(index,
                       "bias vector has length " + std::to_string(layer.biases.size()) + ", expected " +
                           std::to_string(layer.size));
            break;
        case LayerKind::ReLU:
        case LayerKind::Sign:
            if ( layer.size != prev )
                report(index,
                       std::string(to_string(layer.kind)) + " layer size " + std::to_string(layer.size) +
                           " differs from previous layer size " + std::to_string(prev));
            break;
        case LayerKind::Max:
            if ( layer.sources.size() != layer.size )
                report(index, "max layer needs one source list per neuron");
            for ( std::size_t n = 0; n < layer.sources.size(); ++n )
            {
                if ( layer.sources[n].empty() )
                    report(index, "max neuron " + std::to_string(n + 1) + " has no sources");
                for ( std::size_t s : layer.sources[n] )
                    if ( s < 1 || s > prev )
                        report(index,
                               "max neuron " + std::to_string(n + 1) + " source " + std::to_string(s) +
                                   " outside [1, " + std::to_string(prev) + "]");
            }
            break;
        }
    }
    return out;
}

void require_valid(const Network &net)
{
    auto violations = validate(net);
    if ( violations.empty() )
        return;
    const Violation &v = violations.front();
    throw StructuralError("layer " + std::to_string(v.layer) + ": " + v.message);
}

std::vector<std::vector<double>> evaluate_layers(const Network &net, std::span<const double> input)
{
    if ( net.layers.empty() || input.size() != net.layers.front().size )
        throw StructuralError("layer 1: input has length " + std::to_string(input.size()) + ", expected " +
                              std::to_string(net.input_size()));

    std::vector<std::vector<double>> values;
    values.reserve(net.layers.size());
    values.emplace_back(input.begin(), input.end());

    for ( std::size_t i = 1; i < net.layers.size(); ++i )
    {
        const Layer &layer = net.layers[i];
        const std::vector<double> &prev = values.back();
        std::vector<double> cur(layer.size, 0.0);
        auto mismatch = [&] {
            return StructuralError("layer " + std::to_string(i + 1) + " (" + std::string(to_string(layer.kind)) +
                                   "): dimension mismatch with previous layer of size " +
                                   std::to_string(prev.size()));
        };

        switch ( layer.kind )
        {
        case LayerKind::Input:
            throw StructuralError("layer " + std::to_string(i + 1) + ": unexpected input layer");
        case LayerKind::WeightedSum:
            if ( layer.weights.size() != layer.size || layer.biases.size() != layer.size )
                throw mismatch();
            for ( std::size_t r = 0; r < layer.size; ++r )
            {
                const auto &row = layer.weights[r];
                if ( row.size() != prev.size() )
                    throw mismatch();
                double sum = layer.biases[r];
                for ( std::size_t c = 0; c < row.size(); ++c )
                    sum += row[c] * prev[c];
                cur[r] = sum;
            }
            break;
        case LayerKind::ReLU:
            if ( layer.size != prev.size() )
                throw mismatch();
            for ( std::size_t j = 0; j < layer.size; ++j )
                cur[j] = std::max(0.0, prev[j]);
            break;
        case LayerKind::Sign:
            if ( layer.size != prev.size() )
                throw mismatch();
            for ( std::size_t j = 0; j < layer.size; ++j )
                cur[j] = sign_of(prev[j]);
            break;
        case LayerKind::Max:
            if ( layer.sources.size() != layer.size )
                throw mismatch();
            for ( std::size_t j = 0; j < layer.size; ++j )
            {
                if ( layer.sources[j].empty() )
                    throw mismatch();
                double best = -std::numeric_limits<double>::infinity();
                for ( std::size_t s : layer.sources[j] )
                {
                    if ( s < 1 || s > prev.size() )
                        throw mismatch();
                    best = std::max(best, prev[s - 1]);
                }
                cur[j] = best;
            }
            break;
        }
        values.push_back(std::move(cur));
    }
    return values;
}

std::vector<double> evaluate(const Network &net, std::span<const double> input)
{
    return evaluate_layers(net, input).back();
}

namespace {

// second ∘ first, both weighted sums.
Layer compose(const Layer &first, const Layer &second)
{
    const std::size_t rows = second.size;
    const std::size_t inner = first.size;
    const std::size_t cols = first.weights.empty() ? 0 : first.weights.front().size();

    std::vector<std::vector<double>> weights(rows, std::vector<double>(cols, 0.0));
    std::vector<double> biases(second.biases);
    for ( std::size_t r = 0; r < rows; ++r )
        for ( std::size_t k = 0; k < inner; ++k )
        {
            const double w = second.weights[r][k];
            if ( w == 0.0 )
                continue;
            for ( std::size_t c = 0; c < cols; ++c )
                weights[r][c] += w * first.weights[k][c];
            biases[r] += w * first.biases[k];
        }
    return Layer::weighted_sum(std::move(weights), std::move(biases));
}

} // namespace

Network merge_weighted_sums(const Network &net)
{
    Network current = net;
    bool changed = true;
    while ( changed )
    {
        changed = false;
        Network next;
        next.metadata = current.metadata;
        for ( const Layer &layer : current.layers )
        {
            if ( layer.kind == LayerKind::WeightedSum && !next.layers.empty() &&
                 next.layers.back().kind == LayerKind::WeightedSum )
            {
                next.layers.back() = compose(next.layers.back(), layer);
                changed = true;
            }
            else
                next.layers.push_back(layer);
        }
        current = std::move(next);
    }
    return current;
}

} // namespace bnnv
