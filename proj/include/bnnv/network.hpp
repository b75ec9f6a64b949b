// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bnnv {

enum class LayerKind
{
    Input,
    WeightedSum,
    ReLU,
    Sign,
    Max,
};

std::string_view to_string(LayerKind kind);

/// One layer of a feed-forward network. Only the fields relevant to `kind`
/// are populated: `weights`/`biases` for WeightedSum, `sources` for Max.
struct Layer
{
    LayerKind kind = LayerKind::Input;
    std::size_t size = 0;
    /// Row-major, size x (size of previous layer).
    std::vector<std::vector<double>> weights;
    std::vector<double> biases;
    /// Per neuron, 1-based indices into the previous layer.
    std::vector<std::vector<std::size_t>> sources;

    static Layer input(std::size_t size);
    static Layer weighted_sum(std::vector<std::vector<double>> weights, std::vector<double> biases);
    static Layer relu(std::size_t size);
    static Layer sign(std::size_t size);
    static Layer max(std::vector<std::vector<std::size_t>> sources);

    bool operator==(const Layer &) const = default;
};

/// sign(x) = -1 for x < 0, +1 otherwise (so sign(0) = 1).
constexpr double sign_of(double x) noexcept { return x < 0.0 ? -1.0 : 1.0; }

struct Network
{
    std::vector<Layer> layers;
    std::string metadata;

    std::size_t input_size() const { return layers.empty() ? 0 : layers.front().size; }
    std::size_t output_size() const { return layers.empty() ? 0 : layers.back().size; }

    bool operator==(const Network &) const = default;
};

struct Violation
{
    std::size_t layer; // 1-based layer index, 0 for network-wide problems
    std::string message;
};

/// Every structural violation in `net`, empty when the network is valid.
std::vector<Violation> validate(const Network &net);

/// Throws StructuralError listing the first violation.
void require_valid(const Network &net);

/// Values of every layer, in order; result[0] is the input itself.
std::vector<std::vector<double>> evaluate_layers(const Network &net, std::span<const double> input);

/// Output-layer values for `input`.
std::vector<double> evaluate(const Network &net, std::span<const double> input);

/// Collapses every run of consecutive weighted-sum layers into one layer
/// (W = W2 * W1, B = W2 * B1 + B2). Idempotent.
Network merge_weighted_sums(const Network &net);

} // namespace bnnv
