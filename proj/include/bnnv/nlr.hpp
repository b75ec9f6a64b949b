// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "bnnv/linear_core.hpp"
#include "bnnv/network.hpp"

#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace bnnv::nlr {

struct Interval
{
    double lo = -kInfinity;
    double hi = kInfinity;

    bool contains(double v, double slack = 0.0) const { return v >= lo - slack && v <= hi + slack; }
    bool operator==(const Interval &) const = default;
};

/// Intersection; never loosens either side. Ties keep `prior`'s value.
Interval tighten(Interval prior, Interval derived);

/// Bounds of every neuron, indexed [layer][neuron]; layer 0 is the input.
using LayerBounds = std::vector<std::vector<Interval>>;

/// Unbounded entries for every neuron of `net`.
LayerBounds unbounded(const Network &net);

/// Layer-by-layer interval arithmetic. When `known` is given, every neuron
/// is additionally intersected with its known interval.
LayerBounds interval_propagate(const Network &net, std::span<const Interval> input_box,
                               const LayerBounds *known = nullptr);

/// c + sum_i coeffs[i] * x_i over the input neurons.
struct LinearForm
{
    std::vector<double> coeffs;
    double constant = 0.0;

    static LinearForm constant_form(std::size_t inputs, double value);
    static LinearForm input(std::size_t inputs, std::size_t index);

    double evaluate(std::span<const double> x) const;
    /// Minimum / maximum of the form over `box`.
    double min_over(std::span<const Interval> box) const;
    double max_over(std::span<const Interval> box) const;
};

struct SymbolicNeuron
{
    LinearForm lower; // sl
    LinearForm upper; // su
    Interval concrete;
};

struct SymbolicBounds
{
    std::vector<std::vector<SymbolicNeuron>> layers;

    LayerBounds concrete() const;
};

/// Symbolic bound tightening. Requires a finite input box.
SymbolicBounds symbolic_tighten(const Network &net, std::span<const Interval> input_box,
                                const LayerBounds *known = nullptr);

/// Symbolic bounds of f = sign(b) given those of b and b's concrete range.
std::pair<LinearForm, LinearForm> sign_symbolic(const LinearForm &lower_b, const LinearForm &upper_b, Interval b);

/// f (rel) slope * b + offset
struct HalfPlane
{
    enum class Side
    {
        Below, // f <= slope * b + offset
        Above, // f >= slope * b + offset
    } side;
    double slope;
    double offset;

    bool holds(double b, double f, double slack = 0.0) const;
};

/// Convex hull of {(b, sign(b)) : b in [l, u]} for l < 0 <= u, as the
/// half-planes f <= 1, f >= -1, f <= (2/-l) b + 1 and (for u > 0)
/// f >= (2/u) b - 1.
struct TrapezoidRelaxation
{
    double l;
    double u;
    std::vector<HalfPlane> half_planes;

    bool contains(double b, double f, double slack = 0.0) const;
};

/// Throws PreconditionError unless l < 0 <= u (both finite).
TrapezoidRelaxation trapezoid(double l, double u);

struct LpRelaxOptions
{
    /// Checked between LP solves; returning true aborts with the bounds so far.
    std::function<bool()> should_stop;
};

/// One-shot LP-relaxation bound tightening: layer by layer, each neuron is
/// minimized and maximized over the LP made of the weighted-sum equations,
/// the known bounds, triangle relaxations of unfixed ReLUs and trapezoid
/// relaxations of unfixed signs. Returns nullopt if the relaxation is
/// infeasible (no input in the box reaches the known bounds).
std::optional<LayerBounds> lp_relax_tighten(const Network &net, std::span<const Interval> input_box,
                                            const LayerBounds *known = nullptr, const LpRelaxOptions &options = {});

} // namespace bnnv::nlr
