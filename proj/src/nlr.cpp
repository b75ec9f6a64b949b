// SPDX-License-Identifier: Apache-2.0
#include "bnnv/nlr.hpp"

#include "bnnv/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace bnnv::nlr {

Interval tighten(Interval prior, Interval derived)
{
    return { std::max(prior.lo, derived.lo), std::min(prior.hi, derived.hi) };
}

LayerBounds unbounded(const Network &net)
{
    LayerBounds out;
    for ( const Layer &layer : net.layers )
        out.emplace_back(layer.size, Interval{});
    return out;
}

namespace {

Interval known_at(const LayerBounds *known, std::size_t layer, std::size_t neuron)
{
    if ( !known || layer >= known->size() || neuron >= (*known)[layer].size() )
        return {};
    return (*known)[layer][neuron];
}

std::vector<Interval> input_layer(const Network &net, std::span<const Interval> box, const LayerBounds *known)
{
    if ( box.size() != net.input_size() )
        throw PreconditionError("input box has " + std::to_string(box.size()) + " entries, network expects " +
                                std::to_string(net.input_size()));
    std::vector<Interval> out(box.begin(), box.end());
    for ( std::size_t j = 0; j < out.size(); ++j )
        out[j] = tighten(out[j], known_at(known, 0, j));
    return out;
}

Interval sign_interval(Interval b)
{
    if ( b.lo >= 0.0 )
        return { 1.0, 1.0 };
    if ( b.hi < 0.0 )
        return { -1.0, -1.0 };
    return { -1.0, 1.0 };
}

/// One interval-arithmetic step from `prev` through `layer`.
std::vector<Interval> interval_step(const Layer &layer, const std::vector<Interval> &prev)
{
    std::vector<Interval> cur(layer.size);
    switch ( layer.kind )
    {
    case LayerKind::Input:
        throw PreconditionError("interval_step: input layer");
    case LayerKind::WeightedSum:
        for ( std::size_t r = 0; r < layer.size; ++r )
        {
            double lo = layer.biases[r];
            double hi = layer.biases[r];
            for ( std::size_t c = 0; c < prev.size(); ++c )
            {
                const double w = layer.weights[r][c];
                if ( w > 0 )
                {
                    lo += w * prev[c].lo;
                    hi += w * prev[c].hi;
                }
                else if ( w < 0 )
                {
                    lo += w * prev[c].hi;
                    hi += w * prev[c].lo;
                }
            }
            cur[r] = { lo, hi };
        }
        break;
    case LayerKind::ReLU:
        for ( std::size_t j = 0; j < layer.size; ++j )
            cur[j] = { std::max(0.0, prev[j].lo), std::max(0.0, prev[j].hi) };
        break;
    case LayerKind::Sign:
        for ( std::size_t j = 0; j < layer.size; ++j )
            cur[j] = sign_interval(prev[j]);
        break;
    case LayerKind::Max:
        for ( std::size_t j = 0; j < layer.size; ++j )
        {
            Interval v{ -kInfinity, -kInfinity };
            for ( std::size_t s : layer.sources[j] )
            {
                v.lo = std::max(v.lo, prev[s - 1].lo);
                v.hi = std::max(v.hi, prev[s - 1].hi);
            }
            cur[j] = v;
        }
        break;
    }
    return cur;
}

} // namespace

LayerBounds interval_propagate(const Network &net, std::span<const Interval> input_box, const LayerBounds *known)
{
    LayerBounds out;
    out.push_back(input_layer(net, input_box, known));
    for ( std::size_t i = 1; i < net.layers.size(); ++i )
    {
        std::vector<Interval> cur = interval_step(net.layers[i], out.back());
        for ( std::size_t j = 0; j < cur.size(); ++j )
            cur[j] = tighten(cur[j], known_at(known, i, j));
        out.push_back(std::move(cur));
    }
    return out;
}

LinearForm LinearForm::constant_form(std::size_t inputs, double value)
{
    return { std::vector<double>(inputs, 0.0), value };
}

LinearForm LinearForm::input(std::size_t inputs, std::size_t index)
{
    LinearForm form = constant_form(inputs, 0.0);
    form.coeffs[index] = 1.0;
    return form;
}

double LinearForm::evaluate(std::span<const double> x) const
{
    double v = constant;
    for ( std::size_t i = 0; i < coeffs.size(); ++i )
        v += coeffs[i] * x[i];
    return v;
}

double LinearForm::min_over(std::span<const Interval> box) const
{
    double v = constant;
    for ( std::size_t i = 0; i < coeffs.size(); ++i )
    {
        if ( coeffs[i] > 0 )
            v += coeffs[i] * box[i].lo;
        else if ( coeffs[i] < 0 )
            v += coeffs[i] * box[i].hi;
    }
    return v;
}

double LinearForm::max_over(std::span<const Interval> box) const
{
    double v = constant;
    for ( std::size_t i = 0; i < coeffs.size(); ++i )
    {
        if ( coeffs[i] > 0 )
            v += coeffs[i] * box[i].hi;
        else if ( coeffs[i] < 0 )
            v += coeffs[i] * box[i].lo;
    }
    return v;
}

namespace {

LinearForm scaled(const LinearForm &form, double factor, double offset)
{
    LinearForm out = form;
    for ( double &c : out.coeffs )
        c *= factor;
    out.constant = out.constant * factor + offset;
    return out;
}

} // namespace

LayerBounds SymbolicBounds::concrete() const
{
    LayerBounds out;
    for ( const auto &layer : layers )
    {
        std::vector<Interval> row;
        for ( const auto &neuron : layer )
            row.push_back(neuron.concrete);
        out.push_back(std::move(row));
    }
    return out;
}

std::pair<LinearForm, LinearForm> sign_symbolic(const LinearForm &lower_b, const LinearForm &upper_b, Interval b)
{
    const std::size_t n = lower_b.coeffs.size();
    if ( b.lo >= 0.0 )
        return { LinearForm::constant_form(n, 1.0), LinearForm::constant_form(n, 1.0) };
    if ( b.hi < 0.0 )
        return { LinearForm::constant_form(n, -1.0), LinearForm::constant_form(n, -1.0) };
    // sl(f) = (2/u) sl(b) - 1, su(f) = -(2/l) su(b) + 1
    LinearForm lower = b.hi > 0.0 ? scaled(lower_b, 2.0 / b.hi, -1.0) : LinearForm::constant_form(n, -1.0);
    LinearForm upper = scaled(upper_b, -2.0 / b.lo, 1.0);
    return { std::move(lower), std::move(upper) };
}

SymbolicBounds symbolic_tighten(const Network &net, std::span<const Interval> input_box, const LayerBounds *known)
{
    const std::vector<Interval> box = input_layer(net, input_box, known);
    for ( std::size_t j = 0; j < box.size(); ++j )
        if ( !std::isfinite(box[j].lo) || !std::isfinite(box[j].hi) )
            throw PreconditionError("symbolic_tighten: input " + std::to_string(j + 1) + " is unbounded");

    const std::size_t n = box.size();
    SymbolicBounds out;
    {
        std::vector<SymbolicNeuron> inputs;
        for ( std::size_t j = 0; j < n; ++j )
            inputs.push_back({ LinearForm::input(n, j), LinearForm::input(n, j), box[j] });
        out.layers.push_back(std::move(inputs));
    }

    for ( std::size_t i = 1; i < net.layers.size(); ++i )
    {
        const Layer &layer = net.layers[i];
        const auto &prev = out.layers.back();
        std::vector<Interval> prev_concrete;
        for ( const auto &p : prev )
            prev_concrete.push_back(p.concrete);
        const std::vector<Interval> stepped = interval_step(layer, prev_concrete);

        std::vector<SymbolicNeuron> cur(layer.size);
        for ( std::size_t j = 0; j < layer.size; ++j )
        {
            SymbolicNeuron &neuron = cur[j];
            switch ( layer.kind )
            {
            case LayerKind::Input:
                throw PreconditionError("symbolic_tighten: input layer in the middle of the network");
            case LayerKind::WeightedSum:
                neuron.lower = LinearForm::constant_form(n, layer.biases[j]);
                neuron.upper = LinearForm::constant_form(n, layer.biases[j]);
                for ( std::size_t k = 0; k < prev.size(); ++k )
                {
                    const double w = layer.weights[j][k];
                    if ( w == 0.0 )
                        continue;
                    const LinearForm &lo_src = w > 0 ? prev[k].lower : prev[k].upper;
                    const LinearForm &hi_src = w > 0 ? prev[k].upper : prev[k].lower;
                    for ( std::size_t x = 0; x < n; ++x )
                    {
                        neuron.lower.coeffs[x] += w * lo_src.coeffs[x];
                        neuron.upper.coeffs[x] += w * hi_src.coeffs[x];
                    }
                    neuron.lower.constant += w * lo_src.constant;
                    neuron.upper.constant += w * hi_src.constant;
                }
                break;
            case LayerKind::ReLU:
            {
                const Interval b = prev[j].concrete;
                if ( b.lo >= 0.0 )
                {
                    neuron.lower = prev[j].lower;
                    neuron.upper = prev[j].upper;
                }
                else if ( b.hi <= 0.0 )
                {
                    neuron.lower = LinearForm::constant_form(n, 0.0);
                    neuron.upper = LinearForm::constant_form(n, 0.0);
                }
                else
                {
                    const double lambda = b.hi / (b.hi - b.lo);
                    neuron.lower = scaled(prev[j].lower, lambda, 0.0);
                    neuron.upper = scaled(prev[j].upper, lambda, -lambda * b.lo);
                }
                break;
            }
            case LayerKind::Sign:
                std::tie(neuron.lower, neuron.upper) = sign_symbolic(prev[j].lower, prev[j].upper, prev[j].concrete);
                break;
            case LayerKind::Max:
                neuron.lower = LinearForm::constant_form(n, stepped[j].lo);
                neuron.upper = LinearForm::constant_form(n, stepped[j].hi);
                break;
            }
            Interval derived{ neuron.lower.min_over(box), neuron.upper.max_over(box) };
            neuron.concrete = tighten(tighten(known_at(known, i, j), stepped[j]), derived);
        }
        out.layers.push_back(std::move(cur));
    }
    return out;
}

bool HalfPlane::holds(double b, double f, double slack) const
{
    const double line = slope * b + offset;
    return side == Side::Below ? f <= line + slack : f >= line - slack;
}

bool TrapezoidRelaxation::contains(double b, double f, double slack) const
{
    if ( b < l - slack || b > u + slack )
        return false;
    return std::all_of(half_planes.begin(), half_planes.end(),
                       [&](const HalfPlane &h) { return h.holds(b, f, slack); });
}

TrapezoidRelaxation trapezoid(double l, double u)
{
    if ( !(l < 0.0 && u >= 0.0) || !std::isfinite(l) || !std::isfinite(u) )
        throw PreconditionError("trapezoid: needs finite l < 0 <= u");
    TrapezoidRelaxation t{ l, u, {} };
    t.half_planes.push_back({ HalfPlane::Side::Below, 0.0, 1.0 });
    t.half_planes.push_back({ HalfPlane::Side::Above, 0.0, -1.0 });
    t.half_planes.push_back({ HalfPlane::Side::Below, 2.0 / -l, 1.0 });
    if ( u > 0.0 )
        t.half_planes.push_back({ HalfPlane::Side::Above, 2.0 / u, -1.0 });
    return t;
}

namespace {

// LP optima sit on bounds up to the simplex tolerances; widen by this much.
constexpr double kLpSlack = 1e-8;

double widen_down(double v) { return v - kLpSlack * std::max(1.0, std::fabs(v)); }
double widen_up(double v) { return v + kLpSlack * std::max(1.0, std::fabs(v)); }

void bound_variable(LinearCore &lp, VariableId x, Interval range)
{
    lp.tighten_bounds(x, std::isfinite(range.lo) ? std::optional<double>(range.lo) : std::nullopt,
                      std::isfinite(range.hi) ? std::optional<double>(range.hi) : std::nullopt);
}

} // namespace

std::optional<LayerBounds> lp_relax_tighten(const Network &net, std::span<const Interval> input_box,
                                            const LayerBounds *known, const LpRelaxOptions &options)
{
    LayerBounds bounds;
    bounds.push_back(input_layer(net, input_box, known));

    LinearCore lp;
    std::vector<std::vector<VariableId>> vars;
    {
        std::vector<VariableId> inputs;
        for ( const Interval &range : bounds.front() )
        {
            VariableId x = lp.declare_variable();
            bound_variable(lp, x, range);
            inputs.push_back(x);
        }
        vars.push_back(std::move(inputs));
    }

    for ( std::size_t i = 1; i < net.layers.size(); ++i )
    {
        const Layer &layer = net.layers[i];
        const std::vector<VariableId> &prev = vars.back();
        const std::vector<Interval> &prev_bounds = bounds.back();
        std::vector<Interval> cur = interval_step(layer, prev_bounds);
        for ( std::size_t j = 0; j < cur.size(); ++j )
            cur[j] = tighten(cur[j], known_at(known, i, j));

        std::vector<VariableId> layer_vars;
        for ( std::size_t j = 0; j < layer.size; ++j )
        {
            VariableId f = lp.declare_variable();
            layer_vars.push_back(f);
            bound_variable(lp, f, cur[j]);
            switch ( layer.kind )
            {
            case LayerKind::Input:
                throw PreconditionError("lp_relax_tighten: input layer in the middle of the network");
            case LayerKind::WeightedSum:
            {
                LinearEquation eq;
                eq.add(f, 1.0);
                for ( std::size_t k = 0; k < prev.size(); ++k )
                    if ( layer.weights[j][k] != 0.0 )
                        eq.add(prev[k], -layer.weights[j][k]);
                eq.constant = layer.biases[j];
                lp.assert_equation(std::move(eq));
                break;
            }
            case LayerKind::ReLU:
            {
                const VariableId b = prev[j];
                const Interval range = prev_bounds[j];
                if ( range.lo >= 0.0 )
                    lp.assert_equation(LinearEquation{ { { f, 1.0 }, { b, -1.0 } }, 0.0 });
                else if ( range.hi <= 0.0 )
                    lp.tighten_bounds(f, 0.0, 0.0);
                else
                {
                    // Triangle: f >= 0, f >= b, f <= u (b - l) / (u - l).
                    const double lambda = range.hi / (range.hi - range.lo);
                    lp.tighten_lower(f, 0.0);
                    lp.assert_inequality({ { f, 1.0 }, { b, -1.0 } }, Relation::GreaterEq, 0.0);
                    if ( std::isfinite(lambda) && std::isfinite(range.lo) )
                        lp.assert_inequality({ { f, 1.0 }, { b, -lambda } }, Relation::LessEq, -lambda * range.lo);
                }
                break;
            }
            case LayerKind::Sign:
            {
                const VariableId b = prev[j];
                const Interval range = prev_bounds[j];
                if ( range.lo >= 0.0 || range.hi < 0.0 || !std::isfinite(range.lo) || !std::isfinite(range.hi) )
                    break; // fixed phase, or nothing better than [-1, 1]
                for ( const HalfPlane &h : trapezoid(range.lo, range.hi).half_planes )
                {
                    if ( h.slope == 0.0 )
                        continue; // the f in [-1, 1] box is already a variable bound
                    lp.assert_inequality({ { f, 1.0 }, { b, -h.slope } },
                                         h.side == HalfPlane::Side::Below ? Relation::LessEq : Relation::GreaterEq,
                                         h.offset);
                }
                break;
            }
            case LayerKind::Max:
                for ( std::size_t s : layer.sources[j] )
                    lp.assert_inequality({ { f, 1.0 }, { prev[s - 1], -1.0 } }, Relation::GreaterEq, 0.0);
                break;
            }
        }

        // Over this relaxation the extreme values of a ReLU or sign output
        // are exactly its interval image of the (already tightened) input
        // range, so only affine and max neurons need LP calls.
        if ( layer.kind == LayerKind::WeightedSum || layer.kind == LayerKind::Max )
        {
            for ( std::size_t j = 0; j < layer.size; ++j )
            {
                if ( options.should_stop && options.should_stop() )
                {
                    vars.push_back(layer_vars);
                    bounds.push_back(cur);
                    for ( std::size_t rest = i + 1; rest < net.layers.size(); ++rest )
                    {
                        std::vector<Interval> next = interval_step(net.layers[rest], bounds.back());
                        for ( std::size_t k = 0; k < next.size(); ++k )
                            next[k] = tighten(next[k], known_at(known, rest, k));
                        bounds.push_back(std::move(next));
                    }
                    return bounds;
                }
                const VariableId x = layer_vars[j];
                OptimizeResult lo = lp.optimize({ { x, 1.0 } }, Direction::Minimize);
                if ( lo.status == OptimizeResult::Status::Infeasible )
                    return std::nullopt;
                if ( lo.status == OptimizeResult::Status::Optimal )
                    cur[j] = tighten(cur[j], { widen_down(lo.value), kInfinity });
                OptimizeResult hi = lp.optimize({ { x, 1.0 } }, Direction::Maximize);
                if ( hi.status == OptimizeResult::Status::Infeasible )
                    return std::nullopt;
                if ( hi.status == OptimizeResult::Status::Optimal )
                    cur[j] = tighten(cur[j], { -kInfinity, widen_up(hi.value) });
                bound_variable(lp, x, cur[j]);
            }
        }
        vars.push_back(std::move(layer_vars));
        bounds.push_back(std::move(cur));
    }
    return bounds;
}

} // namespace bnnv::nlr
