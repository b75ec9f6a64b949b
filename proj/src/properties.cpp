// SPDX-License-Identifier: Apache-2.0
#include "bnnv/properties.hpp"

#include "bnnv/error.hpp"
#include "bnnv/network_json.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace bnnv {

using nlohmann::json;
using namespace json_detail;

std::string IoVariable::name() const
{
    return (side == Side::Input ? "x" : "y") + std::to_string(index + 1);
}

IoVariable IoVariable::parse(const std::string &name)
{
    auto bad = [&] { return ParseError("bad variable name '" + name + "' (expected x<i> or y<j>, 1-based)"); };
    if ( name.size() < 2 || (name[0] != 'x' && name[0] != 'y') )
        throw bad();
    std::size_t index = 0;
    for ( std::size_t i = 1; i < name.size(); ++i )
    {
        if ( name[i] < '0' || name[i] > '9' || index > 1'000'000'000 )
            throw bad();
        index = index * 10 + static_cast<std::size_t>(name[i] - '0');
    }
    if ( index == 0 )
        throw bad();
    return { name[0] == 'x' ? Side::Input : Side::Output, index - 1 };
}

double IoInequality::lhs(std::span<const double> inputs, std::span<const double> outputs) const
{
    double sum = 0.0;
    for ( const auto &[v, c] : terms )
        sum += c * (v.side == IoVariable::Side::Input ? inputs[v.index] : outputs[v.index]);
    return sum;
}

bool IoInequality::holds(std::span<const double> inputs, std::span<const double> outputs, double slack) const
{
    const double v = lhs(inputs, outputs);
    switch ( rel )
    {
    case Relation::LessEq:
        return v <= rhs + slack;
    case Relation::GreaterEq:
        return v >= rhs - slack;
    case Relation::Equal:
        return std::fabs(v - rhs) <= slack;
    }
    return false;
}

namespace {

std::string_view symbol(Relation rel)
{
    switch ( rel )
    {
    case Relation::LessEq:
        return "<=";
    case Relation::GreaterEq:
        return ">=";
    case Relation::Equal:
        return "==";
    }
    return "?";
}

} // namespace

std::string IoInequality::describe() const
{
    std::ostringstream out;
    bool first = true;
    for ( const auto &[v, c] : terms )
    {
        out << (first ? "" : " + ") << c << "*" << v.name();
        first = false;
    }
    if ( first )
        out << "0";
    out << " " << symbol(rel) << " " << rhs;
    return out.str();
}

namespace {

void check_indices(const IoInequality &ineq, const Network &net, const char *where)
{
    for ( const auto &[v, c] : ineq.terms )
    {
        const std::size_t limit = v.side == IoVariable::Side::Input ? net.input_size() : net.output_size();
        if ( v.index >= limit )
            throw PreconditionError(std::string(where) + ": " + v.name() + " is out of range (network has " +
                                    std::to_string(limit) +
                                    (v.side == IoVariable::Side::Input ? " inputs)" : " outputs)"));
    }
}

std::optional<double> finite(double v)
{
    return std::isfinite(v) ? std::optional<double>(v) : std::nullopt;
}

} // namespace

QueryState compile(const Network &net, const Property &prop, const EngineConfig &cfg)
{
    cfg.validate();
    require_valid(net);
    if ( prop.input_box.size() != net.input_size() )
        throw PreconditionError("input box has " + std::to_string(prop.input_box.size()) +
                                " entries, network has " + std::to_string(net.input_size()) + " inputs");
    for ( const IoInequality &ineq : prop.input_linear )
    {
        check_indices(ineq, net, "input_linear");
        for ( const auto &term : ineq.terms )
            if ( term.first.side != IoVariable::Side::Input )
                throw PreconditionError("input_linear: " + term.first.name() + " is not an input");
    }
    for ( const IoInequality &ineq : prop.output_linear )
        check_indices(ineq, net, "output_linear");
    if ( cfg.lp_relax || cfg.sbt )
        for ( std::size_t i = 0; i < prop.input_box.size(); ++i )
            if ( !std::isfinite(prop.input_box[i].lo) || !std::isfinite(prop.input_box[i].hi) )
                throw ConfigError("x" + std::to_string(i + 1) +
                                  " is unbounded; LP relaxation and SBT need a finite input box");

    auto network = std::make_shared<const Network>(cfg.merge_ws ? merge_weighted_sums(net) : net);

    QueryState q;
    q.config = cfg;
    NetworkEncoding enc;
    enc.network = network;
    enc.source = std::make_shared<const Network>(net);
    // Merging collapses each run of weighted sums into the run's last layer.
    for ( std::size_t i = 0; i < net.layers.size(); ++i )
    {
        const bool merged_away = cfg.merge_ws && net.layers[i].kind == LayerKind::WeightedSum &&
                                 i + 1 < net.layers.size() && net.layers[i + 1].kind == LayerKind::WeightedSum;
        if ( !merged_away )
            enc.source_layer.push_back(i);
    }
    if ( enc.source_layer.size() != network->layers.size() )
        throw NumericalError("compile: merged network does not line up with its source");
    for ( std::size_t i = 0; i < network->layers.size(); ++i )
    {
        const Layer &layer = network->layers[i];
        std::vector<VariableId> vars;
        for ( std::size_t j = 0; j < layer.size; ++j )
            vars.push_back(q.linear.declare_variable());

        switch ( layer.kind )
        {
        case LayerKind::Input:
            for ( std::size_t j = 0; j < layer.size; ++j )
                q.linear.tighten_bounds(vars[j], finite(prop.input_box[j].lo), finite(prop.input_box[j].hi));
            break;
        case LayerKind::WeightedSum:
        {
            const auto &prev = enc.neurons.back();
            for ( std::size_t j = 0; j < layer.size; ++j )
            {
                LinearEquation eq;
                eq.add(vars[j], 1.0);
                for ( std::size_t k = 0; k < prev.size(); ++k )
                    if ( layer.weights[j][k] != 0.0 )
                        eq.add(prev[k], -layer.weights[j][k]);
                eq.constant = layer.biases[j];
                q.linear.assert_equation(std::move(eq));
            }
            break;
        }
        case LayerKind::ReLU:
            for ( std::size_t j = 0; j < layer.size; ++j )
            {
                q.linear.tighten_lower(vars[j], 0.0);
                q.add_constraint(ReluConstraint{ enc.neurons.back()[j], vars[j] });
            }
            break;
        case LayerKind::Sign:
            for ( std::size_t j = 0; j < layer.size; ++j )
            {
                q.linear.tighten_bounds(vars[j], -1.0, 1.0);
                q.add_constraint(SignConstraint{ enc.neurons.back()[j], vars[j] });
            }
            break;
        case LayerKind::Max:
            for ( std::size_t j = 0; j < layer.size; ++j )
            {
                std::vector<VariableId> sources;
                for ( std::size_t s : layer.sources[j] )
                    sources.push_back(enc.neurons.back()[s - 1]);
                q.add_constraint(make_max_constraint(q.linear, vars[j], std::move(sources)));
            }
            break;
        }
        enc.neurons.push_back(std::move(vars));
    }

    auto assert_io = [&](const IoInequality &ineq) {
        std::map<VariableId, double> coeffs;
        for ( const auto &[v, c] : ineq.terms )
        {
            const VariableId x = v.side == IoVariable::Side::Input ? enc.inputs()[v.index] : enc.outputs()[v.index];
            coeffs[x] += c;
        }
        std::erase_if(coeffs, [](const auto &t) { return t.second == 0.0; });
        if ( coeffs.empty() )
        {
            // 0 (rel) rhs: either vacuous or a contradiction.
            const bool holds = ineq.rel == Relation::LessEq ? 0.0 <= ineq.rhs
                               : ineq.rel == Relation::GreaterEq ? 0.0 >= ineq.rhs
                                                                 : ineq.rhs == 0.0;
            if ( !holds )
                q.linear.tighten_bounds(enc.inputs().front(), 1.0, 0.0);
            return;
        }
        q.linear.assert_inequality(coeffs, ineq.rel, ineq.rhs);
    };
    for ( const IoInequality &ineq : prop.input_linear )
        assert_io(ineq);
    for ( const IoInequality &ineq : prop.output_linear )
        assert_io(ineq);

    q.encoding = std::move(enc);
    return q;
}

std::optional<std::size_t> strict_argmax(std::span<const double> values)
{
    if ( values.empty() )
        return std::nullopt;
    const auto best = std::max_element(values.begin(), values.end());
    const std::size_t index = static_cast<std::size_t>(best - values.begin());
    for ( std::size_t i = 0; i < values.size(); ++i )
        if ( i != index && values[i] == *best )
            return std::nullopt;
    return index;
}

std::vector<std::pair<std::size_t, Property>> robustness_queries(const Network &net, const RobustnessSpec &spec)
{
    require_valid(net);
    if ( spec.sample.size() != net.input_size() )
        throw PreconditionError("sample has " + std::to_string(spec.sample.size()) + " entries, network has " +
                                std::to_string(net.input_size()) + " inputs");
    if ( !(spec.delta >= 0.0) )
        throw PreconditionError("delta must be non-negative");
    if ( spec.true_label < 1 || spec.true_label > net.output_size() )
        throw PreconditionError("true_label " + std::to_string(spec.true_label) + " is outside [1, " +
                                std::to_string(net.output_size()) + "]");
    const std::vector<double> outputs = evaluate(net, spec.sample);
    const auto label = strict_argmax(outputs);
    if ( !label || *label + 1 != spec.true_label )
        throw PreconditionError("sample is not classified as label " + std::to_string(spec.true_label) +
                                (label ? " (network says " + std::to_string(*label + 1) + ")" : " (tie for the top)"));

    Property base;
    for ( double s : spec.sample )
    {
        nlr::Interval box{ s - spec.delta, s + spec.delta };
        if ( spec.domain_clip )
            box = nlr::tighten(box, *spec.domain_clip);
        if ( box.lo > box.hi )
            throw PreconditionError("sample lies outside the clipping domain");
        base.input_box.push_back(box);
    }

    std::vector<std::pair<std::size_t, Property>> out;
    const std::size_t t = spec.true_label - 1;
    for ( std::size_t j = 0; j < net.output_size(); ++j )
    {
        if ( j == t )
            continue;
        Property p = base;
        p.output_linear.push_back({ { { { IoVariable::Side::Output, j }, 1.0 }, { { IoVariable::Side::Output, t }, -1.0 } },
                                    Relation::GreaterEq,
                                    spec.margin });
        out.emplace_back(j + 1, std::move(p));
    }
    return out;
}

ReplayResult replay(const Network &net, const Property &prop, std::span<const double> inputs, double tolerance)
{
    auto reject = [](std::string reason) { return ReplayResult{ false, std::move(reason) }; };
    if ( inputs.size() != net.input_size() || prop.input_box.size() != net.input_size() )
        return reject("witness has " + std::to_string(inputs.size()) + " inputs, network expects " +
                      std::to_string(net.input_size()));
    for ( std::size_t i = 0; i < inputs.size(); ++i )
    {
        if ( !std::isfinite(inputs[i]) )
            return reject("x" + std::to_string(i + 1) + " is not a finite number");
        if ( !prop.input_box[i].contains(inputs[i], tolerance) )
        {
            std::ostringstream out;
            out << "x" << i + 1 << " = " << inputs[i] << " outside [" << prop.input_box[i].lo << ", "
                << prop.input_box[i].hi << "]";
            return reject(out.str());
        }
    }
    const std::vector<double> outputs = evaluate(net, inputs);
    for ( const IoInequality &ineq : prop.input_linear )
        if ( !ineq.holds(inputs, outputs, tolerance) )
            return reject("input constraint violated: " + ineq.describe());
    for ( const IoInequality &ineq : prop.output_linear )
        if ( !ineq.holds(inputs, outputs, tolerance) )
        {
            std::ostringstream out;
            out << "output constraint violated: " << ineq.describe() << " (lhs " << ineq.lhs(inputs, outputs) << ")";
            return reject(out.str());
        }
    return { true, {} };
}

namespace {

Relation parse_relation(const json &value, const std::string &origin, const std::string &path)
{
    if ( value.is_string() )
    {
        const std::string s = value.get<std::string>();
        if ( s == "<=" )
            return Relation::LessEq;
        if ( s == ">=" )
            return Relation::GreaterEq;
        if ( s == "==" || s == "=" )
            return Relation::Equal;
    }
    throw ParseError(origin + ": field '" + path + "': expected one of \"<=\", \">=\", \"==\"");
}

std::vector<IoInequality> parse_inequalities(const json &doc, const char *key, const std::string &origin)
{
    std::vector<IoInequality> out;
    auto it = doc.find(key);
    if ( it == doc.end() || it->is_null() )
        return out;
    const json &list = array(*it, origin, key);
    for ( std::size_t i = 0; i < list.size(); ++i )
    {
        const std::string path = std::string(key) + "[" + std::to_string(i) + "]";
        IoInequality ineq;
        const json &coeffs = member(list[i], "coeffs", origin, path);
        if ( !coeffs.is_object() )
            throw ParseError(origin + ": field '" + path + ".coeffs': expected an object");
        for ( const auto &[name, c] : coeffs.items() )
        {
            const std::string cpath = path + ".coeffs." + name;
            IoVariable v;
            try
            {
                v = IoVariable::parse(name);
            }
            catch ( const ParseError &e )
            {
                throw ParseError(origin + ": field '" + cpath + "': " + e.what());
            }
            ineq.terms.emplace_back(v, number(c, origin, cpath));
        }
        ineq.rel = parse_relation(member(list[i], "rel", origin, path), origin, path + ".rel");
        ineq.rhs = number(member(list[i], "rhs", origin, path), origin, path + ".rhs");
        out.push_back(std::move(ineq));
    }
    return out;
}

json inequalities_to_json(const std::vector<IoInequality> &list)
{
    json out = json::array();
    for ( const IoInequality &ineq : list )
    {
        json coeffs = json::object();
        for ( const auto &[v, c] : ineq.terms )
            coeffs[v.name()] = c;
        out.push_back({ { "coeffs", coeffs }, { "rel", std::string(symbol(ineq.rel)) }, { "rhs", ineq.rhs } });
    }
    return out;
}

json bound_to_json(double v)
{
    return std::isfinite(v) ? json(v) : json(nullptr);
}

nlr::Interval parse_interval(const json &value, const std::string &origin, const std::string &path)
{
    const json &pair = array(value, origin, path);
    if ( pair.size() != 2 )
        throw ParseError(origin + ": field '" + path + "': expected [lower, upper]");
    nlr::Interval iv{ bound(pair[0], -kInfinity, origin, path + "[0]"), bound(pair[1], kInfinity, origin, path + "[1]") };
    if ( iv.lo > iv.hi )
        throw ParseError(origin + ": field '" + path + "': lower bound exceeds upper bound");
    return iv;
}

} // namespace

Property property_from_json(const json &doc, const std::string &origin)
{
    if ( !doc.is_object() )
        throw ParseError(origin + ": top level must be an object");
    Property prop;
    const json &box = array(member(doc, "input_box", origin, ""), origin, "input_box");
    for ( std::size_t i = 0; i < box.size(); ++i )
        prop.input_box.push_back(parse_interval(box[i], origin, "input_box[" + std::to_string(i) + "]"));
    prop.input_linear = parse_inequalities(doc, "input_linear", origin);
    prop.output_linear = parse_inequalities(doc, "output_linear", origin);
    return prop;
}

json property_to_json(const Property &prop)
{
    json box = json::array();
    for ( const nlr::Interval &iv : prop.input_box )
        box.push_back({ bound_to_json(iv.lo), bound_to_json(iv.hi) });
    return { { "input_box", box },
             { "input_linear", inequalities_to_json(prop.input_linear) },
             { "output_linear", inequalities_to_json(prop.output_linear) } };
}

Property load_property(const std::filesystem::path &path)
{
    return property_from_json(read_json_file(path), path.string());
}

RobustnessSpec robustness_from_json(const json &doc, const std::string &origin)
{
    if ( !doc.is_object() )
        throw ParseError(origin + ": top level must be an object");
    RobustnessSpec spec;
    const json &sample = array(member(doc, "sample", origin, ""), origin, "sample");
    for ( std::size_t i = 0; i < sample.size(); ++i )
        spec.sample.push_back(number(sample[i], origin, "sample[" + std::to_string(i) + "]"));
    spec.delta = number(member(doc, "delta", origin, ""), origin, "delta");
    if ( spec.delta < 0.0 )
        throw ParseError(origin + ": field 'delta': must be non-negative");
    spec.true_label = unsigned_integer(member(doc, "true_label", origin, ""), origin, "true_label");
    if ( spec.true_label == 0 )
        throw ParseError(origin + ": field 'true_label': labels are 1-based");
    if ( auto it = doc.find("domain_clip"); it != doc.end() )
        spec.domain_clip = it->is_null() ? std::nullopt
                                         : std::optional<nlr::Interval>(parse_interval(*it, origin, "domain_clip"));
    if ( auto it = doc.find("margin"); it != doc.end() )
        spec.margin = number(*it, origin, "margin");
    return spec;
}

json robustness_to_json(const RobustnessSpec &spec)
{
    json doc = { { "sample", spec.sample }, { "delta", spec.delta }, { "true_label", spec.true_label } };
    doc["domain_clip"] =
        spec.domain_clip ? json::array({ bound_to_json(spec.domain_clip->lo), bound_to_json(spec.domain_clip->hi) })
                         : json(nullptr);
    if ( spec.margin != 0.0 )
        doc["margin"] = spec.margin;
    return doc;
}

RobustnessSpec load_robustness(const std::filesystem::path &path)
{
    return robustness_from_json(read_json_file(path), path.string());
}

} // namespace bnnv
