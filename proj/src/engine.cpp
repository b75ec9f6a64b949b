// SPDX-License-Identifier: Apache-2.0
#include "bnnv/engine.hpp"

#include "bnnv/error.hpp"
#include "bnnv/nlr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace bnnv {

void EngineConfig::validate() const
{
    if ( !(epsilon > 0.0) || !std::isfinite(epsilon) )
        throw ConfigError("epsilon must be a positive number, got " + std::to_string(epsilon));
    if ( correction_threshold == 0 )
        throw ConfigError("correction_threshold must be at least 1");
    if ( timeout && timeout->count() < 0.0 )
        throw ConfigError("timeout must not be negative");
}

void QueryState::add_constraint(PlConstraint c)
{
    pl.push_back(std::move(c));
    phases.push_back(std::nullopt);
}

std::size_t QueryState::unfixed_count() const
{
    return static_cast<std::size_t>(std::count(phases.begin(), phases.end(), std::nullopt));
}

CaseSplit fixing_case(const PlConstraint &c, std::size_t case_index, const BoundsView &bounds, double epsilon)
{
    CaseSplit split = split_recipes(c, epsilon).at(case_index);
    if ( const auto *s = std::get_if<SignConstraint>(&c); s && case_index == 0 && bounds.up(s->b) < 0.0 )
        split.bounds.front().value = bounds.up(s->b);
    return split;
}

namespace {

bool improves(double old_value, double new_value, double tolerance)
{
    return std::fabs(new_value - old_value) > tolerance * std::max(1.0, std::fabs(old_value));
}

} // namespace

std::optional<std::size_t> apply_phase_fixing(QueryState &q)
{
    const double tol = q.linear.tolerances().bound;
    std::size_t fixed = 0;
    for ( int round = 0; round < 50; ++round )
    {
        if ( q.linear.propagate_bounds() == BoundStatus::Inconsistent )
            return std::nullopt;
        bool changed = false;
        for ( std::size_t i = 0; i < q.pl.size(); ++i )
        {
            for ( const BoundTightening &t : entailed_tightenings(q.pl[i], BoundsView::of(q.linear)) )
            {
                const double old = t.type == BoundType::Lower ? q.linear.lower(t.variable) : q.linear.upper(t.variable);
                const BoundStatus s = t.type == BoundType::Lower ? q.linear.tighten_lower(t.variable, t.value)
                                                                 : q.linear.tighten_upper(t.variable, t.value);
                if ( s == BoundStatus::Inconsistent )
                    return std::nullopt;
                changed = changed || improves(old, t.value, tol);
            }
            if ( q.phases[i] )
                continue;
            const BoundsView view = BoundsView::of(q.linear);
            if ( auto decided = decided_case(q.pl[i], view) )
            {
                if ( apply_case(q.linear, fixing_case(q.pl[i], *decided, view, q.config.epsilon)) ==
                     BoundStatus::Inconsistent )
                    return std::nullopt;
                q.phases[i] = decided;
                ++fixed;
                changed = true;
            }
        }
        if ( !changed )
            break;
    }
    if ( !q.linear.consistent() )
        return std::nullopt;
    return fixed;
}

namespace {

nlr::LayerBounds known_bounds(const QueryState &q)
{
    nlr::LayerBounds out;
    for ( const auto &layer : q.encoding->neurons )
    {
        std::vector<nlr::Interval> row;
        for ( VariableId x : layer )
            row.push_back({ q.linear.lower(x), q.linear.upper(x) });
        out.push_back(std::move(row));
    }
    return out;
}

bool write_back(QueryState &q, const nlr::LayerBounds &bounds)
{
    const auto &neurons = q.encoding->neurons;
    for ( std::size_t i = 0; i < neurons.size(); ++i )
    {
        for ( std::size_t j = 0; j < neurons[i].size(); ++j )
        {
            const nlr::Interval v = bounds[i][j];
            auto finite = [](double x) { return std::isfinite(x) ? std::optional<double>(x) : std::nullopt; };
            if ( q.linear.tighten_bounds(neurons[i][j], finite(v.lo), finite(v.hi)) == BoundStatus::Inconsistent )
                return false;
        }
    }
    return true;
}

} // namespace

bool apply_symbolic_tightening(QueryState &q)
{
    if ( !q.encoding )
        return true;
    if ( !q.linear.consistent() )
        return false;
    const nlr::LayerBounds known = known_bounds(q);
    for ( const nlr::Interval &x : known.front() )
        if ( !std::isfinite(x.lo) || !std::isfinite(x.hi) )
            return true;
    const nlr::SymbolicBounds symbolic = nlr::symbolic_tighten(*q.encoding->network, known.front(), &known);
    return write_back(q, symbolic.concrete());
}

bool apply_lp_relaxation(QueryState &q, std::stop_token stop)
{
    if ( !q.encoding )
        return true;
    if ( !q.linear.consistent() )
        return false;
    const nlr::LayerBounds known = known_bounds(q);
    nlr::LpRelaxOptions options;
    options.should_stop = [stop] { return stop.stop_requested(); };
    const auto relaxed = nlr::lp_relax_tighten(*q.encoding->network, known.front(), &known, options);
    return relaxed && write_back(q, *relaxed);
}

Assignment assignment_from_inputs(const QueryState &q, std::span<const double> inputs)
{
    if ( !q.encoding )
        throw PreconditionError("assignment_from_inputs: query has no network encoding");
    const double unknown = std::numeric_limits<double>::quiet_NaN();
    Assignment a(q.linear.variable_count(), unknown);
    const NetworkEncoding &enc = *q.encoding;
    const bool from_source = enc.source && enc.source_layer.size() == enc.neurons.size();
    const auto values = evaluate_layers(from_source ? *enc.source : *enc.network, inputs);
    for ( std::size_t i = 0; i < enc.neurons.size(); ++i )
    {
        const std::vector<double> &layer = values[from_source ? enc.source_layer[i] : i];
        for ( std::size_t j = 0; j < layer.size(); ++j )
            a[enc.neurons[i][j].index] = layer[j];
    }

    // Auxiliary variables are each defined by one equation over known ones.
    for ( bool progress = true; progress; )
    {
        progress = false;
        for ( const LinearEquation &eq : q.linear.equations() )
        {
            std::optional<std::pair<VariableId, double>> missing;
            std::size_t count = 0;
            double rest = eq.constant;
            for ( const auto &[x, c] : eq.coefficients )
            {
                if ( std::isnan(a[x.index]) )
                {
                    missing = { x, c };
                    ++count;
                }
                else
                    rest -= c * a[x.index];
            }
            if ( count == 1 && missing->second != 0.0 )
            {
                a[missing->first.index] = rest / missing->second;
                progress = true;
            }
        }
    }
    for ( std::size_t i = 0; i < a.size(); ++i )
        if ( std::isnan(a[i]) )
            a[i] = std::clamp(0.0, q.linear.lowers()[i], std::max(q.linear.lowers()[i], q.linear.uppers()[i]));
    return a;
}

std::vector<double> input_values(const QueryState &q, const Assignment &a)
{
    if ( !q.encoding )
        throw PreconditionError("input_values: query has no network encoding");
    std::vector<double> out;
    for ( VariableId x : q.encoding->inputs() )
        out.push_back(a[x.index]);
    return out;
}

std::string_view to_string(VerdictKind kind)
{
    switch ( kind )
    {
    case VerdictKind::Sat:
        return "sat";
    case VerdictKind::Unsat:
        return "unsat";
    case VerdictKind::Timeout:
        return "timeout";
    }
    return "?";
}

SolveStats &SolveStats::operator+=(const SolveStats &other)
{
    splits += other.splits;
    phases_fixed += other.phases_fixed;
    pivots += other.pivots;
    corrections += other.corrections;
    backtracks += other.backtracks;
    max_depth = std::max(max_depth, other.max_depth);
    return *this;
}

Engine::Engine(QueryState q)
    : _q(std::move(q))
    , _counters(_q.pl.size(), 0)
    , _root(_q.linear)
{
    _q.config.validate();
    _q.phases.resize(_q.pl.size());
}

bool Engine::initialize(std::stop_token stop)
{
    if ( _initialized )
        return _initially_consistent;
    _initialized = true;
    bool ok = _q.linear.consistent();
    if ( ok && _q.config.lp_relax )
        ok = apply_lp_relaxation(_q, stop);
    if ( ok )
        ok = deduce();
    _initially_consistent = ok;
    return ok;
}

bool Engine::deduce()
{
    for ( int round = 0; round < 8; ++round )
    {
        const auto fixed = apply_phase_fixing(_q);
        if ( !fixed )
            return false;
        _stats.phases_fixed += *fixed;
        if ( !_q.config.sbt || !_q.encoding )
            return true;

        const std::vector<double> lo(_q.linear.lowers().begin(), _q.linear.lowers().end());
        const std::vector<double> hi(_q.linear.uppers().begin(), _q.linear.uppers().end());
        if ( !apply_symbolic_tightening(_q) )
            return false;
        bool changed = false;
        const double tol = _q.linear.tolerances().bound;
        for ( std::size_t i = 0; i < lo.size() && !changed; ++i )
            changed = improves(lo[i], _q.linear.lowers()[i], tol) || improves(hi[i], _q.linear.uppers()[i], tol);
        if ( !changed )
            return true;
    }
    return _q.linear.consistent();
}

bool Engine::enter_case(std::size_t constraint, std::size_t case_index)
{
    const CaseSplit split = split_recipes(_q.pl[constraint], _q.config.epsilon).at(case_index);
    if ( apply_case(_q.linear, split) == BoundStatus::Inconsistent )
        return false;
    _q.phases[constraint] = case_index;
    return deduce();
}

bool Engine::split(std::size_t constraint, std::vector<std::size_t> order)
{
    if ( order.empty() )
        throw PreconditionError("split: no case to enter");
    ++_stats.splits;
    std::fill(_counters.begin(), _counters.end(), 0u);
    _trail.push_back({ constraint, std::vector<std::size_t>(order.begin() + 1, order.end()), _q.phases });
    _stats.max_depth = std::max(_stats.max_depth, _trail.size());
    _q.linear.push();
    if ( enter_case(constraint, order.front()) )
        return true;
    return backtrack();
}

bool Engine::backtrack()
{
    std::fill(_counters.begin(), _counters.end(), 0u);
    while ( !_trail.empty() )
    {
        ++_stats.backtracks;
        Branch &top = _trail.back();
        _q.linear.pop();
        _q.phases = top.phases;
        if ( top.pending.empty() )
        {
            _trail.pop_back();
            continue;
        }
        const std::size_t next = top.pending.front();
        top.pending.erase(top.pending.begin());
        _q.linear.push();
        if ( enter_case(top.constraint, next) )
            return true;
    }
    return false;
}

std::vector<std::size_t> Engine::branch_order(std::size_t constraint, const Assignment &a) const
{
    const PlConstraint &c = _q.pl[constraint];
    if ( const auto *m = std::get_if<MaxConstraint>(&c) )
    {
        std::vector<std::size_t> order(m->sources.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
            return a[m->sources[x].index] > a[m->sources[y].index];
        });
        return order;
    }
    const VariableId b = std::holds_alternative<SignConstraint>(c) ? std::get<SignConstraint>(c).b
                                                                   : std::get<ReluConstraint>(c).b;
    if ( a[b.index] >= 0.0 )
        return { 1, 0 };
    return { 0, 1 };
}

Assignment Engine::initial_hint() const
{
    if ( _q.config.seed == 0 )
        return {};
    std::mt19937_64 rng(_q.config.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Assignment hint(_q.linear.variable_count());
    for ( std::size_t i = 0; i < hint.size(); ++i )
    {
        const double lo = _q.linear.lowers()[i];
        const double hi = _q.linear.uppers()[i];
        const double u = unit(rng);
        if ( std::isfinite(lo) && std::isfinite(hi) )
            hint[i] = lo + u * (hi - lo);
        else if ( std::isfinite(lo) )
            hint[i] = lo + u;
        else if ( std::isfinite(hi) )
            hint[i] = hi - u;
        else
            hint[i] = 2.0 * u - 1.0;
    }
    return hint;
}

Assignment Engine::polish(const Assignment &a)
{
    if ( !_q.encoding )
        return a;
    Assignment candidate = assignment_from_inputs(_q, input_values(_q, a));
    if ( _root.satisfies(candidate) )
        return candidate;

    // Re-evaluation flipped a sign whose input sits at 0 up to rounding.
    // Ask for the solver's phase of the earliest flipped sign with some
    // room (later flips may just be its consequences) and repeat.
    std::vector<std::pair<VariableId, double>> margins; // b >= m (m > 0) or b <= m (m < 0)
    auto collect_flip = [&](const Assignment &solver, const Assignment &evaluated) {
        for ( const PlConstraint &c : _q.pl )
        {
            const auto *s = std::get_if<SignConstraint>(&c);
            if ( !s || sign_of(evaluated[s->b.index]) == (solver[s->f.index] > 0.0 ? 1.0 : -1.0) )
                continue;
            if ( std::any_of(margins.begin(), margins.end(), [&](const auto &m) { return m.first == s->b; }) )
                return false;
            margins.emplace_back(s->b, solver[s->f.index] > 0.0 ? _q.config.epsilon : -_q.config.epsilon);
            return true;
        }
        return false;
    };

    Assignment solver = a;
    for ( int round = 0; round < 8 && collect_flip(solver, candidate); ++round )
    {
        _q.linear.push();
        bool ok = true;
        for ( const auto &[b, m] : margins )
            ok = ok && (m > 0 ? _q.linear.tighten_lower(b, m) : _q.linear.tighten_upper(b, m)) == BoundStatus::Consistent;
        FeasibilityResult r;
        if ( ok )
            r = _q.linear.find_feasible(solver);
        _q.linear.pop();
        if ( !r.feasible() )
            break;
        solver = std::move(r.assignment);
        candidate = assignment_from_inputs(_q, input_values(_q, solver));
        if ( _root.satisfies(candidate) )
            return candidate;
    }
    if ( auto nudged = nudge(a) )
        return *nudged;
    return a;
}

std::optional<Assignment> Engine::nudge(const Assignment &a) const
{
    // The branch may pin a sign input to exactly 0. Move the inputs a tiny
    // step along that input's gradient instead; the property's own
    // constraints decide whether the moved point is acceptable.
    std::vector<double> x = input_values(_q, a);
    const auto &inputs = _q.encoding->inputs();
    for ( int round = 0; round < 8; ++round )
    {
        const Assignment evaluated = assignment_from_inputs(_q, x);
        if ( _root.satisfies(evaluated) )
            return evaluated;
        const SignConstraint *flipped = nullptr;
        for ( const PlConstraint &c : _q.pl )
        {
            const auto *s = std::get_if<SignConstraint>(&c);
            if ( s && sign_of(evaluated[s->b.index]) != (a[s->f.index] > 0.0 ? 1.0 : -1.0) )
            {
                flipped = s;
                break;
            }
        }
        if ( !flipped )
            return std::nullopt;

        const double want = a[flipped->f.index] > 0.0 ? 1.0 : -1.0;
        std::vector<double> gradient(x.size());
        double norm = 0.0;
        const double h = 1e-6;
        for ( std::size_t i = 0; i < x.size(); ++i )
        {
            std::vector<double> moved = x;
            moved[i] += h;
            gradient[i] = (assignment_from_inputs(_q, moved)[flipped->b.index] - evaluated[flipped->b.index]) / h;
            norm += gradient[i] * gradient[i];
        }
        if ( norm == 0.0 )
            return std::nullopt;

        bool moved_ok = false;
        for ( double step = 1e-12; step <= 1e-7 && !moved_ok; step *= 10.0 )
        {
            std::vector<double> y = x;
            for ( std::size_t i = 0; i < y.size(); ++i )
                y[i] = std::clamp(y[i] + want * step * gradient[i] / norm, _root.lower(inputs[i]),
                                  std::max(_root.lower(inputs[i]), _root.upper(inputs[i])));
            if ( sign_of(assignment_from_inputs(_q, y)[flipped->b.index]) == want )
            {
                x = std::move(y);
                moved_ok = true;
            }
        }
        if ( !moved_ok )
            return std::nullopt;
    }
    return std::nullopt;
}

Verdict Engine::solve(std::stop_token stop)
{
    using Clock = std::chrono::steady_clock;
    const auto start = Clock::now();
    const auto deadline = _q.config.timeout
                              ? start + std::chrono::duration_cast<Clock::duration>(*_q.config.timeout)
                              : Clock::time_point::max();
    auto expired = [&] { return stop.stop_requested() || Clock::now() >= deadline; };

    Verdict verdict;
    auto finish = [&](VerdictKind kind) {
        verdict.kind = kind;
        _stats.pivots = _q.linear.pivot_count();
        verdict.stats = _stats;
        return verdict;
    };

    if ( expired() )
        return finish(VerdictKind::Timeout);
    if ( !initialize(stop) )
        return finish(VerdictKind::Unsat);

    Assignment hint = initial_hint();
    while ( true )
    {
        if ( expired() )
            return finish(VerdictKind::Timeout);

        FeasibilityResult r = _q.linear.find_feasible(hint);
        if ( !r.feasible() )
        {
            if ( !backtrack() )
                return finish(VerdictKind::Unsat);
            continue;
        }
        Assignment &a = r.assignment;

        std::optional<std::size_t> violated;
        for ( std::size_t i = 0; i < _q.pl.size() && !violated; ++i )
            if ( !_q.phases[i] && !is_satisfied(_q.pl[i], a) )
                violated = i;
        if ( !violated )
        {
            verdict.witness = polish(a);
            return finish(VerdictKind::Sat);
        }

        const std::size_t i = *violated;
        if ( ++_counters[i] >= _q.config.correction_threshold )
        {
            if ( !split(i, branch_order(i, a)) )
                return finish(VerdictKind::Unsat);
            hint = a;
            continue;
        }
        const auto options = corrections(_q.pl[i], a);
        const auto &[variable, value] = options[_counters[i] % options.size()];
        a[variable.index] = value;
        ++_stats.corrections;
        hint = std::move(a);
    }
}

} // namespace bnnv
