// SPDX-License-Identifier: Apache-2.0
#include "bnnv/plconstraints.hpp"

#include "bnnv/network.hpp"

#include <algorithm>
#include <cmath>

namespace bnnv {

namespace {

template <class... Ts>
struct overloaded : Ts...
{
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double max_of(const std::vector<VariableId> &vars, const Assignment &a)
{
    double best = -kInfinity;
    for ( VariableId v : vars )
        best = std::max(best, a[v.index]);
    return best;
}

} // namespace

BoundStatus apply_case(LinearCore &core, const CaseSplit &split)
{
    BoundStatus status = BoundStatus::Consistent;
    for ( const BoundTightening &t : split.bounds )
    {
        BoundStatus s = t.type == BoundType::Lower ? core.tighten_lower(t.variable, t.value)
                                                   : core.tighten_upper(t.variable, t.value);
        if ( s == BoundStatus::Inconsistent )
            status = s;
    }
    for ( const LinearEquation &eq : split.equations )
        core.assert_equation(eq);
    return status;
}

MaxConstraint make_max_constraint(LinearCore &core, VariableId f, std::vector<VariableId> sources)
{
    MaxConstraint c{ f, std::move(sources), {} };
    for ( VariableId s : c.sources )
    {
        VariableId gap = core.declare_variable();
        core.assert_equation(LinearEquation{ { { gap, 1.0 }, { f, -1.0 }, { s, 1.0 } }, 0.0 });
        core.tighten_lower(gap, 0.0);
        c.gaps.push_back(gap);
    }
    return c;
}

bool is_satisfied(const PlConstraint &c, const Assignment &a, double tolerance)
{
    return std::visit(overloaded{
                          [&](const ReluConstraint &r) {
                              return std::fabs(a[r.f.index] - std::max(0.0, a[r.b.index])) <= tolerance;
                          },
                          [&](const SignConstraint &s) {
                              return std::fabs(a[s.f.index] - sign_of(a[s.b.index])) <= tolerance;
                          },
                          [&](const MaxConstraint &m) {
                              return std::fabs(a[m.f.index] - max_of(m.sources, a)) <= tolerance;
                          },
                      },
                      c);
}

std::vector<std::pair<VariableId, double>> corrections(const PlConstraint &c, const Assignment &a)
{
    using Out = std::vector<std::pair<VariableId, double>>;
    return std::visit(overloaded{
                          [&](const ReluConstraint &r) {
                              Out out{ { r.f, std::max(0.0, a[r.b.index]) } };
                              if ( a[r.f.index] >= 0.0 )
                                  out.emplace_back(r.b, a[r.f.index]);
                              return out;
                          },
                          [&](const SignConstraint &s) { return Out{ { s.f, sign_of(a[s.b.index]) } }; },
                          [&](const MaxConstraint &m) { return Out{ { m.f, max_of(m.sources, a) } }; },
                      },
                      c);
}

ReluPhase phase_from_bounds(const ReluConstraint &c, const BoundsView &bounds)
{
    if ( bounds.lo(c.b) >= 0.0 || bounds.lo(c.f) > kPhaseTolerance )
        return ReluPhase::Active;
    if ( bounds.up(c.b) <= 0.0 || bounds.up(c.f) <= 0.0 )
        return ReluPhase::Inactive;
    return ReluPhase::Unfixed;
}

SignPhase phase_from_bounds(const SignConstraint &c, const BoundsView &bounds)
{
    if ( bounds.lo(c.b) >= 0.0 || bounds.lo(c.f) > -1.0 + kPhaseTolerance )
        return SignPhase::Positive;
    if ( bounds.up(c.b) < 0.0 || bounds.up(c.f) < 1.0 - kPhaseTolerance )
        return SignPhase::Negative;
    return SignPhase::Unfixed;
}

std::optional<std::size_t> phase_from_bounds(const MaxConstraint &c, const BoundsView &bounds)
{
    std::optional<std::size_t> alive;
    std::size_t count = 0;
    const double f_lo = bounds.lo(c.f);
    for ( std::size_t i = 0; i < c.sources.size(); ++i )
    {
        if ( bounds.up(c.gaps[i]) <= kPhaseTolerance )
            return i;
        const bool impossible = bounds.up(c.sources[i]) < f_lo - kPhaseTolerance ||
                                bounds.lo(c.gaps[i]) > kPhaseTolerance;
        if ( !impossible )
        {
            alive = i;
            ++count;
        }
    }
    if ( count == 1 )
        return alive;
    return std::nullopt;
}

std::optional<std::size_t> decided_case(const PlConstraint &c, const BoundsView &bounds)
{
    return std::visit(overloaded{
                          [&](const ReluConstraint &r) -> std::optional<std::size_t> {
                              switch ( phase_from_bounds(r, bounds) )
                              {
                              case ReluPhase::Inactive:
                                  return 0;
                              case ReluPhase::Active:
                                  return 1;
                              default:
                                  return std::nullopt;
                              }
                          },
                          [&](const SignConstraint &s) -> std::optional<std::size_t> {
                              switch ( phase_from_bounds(s, bounds) )
                              {
                              case SignPhase::Negative:
                                  return 0;
                              case SignPhase::Positive:
                                  return 1;
                              default:
                                  return std::nullopt;
                              }
                          },
                          [&](const MaxConstraint &m) { return phase_from_bounds(m, bounds); },
                      },
                      c);
}

std::vector<CaseSplit> split_recipes(const PlConstraint &c, double epsilon)
{
    using L = BoundType;
    return std::visit(
        overloaded{
            [&](const ReluConstraint &r) {
                CaseSplit inactive{ { { r.b, L::Upper, 0.0 }, { r.f, L::Lower, 0.0 }, { r.f, L::Upper, 0.0 } }, {} };
                CaseSplit active{ { { r.b, L::Lower, 0.0 } }, { LinearEquation{ { { r.f, 1.0 }, { r.b, -1.0 } }, 0.0 } } };
                return std::vector<CaseSplit>{ inactive, active };
            },
            [&](const SignConstraint &s) {
                CaseSplit negative{ { { s.b, L::Upper, -epsilon }, { s.f, L::Lower, -1.0 }, { s.f, L::Upper, -1.0 } },
                                    {} };
                CaseSplit positive{ { { s.b, L::Lower, 0.0 }, { s.f, L::Lower, 1.0 }, { s.f, L::Upper, 1.0 } }, {} };
                return std::vector<CaseSplit>{ negative, positive };
            },
            [&](const MaxConstraint &m) {
                std::vector<CaseSplit> out;
                for ( VariableId gap : m.gaps )
                    out.push_back(CaseSplit{ { { gap, L::Upper, 0.0 } }, {} });
                return out;
            },
        },
        c);
}

std::vector<BoundTightening> entailed_tightenings(const PlConstraint &c, const BoundsView &bounds)
{
    std::vector<BoundTightening> out;
    auto lower = [&](VariableId x, double v) {
        if ( v > bounds.lo(x) )
            out.push_back({ x, BoundType::Lower, v });
    };
    auto upper = [&](VariableId x, double v) {
        if ( v < bounds.up(x) )
            out.push_back({ x, BoundType::Upper, v });
    };
    std::visit(overloaded{
                   [&](const ReluConstraint &r) {
                       lower(r.f, 0.0);
                       upper(r.f, std::max(0.0, bounds.up(r.b)));
                       upper(r.b, bounds.up(r.f)); // b <= f
                       if ( bounds.lo(r.b) > 0.0 )
                           lower(r.f, bounds.lo(r.b));
                       if ( bounds.lo(r.f) > 0.0 )
                           lower(r.b, bounds.lo(r.f));
                   },
                   [&](const SignConstraint &s) {
                       lower(s.f, -1.0);
                       upper(s.f, 1.0);
                   },
                   [&](const MaxConstraint &m) {
                       double hi = -kInfinity;
                       double lo = -kInfinity;
                       for ( VariableId x : m.sources )
                       {
                           hi = std::max(hi, bounds.up(x));
                           lo = std::max(lo, bounds.lo(x));
                       }
                       upper(m.f, hi);
                       lower(m.f, lo);
                   },
               },
               c);
    return out;
}

std::vector<VariableId> participating_variables(const PlConstraint &c)
{
    return std::visit(overloaded{
                          [](const ReluConstraint &r) { return std::vector<VariableId>{ r.b }; },
                          [](const SignConstraint &s) { return std::vector<VariableId>{ s.b }; },
                          [](const MaxConstraint &m) { return m.sources; },
                      },
                      c);
}

} // namespace bnnv
