// SPDX-License-Identifier: Apache-2.0
#include "oracle.hpp"
#include "random_queries.hpp"

#include "bnnv/engine.hpp"
#include "bnnv/plconstraints.hpp"
#include "bnnv/properties.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace bnnv;

namespace {

constexpr VariableId B{ 0 };
constexpr VariableId F{ 1 };

struct Bounds
{
    std::vector<double> lo{ -kInfinity, -1.0 };
    std::vector<double> hi{ kInfinity, 1.0 };

    BoundsView view() const { return { lo, hi }; }
};

} // namespace

TEST(Sign, IsSatisfied)
{
    const PlConstraint c = SignConstraint{ B, F };
    EXPECT_FALSE(is_satisfied(c, { 1.0, -1.0 }));
    EXPECT_TRUE(is_satisfied(c, { 1.0, 1.0 }));
    EXPECT_TRUE(is_satisfied(c, { 0.0, 1.0 }));
    EXPECT_FALSE(is_satisfied(c, { 0.0, -1.0 }));
    EXPECT_TRUE(is_satisfied(c, { -3.0, -1.0 }));
}

TEST(Sign, Corrections)
{
    const PlConstraint c = SignConstraint{ B, F };
    using Out = std::vector<std::pair<VariableId, double>>;
    EXPECT_EQ(corrections(c, { 1.0, -1.0 }), (Out{ { F, 1.0 } }));
    EXPECT_EQ(corrections(c, { -0.5, 1.0 }), (Out{ { F, -1.0 } }));
}

TEST(Relu, Corrections)
{
    const PlConstraint c = ReluConstraint{ B, F };
    using Out = std::vector<std::pair<VariableId, double>>;
    EXPECT_EQ(corrections(c, { -1.0, 3.0 }), (Out{ { F, 0.0 }, { B, 3.0 } }));
    EXPECT_FALSE(is_satisfied(c, { -1.0, 3.0 }));
    EXPECT_TRUE(is_satisfied(c, { -1.0, 0.0 }));
    EXPECT_TRUE(is_satisfied(c, { 2.5, 2.5 }));
}

TEST(Corrections, AlwaysRepair)
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    LinearCore core;
    const VariableId x = core.declare_variable(), y = core.declare_variable(), f = core.declare_variable();
    const MaxConstraint m = make_max_constraint(core, f, { x, y });
    const std::vector<PlConstraint> all{ SignConstraint{ x, f }, ReluConstraint{ x, f }, m };
    for ( int i = 0; i < 2000; ++i )
    {
        Assignment a(core.variable_count());
        for ( double &v : a )
            v = u(rng);
        a[x.index] = i % 7 == 0 ? 0.0 : a[x.index];
        for ( const PlConstraint &c : all )
            for ( const auto &[var, value] : corrections(c, a) )
            {
                Assignment fixed = a;
                fixed[var.index] = value;
                EXPECT_TRUE(is_satisfied(c, fixed, 0.0));
            }
    }
}

TEST(Sign, PhaseFromBounds)
{
    const SignConstraint c{ B, F };
    Bounds b;
    EXPECT_EQ(phase_from_bounds(c, b.view()), SignPhase::Unfixed);
    b.lo[0] = -1.0;
    b.hi[0] = 1.0;
    EXPECT_EQ(phase_from_bounds(c, b.view()), SignPhase::Unfixed);

    Bounds pos;
    pos.lo[0] = 0.2;
    EXPECT_EQ(phase_from_bounds(c, pos.view()), SignPhase::Positive);
    Bounds zero;
    zero.lo[0] = 0.0;
    EXPECT_EQ(phase_from_bounds(c, zero.view()), SignPhase::Positive);
    Bounds f_up;
    f_up.hi[1] = 0.9;
    EXPECT_EQ(phase_from_bounds(c, f_up.view()), SignPhase::Negative);
    Bounds f_lo;
    f_lo.lo[1] = -0.5;
    EXPECT_EQ(phase_from_bounds(c, f_lo.view()), SignPhase::Positive);
    Bounds neg;
    neg.hi[0] = -1e-3;
    EXPECT_EQ(phase_from_bounds(c, neg.view()), SignPhase::Negative);
    Bounds at_zero;
    at_zero.hi[0] = 0.0;
    EXPECT_EQ(phase_from_bounds(c, at_zero.view()), SignPhase::Unfixed);
}

TEST(Relu, PhaseFromBounds)
{
    const ReluConstraint c{ B, F };
    Bounds b;
    b.lo = { -1.0, 0.0 };
    b.hi = { 1.0, 1.0 };
    EXPECT_EQ(phase_from_bounds(c, b.view()), ReluPhase::Unfixed);
    b.lo[0] = 0.0;
    EXPECT_EQ(phase_from_bounds(c, b.view()), ReluPhase::Active);
    b.lo = { -2.0, 0.0 };
    b.hi = { -0.5, 1.0 };
    EXPECT_EQ(phase_from_bounds(c, b.view()), ReluPhase::Inactive);
    b.hi = { 1.0, 0.0 };
    EXPECT_EQ(phase_from_bounds(c, b.view()), ReluPhase::Inactive);
}

TEST(Sign, PhaseMonotoneUnderTightening)
{
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const SignConstraint c{ B, F };
    for ( int run = 0; run < 500; ++run )
    {
        Bounds b;
        b.lo[0] = -4.0;
        b.hi[0] = 4.0;
        SignPhase seen = SignPhase::Unfixed;
        for ( int step = 0; step < 20; ++step )
        {
            const double t = u(rng);
            if ( u(rng) < 0.5 )
                b.lo[0] = std::max(b.lo[0], b.lo[0] + t * (b.hi[0] - b.lo[0]) * 0.5);
            else
                b.hi[0] = std::min(b.hi[0], b.hi[0] - t * (b.hi[0] - b.lo[0]) * 0.5);
            const SignPhase now = phase_from_bounds(c, b.view());
            if ( seen != SignPhase::Unfixed )
                EXPECT_EQ(now, seen);
            seen = now;
        }
    }
}

TEST(SplitRecipes, Sign)
{
    const auto cases = split_recipes(SignConstraint{ B, F }, 1e-6);
    ASSERT_EQ(cases.size(), 2u);
    using T = BoundType;
    EXPECT_EQ(cases[0].bounds,
              (std::vector<BoundTightening>{ { B, T::Upper, -1e-6 }, { F, T::Lower, -1.0 }, { F, T::Upper, -1.0 } }));
    EXPECT_TRUE(cases[0].equations.empty());
    EXPECT_EQ(cases[1].bounds,
              (std::vector<BoundTightening>{ { B, T::Lower, 0.0 }, { F, T::Lower, 1.0 }, { F, T::Upper, 1.0 } }));
    EXPECT_TRUE(cases[1].equations.empty());
}

TEST(SplitRecipes, Relu)
{
    const auto cases = split_recipes(ReluConstraint{ B, F }, 1e-6);
    ASSERT_EQ(cases.size(), 2u);
    using T = BoundType;
    EXPECT_EQ(cases[0].bounds,
              (std::vector<BoundTightening>{ { B, T::Upper, 0.0 }, { F, T::Lower, 0.0 }, { F, T::Upper, 0.0 } }));
    EXPECT_EQ(cases[1].bounds, (std::vector<BoundTightening>{ { B, T::Lower, 0.0 } }));
    ASSERT_EQ(cases[1].equations.size(), 1u);
    EXPECT_EQ(cases[1].equations[0], LinearEquation({ { F, 1.0 }, { B, -1.0 } }, 0.0));
}

TEST(SplitRecipes, MaxCasesMatchEnumeration)
{
    // f = max(x1, x2) over boxes; each case pins f to one source. Feasibility
    // of "f <= t" must equal the union of the two cases.
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for ( int trial = 0; trial < 200; ++trial )
    {
        LinearCore core;
        const VariableId x1 = core.declare_variable(), x2 = core.declare_variable(), f = core.declare_variable();
        const double a = u(rng), b = u(rng), t = u(rng);
        core.tighten_bounds(x1, std::min(a, 0.0) - 1.0, std::min(a, 0.0) + 1.0);
        core.tighten_bounds(x2, b - 0.5, b + 0.5);
        core.tighten_upper(f, t);
        const MaxConstraint m = make_max_constraint(core, f, { x1, x2 });
        const auto cases = split_recipes(m, 1e-6);
        ASSERT_EQ(cases.size(), 2u);

        bool any = false;
        for ( std::size_t i = 0; i < cases.size(); ++i )
        {
            LinearCore branch = core;
            if ( apply_case(branch, cases[i]) == BoundStatus::Consistent )
            {
                const auto r = branch.find_feasible();
                if ( r.feasible() )
                {
                    any = true;
                    const PlConstraint c = m;
                    EXPECT_TRUE(is_satisfied(c, r.assignment));
                    EXPECT_NEAR(r.assignment[f.index], r.assignment[m.sources[i].index], 1e-6);
                }
            }
        }
        // Exact answer: some point of the box has max(x1, x2) <= t.
        const bool expected = core.lower(x1) <= t && core.lower(x2) <= t;
        EXPECT_EQ(any, expected) << "trial " << trial;
    }
}

TEST(Entailed, ReluAndMax)
{
    Bounds b;
    b.lo = { -2.0, -5.0 };
    b.hi = { 3.0, 10.0 };
    const auto relu = entailed_tightenings(ReluConstraint{ B, F }, b.view());
    EXPECT_NE(std::find(relu.begin(), relu.end(), BoundTightening{ F, BoundType::Lower, 0.0 }), relu.end());
    EXPECT_NE(std::find(relu.begin(), relu.end(), BoundTightening{ F, BoundType::Upper, 3.0 }), relu.end());
}

// SAT(q) equals SAT(case A) or SAT(case B) for the first constraint, using the
// brute-force oracle on q and the engine on each branch.
TEST(SplitRecipes, EquiSatisfiableOnRandomQueries)
{
    std::mt19937_64 rng(99);
    randomq::Options opt;
    opt.max_pl = 5;
    EngineConfig cfg;
    cfg.lp_relax = false;
    cfg.sbt = false;
    int checked = 0;
    for ( int trial = 0; trial < 60; ++trial )
    {
        const auto q = randomq::random_query(rng, opt);
        const QueryState base = compile(q.net, q.prop, cfg);
        if ( base.pl.empty() )
            continue;
        bool any = false;
        for ( const CaseSplit &cs : split_recipes(base.pl.front(), cfg.epsilon) )
        {
            QueryState branch = base;
            if ( apply_case(branch.linear, cs) == BoundStatus::Inconsistent )
                continue;
            any = any || Engine(std::move(branch)).solve().kind == VerdictKind::Sat;
        }
        const bool expected = oracle::brute_force(q.net, q.prop) == oracle::Answer::Sat;
        EXPECT_EQ(any, expected) << "trial " << trial;
        ++checked;
    }
    EXPECT_GT(checked, 40);
}
