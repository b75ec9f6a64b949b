// SPDX-License-Identifier: Apache-2.0
#include "fixtures.hpp"

#include "bnnv/engine.hpp"
#include "bnnv/error.hpp"
#include "bnnv/properties.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace bnnv;

namespace {

EngineConfig no_merge()
{
    EngineConfig cfg;
    cfg.merge_ws = false;
    return cfg;
}

/// 10 outputs; output j is (j - 4.5) * x1 + x2 * [j == 3], so the argmax is
/// label 10 for x1 > 0, label 1 for x1 < 0.
Network ten_classes()
{
    std::vector<std::vector<double>> w(10, std::vector<double>(2, 0.0));
    for ( std::size_t j = 0; j < 10; ++j )
        w[j][0] = static_cast<double>(j) - 4.5;
    w[3][1] = 1.0;
    return { { Layer::input(2), Layer::weighted_sum({ { 1, 0 }, { 0, 1 } }, { 0, 0 }), Layer::sign(2),
               Layer::weighted_sum(w, std::vector<double>(10, 0.0)) },
             "" };
}

/// Two classes over the unit square: y1 - y2 = sign(x1 + x2 - 1) - sign(x1 - x2).
Network two_classes()
{
    return { { Layer::input(2), Layer::weighted_sum({ { 1, 1 }, { 1, -1 } }, { -1, 0 }), Layer::sign(2),
               Layer::weighted_sum({ { 1, -1 }, { -1, 1 } }, { 0.5, 0 }) },
             "" };
}

} // namespace

TEST(IoVariable, Names)
{
    EXPECT_EQ(IoVariable::parse("x3"), (IoVariable{ IoVariable::Side::Input, 2 }));
    EXPECT_EQ(IoVariable::parse("y1"), (IoVariable{ IoVariable::Side::Output, 0 }));
    EXPECT_EQ((IoVariable{ IoVariable::Side::Output, 9 }).name(), "y10");
    for ( const char *bad : { "x0", "z1", "x", "y-1", "x1a", "" } )
        EXPECT_THROW(IoVariable::parse(bad), ParseError) << bad;
}

TEST(Compile, BlockWithoutMerging)
{
    const QueryState q = compile(fixtures::binary_block(), fixtures::block_property(Relation::LessEq, 5.0), no_merge());
    EXPECT_EQ(q.linear.equations().size(), 3u);
    ASSERT_EQ(q.pl.size(), 1u);
    EXPECT_TRUE(std::holds_alternative<SignConstraint>(q.pl[0]));
    const auto &in = q.encoding->inputs();
    EXPECT_EQ(q.linear.lower(in[0]), 1.0);
    EXPECT_EQ(q.linear.upper(in[0]), 2.0);
    EXPECT_EQ(q.linear.lower(in[1]), -1.0);
    EXPECT_EQ(q.linear.upper(in[1]), 1.0);
    EXPECT_EQ(q.linear.upper(q.encoding->outputs()[0]), 5.0);
    const auto &s = std::get<SignConstraint>(q.pl[0]);
    EXPECT_EQ(q.linear.lower(s.f), -1.0);
    EXPECT_EQ(q.linear.upper(s.f), 1.0);
}

TEST(Compile, MergingFusesTheBlock)
{
    const QueryState q = compile(fixtures::binary_block(), fixtures::block_property(Relation::LessEq, 5.0), {});
    EXPECT_EQ(q.linear.equations().size(), 2u);
    const auto &s = std::get<SignConstraint>(q.pl[0]);
    const auto &in = q.encoding->inputs();
    const LinearEquation expected({ { s.b, 1.0 }, { in[0], -0.5 }, { in[1], 0.5 } }, 0.5);
    EXPECT_NE(std::find(q.linear.equations().begin(), q.linear.equations().end(), expected),
              q.linear.equations().end());
}

TEST(Compile, EmptyOutputConstraintIsSat)
{
    Property prop = fixtures::block_property(Relation::LessEq, 0.0);
    prop.output_linear.clear();
    const QueryState q = compile(fixtures::binary_block(), prop, {});
    const Verdict v = Engine(q).solve();
    ASSERT_EQ(v.kind, VerdictKind::Sat);
    EXPECT_TRUE(replay(fixtures::binary_block(), prop, input_values(q, v.witness)));
}

TEST(Compile, RejectsBadProperties)
{
    Property prop = fixtures::block_property(Relation::LessEq, 5.0);
    prop.input_box.pop_back();
    EXPECT_THROW(compile(fixtures::binary_block(), prop, {}), PreconditionError);

    prop = fixtures::block_property(Relation::LessEq, 5.0);
    prop.output_linear.push_back(fixtures::output_bound(1, Relation::LessEq, 0.0));
    EXPECT_THROW(compile(fixtures::binary_block(), prop, {}), PreconditionError);

    prop = fixtures::block_property(Relation::LessEq, 5.0);
    prop.input_box[0].hi = kInfinity;
    EXPECT_THROW(compile(fixtures::binary_block(), prop, {}), ConfigError);
    EngineConfig plain;
    plain.lp_relax = false;
    plain.sbt = false;
    EXPECT_NO_THROW(compile(fixtures::binary_block(), prop, plain));
}

TEST(Replay, AcceptsAndRejects)
{
    const auto prop = fixtures::block_property(Relation::LessEq, 5.0);
    const Network net = fixtures::binary_block();
    EXPECT_TRUE(replay(net, prop, std::vector<double>{ 1, 0 }));

    const auto outside = replay(net, prop, std::vector<double>{ 3, 0 });
    EXPECT_FALSE(outside);
    EXPECT_NE(outside.reason.find("x1"), std::string::npos) << outside.reason;

    // A solver could claim any output; replay re-evaluates and finds +2.
    const auto fabricated = replay(net, fixtures::block_property(Relation::LessEq, 1.0), std::vector<double>{ 1, 0 });
    EXPECT_FALSE(fabricated);
    EXPECT_NE(fabricated.reason.find("output"), std::string::npos) << fabricated.reason;

    EXPECT_TRUE(replay(net, prop, std::vector<double>{ 2 + 5e-7, 0 }));
    EXPECT_FALSE(replay(net, prop, std::vector<double>{ 2 + 5e-6, 0 }));
}

TEST(StrictArgmax, Ties)
{
    EXPECT_EQ(strict_argmax(std::vector<double>{ 1, 3, 2 }), std::optional<std::size_t>(1));
    EXPECT_EQ(strict_argmax(std::vector<double>{ 3, 3, 2 }), std::nullopt);
    EXPECT_EQ(strict_argmax(std::vector<double>{}), std::nullopt);
}

TEST(Robustness, OneQueryPerCompetingLabel)
{
    const Network net = ten_classes();
    RobustnessSpec spec;
    spec.sample = { 0.7, 0.2 };
    spec.true_label = 10;
    spec.delta = 0.1;
    const auto queries = robustness_queries(net, spec);
    ASSERT_EQ(queries.size(), 9u);
    for ( std::size_t i = 0; i < 9; ++i )
    {
        EXPECT_EQ(queries[i].first, i + 1);
        const Property &p = queries[i].second;
        EXPECT_NEAR(p.input_box[0].lo, 0.6, 1e-15);
        EXPECT_NEAR(p.input_box[0].hi, 0.8, 1e-15);
        EXPECT_EQ(p.input_box[1].lo, 0.1);
        ASSERT_EQ(p.output_linear.size(), 1u);
        EXPECT_EQ(p.output_linear[0].rel, Relation::GreaterEq);
        EXPECT_EQ(p.output_linear[0].rhs, 0.0);
    }
}

TEST(Robustness, ClipAndPreconditions)
{
    const Network net = ten_classes();
    RobustnessSpec spec;
    spec.sample = { 0.95, 0.02 };
    spec.true_label = 10;
    spec.delta = 0.1;
    const auto clipped = robustness_queries(net, spec).front().second;
    EXPECT_EQ(clipped.input_box[0].hi, 1.0);
    EXPECT_EQ(clipped.input_box[1].lo, 0.0);

    spec.domain_clip.reset();
    EXPECT_LT(robustness_queries(net, spec).front().second.input_box[1].lo, 0.0);

    spec.true_label = 3;
    EXPECT_THROW(robustness_queries(net, spec), PreconditionError);
    spec.true_label = 11;
    EXPECT_THROW(robustness_queries(net, spec), PreconditionError);
    spec.true_label = 10;
    spec.delta = -1.0;
    EXPECT_THROW(robustness_queries(net, spec), PreconditionError);
}

TEST(Robustness, ZeroDeltaIsUnsat)
{
    const Network net = ten_classes();
    RobustnessSpec spec;
    spec.sample = { 0.7, 0.2 };
    spec.true_label = 10;
    spec.delta = 0.0;
    for ( const auto &[label, prop] : robustness_queries(net, spec) )
    {
        const QueryState q = compile(net, prop, {});
        EXPECT_EQ(Engine(q).solve().kind, VerdictKind::Unsat) << "label " << label;
    }
}

TEST(Robustness, LargeDeltaFindsMisclassification)
{
    const Network net = two_classes();
    // Grid search for a sample near the decision boundary.
    std::optional<RobustnessSpec> found;
    for ( int i = 1; i < 20 && !found; ++i )
        for ( int j = 1; j < 20 && !found; ++j )
        {
            const std::vector<double> x{ i / 20.0, j / 20.0 };
            const auto top = strict_argmax(evaluate(net, x));
            if ( top && *top == 0 )
            {
                RobustnessSpec spec;
                spec.sample = x;
                spec.true_label = 1;
                spec.delta = 0.3;
                found = spec;
            }
        }
    ASSERT_TRUE(found.has_value());
    bool sat = false;
    for ( const auto &[label, prop] : robustness_queries(net, *found) )
    {
        const QueryState q = compile(net, prop, {});
        const Verdict v = Engine(q).solve();
        if ( v.kind != VerdictKind::Sat )
            continue;
        sat = true;
        const auto x = input_values(q, v.witness);
        EXPECT_TRUE(replay(net, prop, x));
        const auto y = evaluate(net, x);
        EXPECT_GE(y[label - 1], y[0]);
    }
    EXPECT_TRUE(sat);
}

TEST(PropertyJson, RoundTripAndErrors)
{
    const auto doc = nlohmann::json::parse(R"({
        "input_box": [[0, 1], [-1, null]],
        "input_linear": [{"coeffs": {"x1": 1, "x2": 1}, "rel": "<=", "rhs": 1.5}],
        "output_linear": [{"coeffs": {"y1": 1, "y2": -1}, "rel": ">=", "rhs": 0}]})");
    const Property p = property_from_json(doc);
    ASSERT_EQ(p.input_box.size(), 2u);
    EXPECT_EQ(p.input_box[1].hi, kInfinity);
    ASSERT_EQ(p.input_linear.size(), 1u);
    EXPECT_EQ(p.input_linear[0].rhs, 1.5);
    ASSERT_EQ(p.output_linear.size(), 1u);
    EXPECT_EQ(p.output_linear[0].rel, Relation::GreaterEq);
    const Property again = property_from_json(property_to_json(p));
    EXPECT_EQ(again.input_box, p.input_box);
    EXPECT_EQ(again.output_linear[0].terms, p.output_linear[0].terms);

    auto fails = [](const char *text, const char *needle) {
        try
        {
            property_from_json(nlohmann::json::parse(text), "p.json");
            ADD_FAILURE() << "no error for " << text;
        }
        catch ( const ParseError &e )
        {
            EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
        }
    };
    fails(R"([1, 2])", "p.json");
    fails(R"({"input_box": [[1]]})", "input_box");
    fails(R"({"input_box": [[2, 1]]})", "input_box");
    fails(R"({"input_box": [[0, 1]], "output_linear": [{"coeffs": {"y1": 1}, "rel": "<", "rhs": 0}]})", "rel");
    fails(R"({"input_box": [[0, 1]], "output_linear": [{"coeffs": {"q1": 1}, "rel": "<=", "rhs": 0}]})", "q1");
    fails(R"({"input_box": [[0, 1]], "output_linear": [{"coeffs": {"y1": 1}, "rel": "<="}]})", "rhs");
}

TEST(PropertyJson, BundledFiles)
{
    const Property p = load_property(BNNV_DATA_DIR "/fig4.json");
    EXPECT_EQ(p.input_box, (std::vector<nlr::Interval>{ { 1, 2 }, { -1, 1 } }));
    ASSERT_EQ(p.output_linear.size(), 1u);
    EXPECT_EQ(p.output_linear[0].rhs, 5.0);
}

TEST(RobustnessJson, RoundTripAndErrors)
{
    const auto spec = robustness_from_json(nlohmann::json::parse(R"({"sample": [0.1, 0.2], "delta": 0.05, "true_label": 2})"));
    EXPECT_EQ(spec.sample, (std::vector<double>{ 0.1, 0.2 }));
    EXPECT_EQ(spec.true_label, 2u);
    ASSERT_TRUE(spec.domain_clip.has_value());
    EXPECT_EQ(*spec.domain_clip, (nlr::Interval{ 0, 1 }));
    const auto again = robustness_from_json(robustness_to_json(spec));
    EXPECT_EQ(again.sample, spec.sample);
    EXPECT_EQ(again.delta, spec.delta);

    const auto unclipped = robustness_from_json(
        nlohmann::json::parse(R"({"sample": [0.5], "delta": 1, "true_label": 1, "domain_clip": null, "margin": 0.25})"));
    EXPECT_FALSE(unclipped.domain_clip.has_value());
    EXPECT_EQ(unclipped.margin, 0.25);

    EXPECT_THROW(robustness_from_json(nlohmann::json::parse(R"({"sample": [0.5], "delta": -1, "true_label": 1})")),
                 ParseError);
    EXPECT_THROW(robustness_from_json(nlohmann::json::parse(R"({"sample": [0.5], "delta": 1, "true_label": 0})")),
                 ParseError);
    EXPECT_THROW(robustness_from_json(nlohmann::json::parse(R"({"delta": 1, "true_label": 1})")), ParseError);
}
