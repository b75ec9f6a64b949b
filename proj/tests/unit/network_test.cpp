// SPDX-License-Identifier: Apache-2.0
#include "fixtures.hpp"

#include "bnnv/error.hpp"
#include "bnnv/network.hpp"
#include "bnnv/network_json.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <random>

using namespace bnnv;

TEST(Evaluate, ReluNetwork)
{
    const auto values = evaluate_layers(fixtures::relu_net(), std::vector<double>{ 1, 2 });
    ASSERT_EQ(values.size(), 4u);
    EXPECT_EQ(values[1], (std::vector<double>{ 6, -1 }));
    EXPECT_EQ(values[2], (std::vector<double>{ 6, 0 }));
    EXPECT_EQ(values[3], (std::vector<double>{ 6 }));
}

TEST(Evaluate, BinaryBlock)
{
    EXPECT_EQ(evaluate(fixtures::binary_block(), std::vector<double>{ -1, 3 }), (std::vector<double>{ -2 }));
}

TEST(Evaluate, SignOfZeroIsOne)
{
    EXPECT_EQ(sign_of(0.0), 1.0);
    EXPECT_EQ(sign_of(-0.0), 1.0);
    EXPECT_EQ(sign_of(-1e-300), -1.0);

    Network zero{ { Layer::input(3), Layer::weighted_sum({ { 0, 0, 0 }, { 0, 0, 0 } }, { 0, 0 }), Layer::sign(2),
                    Layer::weighted_sum({ { 0, 0 } }, { 0 }) },
                  "" };
    const auto values = evaluate_layers(zero, std::vector<double>{ 4, -7, 0.5 });
    EXPECT_EQ(values[1], (std::vector<double>{ 0, 0 }));
    EXPECT_EQ(values[2], (std::vector<double>{ 1, 1 }));
    EXPECT_EQ(values[3], (std::vector<double>{ 0 }));
}

TEST(Evaluate, MaxPicksLargestSource)
{
    Network net{ { Layer::input(3), Layer::max({ { 1, 3 }, { 2 } }), Layer::weighted_sum({ { 1, 0 }, { 0, 1 } }, { 0, 0 }) },
                 "" };
    EXPECT_EQ(evaluate(net, std::vector<double>{ -1, 5, 2 }), (std::vector<double>{ 2, 5 }));
}

TEST(Evaluate, RejectsWrongInputLength)
{
    EXPECT_THROW(evaluate(fixtures::relu_net(), std::vector<double>{ 1 }), StructuralError);
}

TEST(Validate, AcceptsFixtures)
{
    EXPECT_TRUE(validate(fixtures::relu_net()).empty());
    EXPECT_TRUE(validate(fixtures::binary_block()).empty());
    EXPECT_NO_THROW(require_valid(fixtures::two_signs()));
}

TEST(Validate, ReluWidthMismatchNamesLayer)
{
    Network net = fixtures::relu_net();
    net.layers[2] = Layer::relu(3);
    const auto v = validate(net);
    ASSERT_FALSE(v.empty());
    EXPECT_EQ(v.front().layer, 3u);
    EXPECT_THROW(require_valid(net), StructuralError);
}

TEST(Validate, MaxSourceZero)
{
    Network net{ { Layer::input(2), Layer::max({ { 0, 1 } }), Layer::weighted_sum({ { 1 } }, { 0 }) }, "" };
    const auto v = validate(net);
    ASSERT_FALSE(v.empty());
    EXPECT_EQ(v.front().layer, 2u);
}

TEST(Validate, StructuralRules)
{
    Network no_layers;
    EXPECT_FALSE(validate(no_layers).empty());

    Network only_input{ { Layer::input(2) }, "" };
    EXPECT_FALSE(validate(only_input).empty());

    Network sign_last{ { Layer::input(2), Layer::sign(2) }, "" };
    EXPECT_FALSE(validate(sign_last).empty());

    Network second_input{ { Layer::input(1), Layer::input(1), Layer::weighted_sum({ { 1 } }, { 0 }) }, "" };
    EXPECT_FALSE(validate(second_input).empty());

    Network bad_bias = fixtures::relu_net();
    bad_bias.layers[1].biases.pop_back();
    EXPECT_FALSE(validate(bad_bias).empty());

    Network bad_width = fixtures::relu_net();
    bad_width.layers[3].weights[0].push_back(1.0);
    EXPECT_FALSE(validate(bad_width).empty());

    Network empty_sources{ { Layer::input(2), Layer::max({ {} }), Layer::weighted_sum({ { 1 } }, { 0 }) }, "" };
    EXPECT_FALSE(validate(empty_sources).empty());

    Network beyond{ { Layer::input(2), Layer::max({ { 1, 3 } }), Layer::weighted_sum({ { 1 } }, { 0 }) }, "" };
    EXPECT_FALSE(validate(beyond).empty());
}

TEST(Merge, TwoSumsCollapse)
{
    const Network merged = merge_weighted_sums(fixtures::two_sums());
    ASSERT_EQ(merged.layers.size(), 2u);
    EXPECT_EQ(merged.layers[1].kind, LayerKind::WeightedSum);
    EXPECT_EQ(merged.layers[1].weights, (std::vector<std::vector<double>>{ { -5 }, { 1 } }));
    EXPECT_EQ(merged.layers[1].biases, (std::vector<double>{ 0, 0 }));
}

TEST(Merge, BiasFormula)
{
    const Network merged = merge_weighted_sums(fixtures::binary_block());
    ASSERT_EQ(merged.layers.size(), 4u);
    EXPECT_EQ(merged.layers[1].weights, (std::vector<std::vector<double>>{ { 0.5, -0.5 } }));
    EXPECT_EQ(merged.layers[1].biases, (std::vector<double>{ 0.5 }));
}

TEST(Merge, NoConsecutiveSumsIsIdentity)
{
    EXPECT_EQ(merge_weighted_sums(fixtures::relu_net()), fixtures::relu_net());
    EXPECT_EQ(merge_weighted_sums(fixtures::two_signs()), fixtures::two_signs());
}

TEST(Merge, ThreeRandomSumsAgreeOnSamples)
{
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> coin(0, 1);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    auto pm1 = [&](std::size_t rows, std::size_t cols) {
        std::vector<std::vector<double>> w(rows, std::vector<double>(cols));
        for ( auto &r : w )
            for ( double &v : r )
                v = coin(rng) ? 1.0 : -1.0;
        return w;
    };
    Network net{ { Layer::input(5), Layer::weighted_sum(pm1(4, 5), { 0.5, -1, 0, 2 }),
                   Layer::weighted_sum(pm1(6, 4), { 1, 1, -1, 0, 0, 0.25 }), Layer::weighted_sum(pm1(3, 6), { 0, 0, 1 }) },
                 "" };
    const Network merged = merge_weighted_sums(net);
    ASSERT_EQ(merged.layers.size(), 2u);
    EXPECT_EQ(merge_weighted_sums(merged), merged);
    for ( int s = 0; s < 1000; ++s )
    {
        std::vector<double> x(5);
        for ( double &v : x )
            v = u(rng);
        const auto a = evaluate(net, x);
        const auto b = evaluate(merged, x);
        for ( std::size_t j = 0; j < a.size(); ++j )
            ASSERT_NEAR(a[j], b[j], 1e-9);
    }
}

TEST(Merge, PreservesSignNetworks)
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    Network net{ { Layer::input(2), Layer::weighted_sum({ { 1, 2 }, { -1, 0.5 } }, { 0.25, 0 }),
                   Layer::weighted_sum({ { 0.5, 0 }, { 0, 2 } }, { -0.125, 1 }), Layer::sign(2),
                   Layer::weighted_sum({ { 1, -1 } }, { 0 }), Layer::weighted_sum({ { 3 } }, { 1 }) },
                 "" };
    const Network merged = merge_weighted_sums(net);
    EXPECT_EQ(merged.layers.size(), 4u);
    for ( int s = 0; s < 1000; ++s )
    {
        const std::vector<double> x{ u(rng), u(rng) };
        EXPECT_NEAR(evaluate(net, x)[0], evaluate(merged, x)[0], 1e-9);
    }
}

TEST(NetworkJson, RoundTrip)
{
    Network net{ { Layer::input(3), Layer::weighted_sum({ { 1, 0, -1 }, { 0.5, 2, 1 } }, { 0, 1 }), Layer::relu(2),
                   Layer::max({ { 1, 2 }, { 2 } }), Layer::sign(2), Layer::weighted_sum({ { 1, 1 } }, { 0 }) },
                 "meta" };
    EXPECT_EQ(network_from_json(network_to_json(net)), net);
}

TEST(NetworkJson, LoadsBundledFile)
{
    const Network net = load_network(BNNV_DATA_DIR "/fig1.json");
    EXPECT_EQ(net.layers, fixtures::relu_net().layers);
}

TEST(NetworkJson, ErrorsNameTheField)
{
    const auto doc = nlohmann::json::parse(R"({"layers": [{"kind": "input", "size": 2},
        {"kind": "weighted_sum", "size": 1, "weights": [[1, "a"]], "biases": [0]}]})");
    try
    {
        network_from_json(doc, "net.json");
        FAIL() << "expected ParseError";
    }
    catch ( const ParseError &e )
    {
        const std::string what = e.what();
        EXPECT_NE(what.find("net.json"), std::string::npos) << what;
        EXPECT_NE(what.find("weights"), std::string::npos) << what;
    }
}

TEST(NetworkJson, UnknownKindAndBatchNorm)
{
    EXPECT_THROW(network_from_json(nlohmann::json::parse(
                     R"({"layers": [{"kind": "input", "size": 1}, {"kind": "batch_norm", "size": 1}]})")),
                 Error);
    EXPECT_THROW(network_from_json(nlohmann::json::parse(R"({"layers": 3})")), ParseError);
}

TEST(NetworkJson, StructuralErrorsAreReported)
{
    try
    {
        network_from_json(nlohmann::json::parse(R"({"layers": [{"kind": "input", "size": 2}, {"kind": "relu", "size": 3},
            {"kind": "weighted_sum", "size": 1, "weights": [[1, 1, 1]], "biases": [0]}]})"));
        FAIL() << "expected ParseError";
    }
    catch ( const ParseError &e )
    {
        EXPECT_NE(std::string(e.what()).find("layer 2"), std::string::npos) << e.what();
    }
}

TEST(NetworkJson, SyntaxErrorHasPosition)
{
    const auto path = std::filesystem::temp_directory_path() / "bnnv_bad_syntax.json";
    {
        std::ofstream out(path);
        out << "{\n  \"layers\": [\n    {\"kind\": }\n  ]\n}\n";
    }
    try
    {
        load_network(path);
        FAIL() << "expected ParseError";
    }
    catch ( const ParseError &e )
    {
        const std::string what = e.what();
        EXPECT_NE(what.find("bnnv_bad_syntax.json"), std::string::npos) << what;
        EXPECT_NE(what.find(".json:3:"), std::string::npos) << what;
    }
    std::filesystem::remove(path);
}
