// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "bnnv/engine.hpp"
#include "bnnv/nlr.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace bnnv {

/// An input ("x<i>") or output ("y<j>") neuron; index is 0-based here and
/// 1-based in names.
struct IoVariable
{
    enum class Side
    {
        Input,
        Output,
    } side = Side::Input;
    std::size_t index = 0;

    std::string name() const;
    /// Parses "x3" / "y1". Throws ParseError.
    static IoVariable parse(const std::string &name);

    auto operator<=>(const IoVariable &) const = default;
};

/// sum coeffs * v (rel) rhs
struct IoInequality
{
    std::vector<std::pair<IoVariable, double>> terms;
    Relation rel = Relation::LessEq;
    double rhs = 0.0;

    double lhs(std::span<const double> inputs, std::span<const double> outputs) const;
    bool holds(std::span<const double> inputs, std::span<const double> outputs, double slack) const;
    std::string describe() const;
};

struct Property
{
    std::vector<nlr::Interval> input_box;
    std::vector<IoInequality> input_linear;  // P, beyond the box
    std::vector<IoInequality> output_linear; // Q
};

struct RobustnessSpec
{
    std::vector<double> sample;
    double delta = 0.0;
    std::size_t true_label = 1; // 1-based
    std::optional<nlr::Interval> domain_clip = nlr::Interval{ 0.0, 1.0 };
    double margin = 0.0;
};

/// Network + property as a query. Throws PreconditionError on dimension
/// mismatches and ConfigError on an unbounded box when LP relaxation or SBT
/// is enabled.
QueryState compile(const Network &net, const Property &prop, const EngineConfig &cfg);

/// Index of the strict maximum, or nullopt on a tie for the top.
std::optional<std::size_t> strict_argmax(std::span<const double> values);

/// One property per competing label j (1-based): the sample's box and
/// Q = { y_j - y_true >= margin }. Throws PreconditionError if the sample is
/// not classified as true_label.
std::vector<std::pair<std::size_t, Property>> robustness_queries(const Network &net, const RobustnessSpec &spec);

struct ReplayResult
{
    bool accepted = false;
    std::string reason; // the violated constraint, when rejected

    explicit operator bool() const { return accepted; }
};

inline constexpr double kReplayTolerance = 1e-6;

/// Checks P on `inputs` and Q on the network's actual outputs.
ReplayResult replay(const Network &net, const Property &prop, std::span<const double> inputs,
                    double tolerance = kReplayTolerance);

Property property_from_json(const nlohmann::json &doc, const std::string &origin = "<property>");
nlohmann::json property_to_json(const Property &prop);
Property load_property(const std::filesystem::path &path);

RobustnessSpec robustness_from_json(const nlohmann::json &doc, const std::string &origin = "<robustness>");
nlohmann::json robustness_to_json(const RobustnessSpec &spec);
RobustnessSpec load_robustness(const std::filesystem::path &path);

} // namespace bnnv
