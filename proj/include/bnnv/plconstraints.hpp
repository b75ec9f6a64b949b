// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "bnnv/linear_core.hpp"

#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace bnnv {

/// f = max(0, b)
struct ReluConstraint
{
    VariableId b;
    VariableId f;

    bool operator==(const ReluConstraint &) const = default;
};

/// f = sign(b), with sign(0) = 1. The output is kept within [-1, 1].
struct SignConstraint
{
    VariableId b;
    VariableId f;

    bool operator==(const SignConstraint &) const = default;
};

/// f = max over sources. `gaps[i]` is an auxiliary variable constrained to
/// gaps[i] = f - sources[i] >= 0, so the i-th case is just u(gaps[i]) <= 0.
struct MaxConstraint
{
    VariableId f;
    std::vector<VariableId> sources;
    std::vector<VariableId> gaps;

    bool operator==(const MaxConstraint &) const = default;
};

using PlConstraint = std::variant<ReluConstraint, SignConstraint, MaxConstraint>;

enum class ReluPhase
{
    Unfixed,
    Active,
    Inactive,
};

enum class SignPhase
{
    Unfixed,
    Positive,
    Negative,
};

/// Read-only view of per-variable bounds.
struct BoundsView
{
    std::span<const double> lower;
    std::span<const double> upper;

    double lo(VariableId x) const { return lower[x.index]; }
    double up(VariableId x) const { return upper[x.index]; }

    static BoundsView of(const LinearCore &core) { return { core.lowers(), core.uppers() }; }
};

enum class BoundType
{
    Lower,
    Upper,
};

struct BoundTightening
{
    VariableId variable;
    BoundType type = BoundType::Lower;
    double value = 0.0;

    bool operator==(const BoundTightening &) const = default;
};

/// One disjunct of a case split: bounds to tighten plus equations to add.
struct CaseSplit
{
    std::vector<BoundTightening> bounds;
    std::vector<LinearEquation> equations;

    bool operator==(const CaseSplit &) const = default;
};

/// Applies every tightening and equation of `split` to `core`.
BoundStatus apply_case(LinearCore &core, const CaseSplit &split);

/// Declares the gap variables and equations for f = max(sources).
MaxConstraint make_max_constraint(LinearCore &core, VariableId f, std::vector<VariableId> sources);

inline constexpr double kSatisfactionTolerance = 1e-6;
inline constexpr double kPhaseTolerance = 1e-9;

bool is_satisfied(const PlConstraint &c, const Assignment &a, double tolerance = kSatisfactionTolerance);

/// Single-variable updates that each repair `c` under `a`. Sign constraints
/// only ever update f; ReLU offers (f, relu(b)) and, when usable, (b, f).
std::vector<std::pair<VariableId, double>> corrections(const PlConstraint &c, const Assignment &a);

ReluPhase phase_from_bounds(const ReluConstraint &c, const BoundsView &bounds);
SignPhase phase_from_bounds(const SignConstraint &c, const BoundsView &bounds);
/// Index of the only source that can still be the maximum, if any.
std::optional<std::size_t> phase_from_bounds(const MaxConstraint &c, const BoundsView &bounds);

/// The case index forced by the bounds, numbered as in `split_recipes`.
std::optional<std::size_t> decided_case(const PlConstraint &c, const BoundsView &bounds);

/// The disjuncts of `c`. Sign: [negative, positive]. ReLU: [inactive,
/// active]. Max: one case per source.
std::vector<CaseSplit> split_recipes(const PlConstraint &c, double epsilon);

/// Bound facts implied by `c` regardless of phase (e.g. u(f) <= max(0, u(b))
/// for ReLU). Only tightenings are returned.
std::vector<BoundTightening> entailed_tightenings(const PlConstraint &c, const BoundsView &bounds);

/// Variables the constraint reads as inputs (b, or the max sources).
std::vector<VariableId> participating_variables(const PlConstraint &c);

} // namespace bnnv
