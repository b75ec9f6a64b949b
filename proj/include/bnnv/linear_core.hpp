// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace bnnv {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Dense, stable handle of a query variable.
struct VariableId
{
    std::uint32_t index = 0;

    constexpr auto operator<=>(const VariableId &) const = default;
};

/// Values of every declared variable, indexed by VariableId::index.
using Assignment = std::vector<double>;

inline double value_of(const Assignment &a, VariableId v) { return a[v.index]; }

/// sum_i coefficients[i] * x_i = constant
struct LinearEquation
{
    std::map<VariableId, double> coefficients;
    double constant = 0.0;

    LinearEquation() = default;
    LinearEquation(std::initializer_list<std::pair<const VariableId, double>> terms, double rhs)
        : coefficients(terms)
        , constant(rhs)
    {
    }

    /// Accumulates into an existing coefficient.
    void add(VariableId x, double coefficient) { coefficients[x] += coefficient; }

    bool has_nonzero() const;
    /// Left-hand side minus constant.
    double residual(const Assignment &a) const;

    bool operator==(const LinearEquation &) const = default;
};

enum class Relation
{
    LessEq,
    GreaterEq,
    Equal,
};

/// Numeric contract shared by the linear engine and its callers.
struct Tolerances
{
    double equation = 1e-6; // |residual| accepted as satisfied
    double pivot = 1e-10;   // smallest tableau entry we pivot on
    double bound = 1e-9;    // slack when comparing values against bounds
};

enum class BoundStatus
{
    Consistent,
    Inconsistent,
};

enum class Direction
{
    Minimize,
    Maximize,
};

struct FeasibilityResult
{
    enum class Status
    {
        Feasible,
        Infeasible,
    } status = Status::Infeasible;
    Assignment assignment;

    bool feasible() const { return status == Status::Feasible; }
};

struct OptimizeResult
{
    enum class Status
    {
        Optimal,
        Infeasible,
        Unbounded,
    } status = Status::Infeasible;
    double value = 0.0;
    Assignment assignment;
};

/// Bounds + equation set, used to compare states before and after backtracking.
struct LinearSnapshot
{
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<LinearEquation> equations;

    bool operator==(const LinearSnapshot &) const = default;
};

/// Variables, bounds and linear equations of one query, solved with a
/// bounded-variable primal simplex. Bound changes and added equations are
/// recorded on a trail so that `pop` restores the exact state at `push`.
///
/// Not thread-safe; copies are independent.
class LinearCore
{
public:
    explicit LinearCore(Tolerances tolerances = {});

    VariableId declare_variable();
    std::size_t variable_count() const { return _lower.size(); }

    double lower(VariableId x) const { return _lower[x.index]; }
    double upper(VariableId x) const { return _upper[x.index]; }
    std::span<const double> lowers() const { return _lower; }
    std::span<const double> uppers() const { return _upper; }

    /// new lower = max(old, lower), new upper = min(old, upper). Crossing
    /// bounds are still stored (so the solver sees the contradiction) and
    /// reported as Inconsistent.
    BoundStatus tighten_bounds(VariableId x, std::optional<double> lower, std::optional<double> upper);
    BoundStatus tighten_lower(VariableId x, double value) { return tighten_bounds(x, value, std::nullopt); }
    BoundStatus tighten_upper(VariableId x, double value) { return tighten_bounds(x, std::nullopt, value); }
    bool consistent() const;

    /// Throws PreconditionError on an all-zero equation or undeclared variable.
    void assert_equation(LinearEquation eq);
    const std::vector<LinearEquation> &equations() const { return _equations; }

    /// Encodes sum coeffs * x (rel) rhs. Single-variable rows become bounds;
    /// otherwise an auxiliary variable a = sum coeffs * x is introduced and
    /// bounded. Returns the auxiliary variable when one was created.
    std::optional<VariableId> assert_inequality(const std::map<VariableId, double> &coefficients, Relation rel,
                                                double rhs);

    void push();
    void pop();
    std::size_t depth() const { return _frames.size(); }

    /// `hint` (if non-empty) seeds the values of nonbasic variables.
    FeasibilityResult find_feasible(const Assignment &hint = {});
    OptimizeResult optimize(const std::map<VariableId, double> &objective, Direction direction,
                            const Assignment &hint = {});

    /// Interval reasoning over every equation, repeated up to `max_passes`
    /// rounds or until nothing tightens by more than the bound tolerance.
    /// Returns Inconsistent if some variable's bounds cross.
    BoundStatus propagate_bounds(std::size_t max_passes = 4);

    /// True iff `a` satisfies every equation and bound within tolerance.
    bool satisfies(const Assignment &a) const;

    LinearSnapshot snapshot() const;
    const Tolerances &tolerances() const { return _tol; }
    std::uint64_t pivot_count() const { return _pivots; }

private:
    struct BoundChange
    {
        std::uint32_t variable;
        double lower;
        double upper;
    };
    struct Frame
    {
        std::size_t trail_size;
        std::size_t equation_count;
    };

    Tolerances _tol;
    std::vector<double> _lower;
    std::vector<double> _upper;
    std::vector<LinearEquation> _equations;
    std::vector<BoundChange> _trail;
    std::vector<Frame> _frames;
    std::uint64_t _pivots = 0;
};

} // namespace bnnv
