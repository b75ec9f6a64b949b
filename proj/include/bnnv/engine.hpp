// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "bnnv/linear_core.hpp"
#include "bnnv/network.hpp"
#include "bnnv/plconstraints.hpp"

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <stop_token>
#include <string_view>
#include <vector>

namespace bnnv {

using Seconds = std::chrono::duration<double>;

struct EngineConfig
{
    double epsilon = 1e-6;
    unsigned correction_threshold = 20;
    std::optional<Seconds> timeout; // none = no deadline
    bool merge_ws = true;
    bool lp_relax = true;
    bool sbt = true;
    bool polarity_snc = true;
    /// 0 keeps the all-zero starting assignment; anything else draws a
    /// random starting point inside the bounds.
    std::uint64_t seed = 0;

    /// Throws ConfigError on epsilon <= 0 or correction_threshold == 0.
    void validate() const;
};

/// Which query variable holds which neuron, when the query came from a network.
struct NetworkEncoding
{
    std::shared_ptr<const Network> network; // the encoded (possibly merged) network
    std::vector<std::vector<VariableId>> neurons;
    /// The network as given, and for each encoded layer the source layer
    /// holding the same values. Witnesses are rebuilt from the source so that
    /// they agree bit for bit with evaluation of the original network.
    std::shared_ptr<const Network> source;
    std::vector<std::size_t> source_layer;

    const std::vector<VariableId> &inputs() const { return neurons.front(); }
    const std::vector<VariableId> &outputs() const { return neurons.back(); }
};

struct QueryState
{
    LinearCore linear;
    std::vector<PlConstraint> pl; // topological order
    /// Case index each constraint is fixed to, as numbered by split_recipes.
    std::vector<std::optional<std::size_t>> phases;
    std::optional<NetworkEncoding> encoding;
    EngineConfig config;

    void add_constraint(PlConstraint c);
    std::size_t unfixed_count() const;
};

/// The linear facts installed when constraint `c` is fixed to `case_index`.
/// Same as split_recipes, except that a sign already known to be negative
/// keeps its current (strictly negative) upper bound instead of -epsilon.
CaseSplit fixing_case(const PlConstraint &c, std::size_t case_index, const BoundsView &bounds, double epsilon);

/// Installs every phase decided by the bounds, to a fixpoint. Returns the
/// number of constraints fixed, or nullopt if the bounds became inconsistent.
std::optional<std::size_t> apply_phase_fixing(QueryState &q);

/// Symbolic bound tightening over the encoded network, written back into the
/// query's bounds. Returns false on inconsistency; no-op without an encoding
/// or with an unbounded input box.
bool apply_symbolic_tightening(QueryState &q);

/// One-shot LP-relaxation tightening. Returns false if the relaxation is
/// infeasible (the query is Unsat).
bool apply_lp_relaxation(QueryState &q, std::stop_token stop = {});

/// Rebuilds a full assignment from input values by evaluating the source
/// network and solving the remaining (auxiliary) variables from equations.
Assignment assignment_from_inputs(const QueryState &q, std::span<const double> inputs);

std::vector<double> input_values(const QueryState &q, const Assignment &a);

enum class VerdictKind
{
    Sat,
    Unsat,
    Timeout,
};

std::string_view to_string(VerdictKind kind);

struct SolveStats
{
    std::uint64_t splits = 0;
    std::uint64_t phases_fixed = 0;
    std::uint64_t pivots = 0;
    std::uint64_t corrections = 0;
    std::uint64_t backtracks = 0;
    std::size_t max_depth = 0;

    SolveStats &operator+=(const SolveStats &other);
};

struct Verdict
{
    VerdictKind kind = VerdictKind::Timeout;
    Assignment witness; // only for Sat
    SolveStats stats;
};

/// Search over one query: simplex feasibility, corrections of violated
/// constraints and case splits with backtracking.
class Engine
{
public:
    explicit Engine(QueryState q);

    Verdict solve(std::stop_token stop = {});

    /// Initial deduction (LP relaxation, phase fixing, SBT). False means
    /// the query is Unsat. Idempotent; solve calls it.
    bool initialize(std::stop_token stop = {});

    /// Opens a split on `constraint`, entering the cases in `order`; the
    /// first is applied now, the rest stay pending. Returns false if no
    /// branch could be entered anywhere on the trail (Unsat).
    bool split(std::size_t constraint, std::vector<std::size_t> order);
    /// Abandons the current branch for the next pending one. False when the
    /// trail is exhausted.
    bool backtrack();

    /// Phase fixing plus (if enabled) SBT, repeated while they make progress.
    bool deduce();

    std::size_t depth() const { return _trail.size(); }
    const QueryState &state() const { return _q; }
    const SolveStats &stats() const { return _stats; }

private:
    struct Branch
    {
        std::size_t constraint;
        std::vector<std::size_t> pending;
        std::vector<std::optional<std::size_t>> phases; // before the split
    };

    bool enter_case(std::size_t constraint, std::size_t case_index);
    std::vector<std::size_t> branch_order(std::size_t constraint, const Assignment &a) const;
    Assignment initial_hint() const;
    Assignment polish(const Assignment &a);
    std::optional<Assignment> nudge(const Assignment &a) const;

    QueryState _q;
    std::vector<Branch> _trail;
    std::vector<unsigned> _counters;
    LinearCore _root; // as constructed, used to accept polished witnesses
    SolveStats _stats;
    bool _initialized = false;
    bool _initially_consistent = true;
};

} // namespace bnnv
