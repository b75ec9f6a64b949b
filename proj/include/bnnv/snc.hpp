// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "bnnv/engine.hpp"

#include <functional>
#include <memory>
#include <stop_token>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace bnnv::snc {

/// (u + l) / (u - l) for the input range of `c`. Throws PreconditionError
/// when the phase is already decided by the bounds (l >= 0 or u < 0).
double polarity(const SignConstraint &c, const BoundsView &bounds);

struct SncConfig
{
    unsigned workers = 1;
    std::optional<Seconds> budget; // global wall-clock limit; none = unlimited
    /// Timeout of the first generation of subqueries; defaults to budget / 16
    /// (or 5 s without a budget) when unset.
    std::optional<Seconds> initial_timeout;
    double timeout_factor = 1.5;
    std::size_t k = 5;
    unsigned online_split_count = 2;
    /// 0 means 4 x workers. Rounded up to a power of 2.
    unsigned initial_partition = 0;
    bool polarity = true; // false: always split input intervals

    /// Throws ConfigError on invalid values.
    void validate() const;
    Seconds first_timeout() const;
    unsigned first_partition() const;
};

struct SignSplit
{
    std::size_t constraint; // index into QueryState::pl
};

struct InputSplit
{
    std::size_t dimension; // 0-based input index
    double midpoint;
};

struct Atomic
{
};

using SplitChoice = std::variant<SignSplit, InputSplit, Atomic>;

/// Among the first k unfixed sign constraints (topological order), the one
/// with the smallest |polarity|, ties to the earliest; else the widest
/// finite input interval; else Atomic.
SplitChoice pick_split(const QueryState &q, const SncConfig &cfg);

struct PhaseFix
{
    std::size_t constraint;
    std::size_t case_index;
};

/// A base query plus the facts that carve out one part of it.
struct SubQuery
{
    std::shared_ptr<const QueryState> base;
    std::vector<PhaseFix> phase_fixes;
    std::vector<BoundTightening> tightenings;
    Seconds timeout{ 0.0 };
    unsigned depth = 0;

    /// base + delta, ready for an Engine. Bounds may be inconsistent (the
    /// subquery is then trivially Unsat).
    QueryState materialize() const;
};

/// Splits `q` into `n` (power of 2) equi-satisfiable parts; fewer when the
/// query becomes atomic. Leaves inherit `q`'s timeout and depth + 1.
std::vector<SubQuery> partition(const SubQuery &q, unsigned n, const SncConfig &cfg);
std::vector<SubQuery> partition(std::shared_ptr<const QueryState> q, unsigned n, const SncConfig &cfg);

struct RunLogEntry
{
    std::size_t id;
    unsigned depth;
    Seconds timeout;
    VerdictKind verdict;
    Seconds wall;
};

std::string format(const RunLogEntry &e);

struct OrchestrateOptions
{
    std::function<void(const RunLogEntry &)> log; // called under a lock
    std::stop_token stop;
};

/// Parallel split-and-conquer solving of `q`. Throws Error if a subquery
/// crashes twice.
Verdict orchestrate(QueryState q, const SncConfig &cfg, const OrchestrateOptions &options = {});

} // namespace bnnv::snc
