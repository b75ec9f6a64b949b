// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "bnnv/engine.hpp"
#include "bnnv/properties.hpp"
#include "bnnv/snc.hpp"

#include <json.hpp>

#include <functional>
#include <optional>
#include <stop_token>
#include <vector>

namespace bnnv {

struct RunOptions
{
    EngineConfig engine;       // engine.timeout is the total budget
    unsigned workers = 1;      // 1 runs the sequential engine
    std::function<void(const snc::RunLogEntry &)> log;
    std::stop_token stop;
};

struct QueryOutcome
{
    VerdictKind verdict = VerdictKind::Timeout;
    std::vector<double> witness;     // input vector, Sat only
    Assignment assignment;           // every query variable, Sat only
    SolveStats stats;
    Seconds wall{ 0.0 };
    std::optional<std::size_t> label; // competing label of a robustness query
};

/// Compiles and solves one property. A Sat witness is replayed against the
/// original network before being returned; a failing replay throws
/// NumericalError instead of producing an unverified witness.
QueryOutcome run_query(const Network &net, const Property &prop, const RunOptions &options);

struct RobustnessOutcome
{
    VerdictKind verdict = VerdictKind::Timeout; // Sat = not robust
    std::vector<QueryOutcome> queries;          // in label order, up to the first Sat
    Seconds wall{ 0.0 };
};

/// Solves the per-label family of `spec` under one shared time budget,
/// stopping at the first Sat.
RobustnessOutcome run_robustness(const Network &net, const RobustnessSpec &spec, const RunOptions &options);

/// Process exit status for a verdict: 10 Sat, 20 Unsat, 30 Timeout.
int exit_code(VerdictKind verdict);

nlohmann::json config_to_json(const RunOptions &options);
nlohmann::json outcome_to_json(const QueryOutcome &outcome);
/// Report documents carry "schema": 1.
nlohmann::json report(const QueryOutcome &outcome, const RunOptions &options);
nlohmann::json report(const RobustnessOutcome &outcome, const RunOptions &options);

} // namespace bnnv
