// SPDX-License-Identifier: Apache-2.0
#include "bnnv/runner.hpp"

#include "bnnv/error.hpp"

namespace bnnv {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

QueryOutcome run_query(const Network &net, const Property &prop, const RunOptions &options)
{
    const auto start = Clock::now();
    QueryState q = compile(net, prop, options.engine);

    Verdict v;
    if ( options.workers <= 1 )
    {
        Engine engine(std::move(q));
        v = engine.solve(options.stop);
        q = engine.state();
    }
    else
    {
        snc::SncConfig cfg;
        cfg.workers = options.workers;
        cfg.budget = options.engine.timeout;
        cfg.polarity = options.engine.polarity_snc;
        snc::OrchestrateOptions orchestrate_options{ options.log, options.stop };
        QueryState copy = q;
        v = snc::orchestrate(std::move(copy), cfg, orchestrate_options);
    }

    QueryOutcome out;
    out.verdict = v.kind;
    out.stats = v.stats;
    if ( v.kind == VerdictKind::Sat )
    {
        out.witness = input_values(q, v.witness);
        out.assignment = std::move(v.witness);
        if ( const ReplayResult r = replay(net, prop, out.witness); !r )
            throw NumericalError("solver witness failed replay: " + r.reason);
    }
    out.wall = Clock::now() - start;
    return out;
}

RobustnessOutcome run_robustness(const Network &net, const RobustnessSpec &spec, const RunOptions &options)
{
    const auto start = Clock::now();
    RobustnessOutcome out;
    bool timed_out = false;
    for ( auto &[label, prop] : robustness_queries(net, spec) )
    {
        RunOptions sub = options;
        if ( options.engine.timeout )
            sub.engine.timeout = std::max(Seconds(0.0), *options.engine.timeout - Seconds(Clock::now() - start));
        QueryOutcome q = run_query(net, prop, sub);
        q.label = label;
        const VerdictKind kind = q.verdict;
        out.queries.push_back(std::move(q));
        if ( kind == VerdictKind::Sat )
        {
            out.verdict = VerdictKind::Sat;
            out.wall = Clock::now() - start;
            return out;
        }
        timed_out = timed_out || kind == VerdictKind::Timeout;
    }
    out.verdict = timed_out ? VerdictKind::Timeout : VerdictKind::Unsat;
    out.wall = Clock::now() - start;
    return out;
}

int exit_code(VerdictKind verdict)
{
    switch ( verdict )
    {
    case VerdictKind::Sat:
        return 10;
    case VerdictKind::Unsat:
        return 20;
    case VerdictKind::Timeout:
        return 30;
    }
    return 1;
}

json config_to_json(const RunOptions &options)
{
    const EngineConfig &c = options.engine;
    return { { "epsilon", c.epsilon },
             { "correction_threshold", c.correction_threshold },
             { "timeout", c.timeout ? json(c.timeout->count()) : json(nullptr) },
             { "workers", options.workers },
             { "merge_ws", c.merge_ws },
             { "lp_relax", c.lp_relax },
             { "sbt", c.sbt },
             { "polarity_snc", c.polarity_snc },
             { "seed", c.seed } };
}

namespace {

json stats_to_json(const SolveStats &s)
{
    return { { "splits", s.splits },         { "phases_fixed", s.phases_fixed }, { "simplex_pivots", s.pivots },
             { "corrections", s.corrections }, { "backtracks", s.backtracks },     { "max_depth", s.max_depth } };
}

} // namespace

json outcome_to_json(const QueryOutcome &outcome)
{
    json doc = { { "verdict", std::string(to_string(outcome.verdict)) },
                 { "wall_time", outcome.wall.count() },
                 { "stats", stats_to_json(outcome.stats) } };
    if ( outcome.label )
        doc["label"] = *outcome.label;
    if ( outcome.verdict == VerdictKind::Sat )
        doc["witness"] = { { "inputs", outcome.witness }, { "assignment", outcome.assignment } };
    return doc;
}

json report(const QueryOutcome &outcome, const RunOptions &options)
{
    json doc = outcome_to_json(outcome);
    doc["schema"] = 1;
    doc["config"] = config_to_json(options);
    return doc;
}

json report(const RobustnessOutcome &outcome, const RunOptions &options)
{
    SolveStats total;
    json queries = json::array();
    for ( const QueryOutcome &q : outcome.queries )
    {
        total += q.stats;
        queries.push_back(outcome_to_json(q));
    }
    json doc = { { "schema", 1 },
                 { "verdict", std::string(to_string(outcome.verdict)) },
                 { "robust", outcome.verdict == VerdictKind::Unsat },
                 { "wall_time", outcome.wall.count() },
                 { "stats", stats_to_json(total) },
                 { "queries", queries },
                 { "config", config_to_json(options) } };
    if ( outcome.verdict == VerdictKind::Sat )
    {
        const QueryOutcome &sat = outcome.queries.back();
        doc["witness"] = { { "inputs", sat.witness }, { "assignment", sat.assignment } };
        doc["adversarial_label"] = *sat.label;
    }
    return doc;
}

} // namespace bnnv
