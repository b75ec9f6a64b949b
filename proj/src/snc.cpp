// SPDX-License-Identifier: Apache-2.0
#include "bnnv/snc.hpp"

#include "bnnv/error.hpp"

#include <bit>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <exception>
#include <mutex>
#include <thread>

namespace bnnv::snc {

double polarity(const SignConstraint &c, const BoundsView &bounds)
{
    const double l = bounds.lo(c.b);
    const double u = bounds.up(c.b);
    if ( l >= 0.0 || u < 0.0 )
        throw PreconditionError("polarity: phase already decided by b in [" + std::to_string(l) + ", " +
                                std::to_string(u) + "]");
    return (u + l) / (u - l);
}

void SncConfig::validate() const
{
    if ( workers == 0 )
        throw ConfigError("workers must be at least 1");
    if ( k == 0 )
        throw ConfigError("k must be at least 1");
    if ( !(timeout_factor > 1.0) )
        throw ConfigError("timeout_factor must be greater than 1");
    if ( online_split_count < 2 || !std::has_single_bit(online_split_count) )
        throw ConfigError("online_split_count must be a power of 2, at least 2");
    if ( initial_timeout && !(initial_timeout->count() > 0.0) )
        throw ConfigError("initial_timeout must be positive");
}

Seconds SncConfig::first_timeout() const
{
    if ( initial_timeout )
        return *initial_timeout;
    if ( budget )
        return std::max(*budget / 16.0, Seconds(1e-3));
    return Seconds(5.0);
}

unsigned SncConfig::first_partition() const
{
    const unsigned n = initial_partition ? initial_partition : 4 * workers;
    return std::bit_ceil(n);
}

SplitChoice pick_split(const QueryState &q, const SncConfig &cfg)
{
    const BoundsView bounds = BoundsView::of(q.linear);
    if ( cfg.polarity )
    {
        std::optional<std::size_t> best;
        double best_score = kInfinity;
        std::size_t seen = 0;
        for ( std::size_t i = 0; i < q.pl.size() && seen < cfg.k; ++i )
        {
            const auto *s = std::get_if<SignConstraint>(&q.pl[i]);
            if ( !s || q.phases[i] || phase_from_bounds(*s, bounds) != SignPhase::Unfixed )
                continue;
            ++seen;
            const double l = bounds.lo(s->b);
            const double u = bounds.up(s->b);
            const double score = std::isfinite(l) && std::isfinite(u) ? std::fabs(polarity(*s, bounds)) : 1.0;
            if ( score < best_score )
            {
                best = i;
                best_score = score;
            }
        }
        if ( best )
            return SignSplit{ *best };
    }

    if ( q.encoding )
    {
        std::optional<std::size_t> widest;
        double width = 0.0;
        const auto &inputs = q.encoding->inputs();
        for ( std::size_t d = 0; d < inputs.size(); ++d )
        {
            const double w = bounds.up(inputs[d]) - bounds.lo(inputs[d]);
            if ( std::isfinite(w) && w > width && w > 1e-9 )
            {
                widest = d;
                width = w;
            }
        }
        if ( widest )
        {
            const VariableId x = inputs[*widest];
            return InputSplit{ *widest, bounds.lo(x) + 0.5 * (bounds.up(x) - bounds.lo(x)) };
        }
    }
    return Atomic{};
}

QueryState SubQuery::materialize() const
{
    QueryState q = *base;
    for ( const PhaseFix &fix : phase_fixes )
    {
        apply_case(q.linear, split_recipes(q.pl[fix.constraint], q.config.epsilon).at(fix.case_index));
        q.phases[fix.constraint] = fix.case_index;
    }
    for ( const BoundTightening &t : tightenings )
    {
        if ( t.type == BoundType::Lower )
            q.linear.tighten_lower(t.variable, t.value);
        else
            q.linear.tighten_upper(t.variable, t.value);
    }
    return q;
}

std::vector<SubQuery> partition(const SubQuery &q, unsigned n, const SncConfig &cfg)
{
    if ( n <= 1 )
        return { q };
    if ( !std::has_single_bit(n) )
        throw PreconditionError("partition: target count " + std::to_string(n) + " is not a power of 2");

    QueryState state = q.materialize();
    if ( !apply_phase_fixing(state) )
        return { q }; // already Unsat; nothing to gain from splitting

    SubQuery low = q;
    SubQuery high = q;
    low.depth = high.depth = q.depth + 1;
    const SplitChoice choice = pick_split(state, cfg);
    if ( const auto *s = std::get_if<SignSplit>(&choice) )
    {
        low.phase_fixes.push_back({ s->constraint, 0 });
        high.phase_fixes.push_back({ s->constraint, 1 });
    }
    else if ( const auto *in = std::get_if<InputSplit>(&choice) )
    {
        const VariableId x = state.encoding->inputs()[in->dimension];
        low.tightenings.push_back({ x, BoundType::Upper, in->midpoint });
        high.tightenings.push_back({ x, BoundType::Lower, in->midpoint });
    }
    else
        return { q };

    std::vector<SubQuery> out = partition(low, n / 2, cfg);
    std::vector<SubQuery> rest = partition(high, n / 2, cfg);
    out.insert(out.end(), rest.begin(), rest.end());
    return out;
}

std::vector<SubQuery> partition(std::shared_ptr<const QueryState> q, unsigned n, const SncConfig &cfg)
{
    SubQuery root;
    root.base = std::move(q);
    root.timeout = cfg.first_timeout();
    return partition(root, n, cfg);
}

std::string format(const RunLogEntry &e)
{
    char buffer[160];
    std::snprintf(buffer, sizeof buffer, "subquery id=%zu depth=%u timeout=%.3fs verdict=%s wall=%.3fs", e.id,
                  e.depth, e.timeout.count(), std::string(to_string(e.verdict)).c_str(), e.wall.count());
    return buffer;
}

namespace {

using Clock = std::chrono::steady_clock;

struct Item
{
    SubQuery query;
    std::size_t id;
    unsigned attempts = 0;
};

class Scheduler
{
public:
    Scheduler(const SncConfig &cfg, const OrchestrateOptions &options, Clock::time_point deadline)
        : _cfg(cfg)
        , _options(options)
        , _deadline(deadline)
    {
    }

    void seed(std::vector<SubQuery> leaves)
    {
        for ( SubQuery &leaf : leaves )
            _queue.push_back({ std::move(leaf), _next_id++ });
    }

    Verdict run()
    {
        std::stop_callback forward(_options.stop, [this] {
            _external_stop = true;
            _cancel.request_stop();
        });
        {
            std::vector<std::jthread> workers;
            for ( unsigned w = 0; w < _cfg.workers; ++w )
                workers.emplace_back([this] { work(); });
        }
        if ( _error )
            std::rethrow_exception(_error);
        Verdict v;
        v.stats = _stats;
        if ( _sat )
        {
            v.kind = VerdictKind::Sat;
            v.witness = std::move(*_sat);
        }
        else if ( _timed_out || _external_stop || !_queue.empty() )
            v.kind = VerdictKind::Timeout;
        else
            v.kind = VerdictKind::Unsat;
        return v;
    }

private:
    void work()
    {
        const std::stop_token cancel = _cancel.get_token();
        while ( true )
        {
            Item item;
            {
                std::unique_lock lock(_mutex);
                _ready.wait(lock, cancel, [&] { return !_queue.empty() || _in_flight == 0; });
                if ( cancel.stop_requested() || _queue.empty() )
                    return;
                item = std::move(_queue.front());
                _queue.pop_front();
                ++_in_flight;
            }
            process(std::move(item), cancel);
            {
                std::lock_guard lock(_mutex);
                --_in_flight;
            }
            _ready.notify_all();
        }
    }

    void process(Item item, std::stop_token cancel)
    {
        const auto start = Clock::now();
        const Seconds remaining = _deadline - start;
        Seconds timeout = std::min(item.query.timeout, remaining);
        Verdict verdict;
        try
        {
            if ( timeout.count() <= 0.0 )
                verdict.kind = VerdictKind::Timeout;
            else
            {
                QueryState state = item.query.materialize();
                state.config.timeout = timeout;
                Engine engine(std::move(state));
                verdict = engine.solve(cancel);
            }
        }
        catch ( const std::exception &e )
        {
            std::lock_guard lock(_mutex);
            if ( item.attempts == 0 )
            {
                ++item.attempts;
                _queue.push_back(std::move(item));
            }
            else
            {
                _error = std::make_exception_ptr(
                    Error("subquery " + std::to_string(item.id) + " failed twice: " + e.what()));
                _cancel.request_stop();
            }
            return;
        }

        const Seconds wall = Clock::now() - start;
        std::vector<SubQuery> children;
        const bool budget_left = Clock::now() < _deadline;
        if ( verdict.kind == VerdictKind::Timeout && !cancel.stop_requested() && budget_left )
        {
            children = partition(item.query, _cfg.online_split_count, _cfg);
            for ( SubQuery &child : children )
            {
                child.timeout = item.query.timeout * _cfg.timeout_factor;
                child.depth = item.query.depth + 1;
            }
        }

        std::lock_guard lock(_mutex);
        _stats += verdict.stats;
        if ( _options.log )
            _options.log({ item.id, item.query.depth, item.query.timeout, verdict.kind, wall });
        switch ( verdict.kind )
        {
        case VerdictKind::Sat:
            if ( !_sat )
                _sat = std::move(verdict.witness);
            _cancel.request_stop();
            break;
        case VerdictKind::Unsat:
            break;
        case VerdictKind::Timeout:
            if ( cancel.stop_requested() )
                break;
            if ( !budget_left )
            {
                _timed_out = true;
                _cancel.request_stop();
                break;
            }
            for ( SubQuery &child : children )
                _queue.push_back({ std::move(child), _next_id++ });
            break;
        }
    }

    const SncConfig &_cfg;
    const OrchestrateOptions &_options;
    const Clock::time_point _deadline;

    std::mutex _mutex;
    std::condition_variable_any _ready;
    std::deque<Item> _queue;
    std::size_t _in_flight = 0;
    std::size_t _next_id = 1;
    std::stop_source _cancel;
    std::optional<Assignment> _sat;
    SolveStats _stats;
    bool _timed_out = false;
    bool _external_stop = false;
    std::exception_ptr _error;
};

} // namespace

Verdict orchestrate(QueryState q, const SncConfig &cfg, const OrchestrateOptions &options)
{
    cfg.validate();
    q.config.validate();
    q.phases.resize(q.pl.size());
    const auto start = Clock::now();
    const auto deadline =
        cfg.budget ? start + std::chrono::duration_cast<Clock::duration>(*cfg.budget) : Clock::time_point::max();

    Verdict unsat;
    unsat.kind = VerdictKind::Unsat;
    if ( cfg.budget && cfg.budget->count() <= 0.0 )
    {
        unsat.kind = VerdictKind::Timeout;
        return unsat;
    }

    // Preprocessing once, on the whole query.
    if ( !q.linear.consistent() )
        return unsat;
    if ( q.config.lp_relax && !apply_lp_relaxation(q, options.stop) )
        return unsat;
    q.config.lp_relax = false;
    const auto fixed = apply_phase_fixing(q);
    if ( !fixed )
        return unsat;
    unsat.stats.phases_fixed = *fixed;
    if ( q.config.sbt && !apply_symbolic_tightening(q) )
        return unsat;

    auto base = std::make_shared<const QueryState>(std::move(q));
    Scheduler scheduler(cfg, options, deadline);
    scheduler.seed(partition(base, cfg.first_partition(), cfg));
    Verdict v = scheduler.run();
    v.stats.phases_fixed += unsat.stats.phases_fixed;
    return v;
}

} // namespace bnnv::snc
