// SPDX-License-Identifier: Apache-2.0
#include "bnnv/linear_core.hpp"

#include "bnnv/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace bnnv {

bool LinearEquation::has_nonzero() const
{
    return std::any_of(coefficients.begin(), coefficients.end(), [](const auto &t) { return t.second != 0.0; });
}

double LinearEquation::residual(const Assignment &a) const
{
    double sum = -constant;
    for ( const auto &[x, c] : coefficients )
        sum += c * a[x.index];
    return sum;
}

namespace {

/// Dense tableau for one solve. Columns [0, n) are the structural
/// variables, column n + r is the slack of row r, defined as
/// slack_r = sum_j a_rj x_j and fixed to the row's constant.
///
/// Row r of the tableau expresses its basic variable in terms of the
/// nonbasic ones: x_basis[r] = sum_j T[r][j] x_j.
class Simplex
{
public:
    Simplex(std::span<const double> lower, std::span<const double> upper,
            const std::vector<LinearEquation> &equations, const Assignment &hint, const Tolerances &tol)
        : _tol(tol)
        , _n(lower.size())
        , _m(equations.size())
        , _cols(_n + _m)
        , _lo(_cols)
        , _up(_cols)
        , _val(_cols, 0.0)
        , _a(_m * _n, 0.0)
        , _t(_m * _cols, 0.0)
        , _basis(_m)
        , _row_of(_cols, -1)
    {
        for ( std::size_t j = 0; j < _n; ++j )
        {
            _lo[j] = lower[j];
            _up[j] = upper[j];
            double v = j < hint.size() && std::isfinite(hint[j]) ? hint[j] : 0.0;
            _val[j] = std::clamp(v, _lo[j], std::max(_lo[j], _up[j]));
        }
        for ( std::size_t r = 0; r < _m; ++r )
        {
            for ( const auto &[x, c] : equations[r].coefficients )
                _a[r * _n + x.index] += c;
            _lo[_n + r] = _up[_n + r] = equations[r].constant;
            _basis[r] = _n + r;
            _row_of[_n + r] = static_cast<long>(r);
            for ( std::size_t j = 0; j < _n; ++j )
                t(r, j) = _a[r * _n + j];
        }
        recompute_basics();
    }

    /// Phase one: drive every basic variable inside its bounds.
    bool make_feasible()
    {
        std::vector<double> cost(_m);
        while ( true )
        {
            bool infeasible = false;
            for ( std::size_t r = 0; r < _m; ++r )
            {
                const std::size_t b = _basis[r];
                if ( _val[b] < _lo[b] - _tol.bound )
                    cost[r] = -1.0;
                else if ( _val[b] > _up[b] + _tol.bound )
                    cost[r] = 1.0;
                else
                    cost[r] = 0.0;
                infeasible = infeasible || cost[r] != 0.0;
            }
            if ( !infeasible )
                return true;

            auto [entering, direction] = choose_entering(cost, {});
            if ( !entering )
                return false;
            step(*entering, direction, /*phase_one=*/true);
        }
    }

    /// Phase two, minimizing sum cost_j x_j. Requires a feasible basis.
    /// Returns false when the objective is unbounded below.
    bool minimize(const std::vector<double> &objective)
    {
        std::vector<double> cost(_m);
        while ( true )
        {
            for ( std::size_t r = 0; r < _m; ++r )
                cost[r] = _basis[r] < _n ? objective[_basis[r]] : 0.0;
            auto [entering, direction] = choose_entering(cost, objective);
            if ( !entering )
                return true;
            if ( !step(*entering, direction, /*phase_one=*/false) )
                return false;
        }
    }

    Assignment structural_values()
    {
        recompute_basics();
        if ( !residuals_ok() )
        {
            refactor();
            if ( !residuals_ok() )
                throw NumericalError("simplex: equation residuals exceed tolerance after refactorization");
        }
        Assignment out(_val.begin(), _val.begin() + static_cast<long>(_n));
        for ( std::size_t j = 0; j < _n; ++j )
            out[j] = std::clamp(out[j], _lo[j], std::max(_lo[j], _up[j]));
        return out;
    }

    std::uint64_t pivots() const { return _pivots; }

private:
    double &t(std::size_t r, std::size_t j) { return _t[r * _cols + j]; }
    double t(std::size_t r, std::size_t j) const { return _t[r * _cols + j]; }
    bool basic(std::size_t j) const { return _row_of[j] >= 0; }

    void recompute_basics()
    {
        for ( std::size_t r = 0; r < _m; ++r )
        {
            double sum = 0.0;
            for ( std::size_t j = 0; j < _cols; ++j )
                if ( !basic(j) && t(r, j) != 0.0 )
                    sum += t(r, j) * _val[j];
            _val[_basis[r]] = sum;
        }
    }

    bool residuals_ok() const
    {
        for ( std::size_t r = 0; r < _m; ++r )
        {
            double sum = -_lo[_n + r];
            for ( std::size_t j = 0; j < _n; ++j )
                sum += _a[r * _n + j] * _val[j];
            if ( std::fabs(sum) > _tol.equation )
                return false;
        }
        return true;
    }

    /// Rebuilds the tableau from the original rows for the current basis.
    void refactor()
    {
        // W = [A | -I]; Gauss-Jordan on the basic columns.
        std::vector<double> w(_m * _cols, 0.0);
        for ( std::size_t r = 0; r < _m; ++r )
        {
            for ( std::size_t j = 0; j < _n; ++j )
                w[r * _cols + j] = _a[r * _n + j];
            w[r * _cols + _n + r] = -1.0;
        }
        std::vector<std::size_t> columns(_basis);
        std::vector<bool> used(_m, false);
        std::vector<std::size_t> new_basis(_m);
        for ( std::size_t c : columns )
        {
            long best = -1;
            double best_abs = 0.0;
            for ( std::size_t r = 0; r < _m; ++r )
                if ( !used[r] && std::fabs(w[r * _cols + c]) > best_abs )
                {
                    best_abs = std::fabs(w[r * _cols + c]);
                    best = static_cast<long>(r);
                }
            if ( best < 0 || best_abs < 1e-12 )
                throw NumericalError("simplex: singular basis during refactorization");
            const std::size_t pr = static_cast<std::size_t>(best);
            used[pr] = true;
            new_basis[pr] = c;
            const double inv = 1.0 / w[pr * _cols + c];
            for ( std::size_t j = 0; j < _cols; ++j )
                w[pr * _cols + j] *= inv;
            for ( std::size_t r = 0; r < _m; ++r )
            {
                if ( r == pr )
                    continue;
                const double f = w[r * _cols + c];
                if ( f == 0.0 )
                    continue;
                for ( std::size_t j = 0; j < _cols; ++j )
                    w[r * _cols + j] -= f * w[pr * _cols + j];
            }
        }
        _basis = new_basis;
        std::fill(_row_of.begin(), _row_of.end(), -1);
        for ( std::size_t r = 0; r < _m; ++r )
            _row_of[_basis[r]] = static_cast<long>(r);
        for ( std::size_t r = 0; r < _m; ++r )
            for ( std::size_t j = 0; j < _cols; ++j )
                t(r, j) = basic(j) ? 0.0 : -w[r * _cols + j];
        recompute_basics();
    }

    /// Picks an improving nonbasic column for the objective whose basic
    /// cost coefficients are `cost` (plus `direct` on structural columns).
    std::pair<std::optional<std::size_t>, int> choose_entering(const std::vector<double> &cost,
                                                               const std::vector<double> &direct) const
    {
        const bool bland = _degenerate_run >= kBlandAfter;
        std::optional<std::size_t> best;
        int best_direction = 0;
        double best_score = 0.0;
        for ( std::size_t j = 0; j < _cols; ++j )
        {
            if ( basic(j) || _lo[j] == _up[j] )
                continue;
            double d = j < direct.size() ? direct[j] : 0.0;
            for ( std::size_t r = 0; r < _m; ++r )
                if ( cost[r] != 0.0 )
                    d += cost[r] * t(r, j);
            int direction = 0;
            if ( d < -kReducedCostTol && _val[j] < _up[j] - _tol.bound )
                direction = 1;
            else if ( d > kReducedCostTol && _val[j] > _lo[j] + _tol.bound )
                direction = -1;
            if ( direction == 0 )
                continue;
            if ( bland )
                return { j, direction };
            if ( std::fabs(d) > best_score )
            {
                best_score = std::fabs(d);
                best = j;
                best_direction = direction;
            }
        }
        return { best, best_direction };
    }

    /// Moves column q in `direction` as far as the ratio test allows,
    /// pivoting if a basic variable blocks. Returns false if unbounded.
    bool step(std::size_t q, int direction, bool phase_one)
    {
        const double dir = static_cast<double>(direction);
        double own_limit = direction > 0 ? _up[q] - _val[q] : _val[q] - _lo[q];
        own_limit = std::max(0.0, own_limit);

        // Distance basic row r may travel, optionally relaxed by the bound
        // tolerance (Harris pass one), and the bound it then sits on.
        auto limit_of = [&](std::size_t r, double relax, double &target) -> double {
            const double rate = t(r, q) * dir;
            if ( std::fabs(t(r, q)) < _tol.pivot )
                return kInfinity;
            const std::size_t b = _basis[r];
            const double v = _val[b];
            if ( rate > 0 )
            {
                if ( phase_one && v < _lo[b] - _tol.bound )
                {
                    target = _lo[b];
                    return (_lo[b] + relax - v) / rate;
                }
                if ( phase_one && v > _up[b] + _tol.bound )
                    return kInfinity;
                target = _up[b];
                return std::isfinite(_up[b]) ? std::max(0.0, (_up[b] + relax - v) / rate) : kInfinity;
            }
            if ( phase_one && v > _up[b] + _tol.bound )
            {
                target = _up[b];
                return (v - _up[b] + relax) / -rate;
            }
            if ( phase_one && v < _lo[b] - _tol.bound )
                return kInfinity;
            target = _lo[b];
            return std::isfinite(_lo[b]) ? std::max(0.0, (v - _lo[b] + relax) / -rate) : kInfinity;
        };

        const bool bland = _degenerate_run >= kBlandAfter;
        long leaving = -1;
        double theta = own_limit;
        double target = 0.0;

        if ( bland )
        {
            for ( std::size_t r = 0; r < _m; ++r )
            {
                double tgt = 0.0;
                const double lim = limit_of(r, 0.0, tgt);
                if ( lim < theta || (lim == theta && leaving >= 0 && lim < kInfinity &&
                                     _basis[r] < _basis[static_cast<std::size_t>(leaving)]) )
                {
                    theta = lim;
                    leaving = static_cast<long>(r);
                    target = tgt;
                }
            }
        }
        else
        {
            double relaxed = kInfinity;
            for ( std::size_t r = 0; r < _m; ++r )
            {
                double tgt = 0.0;
                relaxed = std::min(relaxed, limit_of(r, _tol.bound, tgt));
            }
            if ( relaxed < own_limit )
            {
                double best_abs = 0.0;
                for ( std::size_t r = 0; r < _m; ++r )
                {
                    double tgt = 0.0;
                    const double lim = limit_of(r, 0.0, tgt);
                    if ( lim <= relaxed && std::fabs(t(r, q)) > best_abs )
                    {
                        best_abs = std::fabs(t(r, q));
                        leaving = static_cast<long>(r);
                        theta = lim;
                        target = tgt;
                    }
                }
            }
        }

        if ( !std::isfinite(theta) )
        {
            if ( phase_one )
                throw NumericalError("simplex: phase one found no blocking row for an improving column");
            return false;
        }

        _degenerate_run = theta <= 1e-12 ? _degenerate_run + 1 : 0;
        if ( ++_pivots > kMaxIterations )
            throw NumericalError("simplex: iteration limit exceeded");

        _val[q] += dir * theta;
        for ( std::size_t r = 0; r < _m; ++r )
            if ( t(r, q) != 0.0 )
                _val[_basis[r]] += t(r, q) * dir * theta;

        if ( leaving < 0 )
        {
            // Bound flip, no basis change.
            _val[q] = direction > 0 ? _up[q] : _lo[q];
            return true;
        }
        const std::size_t r = static_cast<std::size_t>(leaving);
        _val[_basis[r]] = target;
        pivot(r, q);
        if ( ++_since_refactor >= kRefactorEvery )
        {
            refactor();
            _since_refactor = 0;
        }
        return true;
    }

    void pivot(std::size_t r, std::size_t q)
    {
        const std::size_t p = _basis[r];
        const double a = t(r, q);
        // Row r becomes x_q = (x_p - sum_{j != q} T[r][j] x_j) / a.
        for ( std::size_t j = 0; j < _cols; ++j )
            t(r, j) = -t(r, j) / a;
        t(r, p) = 1.0 / a;
        t(r, q) = 0.0;
        for ( std::size_t i = 0; i < _m; ++i )
        {
            if ( i == r )
                continue;
            const double f = t(i, q);
            if ( f == 0.0 )
                continue;
            for ( std::size_t j = 0; j < _cols; ++j )
                t(i, j) += f * t(r, j);
            t(i, q) = 0.0;
        }
        _basis[r] = q;
        _row_of[q] = static_cast<long>(r);
        _row_of[p] = -1;
    }

    static constexpr double kReducedCostTol = 1e-9;
    static constexpr std::size_t kBlandAfter = 100;
    static constexpr std::size_t kRefactorEvery = 100;
    static constexpr std::uint64_t kMaxIterations = 1'000'000;

    const Tolerances &_tol;
    std::size_t _n;
    std::size_t _m;
    std::size_t _cols;
    std::vector<double> _lo;
    std::vector<double> _up;
    std::vector<double> _val;
    std::vector<double> _a; // original rows, m x n
    std::vector<double> _t; // tableau, m x cols
    std::vector<std::size_t> _basis;
    std::vector<long> _row_of;
    std::size_t _degenerate_run = 0;
    std::size_t _since_refactor = 0;
    std::uint64_t _pivots = 0;
};

} // namespace

LinearCore::LinearCore(Tolerances tolerances)
    : _tol(tolerances)
{
}

VariableId LinearCore::declare_variable()
{
    VariableId id{ static_cast<std::uint32_t>(_lower.size()) };
    _lower.push_back(-kInfinity);
    _upper.push_back(kInfinity);
    return id;
}

BoundStatus LinearCore::tighten_bounds(VariableId x, std::optional<double> lower, std::optional<double> upper)
{
    if ( x.index >= _lower.size() )
        throw PreconditionError("tighten_bounds: undeclared variable " + std::to_string(x.index));
    double lo = _lower[x.index];
    double up = _upper[x.index];
    const double old_lo = lo;
    const double old_up = up;
    if ( lower && *lower > lo )
        lo = *lower;
    if ( upper && *upper < up )
        up = *upper;
    BoundStatus status = BoundStatus::Consistent;
    if ( lo > up )
    {
        if ( lo > up + _tol.bound )
            status = BoundStatus::Inconsistent;
        // Crossed only by rounding noise: collapse onto the older bound.
        else if ( lo != old_lo )
            lo = up;
        else
            up = lo;
    }
    if ( lo == old_lo && up == old_up )
        return status;
    if ( !_frames.empty() )
        _trail.push_back({ x.index, old_lo, old_up });
    _lower[x.index] = lo;
    _upper[x.index] = up;
    return status;
}

bool LinearCore::consistent() const
{
    for ( std::size_t i = 0; i < _lower.size(); ++i )
        if ( _lower[i] > _upper[i] )
            return false;
    return true;
}

void LinearCore::assert_equation(LinearEquation eq)
{
    for ( auto it = eq.coefficients.begin(); it != eq.coefficients.end(); )
    {
        if ( it->first.index >= _lower.size() )
            throw PreconditionError("assert_equation: undeclared variable " + std::to_string(it->first.index));
        it = it->second == 0.0 ? eq.coefficients.erase(it) : std::next(it);
    }
    if ( eq.coefficients.empty() )
        throw PreconditionError("assert_equation: equation has no nonzero coefficient");
    _equations.push_back(std::move(eq));
}

std::optional<VariableId> LinearCore::assert_inequality(const std::map<VariableId, double> &coefficients,
                                                        Relation rel, double rhs)
{
    std::map<VariableId, double> terms;
    for ( const auto &[x, c] : coefficients )
        if ( c != 0.0 )
            terms[x] += c;
    if ( terms.empty() )
        throw PreconditionError("assert_inequality: no nonzero coefficient");

    auto bound_on = [&](VariableId x, double lo, double up) {
        tighten_bounds(x, std::isfinite(lo) ? std::optional<double>(lo) : std::nullopt,
                       std::isfinite(up) ? std::optional<double>(up) : std::nullopt);
    };
    const double lo = rel == Relation::LessEq ? -kInfinity : rhs;
    const double up = rel == Relation::GreaterEq ? kInfinity : rhs;

    if ( terms.size() == 1 )
    {
        const auto [x, c] = *terms.begin();
        double l = lo / c;
        double u = up / c;
        if ( c < 0 )
            std::swap(l, u);
        bound_on(x, l, u);
        return std::nullopt;
    }

    VariableId aux = declare_variable();
    LinearEquation eq;
    eq.coefficients = terms;
    eq.coefficients[aux] = -1.0;
    eq.constant = 0.0;
    assert_equation(std::move(eq));
    bound_on(aux, lo, up);
    return aux;
}

void LinearCore::push()
{
    _frames.push_back({ _trail.size(), _equations.size() });
}

void LinearCore::pop()
{
    if ( _frames.empty() )
        throw PreconditionError("LinearCore::pop without matching push");
    const Frame frame = _frames.back();
    _frames.pop_back();
    while ( _trail.size() > frame.trail_size )
    {
        const BoundChange &change = _trail.back();
        _lower[change.variable] = change.lower;
        _upper[change.variable] = change.upper;
        _trail.pop_back();
    }
    _equations.resize(frame.equation_count);
}

FeasibilityResult LinearCore::find_feasible(const Assignment &hint)
{
    FeasibilityResult result;
    if ( !consistent() )
        return result;
    Simplex simplex(_lower, _upper, _equations, hint, _tol);
    const bool feasible = simplex.make_feasible();
    _pivots += simplex.pivots();
    if ( !feasible )
        return result;
    result.status = FeasibilityResult::Status::Feasible;
    result.assignment = simplex.structural_values();
    return result;
}

OptimizeResult LinearCore::optimize(const std::map<VariableId, double> &objective, Direction direction,
                                    const Assignment &hint)
{
    OptimizeResult result;
    if ( !consistent() )
        return result;
    Simplex simplex(_lower, _upper, _equations, hint, _tol);
    if ( !simplex.make_feasible() )
    {
        _pivots += simplex.pivots();
        return result;
    }
    std::vector<double> cost(_lower.size(), 0.0);
    const double sense = direction == Direction::Minimize ? 1.0 : -1.0;
    for ( const auto &[x, c] : objective )
        cost[x.index] += sense * c;
    const bool bounded = simplex.minimize(cost);
    _pivots += simplex.pivots();
    if ( !bounded )
    {
        result.status = OptimizeResult::Status::Unbounded;
        return result;
    }
    result.status = OptimizeResult::Status::Optimal;
    result.assignment = simplex.structural_values();
    double value = 0.0;
    for ( const auto &[x, c] : objective )
        value += c * result.assignment[x.index];
    result.value = value;
    return result;
}

BoundStatus LinearCore::propagate_bounds(std::size_t max_passes)
{
    for ( std::size_t pass = 0; pass < max_passes; ++pass )
    {
        bool changed = false;
        for ( const LinearEquation &eq : _equations )
        {
            // Interval of sum_i c_i x_i, tracking infinite contributions
            // separately so each term's own share can be removed.
            double lo_sum = 0.0;
            double hi_sum = 0.0;
            int lo_inf = 0;
            int hi_inf = 0;
            for ( const auto &[x, c] : eq.coefficients )
            {
                const double a = c > 0 ? c * _lower[x.index] : c * _upper[x.index];
                const double b = c > 0 ? c * _upper[x.index] : c * _lower[x.index];
                if ( std::isinf(a) )
                    ++lo_inf;
                else
                    lo_sum += a;
                if ( std::isinf(b) )
                    ++hi_inf;
                else
                    hi_sum += b;
            }
            for ( const auto &[x, c] : eq.coefficients )
            {
                const double a = c > 0 ? c * _lower[x.index] : c * _upper[x.index];
                const double b = c > 0 ? c * _upper[x.index] : c * _lower[x.index];
                // Bounds of the remaining terms.
                double rest_lo;
                double rest_hi;
                if ( std::isinf(a) )
                    rest_lo = lo_inf > 1 ? -kInfinity : lo_sum;
                else
                    rest_lo = lo_inf > 0 ? -kInfinity : lo_sum - a;
                if ( std::isinf(b) )
                    rest_hi = hi_inf > 1 ? kInfinity : hi_sum;
                else
                    rest_hi = hi_inf > 0 ? kInfinity : hi_sum - b;

                // c x = constant - rest
                double new_lo = (eq.constant - rest_hi) / c;
                double new_hi = (eq.constant - rest_lo) / c;
                if ( c < 0 )
                    std::swap(new_lo, new_hi);

                const double old_lo = _lower[x.index];
                const double old_hi = _upper[x.index];
                std::optional<double> tl;
                std::optional<double> th;
                if ( std::isfinite(new_lo) && new_lo > old_lo + _tol.bound * std::max(1.0, std::fabs(new_lo)) )
                    tl = new_lo;
                if ( std::isfinite(new_hi) && new_hi < old_hi - _tol.bound * std::max(1.0, std::fabs(new_hi)) )
                    th = new_hi;
                if ( !tl && !th )
                    continue;
                if ( tighten_bounds(x, tl, th) == BoundStatus::Inconsistent )
                    return BoundStatus::Inconsistent;
                changed = true;
                // The sums above are now stale; they stay sound (looser),
                // and the next pass picks up the improvement.
            }
        }
        if ( !changed )
            break;
    }
    return BoundStatus::Consistent;
}

bool LinearCore::satisfies(const Assignment &a) const
{
    if ( a.size() < _lower.size() )
        return false;
    for ( std::size_t i = 0; i < _lower.size(); ++i )
        if ( a[i] < _lower[i] - _tol.bound || a[i] > _upper[i] + _tol.bound )
            return false;
    for ( const LinearEquation &eq : _equations )
        if ( std::fabs(eq.residual(a)) > _tol.equation )
            return false;
    return true;
}

LinearSnapshot LinearCore::snapshot() const
{
    return { _lower, _upper, _equations };
}

} // namespace bnnv
