#ifndef PBO_RECORD_HPP
#define PBO_RECORD_HPP

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <pbo/functions.hpp>

namespace pbo {

    /// Outcome of one optimization run on one instance.
    struct RunRecord {
        std::string method;
        std::uint64_t seed = 0;
        bool success = false;
        std::optional<std::size_t> queries_to_success;
        std::size_t queries = 0; ///< objective evaluations spent
        std::vector<double> best_trace; ///< running max, one entry per query
        std::vector<double> values;     ///< f(x_t) per query
        std::vector<double> lambda_trace; ///< entry 0 is the initial lambda
        std::vector<double> regret_trace; ///< f(x*) - f(x_t), when f(x*) is known
        std::vector<double> posterior_variance; ///< sigma^2_{t-1}(x_t) per query, where tracked
        PointSet points; ///< queried points in search coordinates
        std::size_t initial_queries = 0; ///< leading queries not chosen by the method's rule
        bool aborted = false;
        std::string abort_reason;
        double wallclock = 0.0;
    };

    /// Thrown inside a run when no further query may be issued.
    struct RunFinished {
        bool success = false;
    };

    /// Budget- and success-aware view of an objective for one run.
    /// query() throws RunFinished on first success or when the budget is spent.
    class QueryTracker {
    public:
        QueryTracker(BoxObjective& f, std::size_t budget, RunRecord& record)
            : _f(f), _budget(budget), _record(record)
        {
        }

        double query(const Vector& x)
        {
            if (_record.queries >= _budget)
                throw RunFinished{false};
            const double y = _f.evaluate(x);
            ++_record.queries;
            _record.points.push_back(x);
            _record.values.push_back(y);
            const double prev = _record.best_trace.empty() ? -std::numeric_limits<double>::infinity()
                                                           : _record.best_trace.back();
            _record.best_trace.push_back(std::max(prev, y));
            if (_f.known_max)
                _record.regret_trace.push_back(*_f.known_max - y);
            if (_f.is_success(y)) {
                _record.success = true;
                _record.queries_to_success = _record.queries;
                _last = y;
                throw RunFinished{true};
            }
            _last = y;
            return y;
        }

        /// True when a further query would exceed the budget.
        bool exhausted() const { return _record.queries >= _budget; }
        std::size_t remaining() const { return _budget - _record.queries; }
        std::size_t budget() const { return _budget; }
        double last() const { return _last; }

    private:
        BoxObjective& _f;
        std::size_t _budget;
        RunRecord& _record;
        double _last = 0.0;
    };

} // namespace pbo

#endif
