#ifndef PBO_HARNESS_HPP
#define PBO_HARNESS_HPP

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include <pbo/external.hpp>
#include <pbo/optimizer.hpp>

namespace pbo {

    /// One experiment grid: an objective family, seeds, and methods.
    struct ExperimentSpec {
        std::string family = "rkhs_pair"; // rkhs_pair | linear | quadratic | external
        Eigen::Index dim = 6;
        Eigen::Index centers = 10;
        double cos_angle = 0.9;
        /// Percentile of f over the box used as the success threshold (rkhs_pair).
        double success_percentile = default_success_percentile;
        std::vector<std::uint64_t> seeds;
        std::vector<RunConfig> methods; ///< seed is filled per cell
        std::string command;            ///< external family only
        double timeout_s = 30.0;
        std::string output;
        bool overwrite = false;
        unsigned threads = 0; ///< 0: hardware concurrency
    };

    namespace detail {
        inline Method parse_method(const std::string& name, RunConfig& cfg)
        {
            static const std::regex fixed_re(R"(pbo_fixed(?:\(([-+0-9.eE]+)\))?)");
            std::smatch m;
            if (name == "pbo" || name == "pbo_adaptive")
                return Method::pbo_adaptive;
            if (std::regex_match(name, m, fixed_re)) {
                if (m[1].matched)
                    cfg.fixed_lambda = std::stod(m[1].str());
                return Method::pbo_fixed;
            }
            if (name == "bo")
                return Method::bo;
            if (name == "rgf")
                return Method::rgf;
            if (name == "prgf" || name == "prgf-fixed")
                return Method::prgf;
            if (name == "prior_only")
                return Method::prior_only;
            if (name == "random")
                return Method::random;
            throw ConfigError("unknown method: " + name);
        }

        template <typename T>
        T get_or(const nlohmann::json& j, const char* key, T fallback)
        {
            if (!j.contains(key) || j[key].is_null())
                return fallback;
            try {
                return j[key].get<T>();
            }
            catch (const nlohmann::json::exception&) {
                throw ConfigError(std::string("spec key '") + key + "' has the wrong type");
            }
        }
    } // namespace detail

    /// Parse a JSON experiment spec. Keys: family, dim, centers, cos_angle,
    /// seeds, methods, budget, init_size, beta, beta_mode, sigma2,
    /// lambda_mode, dim_low, output (plus optional success_percentile,
    /// command, timeout, threads, overwrite, lambda, restarts, iters, lr).
    inline ExperimentSpec parse_spec(const nlohmann::json& j)
    {
        if (!j.is_object())
            throw ConfigError("spec must be a JSON object");
        static const std::vector<std::string> known = {
            "family", "dim",    "centers",  "cos_angle", "seeds",   "methods", "budget",    "init_size",
            "beta",   "beta_mode", "sigma2", "lambda_mode", "dim_low", "output", "command", "timeout",
            "threads", "overwrite", "lambda", "restarts", "iters", "lr", "success_percentile"};
        for (const auto& [k, v] : j.items())
            if (std::find(known.begin(), known.end(), k) == known.end())
                throw ConfigError("unknown spec key: " + k);

        ExperimentSpec s;
        s.family = detail::get_or<std::string>(j, "family", s.family);
        s.dim = detail::get_or<Eigen::Index>(j, "dim", s.dim);
        s.centers = detail::get_or<Eigen::Index>(j, "centers", s.centers);
        s.cos_angle = detail::get_or<double>(j, "cos_angle", s.cos_angle);
        s.success_percentile = detail::get_or<double>(j, "success_percentile", s.success_percentile);
        s.command = detail::get_or<std::string>(j, "command", "");
        s.timeout_s = detail::get_or<double>(j, "timeout", 30.0);
        s.output = detail::get_or<std::string>(j, "output", "");
        s.overwrite = detail::get_or<bool>(j, "overwrite", false);
        s.threads = detail::get_or<unsigned>(j, "threads", 0u);

        if (j.contains("seeds")) {
            const auto& sj = j["seeds"];
            if (sj.is_array())
                s.seeds = sj.get<std::vector<std::uint64_t>>();
            else if (sj.is_number_integer() && sj.get<std::int64_t>() >= 0)
                for (std::uint64_t i = 0; i < sj.get<std::uint64_t>(); ++i)
                    s.seeds.push_back(i);
            else
                throw ConfigError("seeds must be a list or a count");
        }
        if (s.seeds.empty())
            throw ConfigError("spec needs at least one seed");
        if (s.dim < 1 || s.centers < 1)
            throw ConfigError("dim and centers must be positive");
        if (!(s.success_percentile > 0.0 && s.success_percentile < 1.0))
            throw ConfigError("success_percentile must lie in (0, 1)");
        if (!(s.cos_angle >= -1.0 && s.cos_angle <= 1.0))
            throw ConfigError("cos_angle must lie in [-1, 1]");
        if (s.family != "rkhs_pair" && s.family != "linear" && s.family != "quadratic" && s.family != "external")
            throw ConfigError("unknown family: " + s.family);
        if (s.family == "external" && s.command.empty())
            throw ConfigError("external family needs a command");

        RunConfig base;
        base.budget = detail::get_or<std::size_t>(j, "budget", base.budget);
        base.init_size = detail::get_or<std::size_t>(j, "init_size", base.init_size);
        base.acquisition.beta = detail::get_or<double>(j, "beta", base.acquisition.beta);
        base.acquisition.restarts = detail::get_or<int>(j, "restarts", base.acquisition.restarts);
        base.acquisition.iters = detail::get_or<int>(j, "iters", base.acquisition.iters);
        base.acquisition.lr = detail::get_or<double>(j, "lr", base.acquisition.lr);
        const auto beta_mode = detail::get_or<std::string>(j, "beta_mode", "fixed");
        if (beta_mode == "fixed")
            base.acquisition.beta_mode = BetaMode::fixed;
        else if (beta_mode == "oracle_rkhs")
            base.acquisition.beta_mode = BetaMode::oracle_rkhs;
        else
            throw ConfigError("unknown beta_mode: " + beta_mode);
        base.jitter = detail::get_or<double>(j, "sigma2", base.jitter);
        if (j.contains("dim_low") && !j["dim_low"].is_null())
            base.dim_low = j["dim_low"].get<Eigen::Index>();

        // lambda_mode: "adaptive" or "fixed" (with "lambda", default 1); it
        // selects what the plain "pbo" method means.
        const auto lambda_mode = detail::get_or<std::string>(j, "lambda_mode", "adaptive");
        const double lambda = detail::get_or<double>(j, "lambda", 1.0);
        if (lambda_mode != "adaptive" && lambda_mode != "fixed")
            throw ConfigError("lambda_mode must be 'adaptive' or 'fixed'");
        base.fixed_lambda = lambda;

        if (base.budget < 1 || base.init_size < 1)
            throw ConfigError("budget and init_size must be positive");
        if (base.init_size >= base.budget)
            throw ConfigError("init_size must be smaller than budget");
        if (base.dim_low && (*base.dim_low < 1 || s.dim % *base.dim_low != 0))
            throw ConfigError("dim_low must divide dim");

        const auto names = detail::get_or<std::vector<std::string>>(j, "methods", {"pbo", "bo"});
        if (names.empty())
            throw ConfigError("methods must be nonempty");
        for (const auto& n : names) {
            RunConfig c = base;
            c.method = detail::parse_method(n, c);
            if (c.method == Method::pbo_adaptive && lambda_mode == "fixed")
                c.method = Method::pbo_fixed;
            if (c.acquisition.beta_mode == BetaMode::oracle_rkhs && c.method == Method::pbo_adaptive)
                throw ConfigError("beta_mode oracle_rkhs requires lambda_mode fixed");
            s.methods.push_back(c);
        }
        return s;
    }

    inline ExperimentSpec load_spec(const std::filesystem::path& path)
    {
        std::ifstream in(path);
        if (!in)
            throw ConfigError("cannot open spec file: " + path.string());
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in, nullptr, true, true);
        }
        catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("spec parse error: ") + e.what());
        }
        return parse_spec(j);
    }

    /// One objective/prior instance, rebuilt from the seed in each cell.
    struct Instance {
        BoxObjective f;
        PriorFunction prior;
    };

    inline Instance make_instance(const ExperimentSpec& spec, std::uint64_t seed)
    {
        if (spec.family == "rkhs_pair") {
            auto pair = make_pair(spec.dim, spec.cos_angle, seed, spec.centers, std::nullopt, spec.success_percentile);
            return {std::move(pair.f), std::move(pair.prior)};
        }
        if (spec.family == "linear") {
            auto [f, p] = make_linear_pair(spec.dim, seed);
            return {std::move(f), std::move(p)};
        }
        if (spec.family == "quadratic") {
            // optimum c uniform in [-0.5, 0.5]^d; prior optimum offset along a
            // random direction so that the prior is only roughly right
            Rng rng = make_rng(seed, "quadratic");
            const Vector c = 0.5 * uniform_in_box(spec.dim, rng);
            const Vector off = standard_normal(spec.dim, rng);
            const double spread = std::sqrt(std::max(0.0, 1.0 - spec.cos_angle));
            const Vector cp = (c + spread * off / off.norm()).cwiseMax(-1.0).cwiseMin(1.0);
            return {make_quadratic(c, 0.1 * std::sqrt(static_cast<double>(spec.dim))), quadratic_prior(cp)};
        }
        ProtocolConfig pc;
        pc.timeout = std::chrono::milliseconds(static_cast<long long>(spec.timeout_s * 1000.0));
        BoxObjective f = external_objective(spec.command, pc);
        const Eigen::Index d = f.dim();
        return {std::move(f), PriorFunction::zero(d)};
    }

    struct AggregateRow {
        std::string method;
        double asr = 0.0;
        std::optional<double> avg_q;
        std::optional<double> med_q;
        std::size_t n_runs = 0;
    };

    /// Lower median for even counts.
    inline double lower_median(std::vector<double> v)
    {
        if (v.empty())
            throw ContractError("median of empty set");
        std::sort(v.begin(), v.end());
        return v[(v.size() - 1) / 2];
    }

    /// Per-method ASR and mean / lower-median queries over successful runs.
    /// Rows follow the first-appearance order of methods in `order` (or in
    /// the records); within a method, runs are taken in seed order.
    inline std::vector<AggregateRow> aggregate(std::vector<RunRecord> records,
                                               const std::vector<std::string>& order = {})
    {
        std::vector<std::string> methods = order;
        for (const auto& r : records)
            if (std::find(methods.begin(), methods.end(), r.method) == methods.end())
                methods.push_back(r.method);
        std::stable_sort(records.begin(), records.end(),
                         [](const RunRecord& a, const RunRecord& b) { return a.seed < b.seed; });
        std::vector<AggregateRow> rows;
        for (const auto& m : methods) {
            AggregateRow row;
            row.method = m;
            std::vector<double> q;
            for (const auto& r : records) {
                if (r.method != m)
                    continue;
                ++row.n_runs;
                if (r.success && r.queries_to_success)
                    q.push_back(static_cast<double>(*r.queries_to_success));
            }
            if (row.n_runs == 0)
                continue;
            row.asr = static_cast<double>(q.size()) / static_cast<double>(row.n_runs);
            if (!q.empty()) {
                double sum = 0.0;
                for (double v : q)
                    sum += v;
                row.avg_q = sum / static_cast<double>(q.size());
                row.med_q = lower_median(q);
            }
            rows.push_back(row);
        }
        return rows;
    }

    struct LambdaStat {
        std::size_t iter = 0;
        double mean = 0.0;
        double std = 0.0;
        std::size_t n = 0;
    };

    /// Mean and (population) std of lambda per iteration across runs; runs
    /// shorter than an iteration are left out of it.
    inline std::vector<LambdaStat> lambda_trajectory_stats(const std::vector<RunRecord>& records,
                                                           std::size_t horizon = 30)
    {
        if (records.empty())
            throw ContractError("lambda_trajectory_stats: no records");
        std::vector<LambdaStat> out;
        for (std::size_t i = 0; i < horizon; ++i) {
            LambdaStat s;
            s.iter = i;
            for (const auto& r : records)
                if (i < r.lambda_trace.size()) {
                    s.mean += r.lambda_trace[i];
                    ++s.n;
                }
            if (s.n == 0)
                break;
            s.mean /= static_cast<double>(s.n);
            double var = 0.0;
            for (const auto& r : records)
                if (i < r.lambda_trace.size())
                    var += (r.lambda_trace[i] - s.mean) * (r.lambda_trace[i] - s.mean);
            s.std = std::sqrt(var / static_cast<double>(s.n));
            out.push_back(s);
        }
        return out;
    }

    struct ExperimentResult {
        std::vector<RunRecord> records; ///< cell order: seed-major, then method
        std::vector<AggregateRow> rows;
    };

    /// Run every (seed x method) cell on a worker pool. Cells write into
    /// preassigned slots, so results do not depend on completion order.
    inline ExperimentResult run_experiment(const ExperimentSpec& spec)
    {
        if (spec.methods.empty() || spec.seeds.empty())
            throw ConfigError("spec needs methods and seeds");
        const std::size_t n_methods = spec.methods.size();
        const std::size_t cells = spec.seeds.size() * n_methods;
        ExperimentResult res;
        res.records.resize(cells);
        std::atomic<std::size_t> next{0};

        auto worker = [&] {
            for (;;) {
                const std::size_t c = next.fetch_add(1);
                if (c >= cells)
                    return;
                const std::uint64_t seed = spec.seeds[c / n_methods];
                RunConfig cfg = spec.methods[c % n_methods];
                cfg.seed = seed;
                RunRecord rec;
                try {
                    Instance inst = make_instance(spec, seed);
                    rec = run_method(inst.f, inst.prior, cfg);
                    if (rec.queries != inst.f.calls() && !rec.aborted) {
                        rec.aborted = true;
                        rec.abort_reason = "query accounting mismatch";
                    }
                }
                catch (const std::exception& e) {
                    rec = RunRecord{};
                    rec.aborted = true;
                    rec.abort_reason = e.what();
                }
                rec.method = method_label(cfg);
                rec.seed = seed;
                res.records[c] = std::move(rec);
            }
        };
        unsigned n_threads = spec.threads ? spec.threads : std::max(1u, std::thread::hardware_concurrency());
        n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, cells));
        std::vector<std::thread> pool;
        for (unsigned i = 1; i < n_threads; ++i)
            pool.emplace_back(worker);
        worker();
        for (auto& t : pool)
            t.join();

        std::vector<std::string> order;
        for (const auto& m : spec.methods)
            order.push_back(method_label(m));
        res.rows = aggregate(res.records, order);
        return res;
    }

    // ---- report files ----

    inline std::string format_double(double v)
    {
        char buf[64];
        const auto r = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, r.ptr);
    }

    inline constexpr const char* aggregate_header = "method,asr,avg_q,med_q,n_runs";
    inline constexpr const char* lambda_header = "iter,mean,std,n";

    inline nlohmann::ordered_json record_to_json(const RunRecord& r)
    {
        nlohmann::ordered_json j;
        j["method"] = r.method;
        j["seed"] = r.seed;
        j["success"] = r.success;
        j["queries"] = r.queries;
        j["best_trace"] = r.best_trace;
        j["lambda_trace"] = r.lambda_trace;
        return j;
    }

    inline std::string record_to_jsonl(const RunRecord& r) { return record_to_json(r).dump(); }

    inline RunRecord record_from_json(const nlohmann::json& j)
    {
        RunRecord r;
        try {
            r.method = j.at("method").get<std::string>();
            r.seed = j.at("seed").get<std::uint64_t>();
            r.success = j.at("success").get<bool>();
            r.queries = j.at("queries").get<std::size_t>();
            r.best_trace = j.at("best_trace").get<std::vector<double>>();
            r.lambda_trace = j.at("lambda_trace").get<std::vector<double>>();
        }
        catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("malformed run record: ") + e.what());
        }
        if (r.success)
            r.queries_to_success = r.queries;
        return r;
    }

    inline std::vector<RunRecord> read_runs_jsonl(const std::filesystem::path& path)
    {
        std::ifstream in(path);
        if (!in)
            throw ConfigError("cannot open " + path.string());
        std::vector<RunRecord> out;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty())
                continue;
            try {
                out.push_back(record_from_json(nlohmann::json::parse(line)));
            }
            catch (const nlohmann::json::parse_error& e) {
                throw ConfigError(std::string("runs.jsonl parse error: ") + e.what());
            }
        }
        return out;
    }

    inline std::string aggregate_csv(const std::vector<AggregateRow>& rows)
    {
        std::string s = std::string(aggregate_header) + "\n";
        for (const auto& r : rows) {
            s += r.method + "," + format_double(r.asr) + "," + (r.avg_q ? format_double(*r.avg_q) : "") + ","
                 + (r.med_q ? format_double(*r.med_q) : "") + "," + std::to_string(r.n_runs) + "\n";
        }
        return s;
    }

    inline std::string lambda_csv(const std::vector<LambdaStat>& stats)
    {
        std::string s = std::string(lambda_header) + "\n";
        for (const auto& st : stats)
            s += std::to_string(st.iter) + "," + format_double(st.mean) + "," + format_double(st.std) + ","
                 + std::to_string(st.n) + "\n";
        return s;
    }

    /// Parse aggregate.csv back into rows (empty fields become absent).
    inline std::vector<AggregateRow> parse_aggregate_csv(const std::string& text)
    {
        std::vector<AggregateRow> rows;
        std::istringstream in(text);
        std::string line;
        if (!std::getline(in, line) || line != aggregate_header)
            throw ConfigError("aggregate.csv: unexpected header");
        while (std::getline(in, line)) {
            if (line.empty())
                continue;
            std::vector<std::string> f;
            std::string cell;
            std::istringstream ls(line);
            while (std::getline(ls, cell, ','))
                f.push_back(cell);
            if (line.back() == ',')
                f.emplace_back();
            if (f.size() != 5)
                throw ConfigError("aggregate.csv: bad row: " + line);
            AggregateRow r;
            r.method = f[0];
            r.asr = std::stod(f[1]);
            if (!f[2].empty())
                r.avg_q = std::stod(f[2]);
            if (!f[3].empty())
                r.med_q = std::stod(f[3]);
            r.n_runs = std::stoul(f[4]);
            rows.push_back(r);
        }
        return rows;
    }

    /// Records whose lambda was adapted (method "pbo").
    inline std::vector<RunRecord> adaptive_records(const std::vector<RunRecord>& records)
    {
        std::vector<RunRecord> out;
        for (const auto& r : records)
            if (r.method == "pbo" && !r.lambda_trace.empty())
                out.push_back(r);
        return out;
    }

    /// Write aggregate.csv, runs.jsonl and lambda_traj.csv into `dir`.
    inline void emit_report(const std::vector<AggregateRow>& rows, const std::vector<RunRecord>& records,
                            const std::filesystem::path& dir, bool overwrite = false)
    {
        namespace fs = std::filesystem;
        const fs::path agg = dir / "aggregate.csv";
        const fs::path runs = dir / "runs.jsonl";
        const fs::path lam = dir / "lambda_traj.csv";
        if (!overwrite)
            for (const auto& p : {agg, runs, lam})
                if (fs::exists(p))
                    throw ConfigError("refusing to overwrite " + p.string() + " (pass overwrite)");
        fs::create_directories(dir);
        auto write = [](const fs::path& p, const std::string& s) {
            std::ofstream out(p, std::ios::binary | std::ios::trunc);
            if (!out)
                throw ConfigError("cannot write " + p.string());
            out << s;
        };
        write(agg, aggregate_csv(rows));
        std::string lines;
        for (const auto& r : records)
            lines += record_to_jsonl(r) + "\n";
        write(runs, lines);
        const auto adaptive = adaptive_records(records);
        write(lam, adaptive.empty() ? std::string(lambda_header) + "\n"
                                    : lambda_csv(lambda_trajectory_stats(adaptive)));
    }

} // namespace pbo

#endif
