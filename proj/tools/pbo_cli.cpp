// pbo: run experiment specs, verify acceptance properties, time the core
// operations, and summarize runs.jsonl files.
//
// Exit codes: 0 success, 1 configuration error, 2 some runs aborted,
// 3 verification failure.
#include <chrono>
#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include <pbo/pbo.hpp>

#include "acceptance_suite.hpp"

namespace {

    constexpr int exit_ok = 0;
    constexpr int exit_config = 1;
    constexpr int exit_run_failures = 2;
    constexpr int exit_verify = 3;

    void print_rows(const std::vector<pbo::AggregateRow>& rows)
    {
        std::printf("%-16s %6s %8s %8s %6s\n", "method", "asr", "avg_q", "med_q", "runs");
        for (const auto& r : rows) {
            std::printf("%-16s %6.3f ", r.method.c_str(), r.asr);
            if (r.avg_q)
                std::printf("%8.2f %8.0f", *r.avg_q, *r.med_q);
            else
                std::printf("%8s %8s", "-", "-");
            std::printf(" %6zu\n", r.n_runs);
        }
    }

    int cmd_run(const std::string& spec_path, const std::string& output, bool overwrite, unsigned threads)
    {
        pbo::ExperimentSpec spec = pbo::load_spec(spec_path);
        if (!output.empty())
            spec.output = output;
        if (overwrite)
            spec.overwrite = true;
        if (threads)
            spec.threads = threads;
        if (spec.output.empty())
            throw pbo::ConfigError("no output directory (set \"output\" in the spec or pass --output)");
        // fail before spending the budget if the report would be refused
        if (!spec.overwrite)
            for (const char* name : {"aggregate.csv", "runs.jsonl", "lambda_traj.csv"})
                if (std::filesystem::exists(std::filesystem::path(spec.output) / name))
                    throw pbo::ConfigError("refusing to overwrite " + (std::filesystem::path(spec.output) / name).string()
                                           + " (pass --overwrite)");

        const auto res = pbo::run_experiment(spec);
        pbo::emit_report(res.rows, res.records, spec.output, spec.overwrite);
        print_rows(res.rows);

        std::size_t aborted = 0;
        for (const auto& r : res.records)
            if (r.aborted) {
                ++aborted;
                std::cerr << "aborted: " << r.method << " seed " << r.seed << ": " << r.abort_reason << "\n";
            }
        std::cout << res.records.size() << " runs written to " << spec.output << "\n";
        return aborted ? exit_run_failures : exit_ok;
    }

    int cmd_verify(const std::vector<int>& only)
    {
        const auto outcomes = acceptance::run_all(std::cout, only);
        std::size_t passed = 0;
        for (const auto& o : outcomes)
            passed += o.pass ? 1 : 0;
        std::cout << passed << "/" << outcomes.size() << " criteria passed\n";
        return passed == outcomes.size() ? exit_ok : exit_verify;
    }

    template <typename F>
    double time_ms(F&& f, int reps)
    {
        const auto t0 = std::chrono::steady_clock::now();
        for (int i = 0; i < reps; ++i)
            f();
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() / reps;
    }

    int cmd_bench(Eigen::Index dim, std::size_t budget, int seeds)
    {
        using namespace pbo;
        std::printf("dim %ld, budget %zu, %d seeds\n", static_cast<long>(dim), budget, seeds);
        const auto pair = make_pair(dim, 0.9, 1, 20);
        for (int n : {50, 150, 300}) {
            Rng rng(static_cast<std::uint64_t>(n));
            ObservationSet obs;
            for (int i = 0; i < n; ++i) {
                const Vector x = uniform_in_box(dim, rng);
                obs.append(x, pair.f.peek(x), pair.prior(x));
            }
            const KernelParams k = KernelParams::for_dim(dim);
            GaussianProcessModel model;
            const double t_fit = time_ms([&] { model = fit(obs, k, FitConfig{}); }, 5);
            const Vector x = uniform_in_box(dim, rng);
            const double t_pred = time_ms([&] { (void)model.predict_with_gradient(pair.prior, x); }, 200);
            const double t_acq = time_ms(
                [&] { (void)maximize_acquisition(model, obs, pair.prior, SearchBox{dim}, AcquisitionConfig{}, rng); },
                3);
            std::printf("n=%4d  fit %8.3f ms  posterior+grad %8.4f ms  acquisition %8.2f ms\n", n, t_fit, t_pred,
                        t_acq);
        }
        for (Method m : {Method::pbo_adaptive, Method::bo, Method::rgf, Method::random}) {
            double total = 0.0;
            std::size_t queries = 0;
            for (int s = 0; s < seeds; ++s) {
                auto inst = make_pair(dim, 0.9, 100 + static_cast<std::uint64_t>(s), 20, std::nullopt, 0.9999);
                RunConfig cfg;
                cfg.method = m;
                cfg.budget = budget;
                cfg.seed = static_cast<std::uint64_t>(s);
                const RunRecord r = run_method(inst.f, inst.prior, cfg);
                total += r.wallclock;
                queries += r.queries;
            }
            RunConfig cfg;
            cfg.method = m;
            std::printf("%-10s %8.3f s/run  %8.3f ms/query\n", method_label(cfg).c_str(), total / seeds,
                        1e3 * total / static_cast<double>(std::max<std::size_t>(queries, 1)));
        }
        return exit_ok;
    }

    int cmd_report(const std::string& runs_path, const std::string& output, bool overwrite)
    {
        const auto records = pbo::read_runs_jsonl(runs_path);
        if (records.empty())
            throw pbo::ConfigError("no records in " + runs_path);
        const auto rows = pbo::aggregate(records);
        print_rows(rows);
        const auto adaptive = pbo::adaptive_records(records);
        if (!adaptive.empty()) {
            std::cout << "\nlambda trajectory (adaptive runs)\n";
            std::cout << pbo::lambda_csv(pbo::lambda_trajectory_stats(adaptive));
        }
        if (!output.empty()) {
            namespace fs = std::filesystem;
            const fs::path dir(output);
            for (const char* name : {"aggregate.csv", "lambda_traj.csv"})
                if (!overwrite && fs::exists(dir / name))
                    throw pbo::ConfigError("refusing to overwrite " + (dir / name).string() + " (pass --overwrite)");
            fs::create_directories(dir);
            std::ofstream(dir / "aggregate.csv") << pbo::aggregate_csv(rows);
            std::ofstream(dir / "lambda_traj.csv")
                << (adaptive.empty() ? std::string(pbo::lambda_header) + "\n"
                                     : pbo::lambda_csv(pbo::lambda_trajectory_stats(adaptive)));
        }
        return exit_ok;
    }

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"prior-guided Bayesian optimization toolkit"};
    app.require_subcommand(1);

    std::string spec_path, output, runs_path;
    bool overwrite = false;
    unsigned threads = 0;
    auto* run = app.add_subcommand("run", "run an experiment spec and write aggregate.csv, runs.jsonl, lambda_traj.csv");
    run->add_option("spec", spec_path, "JSON spec file")->required()->check(CLI::ExistingFile);
    run->add_option("-o,--output", output, "output directory (overrides the spec)");
    run->add_flag("--overwrite", overwrite, "replace existing report files");
    run->add_option("-j,--threads", threads, "worker threads (default: all cores)");

    std::vector<int> only;
    auto* verify = app.add_subcommand("verify", "run the acceptance property suites");
    verify->add_option("criteria", only, "criterion numbers to run (default: all)");

    Eigen::Index dim = 10;
    std::size_t budget = 100;
    int seeds = 3;
    auto* bench = app.add_subcommand("bench", "time model fitting, acquisition and whole runs");
    bench->add_option("--dim", dim, "input dimension")->check(CLI::PositiveNumber);
    bench->add_option("--budget", budget, "query budget per run")->check(CLI::PositiveNumber);
    bench->add_option("--seeds", seeds, "runs per method")->check(CLI::PositiveNumber);

    auto* report = app.add_subcommand("report", "aggregate an existing runs.jsonl");
    report->add_option("runs", runs_path, "runs.jsonl file")->required()->check(CLI::ExistingFile);
    report->add_option("-o,--output", output, "also write aggregate.csv and lambda_traj.csv here");
    report->add_flag("--overwrite", overwrite, "replace existing report files");

    try {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? exit_ok : exit_config;
    }

    try {
        if (*run)
            return cmd_run(spec_path, output, overwrite, threads);
        if (*verify)
            return cmd_verify(only);
        if (*bench)
            return cmd_bench(dim, budget, seeds);
        return cmd_report(runs_path, output, overwrite);
    }
    catch (const pbo::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    }
    catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_run_failures;
    }
}
