#include <gtest/gtest.h>

#include <algorithm>
#include <limits>

#include <pbo/optimizer.hpp>

#include "oracles.hpp"
#include "test_util.hpp"

using namespace pbo;

namespace {

    double queries_or_penalty(const RunRecord& r, std::size_t budget)
    {
        return r.success ? static_cast<double>(*r.queries_to_success) : static_cast<double>(budget + 1);
    }

    double lower_median(std::vector<double> v)
    {
        std::sort(v.begin(), v.end());
        return v[(v.size() - 1) / 2];
    }

    void expect_record_consistent(const RunRecord& r, std::size_t budget)
    {
        EXPECT_LE(r.queries, budget);
        EXPECT_EQ(r.best_trace.size(), r.queries);
        EXPECT_EQ(r.values.size(), r.queries);
        EXPECT_EQ(r.points.size(), r.queries);
        for (std::size_t i = 1; i < r.best_trace.size(); ++i)
            EXPECT_GE(r.best_trace[i], r.best_trace[i - 1]);
        if (r.success) {
            ASSERT_TRUE(r.queries_to_success);
            EXPECT_LE(*r.queries_to_success, budget);
            EXPECT_EQ(*r.queries_to_success, r.queries);
        }
    }

} // namespace

TEST(RunPbo, BudgetEqualToInitialDesign)
{
    auto pair = make_pair(3, 0.5, 1);
    pair.f.set_threshold(std::numeric_limits<double>::infinity());
    RunConfig cfg;
    cfg.budget = 10;
    cfg.init_size = 10;
    const RunRecord r = run_pbo(pair.f, pair.prior, cfg);
    EXPECT_FALSE(r.success);
    EXPECT_EQ(r.queries, 10u);
    EXPECT_EQ(pair.f.calls(), 10u);
    EXPECT_EQ(r.lambda_trace.size(), 1u);
}

TEST(RunPbo, ReplayIsBitIdentical)
{
    for (Method m : {Method::pbo_adaptive, Method::bo, Method::prgf, Method::prior_only}) {
        const auto pair = make_pair(5, 0.6, 2);
        BoxObjective f1 = pair.f, f2 = pair.f;
        f1.set_threshold(2.0);
        f2.set_threshold(2.0);
        RunConfig cfg;
        cfg.method = m;
        cfg.budget = 30;
        cfg.seed = 17;
        const RunRecord a = run_method(f1, pair.prior, cfg);
        const RunRecord b = run_method(f2, pair.prior, cfg);
        EXPECT_EQ(a.values, b.values) << a.method;
        EXPECT_EQ(a.lambda_trace, b.lambda_trace) << a.method;
        ASSERT_EQ(a.points.size(), b.points.size());
        for (std::size_t i = 0; i < a.points.size(); ++i)
            EXPECT_EQ(a.points[i], b.points[i]);
    }
}

TEST(RunPbo, LambdaTraces)
{
    const auto pair = make_pair(3, 0.8, 3);
    for (Method m : {Method::pbo_adaptive, Method::pbo_fixed, Method::bo}) {
        BoxObjective f = pair.f;
        f.set_threshold(2.0);
        RunConfig cfg;
        cfg.method = m;
        cfg.budget = 25;
        cfg.fixed_lambda = 0.7;
        const RunRecord r = run_pbo(f, pair.prior, cfg);
        expect_record_consistent(r, cfg.budget);
        ASSERT_EQ(r.lambda_trace.size(), 16u); // initial value plus one per UCB iteration
        if (m == Method::pbo_adaptive) {
            EXPECT_EQ(r.lambda_trace[0], 1.0);
            EXPECT_EQ(r.method, "pbo");
        }
        for (double l : r.lambda_trace) {
            if (m == Method::pbo_fixed)
                EXPECT_EQ(l, 0.7);
            if (m == Method::bo)
                EXPECT_EQ(l, 0.0);
        }
    }
}

TEST(RunPbo, SuccessIndexMatchesValueTrace)
{
    for (std::uint64_t s = 0; s < 10; ++s) {
        for (Method m : {Method::pbo_adaptive, Method::bo, Method::rgf, Method::random}) {
            auto pair = make_pair(5, 0.9, 40 + s);
            RunConfig cfg;
            cfg.method = m;
            cfg.budget = 40;
            cfg.seed = s;
            const RunRecord r = run_method(pair.f, pair.prior, cfg);
            expect_record_consistent(r, cfg.budget);
            EXPECT_EQ(r.queries, pair.f.calls());
            const auto first = std::find_if(r.values.begin(), r.values.end(),
                                            [&](double v) { return pair.f.is_success(v); });
            if (r.success)
                EXPECT_EQ(static_cast<std::size_t>(first - r.values.begin()) + 1, *r.queries_to_success);
            else
                EXPECT_EQ(first, r.values.end());
        }
    }
}

TEST(RunPbo, ExactPriorNoWorseThanBo)
{
    const std::size_t budget = 100;
    std::vector<double> qp, qb;
    for (std::uint64_t s = 0; s < 50; ++s) {
        const auto pair = make_pair(10, 1.0, 500 + s);
        BoxObjective f1 = pair.f, f2 = pair.f;
        RunConfig cfg;
        cfg.budget = budget;
        cfg.seed = s;
        qp.push_back(queries_or_penalty(run_pbo(f1, pair.prior, cfg), budget));
        cfg.method = Method::bo;
        qb.push_back(queries_or_penalty(run_pbo(f2, pair.prior, cfg), budget));
    }
    EXPECT_LE(lower_median(qp), lower_median(qb));
}

TEST(RunPbo, ObjectiveFailureAborts)
{
    int n = 0;
    BoxObjective f(2, [&](const Vector& x) {
        if (++n > 12)
            throw ProtocolError("timeout");
        return -x.squaredNorm();
    }, 10.0);
    RunConfig cfg;
    cfg.method = Method::bo;
    cfg.budget = 30;
    const RunRecord r = run_pbo(f, PriorFunction::zero(2), cfg);
    EXPECT_TRUE(r.aborted);
    EXPECT_EQ(r.queries, 12u);
}

TEST(RunPbo, ConfigErrors)
{
    auto pair = make_pair(4, 0.5, 1);
    RunConfig cfg;
    cfg.acquisition.beta_mode = BetaMode::oracle_rkhs;
    EXPECT_THROW(run_pbo(pair.f, pair.prior, cfg), ConfigError);
    cfg = RunConfig{};
    cfg.dim_low = 3;
    EXPECT_THROW(run_pbo(pair.f, pair.prior, cfg), ConfigError);
    cfg = RunConfig{};
    cfg.method = Method::rgf;
    EXPECT_THROW(run_pbo(pair.f, pair.prior, cfg), ConfigError);
}

TEST(Upsample, Examples)
{
    Vector low(1);
    low << 0.3;
    EXPECT_EQ(upsample(low, 2), Vector::Constant(2, 0.3));
    Vector v(3);
    v << 0.1, -0.2, 0.9;
    EXPECT_EQ(upsample(v, 3), v);
    Vector w(2);
    w << 0.5, -1.0;
    Vector expect(6);
    expect << 0.5, 0.5, 0.5, -1.0, -1.0, -1.0;
    EXPECT_EQ(upsample(w, 6), expect);
    EXPECT_THROW(upsample(w, 5), ConfigError);
}

TEST(Upsample, ReducedOptimumOfBlockConstantObjective)
{
    // depends on each block only through its first coordinate
    BoxObjective f(4, [](const Vector& x) {
        return -(x[0] - 0.4) * (x[0] - 0.4) - (x[2] + 0.6) * (x[2] + 0.6) + 0.3 * x[0] * x[2];
    }, 0.0);
    const int n = 21;
    auto g = [&](int i) { return -1.0 + 2.0 * i / (n - 1); };
    double full = -1e300;
    Vector x(4);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c)
                for (int d = 0; d < n; ++d) {
                    x << g(a), g(b), g(c), g(d);
                    full = std::max(full, f.peek(x));
                }
    BoxObjective reduced = reduce_objective(f, 2);
    double low = -1e300;
    Vector y(2);
    for (int a = 0; a < n; ++a)
        for (int c = 0; c < n; ++c) {
            y << g(a), g(c);
            low = std::max(low, reduced.evaluate(y));
        }
    EXPECT_EQ(low, full);
    EXPECT_EQ(f.calls(), static_cast<std::size_t>(n * n));
}

TEST(Upsample, ReducedPriorGradient)
{
    const auto pair = make_pair(6, 0.5, 9);
    const PriorFunction p = reduce_prior(pair.prior, 3);
    Rng rng(1);
    for (int i = 0; i < 20; ++i) {
        const Vector x = 0.9 * uniform_in_box(3, rng);
        const auto fd =
            oracle::fd_gradient([&](const oracle::Vec& v) { return p(testutil::from_std(v)); }, testutil::to_std(x));
        EXPECT_LT((p.grad(x) - testutil::from_std(fd)).norm(), 1e-6 * std::max(1.0, p.grad(x).norm()));
    }
}

TEST(RunPbo, DimensionalityReductionCountsFullQueries)
{
    auto pair = make_pair(6, 0.7, 12);
    pair.f.set_threshold(2.0);
    RunConfig cfg;
    cfg.budget = 20;
    cfg.dim_low = 2;
    const RunRecord r = run_pbo(pair.f, pair.prior, cfg);
    EXPECT_EQ(r.queries, 20u);
    EXPECT_EQ(pair.f.calls(), 20u);
    EXPECT_EQ(r.points.front().size(), 2);
}

TEST(InformationGain, Examples)
{
    EXPECT_NEAR(information_gain(Matrix::Ones(1, 1), 1.0), 0.5 * std::log(2.0), 1e-15);
    EXPECT_NEAR(information_gain(Matrix::Ones(1, 1), 1.0), 0.3466, 1e-4);
    Vector dg(3);
    dg << 0.5, 2.0, 1.0;
    const double expect = 0.5 * (std::log1p(0.5 / 0.1) + std::log1p(2.0 / 0.1) + std::log1p(1.0 / 0.1));
    EXPECT_NEAR(information_gain(dg.asDiagonal().toDenseMatrix(), 0.1), expect, 1e-13);
    EXPECT_EQ(information_gain(Matrix(0, 0), 0.1), 0.0);
    EXPECT_THROW(information_gain(Matrix::Ones(1, 1), 0.0), ContractError);
}

TEST(InformationGain, MatchesSequentialPosteriors)
{
    for (std::uint64_t s = 0; s < 10; ++s) {
        Rng rng(s);
        const Eigen::Index d = 2 + static_cast<Eigen::Index>(s % 5);
        PointSet pts;
        std::vector<oracle::Vec> opts;
        for (int i = 0; i < 20; ++i) {
            pts.push_back(uniform_in_box(d, rng));
            opts.push_back(testutil::to_std(pts.back()));
        }
        const KernelParams k = KernelParams::for_dim(d);
        for (double noise : {1e-2, 1e-4}) {
            const double direct = information_gain(kernel_matrix(pts, k), noise);
            const double seq = oracle::sequential_information_gain(opts, k.lengthscale, noise);
            EXPECT_LT(std::abs(direct - seq) / seq, 1e-6);
        }
    }
}

TEST(InformationGain, TelescopesAlongRun)
{
    auto pair = make_pair(3, 0.5, 21);
    pair.f.set_threshold(2.0);
    RunConfig cfg;
    cfg.budget = 30;
    cfg.jitter = 1e-4;
    const RunRecord r = run_pbo(pair.f, pair.prior, cfg);
    ASSERT_EQ(r.posterior_variance.size(), r.queries);
    double seq = 0.0;
    for (double v : r.posterior_variance)
        seq += 0.5 * std::log1p(v / cfg.jitter);
    const double direct = information_gain(kernel_matrix(r.points, KernelParams::for_dim(3)), cfg.jitter);
    EXPECT_LT(std::abs(direct - seq) / direct, 1e-6);
}

TEST(RegretBound, ExactPriorIsOptimalEveryStep)
{
    for (std::uint64_t s = 0; s < 3; ++s) {
        auto pair = make_pair(2, 1.0, 70 + s, 10);
        pair.f.set_threshold(std::numeric_limits<double>::infinity());
        RunConfig cfg;
        cfg.method = Method::pbo_fixed;
        cfg.fixed_lambda = 1.0;
        cfg.budget = 30;
        cfg.jitter = 1e-6;
        cfg.seed = s;
        cfg.acquisition.beta_mode = BetaMode::oracle_rkhs;
        cfg.acquisition.restarts = 32;
        const RunRecord r = run_pbo(pair.f, pair.prior, cfg);
        const RegretCheck c =
            check_regret_bound(r, pair.f, pair.prior, 1.0, KernelParams::for_dim(2), cfg.jitter, 1e-3, 2000);
        EXPECT_NEAR(c.residual_norm, 0.0, 1e-6);
        EXPECT_EQ(c.iterations, 20u);
        EXPECT_TRUE(c.holds) << c.lhs << " vs " << c.rhs;
        EXPECT_LE(c.lhs, 1e-3 * c.iterations);
    }
}

TEST(RegretBound, ZeroLambdaUsesObjectiveNorm)
{
    auto pair = make_pair(2, 0.5, 80, 8);
    pair.f.set_threshold(std::numeric_limits<double>::infinity());
    RunConfig cfg;
    cfg.method = Method::bo;
    cfg.budget = 15;
    cfg.jitter = 1e-6;
    cfg.acquisition.beta_mode = BetaMode::oracle_rkhs;
    const RunRecord r = run_pbo(pair.f, pair.prior, cfg);
    const RegretCheck c = check_regret_bound(r, pair.f, pair.prior, 0.0, KernelParams::for_dim(2), 1e-6, 1e-3, 500);
    EXPECT_NEAR(c.residual_norm, 1.0, 1e-12);
}

TEST(RegretBound, NeedsExpansions)
{
    BoxObjective f = make_quadratic(Vector::Zero(2));
    RunRecord r;
    EXPECT_THROW(check_regret_bound(r, f, PriorFunction::zero(2), 0.0, KernelParams{1.0}, 1e-6), ContractError);
}
