#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>

#include <pbo/external.hpp>
#include <pbo/objectives.hpp>
#include <pbo/optimizer.hpp>

#include "oracles.hpp"
#include "test_util.hpp"

using namespace pbo;

namespace {

    const std::string server = PBO_QUADRATIC_SERVER;

    // Plain sum over centers with the scalar kernel.
    double oracle_expansion(const KernelExpansion& h, const Vector& x)
    {
        const auto xs = testutil::to_std(x);
        double s = 0.0;
        for (Eigen::Index j = 0; j < h.centers.cols(); ++j)
            s += h.coefficients[j]
                 * oracle::matern52(testutil::to_std(h.centers.col(j)), xs, h.params.lengthscale);
        return s;
    }

} // namespace

TEST(RkhsObjective, UnitNorm)
{
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const BoxObjective f = make_rkhs_objective(4, 12, seed);
        EXPECT_NEAR(expansion_inner_product(*f.expansion, *f.expansion), 1.0, 1e-12);
    }
}

TEST(RkhsObjective, Deterministic)
{
    const BoxObjective a = make_rkhs_objective(3, 8, 42);
    const BoxObjective b = make_rkhs_objective(3, 8, 42);
    EXPECT_EQ(a.expansion->centers, b.expansion->centers);
    EXPECT_EQ(a.expansion->coefficients, b.expansion->coefficients);
    EXPECT_EQ(a.threshold(), b.threshold());
    EXPECT_NE(a.threshold(), make_rkhs_objective(3, 8, 43).threshold());
}

TEST(RkhsObjective, ThresholdGolden)
{
    const BoxObjective f = make_rkhs_objective(5, 20, 7);
    EXPECT_DOUBLE_EQ(f.threshold(), 0.85939540934683856);

    // recompute with a full sort and scalar kernel sums
    Rng rng = make_rng(7, "rkhs-threshold");
    std::vector<double> v;
    for (int i = 0; i < default_threshold_samples; ++i)
        v.push_back(oracle_expansion(*f.expansion, uniform_in_box(5, rng)));
    std::sort(v.begin(), v.end());
    EXPECT_NEAR(f.threshold(), v[94999], 1e-12);
}

TEST(RkhsObjective, ValuesMatchScalarSum)
{
    BoxObjective f = make_rkhs_objective(3, 6, 5);
    Rng rng(1);
    for (int i = 0; i < 20; ++i) {
        const Vector x = uniform_in_box(3, rng);
        EXPECT_NEAR(f.evaluate(x), oracle_expansion(*f.expansion, x), 1e-12);
    }
    EXPECT_EQ(f.calls(), 20u);
}

TEST(RkhsObjective, RejectsEmptyExpansion)
{
    EXPECT_THROW(make_rkhs_objective(3, 0, 1), ContractError);
}

TEST(Pair, IdenticalPrior)
{
    const auto p = make_pair(4, 1.0, 3);
    const KernelExpansion diff = combine(1.0, *p.f.expansion, -1.0, *p.prior.expansion);
    EXPECT_NEAR(expansion_norm(diff), 0.0, 1e-7);
    Rng rng(2);
    for (int i = 0; i < 10; ++i) {
        const Vector x = uniform_in_box(4, rng);
        EXPECT_NEAR(p.f.peek(x), p.prior(x), 1e-12);
    }
}

TEST(Pair, OrthogonalPriorIsFartherThanZero)
{
    const auto p = make_pair(4, 0.0, 3);
    const KernelExpansion diff = combine(1.0, *p.f.expansion, -1.0, *p.prior.expansion);
    const double d2 = expansion_inner_product(diff, diff);
    EXPECT_NEAR(d2, 2.0, 1e-6);
    EXPECT_GT(d2, expansion_inner_product(*p.f.expansion, *p.f.expansion));
}

TEST(Pair, DistanceAtPointEight)
{
    const auto p = make_pair(5, 0.8, 11);
    const KernelExpansion diff = combine(1.0, *p.f.expansion, -1.0, *p.prior.expansion);
    EXPECT_NEAR(expansion_norm(diff), std::sqrt(2.0 - 1.6), 1e-6);
    EXPECT_NEAR(std::sqrt(2.0 - 1.6), 0.6325, 1e-4);
}

TEST(Pair, CosineExactAcrossGrid)
{
    for (double theta : {-1.0, -0.7, -0.2, 0.0, 0.3, 0.5, 0.9, 0.99, 1.0}) {
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            const auto p = make_pair(6, theta, seed);
            EXPECT_NEAR(expansion_inner_product(*p.f.expansion, *p.prior.expansion), theta, 1e-6);
            EXPECT_NEAR(expansion_norm(*p.prior.expansion), 1.0, 1e-9);
            EXPECT_NEAR(p.cos_angle, theta, 1e-6);
        }
    }
}

TEST(Pair, RejectsOutOfRangeCosine)
{
    EXPECT_THROW(make_pair(3, 1.5, 0), ContractError);
    EXPECT_THROW(make_pair(3, std::nan(""), 0), ContractError);
}

TEST(Pair, PriorGradientMatchesFiniteDifferences)
{
    const auto p = make_pair(4, 0.6, 8);
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        const Vector x = 0.95 * uniform_in_box(4, rng);
        const Vector g = p.prior.grad(x);
        const auto fd = oracle::fd_gradient([&](const oracle::Vec& v) { return p.prior(testutil::from_std(v)); },
                                            testutil::to_std(x));
        EXPECT_LT((g - testutil::from_std(fd)).norm(), 1e-3 * std::max(1.0, g.norm()));
    }
}

TEST(Sphere, UnitNorms)
{
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto [w, wp] = linear_sphere_sample(7, seed);
        EXPECT_NEAR(w.norm(), 1.0, 1e-12);
        EXPECT_NEAR(wp.norm(), 1.0, 1e-12);
    }
    EXPECT_THROW(linear_sphere_sample(1, 0), ContractError);
}

TEST(Sphere, SquaredInnerProductMeanIsOneOverD)
{
    Rng rng(2024);
    const int n = 100000;
    double sum = 0.0, sum2 = 0.0;
    int aligned = 0;
    for (int i = 0; i < n; ++i) {
        const auto [w, wp] = linear_sphere_sample(100, rng);
        const double c = w.dot(wp);
        sum += c * c;
        sum2 += c * c * c * c;
        if (c >= 0.5)
            ++aligned;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sum2 / n - mean * mean) / n);
    EXPECT_LT(std::abs(mean - 0.01), 3.0 * se);
    EXPECT_LT(static_cast<double>(aligned) / n, 1e-3);
}

TEST(Linear, PriorGradientAndKnownMax)
{
    auto [f, p] = make_linear_pair(5, 4);
    const auto [w, wp] = linear_sphere_sample(5, 4);
    EXPECT_NEAR(*f.known_max, w.lpNorm<1>(), 1e-15);
    Rng rng(5);
    for (int i = 0; i < 100; ++i) {
        const Vector x = uniform_in_box(5, rng);
        EXPECT_NEAR(f.peek(x), w.dot(x), 1e-15);
        const auto fd =
            oracle::fd_gradient([&](const oracle::Vec& v) { return p(testutil::from_std(v)); }, testutil::to_std(x));
        EXPECT_LT((p.grad(x) - testutil::from_std(fd)).norm(), 1e-6);
    }
}

TEST(Quadratic, PriorGradient)
{
    Vector c(3);
    c << 0.2, -0.4, 0.1;
    const PriorFunction p = quadratic_prior(c);
    BoxObjective f = make_quadratic(c, 0.1);
    Rng rng(6);
    for (int i = 0; i < 100; ++i) {
        const Vector x = uniform_in_box(3, rng);
        const auto fd =
            oracle::fd_gradient([&](const oracle::Vec& v) { return p(testutil::from_std(v)); }, testutil::to_std(x));
        EXPECT_LT((p.grad(x) - testutil::from_std(fd)).norm(), 1e-6);
    }
    EXPECT_TRUE(f.is_success(f.evaluate(c)));
    EXPECT_FALSE(f.is_success(f.evaluate(c + Vector::Constant(3, 0.1))));
}

TEST(External, HandshakeAndEval)
{
    BoxObjective f = external_objective(server + " --dim 3 --threshold -0.25");
    EXPECT_EQ(f.dim(), 3);
    EXPECT_EQ(f.threshold(), -0.25);
    Vector x(3);
    x << 0.5, -0.5, 0.25;
    EXPECT_DOUBLE_EQ(f.evaluate(x), -0.5625);
    EXPECT_EQ(f.calls(), 1u);
}

TEST(External, TranscriptMatchesGolden)
{
    ProtocolConfig cfg;
    cfg.transcript = std::make_shared<std::vector<std::string>>();
    {
        BoxObjective f = external_objective(server, cfg);
        Vector x(2);
        x << 0.5, -0.5;
        f.evaluate(x);
    }
    std::ifstream in(std::string(PBO_TEST_DATA) + "/quadratic_transcript.ndjson");
    ASSERT_TRUE(in);
    std::vector<std::string> golden;
    for (std::string line; std::getline(in, line);)
        golden.push_back(line);
    EXPECT_EQ(*cfg.transcript, golden);
}

TEST(External, MalformedReplyCarriesLine)
{
    BoxObjective f = external_objective(server + " --malformed");
    try {
        f.evaluate(Vector::Zero(2));
        FAIL() << "expected a protocol error";
    }
    catch (const ProtocolError& e) {
        EXPECT_NE(std::string(e.what()).find("{\"y\": oops"), std::string::npos) << e.what();
    }
}

TEST(External, ErrorReplyAndExitAreErrors)
{
    BoxObjective f = external_objective(server + " --dim 2 --exit-after 1");
    EXPECT_DOUBLE_EQ(f.evaluate(Vector::Zero(2)), 0.0);
    EXPECT_THROW(f.evaluate(Vector::Zero(2)), ProtocolError);
    EXPECT_THROW(external_objective("exit 0"), ProtocolError);
}

TEST(External, Timeout)
{
    ProtocolConfig cfg;
    cfg.timeout = std::chrono::milliseconds(200);
    EXPECT_THROW(external_objective("sleep 5", cfg), ProtocolError);
}

TEST(External, OptimizerDrivesTowardOrigin)
{
    BoxObjective f = external_objective(server + " --dim 2 --threshold -0.0001");
    RunConfig cfg;
    cfg.method = Method::bo;
    cfg.budget = 40;
    cfg.seed = 3;
    const RunRecord r = run_method(f, PriorFunction::zero(2), cfg);
    EXPECT_FALSE(r.aborted);
    EXPECT_EQ(r.queries, f.calls());
    EXPECT_GT(r.best_trace.back(), r.best_trace[cfg.init_size - 1]);
    EXPECT_GT(r.best_trace.back(), -0.01);
}
