#ifndef PBO_OPTIMIZER_HPP
#define PBO_OPTIMIZER_HPP

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>

#include <pbo/acquisition.hpp>
#include <pbo/baselines.hpp>
#include <pbo/gp.hpp>
#include <pbo/objectives.hpp>
#include <pbo/record.hpp>

namespace pbo {

    enum class Method { pbo_adaptive, pbo_fixed, bo, rgf, prgf, prior_only, random };

    struct RunConfig {
        Method method = Method::pbo_adaptive;
        std::size_t budget = 1000;
        std::size_t init_size = 10;
        double fixed_lambda = 1.0; ///< used by pbo_fixed
        AcquisitionConfig acquisition;
        double jitter = default_jitter;
        std::uint64_t seed = 0;
        std::optional<Eigen::Index> dim_low;
        /// Per-iteration normalization of y, y' and f'. Forced off in
        /// oracle_rkhs mode, where the GP must model raw values.
        bool normalize = true;
        bool refit_lengthscale = false;
        /// Kernel length scale; sqrt(search dim) when unset.
        std::optional<double> lengthscale;
        RgfConfig rgf;
        double prior_only_eta = 0.05;
    };

    inline std::string method_label(const RunConfig& cfg)
    {
        switch (cfg.method) {
        case Method::pbo_adaptive:
            return "pbo";
        case Method::pbo_fixed: {
            std::ostringstream os;
            os << "pbo_fixed(" << cfg.fixed_lambda << ")";
            return os.str();
        }
        case Method::bo:
            return "bo";
        case Method::rgf:
            return "rgf";
        case Method::prgf:
            return "prgf-fixed";
        case Method::prior_only:
            return "prior_only";
        case Method::random:
            return "random";
        }
        return "unknown";
    }

    /// Nearest-neighbor block replication of a low-dimensional point.
    inline Vector upsample(const Vector& low, Eigen::Index dim)
    {
        const Eigen::Index dl = low.size();
        if (dl < 1 || dim % dl != 0)
            throw ConfigError("upsample: dimension " + std::to_string(dim) + " is not a multiple of "
                              + std::to_string(dl));
        const Eigen::Index block = dim / dl;
        Vector out(dim);
        for (Eigen::Index i = 0; i < dim; ++i)
            out[i] = low[i / block];
        return out;
    }

    /// Objective on the reduced space; evaluates (and counts) the full one.
    inline BoxObjective reduce_objective(BoxObjective& f, Eigen::Index dim_low)
    {
        const Eigen::Index d = f.dim();
        upsample(Vector::Zero(dim_low), d); // validates divisibility
        BoxObjective out(dim_low, [&f, d](const Vector& x) { return f.evaluate(upsample(x, d)); }, f.threshold(),
                         f.descriptor());
        out.known_max = f.known_max;
        return out;
    }

    inline PriorFunction reduce_prior(const PriorFunction& p, Eigen::Index dim_low)
    {
        const Eigen::Index d = p.dim;
        upsample(Vector::Zero(dim_low), d);
        const Eigen::Index block = d / dim_low;
        PriorFunction out;
        out.dim = dim_low;
        out.value = [p, d](const Vector& x) { return p(upsample(x, d)); };
        if (p.has_gradient())
            out.gradient = [p, d, block, dim_low](const Vector& x) {
                const Vector g = p.grad(upsample(x, d));
                Vector low = Vector::Zero(dim_low);
                for (Eigen::Index i = 0; i < d; ++i)
                    low[i / block] += g[i];
                return low;
            };
        return out;
    }

    /// gamma = 1/2 log det(I + K / sigma^2).
    inline double information_gain(const Matrix& k, double noise)
    {
        if (!(noise > 0.0))
            throw ContractError("information_gain: noise variance must be positive");
        if (k.rows() != k.cols())
            throw ContractError("information_gain: matrix must be square");
        if (k.rows() == 0)
            return 0.0;
        const Matrix a = Matrix::Identity(k.rows(), k.cols()) + k / noise;
        const auto llt = factorize(a);
        return llt.matrixLLT().diagonal().array().log().sum();
    }

    namespace detail {
        /// Exact RKHS norm of f - lambda f' from the two expansions.
        inline double residual_rkhs_norm(const BoxObjective& f, const PriorFunction& prior, double lambda)
        {
            if (!f.expansion)
                throw ContractError("objective has no exact RKHS expansion");
            if (lambda == 0.0)
                return expansion_norm(*f.expansion);
            if (!prior.expansion)
                throw ContractError("prior has no exact RKHS expansion");
            return expansion_norm(combine(1.0, *f.expansion, -lambda, *prior.expansion));
        }

        inline double sequential_variance(const PointSet& points, const Vector& x, const KernelParams& k,
                                          double jitter)
        {
            if (points.empty())
                return 1.0;
            const auto llt = factorize(kernel_matrix(points, k, jitter));
            const Vector kv = kernel_vector(stack_points(points), x, k);
            return std::max(0.0, 1.0 - llt.matrixL().solve(kv).squaredNorm());
        }
    } // namespace detail

    /// The prior-guided BO loop (also plain BO when the method is `bo`):
    /// S uniform initial queries, then per iteration normalize, choose lambda,
    /// maximize UCB and query. Stops at first success or when the budget is spent.
    inline RunRecord run_pbo(BoxObjective& f, const PriorFunction& prior, const RunConfig& cfg)
    {
        if (cfg.method != Method::pbo_adaptive && cfg.method != Method::pbo_fixed && cfg.method != Method::bo)
            throw ConfigError("run_pbo: method is not a BO variant");
        if (cfg.budget < 1 || cfg.init_size < 1)
            throw ConfigError("run_pbo: budget and init_size must be positive");
        cfg.acquisition.validate();
        if (prior.dim != f.dim())
            throw ContractError("run_pbo: prior and objective dimensions differ");
        const bool uses_prior = cfg.method != Method::bo;
        if (uses_prior && !prior.has_gradient())
            throw ContractError("run_pbo: prior gradients required");

        const double lambda0 = cfg.method == Method::pbo_adaptive ? 1.0
                               : cfg.method == Method::pbo_fixed  ? cfg.fixed_lambda
                                                                  : 0.0;
        const bool oracle = cfg.acquisition.beta_mode == BetaMode::oracle_rkhs;
        if (oracle && cfg.method == Method::pbo_adaptive)
            throw ConfigError("oracle_rkhs beta requires a fixed lambda");
        if (oracle && cfg.dim_low)
            throw ConfigError("oracle_rkhs beta is not available with dimensionality reduction");
        const double beta = oracle ? detail::residual_rkhs_norm(f, prior, lambda0) : cfg.acquisition.beta;

        BoxObjective reduced;
        PriorFunction reduced_prior;
        BoxObjective* fs = &f;
        const PriorFunction* ps = &prior;
        if (cfg.dim_low && *cfg.dim_low != f.dim()) {
            reduced = reduce_objective(f, *cfg.dim_low);
            reduced_prior = reduce_prior(prior, *cfg.dim_low);
            fs = &reduced;
            ps = &reduced_prior;
        }
        const Eigen::Index dim = fs->dim();
        const SearchBox box{dim};
        const KernelParams kernel{cfg.lengthscale.value_or(std::sqrt(static_cast<double>(dim))),
                                  KernelVariant::matern52};
        FitConfig fit_cfg;
        fit_cfg.jitter = cfg.jitter;
        fit_cfg.normalize = cfg.normalize && !oracle;
        fit_cfg.refit_lengthscale = cfg.refit_lengthscale;
        fit_cfg.lambda_mode = cfg.method == Method::pbo_adaptive ? LambdaMode::adaptive : LambdaMode::fixed;
        fit_cfg.fixed_lambda = lambda0;

        const PriorFunction zero = PriorFunction::zero(dim);
        const PriorFunction& model_prior = uses_prior ? *ps : zero;

        Rng init_rng = make_rng(cfg.seed, "init");
        Rng acq_rng = make_rng(cfg.seed, "acquisition");

        return detail::run_with_tracker(*fs, cfg.budget, method_label(cfg), cfg.seed, [&](QueryTracker& t,
                                                                                         RunRecord& rec) {
            rec.lambda_trace.push_back(lambda0);
            ObservationSet obs;
            const std::size_t init = std::min(cfg.init_size, cfg.budget);
            rec.initial_queries = init;
            for (std::size_t i = 0; i < init; ++i) {
                const Vector x = uniform_in_box(dim, init_rng);
                rec.posterior_variance.push_back(detail::sequential_variance(obs.points, x, kernel, cfg.jitter));
                const double y = t.query(x);
                obs.append(x, y, model_prior(x));
            }
            while (!t.exhausted()) {
                const GaussianProcessModel model = fit(obs, kernel, fit_cfg);
                rec.lambda_trace.push_back(model.lambda);
                const AcquisitionResult next =
                    maximize_acquisition_ex(model, obs, model_prior, box, cfg.acquisition, beta, acq_rng);
                rec.posterior_variance.push_back(model.predict(model_prior, next.x).variance);
                const double y = t.query(next.x);
                obs.append(next.x, y, model_prior(next.x));
            }
        });
    }

    /// Dispatch any method; dimensionality reduction applies to all of them.
    inline RunRecord run_method(BoxObjective& f, const PriorFunction& prior, const RunConfig& cfg)
    {
        switch (cfg.method) {
        case Method::pbo_adaptive:
        case Method::pbo_fixed:
        case Method::bo:
            return run_pbo(f, prior, cfg);
        default:
            break;
        }
        BoxObjective reduced;
        PriorFunction reduced_prior;
        BoxObjective* fs = &f;
        const PriorFunction* ps = &prior;
        if (cfg.dim_low && *cfg.dim_low != f.dim()) {
            reduced = reduce_objective(f, *cfg.dim_low);
            reduced_prior = reduce_prior(prior, *cfg.dim_low);
            fs = &reduced;
            ps = &reduced_prior;
        }
        Rng rng = make_rng(cfg.seed, "baseline");
        RunRecord rec;
        switch (cfg.method) {
        case Method::rgf:
            rec = rgf_run(*fs, cfg.rgf, cfg.budget, rng, cfg.seed);
            break;
        case Method::prgf:
            rec = prgf_run(*fs, *ps, cfg.rgf, cfg.budget, rng, cfg.seed);
            break;
        case Method::prior_only:
            rec = prior_only_run(*fs, *ps, cfg.budget, cfg.prior_only_eta, rng, cfg.seed);
            break;
        default:
            rec = random_search_run(*fs, cfg.budget, rng, cfg.seed);
            break;
        }
        rec.method = method_label(cfg);
        return rec;
    }

    struct GlobalMax {
        Vector x;
        double value = -std::numeric_limits<double>::infinity();
    };

    /// Multi-start projected ascent on an exact expansion (normalized gradient
    /// steps with an adaptive step length). Accurate to roughly 1e-9 in value
    /// for the smooth Matern expansions used here.
    inline GlobalMax expansion_global_max(const KernelExpansion& h, int starts, std::uint64_t seed,
                                          int max_iters = 200)
    {
        Rng rng = make_rng(seed, "global-max");
        const SearchBox box{h.dim()};
        GlobalMax best;
        for (int s = 0; s < starts; ++s) {
            Vector x = uniform_in_box(h.dim(), rng);
            double fx = h(x);
            double step = 0.1;
            for (int it = 0; it < max_iters && step > 1e-10; ++it) {
                const Vector g = h.gradient(x);
                const double gn = g.norm();
                if (gn == 0.0)
                    break;
                const Vector cand = box.clip(x + (step / gn) * g);
                const double fc = h(cand);
                if (fc > fx) {
                    x = cand;
                    fx = fc;
                    step *= 1.5;
                }
                else {
                    step *= 0.5;
                }
            }
            if (fx > best.value)
                best = {x, fx};
        }
        return best;
    }

    struct RegretCheck {
        double lhs = 0.0;     ///< cumulative regret over rule-selected queries
        double rhs = 0.0;     ///< regret bound
        bool holds = false;
        double f_star = 0.0;
        double gamma = 0.0;   ///< information gain over all queried points
        double residual_norm = 0.0;
        std::size_t iterations = 0;
        double tolerance = 0.0; ///< total slack allowed for x* / maximization error
    };

    inline constexpr int regret_global_starts = 10000;

    /// Evaluate R_T <= |f - lambda f'|_k sqrt(8 / log(1 + 1/s2) * T * gamma)
    /// for a run made with the oracle beta. Regret is summed over the UCB
    /// iterations; gamma is taken on all queried points, which upper-bounds
    /// the information-gain sum over those iterations.
    inline RegretCheck check_regret_bound(const RunRecord& record, const BoxObjective& f, const PriorFunction& prior,
                                          double lambda, const KernelParams& kernel, double noise,
                                          double per_step_tolerance = 1e-3,
                                          int global_starts = regret_global_starts)
    {
        if (!f.expansion || (lambda != 0.0 && !prior.expansion))
            throw ContractError("check_regret_bound needs exact kernel expansions");
        if (record.points.size() != record.values.size())
            throw ContractError("check_regret_bound: record has no point history");
        RegretCheck out;
        const GlobalMax gm = expansion_global_max(*f.expansion, global_starts, record.seed);
        out.f_star = gm.value;
        for (double v : record.values)
            out.f_star = std::max(out.f_star, v);
        for (std::size_t t = record.initial_queries; t < record.values.size(); ++t) {
            out.lhs += out.f_star - record.values[t];
            ++out.iterations;
        }
        out.gamma = record.points.empty() ? 0.0 : information_gain(kernel_matrix(record.points, kernel), noise);
        out.residual_norm = detail::residual_rkhs_norm(f, prior, lambda);
        const double t = static_cast<double>(out.iterations);
        out.rhs = out.residual_norm * std::sqrt(8.0 / std::log1p(1.0 / noise) * t * out.gamma);
        out.tolerance = per_step_tolerance * t;
        out.holds = out.lhs <= out.rhs + out.tolerance;
        return out;
    }

} // namespace pbo

#endif
