#ifndef PBO_BASELINES_HPP
#define PBO_BASELINES_HPP

#include <chrono>
#include <cmath>
#include <limits>

#include <Eigen/QR>

#include <pbo/functions.hpp>
#include <pbo/random.hpp>
#include <pbo/record.hpp>

namespace pbo {

    struct RgfConfig {
        int q = 5;
        double sigma = 0.05;
        double lr = 0.1;
        bool orthogonalize = true;
        /// Weight of the normalized prior gradient in the prgf-fixed variant.
        double prior_weight = 0.5;

        void validate(Eigen::Index dim) const
        {
            if (q < 1 || !(sigma > 0.0) || !(lr > 0.0))
                throw ContractError("invalid RGF configuration");
            if (orthogonalize && q > dim)
                throw ContractError("RGF: q must not exceed d when directions are orthogonalized");
            if (!(prior_weight >= 0.0 && prior_weight <= 1.0))
                throw ContractError("RGF: prior weight must lie in [0, 1]");
        }
    };

    /// q unit directions as columns; orthonormal when requested.
    inline Matrix rgf_directions(Eigen::Index dim, const RgfConfig& cfg, Rng& rng)
    {
        Matrix u(dim, cfg.q);
        for (int i = 0; i < cfg.q; ++i)
            u.col(i) = standard_normal(dim, rng);
        if (cfg.orthogonalize) {
            Eigen::HouseholderQR<Matrix> qr(u);
            return qr.householderQ() * Matrix::Identity(dim, cfg.q);
        }
        for (int i = 0; i < cfg.q; ++i)
            u.col(i).normalize();
        return u;
    }

    /// Largest t in [0, limit] with x + t u inside the box.
    inline double feasible_step(const Vector& x, const Vector& u, double limit)
    {
        double t = limit;
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            if (u[i] > 0.0)
                t = std::min(t, (SearchBox::upper - x[i]) / u[i]);
            else if (u[i] < 0.0)
                t = std::min(t, (SearchBox::lower - x[i]) / u[i]);
        }
        return std::max(0.0, t);
    }

    /// Random gradient-free estimate (1/q) sum_i (f(x + s u_i) - f(x)) / s * u_i
    /// using q + 1 evaluations of `f`. Probes that would leave the box use the
    /// largest feasible s, or the reversed direction when none exists; failing
    /// both, the nominal probe is clipped.
    template <typename F>
    Vector rgf_estimate(F&& f, const Vector& x, const RgfConfig& cfg, Rng& rng)
    {
        cfg.validate(x.size());
        const Matrix dirs = rgf_directions(x.size(), cfg, rng);
        const double fx = f(x);
        Vector g = Vector::Zero(x.size());
        for (int i = 0; i < cfg.q; ++i) {
            Vector u = dirs.col(i);
            double s = feasible_step(x, u, cfg.sigma);
            if (s < 1e-12) {
                u = -u;
                s = feasible_step(x, u, cfg.sigma);
            }
            if (s < 1e-12) {
                // corner with mixed signs: project the nominal probe back into the box
                u = dirs.col(i);
                s = cfg.sigma;
            }
            const double fp = f(SearchBox{x.size()}.clip(x + s * u));
            g += ((fp - fx) / s) * u;
        }
        return g / static_cast<double>(cfg.q);
    }

    inline Vector rgf_estimate(BoxObjective& f, const Vector& x, const RgfConfig& cfg, Rng& rng)
    {
        return rgf_estimate([&f](const Vector& p) { return f.evaluate(p); }, x, cfg, rng);
    }

    namespace detail {
        inline Vector sign(const Vector& g)
        {
            return g.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
        }

        inline Vector unit_or_zero(const Vector& g)
        {
            const double n = g.norm();
            return n > 0.0 ? Vector(g / n) : Vector::Zero(g.size());
        }

        template <typename Body>
        RunRecord run_with_tracker(BoxObjective& f, std::size_t budget, std::string method, std::uint64_t seed,
                                   Body&& body)
        {
            RunRecord rec;
            rec.method = std::move(method);
            rec.seed = seed;
            const auto t0 = std::chrono::steady_clock::now();
            QueryTracker tracker(f, budget, rec);
            try {
                body(tracker, rec);
            }
            catch (const RunFinished&) {
            }
            catch (const std::exception& e) {
                rec.aborted = true;
                rec.abort_reason = e.what();
            }
            rec.wallclock = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            return rec;
        }

        /// Shared sign-step loop of RGF and the prior-averaged variant. The
        /// iterate starts at the box center (the unperturbed input).
        inline RunRecord sign_ascent_run(BoxObjective& f, const PriorFunction* prior, const RgfConfig& cfg,
                                         std::size_t budget, Rng& rng, std::string method, std::uint64_t seed)
        {
            cfg.validate(f.dim());
            const double w = prior ? cfg.prior_weight : 0.0;
            const std::size_t per_step = w < 1.0 ? static_cast<std::size_t>(cfg.q) + 1 : 1;
            return run_with_tracker(f, budget, std::move(method), seed, [&](QueryTracker& t, RunRecord&) {
                if (budget < static_cast<std::size_t>(cfg.q) + 1)
                    return;
                const SearchBox box{f.dim()};
                Vector x = Vector::Zero(f.dim());
                for (;;) {
                    if (t.remaining() < per_step) {
                        t.query(x);
                        return;
                    }
                    Vector g = Vector::Zero(f.dim());
                    if (w < 1.0) {
                        const Vector est = rgf_estimate([&t](const Vector& p) { return t.query(p); }, x, cfg, rng);
                        g = prior ? Vector((1.0 - w) * unit_or_zero(est)) : est;
                    }
                    else {
                        t.query(x);
                    }
                    if (prior && w > 0.0)
                        g += w * unit_or_zero(prior->grad(x));
                    x = box.clip(x + cfg.lr * sign(g));
                }
            });
        }
    } // namespace detail

    /// RGF estimate followed by a sign step, until success or budget exhaustion.
    inline RunRecord rgf_run(BoxObjective& f, const RgfConfig& cfg, std::size_t budget, Rng& rng,
                             std::uint64_t seed = 0)
    {
        return detail::sign_ascent_run(f, nullptr, cfg, budget, rng, "rgf", seed);
    }

    /// Fixed-weight prior averaging: g = (1-w) est/|est| + w grad f'/|grad f'|.
    inline RunRecord prgf_run(BoxObjective& f, const PriorFunction& prior, const RgfConfig& cfg,
                              std::size_t budget, Rng& rng, std::uint64_t seed = 0)
    {
        if (!prior.has_gradient())
            throw ContractError("prgf_run: prior has no gradient");
        return detail::sign_ascent_run(f, &prior, cfg, budget, rng, "prgf-fixed", seed);
    }

    inline constexpr int prior_only_inner_steps = 20;

    /// Repeated transfer ascent: sign-PGD on the prior from a fresh uniform
    /// start, then one query of f at the endpoint.
    inline RunRecord prior_only_run(BoxObjective& f, const PriorFunction& prior, std::size_t budget, double eta,
                                    Rng& rng, std::uint64_t seed = 0, int inner_steps = prior_only_inner_steps)
    {
        if (!prior.has_gradient())
            throw ContractError("prior_only_run: prior has no gradient");
        return detail::run_with_tracker(f, budget, "prior_only", seed, [&](QueryTracker& t, RunRecord&) {
            const SearchBox box{f.dim()};
            for (;;) {
                Vector x = uniform_in_box(f.dim(), rng);
                for (int i = 0; i < inner_steps; ++i)
                    x = box.clip(x + eta * detail::sign(prior.grad(x)));
                t.query(x);
            }
        });
    }

    inline RunRecord random_search_run(BoxObjective& f, std::size_t budget, Rng& rng, std::uint64_t seed = 0)
    {
        return detail::run_with_tracker(f, budget, "random", seed, [&](QueryTracker& t, RunRecord&) {
            for (;;)
                t.query(uniform_in_box(f.dim(), rng));
        });
    }

} // namespace pbo

#endif
