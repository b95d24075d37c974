#ifndef PBO_ACQUISITION_HPP
#define PBO_ACQUISITION_HPP

#include <cmath>
#include <vector>

#include <pbo/gp.hpp>
#include <pbo/random.hpp>

namespace pbo {

    enum class BetaMode { fixed, oracle_rkhs };

    struct AcquisitionConfig {
        double beta = 3.0;
        double lr = 0.05;
        int iters = 50;
        int restarts = 4;
        BetaMode beta_mode = BetaMode::fixed;

        void validate() const
        {
            if (!(beta >= 0.0) || !(lr > 0.0) || iters < 1 || restarts < 1)
                throw ContractError("invalid acquisition configuration");
        }
    };

    /// Below this posterior std the sigma term contributes no gradient.
    inline constexpr double sigma_gradient_floor = 1e-10;

    /// UCB value and gradient from one posterior evaluation.
    struct UcbEval {
        double value = 0.0;
        Vector gradient;
    };

    inline UcbEval ucb_with_gradient(const GaussianProcessModel& model, const PriorFunction& prior, const Vector& x,
                                     double beta)
    {
        const PosteriorWithGradient p = model.predict_with_gradient(prior, x);
        const double sd = std::sqrt(p.variance);
        UcbEval out{p.mean + beta * sd, p.mean_gradient};
        if (beta != 0.0 && sd > sigma_gradient_floor)
            out.gradient += (beta / (2.0 * sd)) * p.variance_gradient;
        return out;
    }

    inline double ucb_from_posterior(const Posterior& p, double beta) { return p.mean + beta * std::sqrt(p.variance); }

    /// alpha(x) = mu_T(x) + beta * sigma_T(x).
    inline double ucb_value(const GaussianProcessModel& model, const ObservationSet& obs, const PriorFunction& prior,
                            const Vector& x, double beta)
    {
        return ucb_from_posterior(posterior(model, obs, prior, x), beta);
    }

    inline Vector ucb_gradient(const GaussianProcessModel& model, const ObservationSet& obs,
                               const PriorFunction& prior, const Vector& x, double beta)
    {
        if (obs.size() != model.size())
            throw ContractError("ucb_gradient: model was fitted on a different observation set");
        if (model.lambda != 0.0 && !prior.has_gradient())
            throw ContractError("ucb_gradient: prior has no gradient");
        return ucb_with_gradient(model, prior, x, beta).gradient;
    }

    struct AcquisitionResult {
        Vector x;
        double value = 0.0;
    };

    /// Multi-start projected gradient ascent on UCB. Each restart starts
    /// uniformly in the box and takes clipped steps x <- clip(x + lr * grad);
    /// the best point visited by any restart is returned (lowest restart
    /// index wins exact ties).
    inline AcquisitionResult maximize_acquisition_ex(const GaussianProcessModel& model, const ObservationSet& obs,
                                                     const PriorFunction& prior, const SearchBox& box,
                                                     const AcquisitionConfig& cfg, double beta, Rng& rng)
    {
        cfg.validate();
        if (obs.size() != model.size())
            throw ContractError("maximize_acquisition: model was fitted on a different observation set");
        std::vector<Vector> starts;
        starts.reserve(static_cast<std::size_t>(cfg.restarts));
        for (int r = 0; r < cfg.restarts; ++r)
            starts.push_back(uniform_in_box(box.dim, rng));

        AcquisitionResult best;
        bool have = false;
        for (const Vector& start : starts) {
            Vector x = start;
            for (int it = 0;; ++it) {
                const UcbEval e = ucb_with_gradient(model, prior, x, beta);
                if (!have || e.value > best.value) {
                    best = {x, e.value};
                    have = true;
                }
                if (it == cfg.iters)
                    break;
                x = box.clip(x + cfg.lr * e.gradient);
            }
        }
        return best;
    }

    inline Vector maximize_acquisition(const GaussianProcessModel& model, const ObservationSet& obs,
                                       const PriorFunction& prior, const SearchBox& box,
                                       const AcquisitionConfig& cfg, Rng& rng)
    {
        return maximize_acquisition_ex(model, obs, prior, box, cfg, cfg.beta, rng).x;
    }

} // namespace pbo

#endif
