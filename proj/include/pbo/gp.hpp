#ifndef PBO_GP_HPP
#define PBO_GP_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include <pbo/functions.hpp>
#include <pbo/kernels.hpp>

namespace pbo {

    /// Queried points with objective and prior values. `y`/`y_prior` hold the
    /// values the GP is fitted on; `raw_*` keep the untouched observations.
    struct ObservationSet {
        PointSet points;
        std::vector<double> y;
        std::vector<double> y_prior;
        std::vector<double> raw_y;
        std::vector<double> raw_y_prior;

        std::size_t size() const { return points.size(); }
        bool empty() const { return points.empty(); }

        void append(const Vector& x, double value, double prior_value)
        {
            if (!points.empty() && points.front().size() != x.size())
                throw ContractError("observation dimension mismatch");
            points.push_back(x);
            y.push_back(value);
            y_prior.push_back(prior_value);
            raw_y.push_back(value);
            raw_y_prior.push_back(prior_value);
        }

        void validate() const
        {
            const auto n = points.size();
            if (y.size() != n || y_prior.size() != n || raw_y.size() != n || raw_y_prior.size() != n)
                throw ContractError("observation set: inconsistent lengths");
        }
    };

    inline Vector to_vector(const std::vector<double>& v)
    {
        return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
    }

    /// Affine maps applied to y and to the prior, f'_norm = (f' - mu')/sigma'.
    struct NormalizationState {
        double mu = 0.0;
        double sigma = 1.0;
        double mu_prior = 0.0;
        double sigma_prior = 1.0;

        double prior_value(double raw) const { return (raw - mu_prior) / sigma_prior; }
        double value(double raw) const { return (raw - mu) / sigma; }

        static NormalizationState identity() { return {}; }
    };

    namespace detail {
        inline constexpr double std_floor = 1e-12;

        /// Population mean and std; std below the floor is clamped to 1.
        inline std::pair<double, double> mean_std(const std::vector<double>& v)
        {
            if (v.empty())
                return {0.0, 1.0};
            double mean = 0.0;
            for (double x : v)
                mean += x;
            mean /= static_cast<double>(v.size());
            double var = 0.0;
            for (double x : v)
                var += (x - mean) * (x - mean);
            var /= static_cast<double>(v.size());
            const double sd = std::sqrt(var);
            return {mean, sd < std_floor ? 1.0 : sd};
        }
    } // namespace detail

    inline std::pair<ObservationSet, NormalizationState> normalize(const ObservationSet& obs)
    {
        obs.validate();
        if (obs.empty())
            throw ContractError("normalize needs at least one observation");
        NormalizationState st;
        std::tie(st.mu, st.sigma) = detail::mean_std(obs.raw_y);
        std::tie(st.mu_prior, st.sigma_prior) = detail::mean_std(obs.raw_y_prior);
        ObservationSet out = obs;
        for (std::size_t i = 0; i < out.size(); ++i) {
            out.y[i] = st.value(obs.raw_y[i]);
            out.y_prior[i] = st.prior_value(obs.raw_y_prior[i]);
        }
        return {std::move(out), st};
    }

    /// Fitting data unchanged: y = raw_y, y_prior = raw_y_prior.
    inline ObservationSet without_normalization(const ObservationSet& obs)
    {
        ObservationSet out = obs;
        out.y = obs.raw_y;
        out.y_prior = obs.raw_y_prior;
        return out;
    }

    inline double log_marginal_likelihood(const ObservationSet& obs, const KernelParams& kernel, double jitter,
                                          double lambda)
    {
        obs.validate();
        if (obs.empty())
            throw ContractError("log_marginal_likelihood needs at least one observation");
        const auto llt = factorize(kernel_matrix(obs.points, kernel, jitter));
        const Vector r = to_vector(obs.y) - lambda * to_vector(obs.y_prior);
        const Vector half = llt.matrixL().solve(r);
        const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
        const double t = static_cast<double>(obs.size());
        return -0.5 * half.squaredNorm() - 0.5 * logdet - 0.5 * t * std::log(2.0 * std::numbers::pi);
    }

    inline constexpr double lambda_denominator_floor = 1e-12;

    namespace detail {
        inline double lambda_from_factor(const Eigen::LLT<Matrix>& llt, const Vector& y, const Vector& yp)
        {
            const Vector hy = llt.matrixL().solve(y);
            const Vector hp = llt.matrixL().solve(yp);
            const double den = hp.squaredNorm();
            if (den < lambda_denominator_floor)
                return 0.0;
            return hp.dot(hy) / den;
        }
    } // namespace detail

    /// Closed-form maximizer of the (quadratic in lambda) log marginal likelihood.
    inline double fit_lambda(const ObservationSet& obs, const KernelParams& kernel, double jitter)
    {
        obs.validate();
        if (obs.empty())
            throw ContractError("fit_lambda needs at least one observation");
        const auto llt = factorize(kernel_matrix(obs.points, kernel, jitter));
        return detail::lambda_from_factor(llt, to_vector(obs.y), to_vector(obs.y_prior));
    }

    enum class LambdaMode { adaptive, fixed };

    struct FitConfig {
        LambdaMode lambda_mode = LambdaMode::adaptive;
        double fixed_lambda = 1.0;
        double jitter = default_jitter;
        bool normalize = true;
        /// Re-select the length scale by marginal likelihood each fit.
        bool refit_lengthscale = false;
        int lengthscale_search_iters = 40;
    };

    struct Posterior {
        double mean = 0.0;
        double variance = 0.0;
    };

    struct PosteriorWithGradient {
        double mean = 0.0;
        double variance = 0.0;
        Vector mean_gradient;
        Vector variance_gradient;
    };

    /// GP(lambda * f'_norm, k) posterior with cached Cholesky factor.
    class GaussianProcessModel {
    public:
        KernelParams kernel;
        double jitter = default_jitter;
        double lambda = 1.0;
        NormalizationState norm;

        GaussianProcessModel() = default;

        /// Model with no data: mean lambda*f'_norm, variance k(x,x).
        static GaussianProcessModel empty(const KernelParams& kernel, double lambda, double jitter = default_jitter,
                                          NormalizationState norm = NormalizationState::identity())
        {
            GaussianProcessModel m;
            m.kernel = kernel;
            m.lambda = lambda;
            m.jitter = jitter;
            m.norm = norm;
            m._fitted = true;
            return m;
        }

        /// Fit on data already in model units (obs.y / obs.y_prior). Without
        /// a fixed lambda, the marginal-likelihood maximizer is used.
        void condition(const ObservationSet& fitted, std::optional<double> fixed_lambda)
        {
            fitted.validate();
            if (fitted.empty()) {
                lambda = fixed_lambda.value_or(lambda);
                _points = Matrix();
                _alpha = Vector();
                _fitted = true;
                return;
            }
            _points = stack_points(fitted.points);
            _llt = factorize(kernel_matrix(fitted.points, kernel, jitter));
            const Vector y = to_vector(fitted.y);
            const Vector yp = to_vector(fitted.y_prior);
            lambda = fixed_lambda ? *fixed_lambda : detail::lambda_from_factor(_llt, y, yp);
            if (!std::isfinite(lambda))
                throw ContractError("lambda must be finite");
            _alpha = _llt.solve(y - lambda * yp);
            _fitted = true;
        }

        bool fitted() const { return _fitted; }
        std::size_t size() const { return static_cast<std::size_t>(_points.cols()); }
        const Matrix& points() const { return _points; }
        const Vector& alpha() const { return _alpha; }

        double prior_term(const PriorFunction& prior, const Vector& x) const
        {
            if (lambda == 0.0)
                return 0.0;
            return lambda * norm.prior_value(prior(x));
        }

        Posterior predict(const PriorFunction& prior, const Vector& x) const
        {
            require_fitted();
            Posterior out;
            out.mean = prior_term(prior, x);
            out.variance = 1.0;
            if (size() > 0) {
                const Vector k = kernel_vector(_points, x, kernel);
                out.mean += k.dot(_alpha);
                const Vector half = _llt.matrixL().solve(k);
                out.variance = std::max(0.0, 1.0 - half.squaredNorm());
            }
            return out;
        }

        PosteriorWithGradient predict_with_gradient(const PriorFunction& prior, const Vector& x) const
        {
            require_fitted();
            const Eigen::Index d = x.size();
            PosteriorWithGradient out;
            out.mean = prior_term(prior, x);
            out.variance = 1.0;
            out.mean_gradient = Vector::Zero(d);
            out.variance_gradient = Vector::Zero(d);
            if (lambda != 0.0)
                out.mean_gradient = (lambda / norm.sigma_prior) * prior.grad(x);
            const Eigen::Index n = _points.cols();
            if (n == 0)
                return out;
            if (_points.rows() != d)
                throw ContractError("posterior: dimension mismatch");
            Vector k(n);
            Matrix dk(d, n); // column i: grad_x k(x_i, x)
            for (Eigen::Index i = 0; i < n; ++i) {
                const Vector diff = x - _points.col(i);
                const double r = diff.norm();
                k[i] = matern52(r, kernel.lengthscale);
                dk.col(i) = matern52_gradient_factor(r, kernel.lengthscale) * diff;
            }
            out.mean += k.dot(_alpha);
            out.mean_gradient += dk * _alpha;
            const Vector v = _llt.solve(k);
            const double var = 1.0 - k.dot(v);
            out.variance = std::max(0.0, var);
            out.variance_gradient = -2.0 * (dk * v);
            return out;
        }

    private:
        void require_fitted() const
        {
            if (!_fitted)
                throw ContractError("GP model used before fit");
        }

        Matrix _points;
        Eigen::LLT<Matrix> _llt;
        Vector _alpha;
        bool _fitted = false;
    };

    inline Posterior posterior(const GaussianProcessModel& model, const ObservationSet& obs,
                               const PriorFunction& prior, const Vector& x)
    {
        if (obs.size() != model.size())
            throw ContractError("posterior: model was fitted on a different observation set");
        return model.predict(prior, x);
    }

    namespace detail {
        /// Profile log likelihood over the length scale (lambda profiled out when adaptive).
        inline double profile_lml(const ObservationSet& fitted, double lengthscale, const FitConfig& cfg)
        {
            KernelParams k{lengthscale, KernelVariant::matern52};
            try {
                const auto llt = factorize(kernel_matrix(fitted.points, k, cfg.jitter));
                const Vector y = to_vector(fitted.y);
                const Vector yp = to_vector(fitted.y_prior);
                const double lam = cfg.lambda_mode == LambdaMode::adaptive ? lambda_from_factor(llt, y, yp)
                                                                           : cfg.fixed_lambda;
                const Vector half = llt.matrixL().solve(y - lam * yp);
                const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
                return -0.5 * half.squaredNorm() - 0.5 * logdet;
            }
            catch (const SingularMatrixError&) {
                return -std::numeric_limits<double>::infinity();
            }
        }

        /// Golden-section search over log(l) in [log(l0/10), log(10 l0)].
        inline double select_lengthscale(const ObservationSet& fitted, double base, const FitConfig& cfg)
        {
            const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
            double a = std::log(base / 10.0);
            double b = std::log(base * 10.0);
            double c = b - invphi * (b - a);
            double d = a + invphi * (b - a);
            double fc = profile_lml(fitted, std::exp(c), cfg);
            double fd = profile_lml(fitted, std::exp(d), cfg);
            for (int i = 0; i < cfg.lengthscale_search_iters; ++i) {
                if (fc >= fd) {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - invphi * (b - a);
                    fc = profile_lml(fitted, std::exp(c), cfg);
                }
                else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + invphi * (b - a);
                    fd = profile_lml(fitted, std::exp(d), cfg);
                }
            }
            return std::exp(0.5 * (a + b));
        }
    } // namespace detail

    /// Normalize, choose lambda, factorize. `kernel` is the initial (or fixed) kernel.
    inline GaussianProcessModel fit(const ObservationSet& obs, const KernelParams& kernel, const FitConfig& cfg)
    {
        obs.validate();
        if (obs.empty())
            throw ContractError("fit needs at least one observation");
        kernel.validate();
        ObservationSet fitted;
        NormalizationState st;
        if (cfg.normalize)
            std::tie(fitted, st) = normalize(obs);
        else
            fitted = without_normalization(obs);

        GaussianProcessModel model;
        model.kernel = kernel;
        model.jitter = cfg.jitter;
        model.norm = st;
        if (cfg.refit_lengthscale)
            model.kernel.lengthscale = detail::select_lengthscale(fitted, kernel.lengthscale, cfg);

        model.condition(fitted, cfg.lambda_mode == LambdaMode::adaptive ? std::nullopt
                                                                         : std::optional<double>(cfg.fixed_lambda));
        return model;
    }

} // namespace pbo

#endif
