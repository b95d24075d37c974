#ifndef PBO_OBJECTIVES_HPP
#define PBO_OBJECTIVES_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <pbo/functions.hpp>
#include <pbo/random.hpp>

namespace pbo {

    inline constexpr double default_success_percentile = 0.95;
    inline constexpr int default_threshold_samples = 100000;

    /// Empirical percentile of f over uniform samples in the box (nearest-rank).
    template <typename F>
    double box_percentile(const F& f, Eigen::Index dim, double q, int samples, Rng& rng)
    {
        std::vector<double> v;
        v.reserve(static_cast<std::size_t>(samples));
        for (int i = 0; i < samples; ++i)
            v.push_back(f(uniform_in_box(dim, rng)));
        const auto k = static_cast<std::size_t>(std::clamp<double>(std::ceil(q * samples) - 1, 0, samples - 1));
        std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
        return v[k];
    }

    /// Random expansion with `m` centers uniform in the box, Gaussian
    /// coefficients, rescaled to unit RKHS norm.
    inline KernelExpansion random_unit_expansion(Eigen::Index dim, Eigen::Index m, const KernelParams& kernel,
                                                 Rng& rng)
    {
        if (m < 1)
            throw ContractError("expansion needs at least one center");
        Matrix centers(dim, m);
        for (Eigen::Index j = 0; j < m; ++j)
            centers.col(j) = uniform_in_box(dim, rng);
        Vector coef = standard_normal(m, rng);
        KernelExpansion h(std::move(centers), std::move(coef), kernel);
        const double norm = expansion_norm(h);
        h.coefficients /= norm;
        return h;
    }

    inline BoxObjective objective_from_expansion(KernelExpansion h, double threshold, Descriptor desc)
    {
        const Eigen::Index d = h.dim();
        BoxObjective f(d, [h](const Vector& x) { return h(x); }, threshold, std::move(desc));
        f.expansion = std::move(h);
        return f;
    }

    /// Unit-norm RKHS objective; success threshold is a percentile (default
    /// 95th) of f over 1e5 uniform samples drawn from a seed-derived stream.
    inline BoxObjective make_rkhs_objective(Eigen::Index dim, Eigen::Index m_centers, std::uint64_t seed,
                                            std::optional<KernelParams> kernel = std::nullopt,
                                            double success_percentile = default_success_percentile)
    {
        const KernelParams k = kernel.value_or(KernelParams::for_dim(dim));
        Rng rng = make_rng(seed, "rkhs-objective");
        KernelExpansion h = random_unit_expansion(dim, m_centers, k, rng);
        Rng trng = make_rng(seed, "rkhs-threshold");
        const double tau = box_percentile(h, dim, success_percentile, default_threshold_samples, trng);
        return objective_from_expansion(
            std::move(h), tau,
            Descriptor{"rkhs", seed, "d=" + std::to_string(dim) + ",m=" + std::to_string(m_centers)});
    }

    /// Objective/prior pair with a prescribed RKHS cosine.
    struct SimilarityControlledPair {
        BoxObjective f;
        PriorFunction prior;
        double cos_angle = 1.0;
    };

    inline constexpr double orthogonal_residual_floor = 1e-8;

    /// f' = cos * f + sin * g_perp with g_perp a random unit expansion
    /// orthogonalized against f in the RKHS. Both have unit norm.
    inline SimilarityControlledPair make_pair(Eigen::Index dim, double cos_angle, std::uint64_t seed,
                                              Eigen::Index m_centers = 10,
                                              std::optional<KernelParams> kernel = std::nullopt,
                                              double success_percentile = default_success_percentile)
    {
        if (!(cos_angle >= -1.0 && cos_angle <= 1.0))
            throw ContractError("cos_angle must lie in [-1, 1]");
        const KernelParams k = kernel.value_or(KernelParams::for_dim(dim));
        BoxObjective f = make_rkhs_objective(dim, m_centers, seed, k, success_percentile);
        const KernelExpansion& fh = *f.expansion;

        const double sin_angle = std::sqrt(std::max(0.0, 1.0 - cos_angle * cos_angle));
        KernelExpansion prior_h = scaled(cos_angle, fh);
        if (sin_angle > 0.0) {
            Rng rng = make_rng(seed, "pair-orthogonal");
            for (int attempt = 0;; ++attempt) {
                const KernelExpansion g = random_unit_expansion(dim, m_centers, k, rng);
                KernelExpansion residual = combine(1.0, g, -expansion_inner_product(g, fh), fh);
                const double rn = expansion_norm(residual);
                if (rn >= orthogonal_residual_floor) {
                    residual.coefficients /= rn;
                    // second pass removes roundoff left by the first projection
                    residual = combine(1.0, residual, -expansion_inner_product(residual, fh), fh);
                    residual.coefficients /= expansion_norm(residual);
                    prior_h = combine(cos_angle, fh, sin_angle, residual);
                    break;
                }
                if (attempt > 100)
                    throw ContractError("make_pair: could not build an orthogonal component");
            }
        }
        SimilarityControlledPair out{std::move(f), PriorFunction::from_expansion(prior_h), 0.0};
        out.cos_angle = expansion_inner_product(*out.f.expansion, prior_h)
                        / (expansion_norm(*out.f.expansion) * expansion_norm(prior_h));
        return out;
    }

    /// Two independent uniform directions on the unit sphere in R^d.
    inline std::pair<Vector, Vector> linear_sphere_sample(Eigen::Index dim, Rng& rng)
    {
        if (dim < 2)
            throw ContractError("linear_sphere_sample needs d >= 2");
        Vector w = standard_normal(dim, rng);
        Vector wp = standard_normal(dim, rng);
        w /= w.norm();
        wp /= wp.norm();
        return {std::move(w), std::move(wp)};
    }

    inline std::pair<Vector, Vector> linear_sphere_sample(Eigen::Index dim, std::uint64_t seed)
    {
        Rng rng = make_rng(seed, "sphere");
        return linear_sphere_sample(dim, rng);
    }

    /// f(x) = w^T x with prior f'(x) = w'^T x, w, w' uniform on the sphere.
    /// Threshold at the 95th percentile as for the RKHS family.
    inline std::pair<BoxObjective, PriorFunction> make_linear_pair(Eigen::Index dim, std::uint64_t seed)
    {
        auto [w, wp] = linear_sphere_sample(dim, seed);
        auto fw = [w](const Vector& x) { return w.dot(x); };
        Rng trng = make_rng(seed, "linear-threshold");
        const double tau = box_percentile(fw, dim, default_success_percentile, default_threshold_samples, trng);
        BoxObjective f(dim, fw, tau, Descriptor{"linear", seed, "d=" + std::to_string(dim)});
        f.known_max = w.lpNorm<1>();
        PriorFunction p;
        p.dim = dim;
        p.value = [wp](const Vector& x) { return wp.dot(x); };
        p.gradient = [wp](const Vector&) { return wp; };
        return {std::move(f), std::move(p)};
    }

    /// Concave quadratic -||x - c||^2; success when within `radius` of c.
    inline BoxObjective make_quadratic(const Vector& center, double radius = 0.1)
    {
        const Eigen::Index d = center.size();
        BoxObjective f(d, [center](const Vector& x) { return -(x - center).squaredNorm(); }, -radius * radius,
                       Descriptor{"quadratic", 0, "d=" + std::to_string(d)});
        f.known_max = 0.0;
        return f;
    }

    inline PriorFunction quadratic_prior(const Vector& center)
    {
        PriorFunction p;
        p.dim = center.size();
        p.value = [center](const Vector& x) { return -(x - center).squaredNorm(); };
        p.gradient = [center](const Vector& x) { return (-2.0 * (x - center)).eval(); };
        return p;
    }

} // namespace pbo

#endif
