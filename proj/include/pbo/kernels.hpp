#ifndef PBO_KERNELS_HPP
#define PBO_KERNELS_HPP

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <pbo/errors.hpp>

namespace pbo {

    using Vector = Eigen::VectorXd;
    using Matrix = Eigen::MatrixXd;
    using PointSet = std::vector<Vector>;

    enum class KernelVariant { matern52 };

    /// Isotropic stationary kernel with unit output variance.
    struct KernelParams {
        double lengthscale = 1.0;
        KernelVariant variant = KernelVariant::matern52;

        /// Default length scale sqrt(d) for the box [-1,1]^d.
        static KernelParams for_dim(Eigen::Index dim)
        {
            return KernelParams{std::sqrt(static_cast<double>(dim)), KernelVariant::matern52};
        }

        void validate() const
        {
            if (!(lengthscale > 0.0) || !std::isfinite(lengthscale))
                throw ContractError("kernel length scale must be positive and finite");
        }

        bool operator==(const KernelParams&) const = default;
    };

    inline constexpr double default_jitter = 1e-6;

    namespace detail {
        inline constexpr double sqrt5 = 2.2360679774997896964091736687313;

        inline void require_same_dim(const Vector& a, const Vector& b)
        {
            if (a.size() != b.size())
                throw ContractError("dimension mismatch: " + std::to_string(a.size()) + " vs "
                                    + std::to_string(b.size()));
        }
    } // namespace detail

    /// Matern-5/2 as a function of distance r.
    inline double matern52(double r, double lengthscale)
    {
        const double s = detail::sqrt5 * r / lengthscale;
        return (1.0 + s + s * s / 3.0) * std::exp(-s);
    }

    /// Factor f(r) such that grad_x k(x, z) = f(r) * (x - z).
    inline double matern52_gradient_factor(double r, double lengthscale)
    {
        const double s = detail::sqrt5 * r / lengthscale;
        return -(5.0 / (3.0 * lengthscale * lengthscale)) * (1.0 + s) * std::exp(-s);
    }

    inline double kernel_eval(const Vector& x, const Vector& z, const KernelParams& p)
    {
        detail::require_same_dim(x, z);
        return matern52((x - z).norm(), p.lengthscale);
    }

    /// Gradient of k(x, z) with respect to x.
    inline Vector kernel_gradient(const Vector& x, const Vector& z, const KernelParams& p)
    {
        detail::require_same_dim(x, z);
        const Vector diff = x - z;
        return matern52_gradient_factor(diff.norm(), p.lengthscale) * diff;
    }

    /// Stack a point list column-wise into a d x n matrix.
    inline Matrix stack_points(const PointSet& points)
    {
        if (points.empty())
            return Matrix(0, 0);
        const Eigen::Index d = points.front().size();
        Matrix out(d, static_cast<Eigen::Index>(points.size()));
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (points[i].size() != d)
                throw ContractError("point set has inconsistent dimensions");
            out.col(static_cast<Eigen::Index>(i)) = points[i];
        }
        return out;
    }

    /// Cross kernel matrix K(a, b) for column-stacked points.
    inline Matrix cross_kernel(const Matrix& a, const Matrix& b, const KernelParams& p)
    {
        if (a.cols() > 0 && b.cols() > 0 && a.rows() != b.rows())
            throw ContractError("dimension mismatch in cross kernel");
        Matrix k(a.cols(), b.cols());
        for (Eigen::Index j = 0; j < b.cols(); ++j)
            for (Eigen::Index i = 0; i < a.cols(); ++i)
                k(i, j) = matern52((a.col(i) - b.col(j)).norm(), p.lengthscale);
        return k;
    }

    /// Vector k_T(x) = [k(x_1, x), ..., k(x_T, x)].
    inline Vector kernel_vector(const Matrix& points, const Vector& x, const KernelParams& p)
    {
        if (points.cols() > 0 && points.rows() != x.size())
            throw ContractError("dimension mismatch in kernel vector");
        Vector k(points.cols());
        for (Eigen::Index i = 0; i < points.cols(); ++i)
            k[i] = matern52((points.col(i) - x).norm(), p.lengthscale);
        return k;
    }

    /// K + jitter * I over a point list.
    inline Matrix kernel_matrix(const PointSet& points, const KernelParams& p, double jitter = 0.0)
    {
        p.validate();
        if (points.empty())
            throw ContractError("kernel_matrix needs at least one point");
        if (jitter < 0.0)
            throw ContractError("jitter must be nonnegative");
        const Matrix x = stack_points(points);
        const Eigen::Index n = x.cols();
        Matrix k(n, n);
        for (Eigen::Index j = 0; j < n; ++j) {
            k(j, j) = 1.0 + jitter;
            for (Eigen::Index i = j + 1; i < n; ++i) {
                const double v = kernel_eval(points[static_cast<std::size_t>(i)],
                                             points[static_cast<std::size_t>(j)], p);
                k(i, j) = v;
                k(j, i) = v;
            }
        }
        return k;
    }

    /// Cholesky factorization with an explicit rank check. Pivots below
    /// `relative_floor * max diag` count as singular.
    inline Eigen::LLT<Matrix> factorize(const Matrix& a, double relative_floor = 1e-14)
    {
        if (a.rows() != a.cols())
            throw ContractError("factorize expects a square matrix");
        Eigen::LLT<Matrix> llt(a);
        bool ok = llt.info() == Eigen::Success;
        if (ok && a.rows() > 0) {
            const double scale = a.diagonal().cwiseAbs().maxCoeff();
            const Matrix& l = llt.matrixLLT();
            for (Eigen::Index i = 0; i < a.rows() && ok; ++i) {
                const double piv = l(i, i);
                ok = std::isfinite(piv) && piv * piv > relative_floor * scale;
            }
        }
        if (!ok)
            throw SingularMatrixError("kernel matrix is singular or not positive definite "
                                      "(duplicate points? add jitter, e.g. 1e-6)");
        return llt;
    }

    /// Minimum-norm interpolant norm y^T K^{-1} y.
    inline double rkhs_norm_estimate(const Matrix& k, const Vector& y)
    {
        if (k.rows() != y.size())
            throw ContractError("rkhs_norm_estimate: size mismatch");
        if (y.size() == 0)
            return 0.0;
        const auto llt = factorize(k);
        const Vector half = llt.matrixL().solve(y);
        return half.squaredNorm();
    }

    /// h(x) = sum_i a_i k(z_i, x), an exact member of the RKHS.
    struct KernelExpansion {
        Matrix centers; ///< d x m, one center per column
        Vector coefficients;
        KernelParams params;

        KernelExpansion() = default;
        KernelExpansion(Matrix c, Vector a, KernelParams p)
            : centers(std::move(c)), coefficients(std::move(a)), params(p)
        {
            if (centers.cols() != coefficients.size())
                throw ContractError("expansion: centers/coefficients size mismatch");
            if (centers.cols() < 1)
                throw ContractError("expansion needs at least one center");
            params.validate();
        }

        Eigen::Index dim() const { return centers.rows(); }
        Eigen::Index size() const { return centers.cols(); }

        double operator()(const Vector& x) const
        {
            return kernel_vector(centers, x, params).dot(coefficients);
        }

        Vector gradient(const Vector& x) const
        {
            if (x.size() != dim())
                throw ContractError("expansion gradient: dimension mismatch");
            Vector g = Vector::Zero(x.size());
            for (Eigen::Index i = 0; i < size(); ++i) {
                const Vector diff = x - centers.col(i);
                g += coefficients[i] * matern52_gradient_factor(diff.norm(), params.lengthscale) * diff;
            }
            return g;
        }
    };

    /// <h1, h2>_k = a1^T K(z1, z2) a2.
    inline double expansion_inner_product(const KernelExpansion& h1, const KernelExpansion& h2)
    {
        if (!(h1.params == h2.params))
            throw ContractError("expansion_inner_product: kernel parameters differ");
        if (h1.dim() != h2.dim())
            throw ContractError("expansion_inner_product: dimension mismatch");
        return h1.coefficients.dot(cross_kernel(h1.centers, h2.centers, h1.params) * h2.coefficients);
    }

    inline double expansion_norm(const KernelExpansion& h)
    {
        return std::sqrt(std::max(0.0, expansion_inner_product(h, h)));
    }

    /// a*h1 + b*h2 as one expansion over the concatenated centers.
    inline KernelExpansion combine(double a, const KernelExpansion& h1, double b, const KernelExpansion& h2)
    {
        if (!(h1.params == h2.params) || h1.dim() != h2.dim())
            throw ContractError("combine: incompatible expansions");
        Matrix c(h1.dim(), h1.size() + h2.size());
        c << h1.centers, h2.centers;
        Vector w(h1.size() + h2.size());
        w << a * h1.coefficients, b * h2.coefficients;
        return KernelExpansion(std::move(c), std::move(w), h1.params);
    }

    inline KernelExpansion scaled(double a, const KernelExpansion& h)
    {
        return KernelExpansion(h.centers, a * h.coefficients, h.params);
    }

} // namespace pbo

#endif
