#ifndef PBO_FUNCTIONS_HPP
#define PBO_FUNCTIONS_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>

#include <pbo/kernels.hpp>

namespace pbo {

    /// Where an objective came from; carried into reports.
    struct Descriptor {
        std::string family;
        std::uint64_t seed = 0;
        std::string params;
    };

    /// Black-box objective on the box [-1,1]^d. Every call to evaluate()
    /// is counted; the counter is the audit trail for query budgets.
    class BoxObjective {
    public:
        using Fn = std::function<double(const Vector&)>;

        BoxObjective() = default;
        BoxObjective(Eigen::Index dim, Fn fn, double threshold, Descriptor descriptor = {})
            : _dim(dim), _fn(std::move(fn)), _threshold(threshold), _descriptor(std::move(descriptor))
        {
            if (dim < 1)
                throw ContractError("objective dimension must be positive");
        }

        Eigen::Index dim() const { return _dim; }
        double threshold() const { return _threshold; }
        void set_threshold(double t) { _threshold = t; }
        const Descriptor& descriptor() const { return _descriptor; }
        std::size_t calls() const { return _calls; }

        double evaluate(const Vector& x)
        {
            if (x.size() != _dim)
                throw ContractError("objective: dimension mismatch");
            ++_calls;
            return _fn(x);
        }

        /// Evaluation that bypasses the audit counter (ground-truth analysis only).
        double peek(const Vector& x) const { return _fn(x); }

        bool is_success(double y) const { return y > _threshold; }

        /// Exact RKHS representation, when the objective was built as one.
        std::optional<KernelExpansion> expansion;
        /// Known global maximum over the box, when available.
        std::optional<double> known_max;

    private:
        Eigen::Index _dim = 0;
        Fn _fn;
        double _threshold = 0.0;
        Descriptor _descriptor;
        std::size_t _calls = 0;
    };

    /// Differentiable, free-to-evaluate stand-in for the objective.
    struct PriorFunction {
        Eigen::Index dim = 0;
        std::function<double(const Vector&)> value;
        std::function<Vector(const Vector&)> gradient;
        std::optional<KernelExpansion> expansion;

        bool has_gradient() const { return static_cast<bool>(gradient); }

        double operator()(const Vector& x) const { return value(x); }

        Vector grad(const Vector& x) const
        {
            if (!gradient)
                throw ContractError("prior function has no gradient");
            return gradient(x);
        }

        static PriorFunction zero(Eigen::Index dim)
        {
            return PriorFunction{dim, [](const Vector&) { return 0.0; },
                                 [dim](const Vector&) { return Vector::Zero(dim).eval(); }, std::nullopt};
        }

        static PriorFunction from_expansion(KernelExpansion h)
        {
            PriorFunction p;
            p.dim = h.dim();
            p.value = [h](const Vector& x) { return h(x); };
            p.gradient = [h](const Vector& x) { return h.gradient(x); };
            p.expansion = std::move(h);
            return p;
        }
    };

    /// The search box [-1,1]^d.
    struct SearchBox {
        Eigen::Index dim = 1;

        static constexpr double lower = -1.0;
        static constexpr double upper = 1.0;

        Vector clip(const Vector& x) const { return x.cwiseMax(lower).cwiseMin(upper); }

        bool contains(const Vector& x, double tol = 1e-9) const
        {
            return x.size() == dim && (x.array() >= lower - tol).all() && (x.array() <= upper + tol).all();
        }
    };

} // namespace pbo

#endif
