#ifndef PBO_RANDOM_HPP
#define PBO_RANDOM_HPP

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

#include <Eigen/Core>

namespace pbo {

    using Rng = std::mt19937_64;

    /// SplitMix64 finalizer.
    constexpr std::uint64_t mix64(std::uint64_t z)
    {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    constexpr std::uint64_t hash_tag(std::string_view tag)
    {
        std::uint64_t h = 0xcbf29ce484222325ULL; // FNV-1a
        for (char c : tag) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ULL;
        }
        return h;
    }

    /// Counter-based stream derivation: the child seed depends only on the
    /// parent seed and the path of tags/indices, never on call order.
    inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t index = 0)
    {
        return mix64(mix64(base ^ hash_tag(tag)) + mix64(index + 0x632be59bd9b4e019ULL));
    }

    inline Rng make_rng(std::uint64_t base, std::string_view tag, std::uint64_t index = 0)
    {
        return Rng(derive_seed(base, tag, index));
    }

    inline Eigen::VectorXd uniform_in_box(Eigen::Index dim, Rng& rng)
    {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        Eigen::VectorXd x(dim);
        for (Eigen::Index i = 0; i < dim; ++i)
            x[i] = u(rng);
        return x;
    }

    inline Eigen::VectorXd standard_normal(Eigen::Index dim, Rng& rng)
    {
        std::normal_distribution<double> n(0.0, 1.0);
        Eigen::VectorXd x(dim);
        for (Eigen::Index i = 0; i < dim; ++i)
            x[i] = n(rng);
        return x;
    }

} // namespace pbo

#endif
