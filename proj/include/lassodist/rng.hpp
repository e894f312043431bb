#pragma once
#include <cstdint>
#include <random>
#include <Eigen/Dense>

namespace lassodist {

/**
 * Seeding scheme.
 *
 * Every random quantity is drawn from a std::mt19937_64 engine whose seed is
 * the SplitMix64 finalizer applied to (master seed, stream label, index).
 * Replica seeds are derived by the same finalizer, so a whole experiment is a
 * pure function of its master seed regardless of thread count or completion
 * order.
 */
enum class Stream : std::uint64_t {
    design = 0x64657369676eULL,
    noise = 0x6e6f697365ULL,
    monte_carlo = 0x6d63ULL,
    replica = 0x7265706cULL,
    support = 0x73757070ULL,
    width = 0x7769647468ULL,
};

struct SeedSpec
{
    std::uint64_t master_seed = 0;

    friend bool operator==(const SeedSpec&, const SeedSpec&) = default;
};

namespace detail {

/// SplitMix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t stream_key(SeedSpec seed, Stream stream, std::uint64_t index) noexcept
{
    const std::uint64_t base = mix64(seed.master_seed ^ mix64(static_cast<std::uint64_t>(stream)));
    return mix64(base + mix64(index));
}

} // namespace detail

/// Replica seeds are injective in `replica_idx` for a fixed parent seed.
constexpr SeedSpec derive_replica_seed(SeedSpec seed, std::uint64_t replica_idx) noexcept
{
    return SeedSpec{detail::stream_key(seed, Stream::replica, replica_idx)};
}

inline std::mt19937_64 make_engine(SeedSpec seed, Stream stream, std::uint64_t index = 0)
{
    return std::mt19937_64(detail::stream_key(seed, stream, index));
}

/// Fills a vector with iid N(0, 1) draws from the given stream.
inline Eigen::VectorXd standard_normal_vector(Eigen::Index size, SeedSpec seed, Stream stream,
                                              std::uint64_t index = 0)
{
    auto engine = make_engine(seed, stream, index);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd out(size);
    for (Eigen::Index i = 0; i < size; ++i) out[i] = normal(engine);
    return out;
}

} // namespace lassodist
