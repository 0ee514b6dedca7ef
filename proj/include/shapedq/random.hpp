// Portable random helpers. std::mt19937_64 has a standardized output
// sequence; the distributions below are written out so that seeded runs
// produce identical results on every standard library.
#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace shapedq {

using Rng = std::mt19937_64;

/// Uniform integer in [0, n) by rejection sampling. n must be > 0.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n)
{
	const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
	std::uint64_t x = rng();
	while (x >= limit)
		x = rng();
	return x % n;
}

/// Uniform real in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng)
{
	return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_real(Rng& rng, double lo, double hi)
{
	return lo + (hi - lo) * uniform01(rng);
}

/// SplitMix64 finalizer, used to turn small seeds into well-mixed words.
inline std::uint64_t mix_seed(std::uint64_t x)
{
	x += 0x9e3779b97f4a7c15ULL;
	x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
	x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
	return x ^ (x >> 31);
}

} // namespace shapedq
