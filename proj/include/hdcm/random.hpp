#ifndef HDCM_RANDOM_HPP
#define HDCM_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace hdcm {

using Rng = std::mt19937_64;

/// Deterministic stream for a (seed, key...) tuple. Distinct keys give
/// statistically independent engines.
inline Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys = {}) {
	std::vector<std::uint32_t> words;
	words.reserve(2 + 2 * keys.size());
	words.push_back(static_cast<std::uint32_t>(seed));
	words.push_back(static_cast<std::uint32_t>(seed >> 32));
	for (const auto key : keys) {
		words.push_back(static_cast<std::uint32_t>(key));
		words.push_back(static_cast<std::uint32_t>(key >> 32));
	}
	std::seed_seq seq(words.begin(), words.end());
	return Rng(seq);
}

inline double standard_normal(Rng &rng) {
	std::normal_distribution<double> dist(0.0, 1.0);
	return dist(rng);
}

inline double uniform01(Rng &rng) {
	std::uniform_real_distribution<double> dist(0.0, 1.0);
	return dist(rng);
}

/// Standard type-1 extreme value (Gumbel) draw.
inline double gumbel(Rng &rng) {
	double u = uniform01(rng);
	while (u <= 0.0) {
		u = uniform01(rng);
	}
	return -std::log(-std::log(u));
}

} // namespace hdcm

#endif
