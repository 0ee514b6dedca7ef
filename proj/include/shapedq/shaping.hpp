// Self-punishment (SP) and reward backfill (RB) over whole episodes.
//
// These are the offline definitions. ReplayMemory computes the same values
// incrementally from per-transition bookkeeping and is tested against them.
//
// Backfill weights are indexed by the distance d from a zero-reward step to
// the nearest later nonzero reward: f(d) = lambda^d for d <= l_min, else 0.
// With this range sum_{d=0}^{l_min} f(d) equals (1 - lambda^(1+l_min)) / (1 - lambda).
#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include "shapedq/types.hpp"

namespace shapedq {

struct ShapingConfig
{
	bool sp_enabled = false;
	double p = 1.0;
	bool rb_enabled = false;
	double lambda = 0.65;
	std::size_t l_min = 48;

	static ShapingConfig none() { return {}; }
	static ShapingConfig sp(double p) { return {true, p, false, 0.65, 48}; }
	static ShapingConfig rb(double lambda, std::size_t l_min) { return {false, 1.0, true, lambda, l_min}; }
	static ShapingConfig hybrid(double p, double lambda, std::size_t l_min) { return {true, p, true, lambda, l_min}; }

	/// Throws std::invalid_argument when an enabled strategy has bad parameters.
	void validate() const
	{
		if (sp_enabled && !(p > 0.0))
			throw std::invalid_argument("shaping: p must be positive when SP is enabled");
		if (rb_enabled && !(lambda >= 0.0 && lambda < 1.0))
			throw std::invalid_argument("shaping: lambda must lie in [0, 1) when RB is enabled");
		if (l_min < 1)
			throw std::invalid_argument("shaping: l_min must be at least 1");
	}

	bool operator==(const ShapingConfig&) const = default;
};

using FlagVector = Eigen::Array<bool, Eigen::Dynamic, 1>;

struct SparsityProfile
{
	std::vector<std::size_t> lengths;
	double mean_length = 0.0;
	std::size_t nonzero_count = 0;
};

template <class Scalar>
Scalar apply_sp(Scalar reward, bool next_is_terminal, Scalar p)
{
	return next_is_terminal ? reward - p : reward;
}

template <class Scalar>
Scalar backfill_weight(std::size_t distance, Scalar lambda, std::size_t l_min)
{
	if (distance > l_min)
		return Scalar(0);
	return std::pow(lambda, static_cast<Scalar>(distance));
}

template <class Scalar>
Scalar constant_sum(Scalar lambda, std::size_t l_min)
{
	return (Scalar(1) - std::pow(lambda, static_cast<Scalar>(l_min + 1))) / (Scalar(1) - lambda);
}

/// Smallest l whose truncated tail lambda^(l+1) is below threshold
/// (48 for lambda = 0.65); 1 for lambda == 0.
inline std::size_t default_l_min(double lambda, double threshold = 1e-9)
{
	if (lambda <= 0.0)
		return 1;
	std::size_t l = 1;
	while (std::pow(lambda, static_cast<double>(l + 1)) >= threshold)
		++l;
	return l;
}

/// Each zero reward takes f(d) times the nearest later nonzero reward at
/// distance d. Nonzero rewards are kept. Zeros with no later nonzero
/// reward stay zero.
template <class Derived>
VectorX<typename Derived::Scalar> backfill_episode(const Eigen::MatrixBase<Derived>& rewards, const ShapingConfig& config)
{
	using Scalar = typename Derived::Scalar;
	const Eigen::Index n = rewards.size();
	VectorX<Scalar> out(n);
	std::optional<Eigen::Index> source;
	for (Eigen::Index i = n - 1; i >= 0; --i) {
		if (rewards[i] != Scalar(0)) {
			out[i] = rewards[i];
			source = i;
		} else if (source) {
			const auto d = static_cast<std::size_t>(*source - i);
			out[i] = backfill_weight<Scalar>(d, static_cast<Scalar>(config.lambda), config.l_min) * rewards[*source];
		} else {
			out[i] = Scalar(0);
		}
	}
	return out;
}

/// SP first, then RB over the SP-shaped sequence. terminal_flags must mark
/// exactly the last step of a complete episode.
template <class Derived>
VectorX<typename Derived::Scalar> shape_episode(const Eigen::MatrixBase<Derived>& rewards, const FlagVector& terminal_flags,
                                                const ShapingConfig& config)
{
	using Scalar = typename Derived::Scalar;
	const Eigen::Index n = rewards.size();
	if (terminal_flags.size() != n)
		throw std::invalid_argument("shape_episode: rewards and terminal flags differ in length");
	for (Eigen::Index i = 0; i + 1 < n; ++i)
		if (terminal_flags[i])
			throw std::invalid_argument("shape_episode: only the final step may be terminal");
	if (n > 0 && !terminal_flags[n - 1])
		throw std::invalid_argument("shape_episode: episode does not end in a terminal step");

	VectorX<Scalar> shaped = rewards;
	if (config.sp_enabled)
		for (Eigen::Index i = 0; i < n; ++i)
			shaped[i] = apply_sp<Scalar>(shaped[i], terminal_flags[i], static_cast<Scalar>(config.p));
	if (config.rb_enabled)
		return backfill_episode(shaped, config);
	return shaped;
}

/// Flags for a complete episode of n steps: only the last one is terminal.
inline FlagVector episode_end_flags(Eigen::Index n)
{
	FlagVector flags = FlagVector::Constant(n, false);
	if (n > 0)
		flags[n - 1] = true;
	return flags;
}

template <class Derived>
SparsityProfile sparsity_lengths(const Eigen::MatrixBase<Derived>& rewards)
{
	using Scalar = typename Derived::Scalar;
	SparsityProfile profile;
	std::optional<Eigen::Index> last;
	for (Eigen::Index i = 0; i < rewards.size(); ++i) {
		if (rewards[i] == Scalar(0))
			continue;
		++profile.nonzero_count;
		if (last)
			profile.lengths.push_back(static_cast<std::size_t>(i - *last));
		last = i;
	}
	if (!profile.lengths.empty()) {
		double total = 0.0;
		for (auto l : profile.lengths)
			total += static_cast<double>(l);
		profile.mean_length = total / static_cast<double>(profile.lengths.size());
	}
	return profile;
}

} // namespace shapedq
