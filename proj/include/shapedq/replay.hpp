// Bounded replay memory with O(1) shaped-reward retrieval.
//
// A zero-reward transition's backfilled reward depends on the next nonzero
// (post-SP) reward of its episode, so transitions wait in a pending area
// until that source arrives or the episode terminates. Finalization stamps
// each one with its distance to the source and the source value; sampling
// then needs a single weight evaluation per item.
#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "shapedq/random.hpp"
#include "shapedq/shaping.hpp"
#include "shapedq/types.hpp"

namespace shapedq {

struct Transition
{
	Observation state;
	int action = 0;
	double env_reward = 0.0;
	Observation next_state;
	bool terminal = false;
	std::optional<std::size_t> dist_to_source; ///< steps forward to the nearest nonzero post-SP reward
	std::optional<double> source_reward;       ///< that reward's post-SP value
};

struct SampledTransition
{
	std::reference_wrapper<const Transition> transition;
	double shaped_reward;
};

class ReplayMemory
{
public:
	ReplayMemory(std::size_t capacity, ShapingConfig config);

	/// Transitions must arrive in episode order.
	void push(Observation state, int action, double env_reward, Observation next_state, bool terminal);

	/// Uniform with replacement over committed transitions. Throws
	/// std::logic_error when fewer than batch_size are committed. The
	/// returned references are invalidated by the next push.
	std::vector<SampledTransition> sample(std::size_t batch_size, Rng& rng) const;

	double shaped_reward(const Transition& t) const;
	double post_sp_reward(const Transition& t) const;

	/// Committed transition i, 0 = oldest.
	const Transition& at(std::size_t i) const;

	std::size_t size() const { return size_; }
	std::size_t capacity() const { return capacity_; }
	std::size_t pending_size() const { return pending_.size(); }
	const ShapingConfig& config() const { return config_; }
	void clear();

	/// Text dump, one committed transition per line:
	/// `s a r_env s' terminal dist source` with `-` for absent bookkeeping.
	void dump(std::ostream& os) const;

private:
	void commit(Transition&& t);
	void finalize_pending();

	std::size_t capacity_;
	ShapingConfig config_;
	std::vector<Transition> ring_;
	std::size_t head_ = 0; ///< index of the oldest committed transition
	std::size_t size_ = 0;
	std::vector<Transition> pending_;
};

} // namespace shapedq
