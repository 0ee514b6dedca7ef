#include "shapedq/replay.hpp"

#include <ostream>
#include <stdexcept>
#include <utility>

#include <fmt/format.h>

namespace shapedq {

ReplayMemory::ReplayMemory(std::size_t capacity, ShapingConfig config)
    : capacity_(capacity)
    , config_(config)
{
	if (capacity_ == 0)
		throw std::invalid_argument("ReplayMemory: capacity must be positive");
	config_.validate();
	ring_.reserve(capacity_);
}

double ReplayMemory::post_sp_reward(const Transition& t) const
{
	return config_.sp_enabled ? apply_sp(t.env_reward, t.terminal, config_.p) : t.env_reward;
}

void ReplayMemory::push(Observation state, int action, double env_reward, Observation next_state, bool terminal)
{
	pending_.push_back({std::move(state), action, env_reward, std::move(next_state), terminal, std::nullopt, std::nullopt});
	if (terminal || post_sp_reward(pending_.back()) != 0.0)
		finalize_pending();
}

void ReplayMemory::finalize_pending()
{
	const double source = post_sp_reward(pending_.back());
	const std::size_t last = pending_.size() - 1;
	for (std::size_t i = 0; i <= last; ++i) {
		Transition& t = pending_[i];
		if (source != 0.0) {
			t.dist_to_source = last - i;
			t.source_reward = source;
		}
		commit(std::move(t));
	}
	pending_.clear();
}

void ReplayMemory::commit(Transition&& t)
{
	if (ring_.size() < capacity_) {
		ring_.push_back(std::move(t));
		++size_;
		return;
	}
	// Full: overwrite the oldest.
	ring_[head_] = std::move(t);
	head_ = (head_ + 1) % capacity_;
}

double ReplayMemory::shaped_reward(const Transition& t) const
{
	if (!config_.rb_enabled)
		return post_sp_reward(t);
	if (!t.dist_to_source)
		return 0.0;
	return backfill_weight(*t.dist_to_source, config_.lambda, config_.l_min) * *t.source_reward;
}

const Transition& ReplayMemory::at(std::size_t i) const
{
	if (i >= size_)
		throw std::out_of_range("ReplayMemory::at");
	return ring_[(head_ + i) % ring_.size()];
}

std::vector<SampledTransition> ReplayMemory::sample(std::size_t batch_size, Rng& rng) const
{
	if (batch_size > size_ || size_ == 0)
		throw std::logic_error(fmt::format("ReplayMemory: cannot sample {} from {} committed transitions", batch_size, size_));
	std::vector<SampledTransition> batch;
	batch.reserve(batch_size);
	for (std::size_t k = 0; k < batch_size; ++k) {
		const Transition& t = ring_[uniform_index(rng, ring_.size())];
		batch.push_back({std::cref(t), shaped_reward(t)});
	}
	return batch;
}

void ReplayMemory::clear()
{
	ring_.clear();
	head_ = 0;
	size_ = 0;
	pending_.clear();
}

void ReplayMemory::dump(std::ostream& os) const
{
	for (std::size_t i = 0; i < size_; ++i) {
		const Transition& t = at(i);
		os << fmt::format("{} {} {} {} {} {} {}\n", t.state.id, t.action, t.env_reward, t.next_state.id, t.terminal ? 1 : 0,
		                  t.dist_to_source ? fmt::format("{}", *t.dist_to_source) : "-",
		                  t.source_reward ? fmt::format("{}", *t.source_reward) : "-");
	}
}

} // namespace shapedq
