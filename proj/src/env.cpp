#include "shapedq/env.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>
#include <utility>

#include <fmt/format.h>

#include "shapedq/random.hpp"

namespace shapedq {

namespace {

void check_spec(const EnvSpec& spec)
{
	if (spec.state_count < 1 || spec.action_count < 1 || spec.max_episode_len < 1 || spec.feature_dim < 1)
		throw std::invalid_argument("EnvSpec: counts and horizon must be positive");
}

Eigen::VectorXd one_hot(int size, int index)
{
	Eigen::VectorXd v = Eigen::VectorXd::Zero(size);
	if (index >= 0 && index < size)
		v[index] = 1.0;
	return v;
}

} // namespace

Environment::Environment(EnvSpec spec)
    : spec_(spec)
{
	check_spec(spec_);
}

Observation Environment::reset(std::uint64_t seed)
{
	state_ = initial_state(seed);
	length_ = 0;
	done_ = false;
	return observe(state_);
}

StepResult Environment::step(int action)
{
	if (done_)
		throw std::logic_error(name() + ": step called on a terminated episode; call reset first");
	if (action < 0 || action >= spec_.action_count)
		throw std::out_of_range(fmt::format("{}: action {} outside [0, {})", name(), action, spec_.action_count));

	const Outcome o = transition(state_, action);
	++length_;
	state_ = o.next_state;
	done_ = o.terminal || length_ >= spec_.max_episode_len;
	return {observe(state_), o.reward, done_};
}

// --- SparseChain ---------------------------------------------------------

SparseChain::SparseChain(int n, std::set<int> reward_positions, int max_episode_len)
    : Environment({n, 2, max_episode_len > 0 ? max_episode_len : 4 * std::max(n, 2), n})
    , n_(n)
    , rewards_(std::move(reward_positions))
{
	if (n < 2)
		throw std::invalid_argument("SparseChain needs at least 2 positions");
	if (rewards_.empty())
		rewards_.insert(n - 1);
	for (int r : rewards_)
		if (r < 1 || r >= n)
			throw std::invalid_argument(fmt::format("SparseChain reward position {} outside [1, {})", r, n));
}

Outcome SparseChain::transition(int state, int action) const
{
	if (state == n_ - 1)
		return {state, 0.0, true};
	if (action == kLeft)
		return {std::max(state - 1, 0), 0.0, false};
	const int next = state + 1;
	return {next, rewards_.count(next) ? 1.0 : 0.0, next == n_ - 1};
}

Eigen::VectorXd SparseChain::features(int state) const
{
	return one_hot(n_, state);
}

// --- GridCliff -----------------------------------------------------------

GridCliff::GridCliff(int width, int height, int max_episode_len)
    : Environment({width * height, 4, max_episode_len > 0 ? max_episode_len : 4 * width * height, width * height})
    , width_(width)
    , height_(height)
{
	if (width < 2 || height < 1)
		throw std::invalid_argument("GridCliff needs width >= 2 and height >= 1");
}

bool GridCliff::is_cliff(int state) const
{
	const int x = state % width_;
	const int y = state / width_;
	return y == 0 && x > 0 && x < width_ - 1;
}

Outcome GridCliff::transition(int state, int action) const
{
	if (is_cliff(state) || is_goal(state))
		return {state, 0.0, true};
	int x = state % width_;
	int y = state / width_;
	switch (action) {
	case kUp: y = std::min(y + 1, height_ - 1); break;
	case kDown: y = std::max(y - 1, 0); break;
	case kLeft: x = std::max(x - 1, 0); break;
	default: x = std::min(x + 1, width_ - 1); break;
	}
	const int next = cell(x, y);
	if (is_goal(next))
		return {next, 1.0, true};
	return {next, 0.0, is_cliff(next)};
}

Eigen::VectorXd GridCliff::features(int state) const
{
	return one_hot(width_ * height_, state);
}

// --- DelayedCatch --------------------------------------------------------

DelayedCatch::DelayedCatch(int width, int drop_height, int max_episode_len)
    : Environment({width * drop_height * width + 1, 3, max_episode_len > 0 ? max_episode_len : 20 * drop_height,
                   2 * width + 1})
    , width_(width)
    , drop_(drop_height)
{
	if (width < 1 || drop_height < 1)
		throw std::invalid_argument("DelayedCatch needs positive width and drop height");
}

int DelayedCatch::encode(const Layout& l) const
{
	return (l.ball_col * drop_ + (l.ball_steps - 1)) * width_ + l.paddle;
}

DelayedCatch::Layout DelayedCatch::decode(int state) const
{
	Layout l;
	l.paddle = state % width_;
	state /= width_;
	l.ball_steps = state % drop_ + 1;
	l.ball_col = state / drop_;
	return l;
}

int DelayedCatch::initial_state(std::uint64_t seed) const
{
	const int col = static_cast<int>(mix_seed(seed) % static_cast<std::uint64_t>(width_));
	return encode({col, drop_, width_ / 2});
}

Outcome DelayedCatch::transition(int state, int action) const
{
	if (state == game_over_state())
		return {state, 0.0, true};
	Layout l = decode(state);
	l.paddle = std::clamp(l.paddle + action - 1, 0, width_ - 1);
	if (--l.ball_steps > 0)
		return {encode(l), 0.0, false};
	if (l.ball_col != l.paddle)
		return {game_over_state(), 0.0, true};
	l.ball_col = (3 * l.ball_col + l.paddle + 1) % width_;
	l.ball_steps = drop_;
	return {encode(l), 1.0, false};
}

Eigen::VectorXd DelayedCatch::features(int state) const
{
	Eigen::VectorXd f = Eigen::VectorXd::Zero(2 * width_ + 1);
	if (state == game_over_state())
		return f;
	const Layout l = decode(state);
	f[l.ball_col] = 1.0;
	f[width_ + l.paddle] = 1.0;
	f[2 * width_] = static_cast<double>(l.ball_steps) / drop_;
	return f;
}

// --- TableEnv ------------------------------------------------------------

TableEnv::TableEnv(std::string name, int state_count, int action_count, int start, int max_episode_len,
                   std::vector<TableRow> rows)
    : Environment({state_count, action_count, max_episode_len, state_count})
    , name_(std::move(name))
    , start_(start)
    , table_(static_cast<std::size_t>(state_count) * action_count)
{
	if (start < 0 || start >= state_count)
		throw std::invalid_argument("TableEnv: start state out of range");
	std::vector<bool> seen(table_.size(), false);
	for (const auto& row : rows) {
		if (row.state < 0 || row.state >= state_count || row.action < 0 || row.action >= action_count ||
		    row.outcome.next_state < 0 || row.outcome.next_state >= state_count)
			throw std::invalid_argument(fmt::format("TableEnv {}: row ({}, {}) out of range", name_, row.state, row.action));
		const auto idx = static_cast<std::size_t>(row.state) * action_count + row.action;
		if (seen[idx])
			throw std::invalid_argument(fmt::format("TableEnv {}: duplicate row ({}, {})", name_, row.state, row.action));
		seen[idx] = true;
		table_[idx] = row.outcome;
	}
	if (std::find(seen.begin(), seen.end(), false) != seen.end())
		throw std::invalid_argument(fmt::format("TableEnv {}: every (state, action) pair needs a row", name_));
}

Outcome TableEnv::transition(int state, int action) const
{
	return table_[static_cast<std::size_t>(state) * spec().action_count + action];
}

Eigen::VectorXd TableEnv::features(int state) const
{
	return one_hot(spec().state_count, state);
}

// --- free functions ------------------------------------------------------

std::vector<TableRow> enumerate_transitions(const Environment& env)
{
	if (!env.enumerable())
		throw std::logic_error(env.name() + " is not enumerable");
	const auto& spec = env.spec();
	std::vector<TableRow> rows;
	rows.reserve(static_cast<std::size_t>(spec.state_count) * spec.action_count);
	for (int s = 0; s < spec.state_count; ++s)
		for (int a = 0; a < spec.action_count; ++a)
			rows.push_back({s, a, env.transition(s, a)});
	return rows;
}

void write_mdp_table(std::ostream& os, const Environment& env)
{
	for (const auto& row : enumerate_transitions(env))
		os << fmt::format("{} {} {} {} {}\n", row.state, row.action, row.outcome.next_state, row.outcome.reward,
		                  row.outcome.terminal ? 1 : 0);
}

Episode rollout(Environment& env, std::uint64_t seed, const std::vector<int>& actions)
{
	Episode episode;
	Observation obs = env.reset(seed);
	for (int a : actions) {
		StepResult r = env.step(a);
		episode.push_back({obs, a, r.reward, r.next, r.terminal});
		obs = std::move(r.next);
		if (r.terminal)
			break;
	}
	return episode;
}

} // namespace shapedq
