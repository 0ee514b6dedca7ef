// Deterministic, fully observable episodic environments.
//
// Every environment is described by a pure transition function
// (state id, action) -> (next state id, reward, terminal). The stateful
// reset/step interface wraps it with an episode-length counter and the
// horizon cap, so stepping and exhaustive enumeration can never disagree.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "shapedq/types.hpp"

namespace shapedq {

struct EnvSpec
{
	int state_count = 1;
	int action_count = 1;
	int max_episode_len = 1;
	int feature_dim = 1;
};

/// Outcome of the pure transition function.
struct Outcome
{
	int next_state = 0;
	double reward = 0.0;
	bool terminal = false;
};

struct StepResult
{
	Observation next;
	double reward = 0.0;
	bool terminal = false;
};

/// One environment step as experienced by an agent.
struct EpisodeStep
{
	Observation state;
	int action = 0;
	double reward = 0.0;
	Observation next;
	bool terminal = false;
};

using Episode = std::vector<EpisodeStep>;

/// One row of the enumerated MDP: (state, action) -> outcome.
struct TableRow
{
	int state = 0;
	int action = 0;
	Outcome outcome;
};

class Environment
{
public:
	explicit Environment(EnvSpec spec);
	virtual ~Environment() = default;

	virtual std::string name() const = 0;
	virtual std::unique_ptr<Environment> clone() const = 0;

	/// Pure transition function. Terminal states are absorbing: acting in
	/// one returns the same state, zero reward and terminal = true.
	virtual Outcome transition(int state, int action) const = 0;
	virtual Eigen::VectorXd features(int state) const = 0;
	virtual int initial_state(std::uint64_t seed) const = 0;
	virtual bool enumerable() const { return true; }

	const EnvSpec& spec() const { return spec_; }

	Observation reset(std::uint64_t seed);
	/// Throws std::logic_error when the episode already terminated and
	/// std::out_of_range for an invalid action.
	StepResult step(int action);

	Observation observe(int state) const { return {state, features(state)}; }
	int state() const { return state_; }
	int episode_length() const { return length_; }
	bool done() const { return done_; }

private:
	EnvSpec spec_;
	int state_ = 0;
	int length_ = 0;
	bool done_ = true;
};

/// 1-D chain. Action 0 moves left (clamped at 0), action 1 moves right.
/// Moving right into a listed reward position pays 1; the last position
/// is the goal and terminates the episode.
class SparseChain final : public Environment
{
public:
	explicit SparseChain(int n, std::set<int> reward_positions = {}, int max_episode_len = 0);

	std::string name() const override { return "sparse_chain"; }
	std::unique_ptr<Environment> clone() const override { return std::make_unique<SparseChain>(*this); }
	Outcome transition(int state, int action) const override;
	Eigen::VectorXd features(int state) const override;
	int initial_state(std::uint64_t) const override { return 0; }

	static constexpr int kLeft = 0;
	static constexpr int kRight = 1;

private:
	int n_;
	std::set<int> rewards_;
};

/// Cliff-walking grid. Start (0,0) and goal (w-1,0) on the bottom row; the
/// cells between them are a cliff (reward 0, terminal). The goal pays +1.
/// Cell (x, y) has state id y * w + x.
class GridCliff final : public Environment
{
public:
	GridCliff(int width, int height, int max_episode_len = 0);

	std::string name() const override { return "grid_cliff"; }
	std::unique_ptr<Environment> clone() const override { return std::make_unique<GridCliff>(*this); }
	Outcome transition(int state, int action) const override;
	Eigen::VectorXd features(int state) const override;
	int initial_state(std::uint64_t) const override { return 0; }

	int cell(int x, int y) const { return y * width_ + x; }
	bool is_cliff(int state) const;
	bool is_goal(int state) const { return state == cell(width_ - 1, 0); }

	static constexpr int kUp = 0;
	static constexpr int kDown = 1;
	static constexpr int kLeft = 2;
	static constexpr int kRight = 3;

private:
	int width_;
	int height_;
};

/// One-dimensional Breakout analogue. A ball falls for drop_height steps
/// towards a paddle; catching pays +1 and spawns the next ball, missing
/// ends the episode with reward 0. Actions: 0 left, 1 stay, 2 right.
class DelayedCatch final : public Environment
{
public:
	DelayedCatch(int width, int drop_height, int max_episode_len = 0);

	std::string name() const override { return "delayed_catch"; }
	std::unique_ptr<Environment> clone() const override { return std::make_unique<DelayedCatch>(*this); }
	Outcome transition(int state, int action) const override;
	Eigen::VectorXd features(int state) const override;
	int initial_state(std::uint64_t seed) const override;

	struct Layout
	{
		int ball_col = 0;
		int ball_steps = 0; ///< steps until the ball reaches the paddle row, in [1, drop_height]
		int paddle = 0;
	};
	int encode(const Layout& l) const;
	Layout decode(int state) const;
	int game_over_state() const { return width_ * drop_ * width_; }

	static constexpr int kLeft = 0;
	static constexpr int kStay = 1;
	static constexpr int kRight = 2;

private:
	int width_;
	int drop_;
};

/// Environment given by an explicit transition table; used for the small
/// hand-built MDPs of the verification harness. Features are one-hot.
class TableEnv final : public Environment
{
public:
	TableEnv(std::string name, int state_count, int action_count, int start, int max_episode_len,
	         std::vector<TableRow> rows);

	std::string name() const override { return name_; }
	std::unique_ptr<Environment> clone() const override { return std::make_unique<TableEnv>(*this); }
	Outcome transition(int state, int action) const override;
	Eigen::VectorXd features(int state) const override;
	int initial_state(std::uint64_t) const override { return start_; }

private:
	std::string name_;
	int start_;
	std::vector<Outcome> table_;
};

/// Full (s, a) table in row-major (state, action) order. Throws
/// std::logic_error for non-enumerable environments.
std::vector<TableRow> enumerate_transitions(const Environment& env);

/// Writes one line per (s, a): `s a s' r terminal`.
void write_mdp_table(std::ostream& os, const Environment& env);

/// Rolls an episode under a fixed action sequence (used for replay checks);
/// stops early when the episode terminates.
Episode rollout(Environment& env, std::uint64_t seed, const std::vector<int>& actions);

} // namespace shapedq
