// Q-learning training loop for DQN, Double DQN and Dueling Double DQN.
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "shapedq/approx.hpp"
#include "shapedq/env.hpp"
#include "shapedq/random.hpp"
#include "shapedq/shaping.hpp"

namespace shapedq {

enum class Variant
{
	dqn,
	double_dqn,
	dueling_double_dqn,
};

std::string_view to_string(Variant v);
/// Throws std::invalid_argument for unknown names.
Variant parse_variant(std::string_view name);

enum class ApproximatorKind
{
	tabular,
	mlp,
};

std::string_view to_string(ApproximatorKind k);
ApproximatorKind parse_approximator(std::string_view name);

/// Linear decay from start to end over decay_steps, after warmup steps
/// held at start. Steps count environment steps.
struct EpsilonSchedule
{
	double start = 1.0;
	double end = 0.1;
	std::int64_t decay_steps = 10000;
	std::int64_t warmup = 2000;
};

double epsilon_at(const EpsilonSchedule& schedule, std::int64_t global_step);

/// Index of the largest value; ties go to the lowest index.
int greedy_action(const Eigen::Ref<const Eigen::VectorXd>& qvals);

/// Draws u ~ U[0,1); if u < epsilon draws a uniform action, otherwise
/// returns greedy_action. Consumes one or two RNG words.
int select_action(const Eigen::Ref<const Eigen::VectorXd>& qvals, double epsilon, Rng& rng);

struct AgentConfig
{
	Variant variant = Variant::dueling_double_dqn;
	ApproximatorKind approximator = ApproximatorKind::mlp;
	std::vector<int> hidden{64, 64};
	double gamma = 0.99;
	double learning_rate = 1e-4; ///< RMSprop step size, or alpha for the tabular rule
	int batch_size = 32;
	std::size_t memory_capacity = 50000;
	std::int64_t target_sync_interval = 1000;
	std::int64_t train_every = 4;
	std::int64_t warmup_steps = 2000;
	int max_episodes = 500;
	EpsilonSchedule epsilon;
	ShapingConfig shaping;
	std::uint64_t seed = 0;
	double huber_delta = 1.0;
	double rmsprop_decay = 0.95;
	double rmsprop_epsilon = 1e-6;

	/// Throws std::invalid_argument naming the offending field.
	void validate() const;
};

struct EpisodeRecord
{
	int episode = 0;
	double env_return = 0.0;    ///< undiscounted sum of raw environment rewards
	double shaped_return = 0.0; ///< undiscounted sum of shaped rewards
	int length = 0;
	std::int64_t steps = 0; ///< environment steps so far, this episode included
	double epsilon = 0.0;   ///< exploration rate used on the episode's last step
	double wall_seconds = 0.0;
};

struct TrainHistory
{
	std::vector<EpisodeRecord> episodes;
};

/// Next-state part of a TD target.
struct TdItem
{
	double shaped_reward = 0.0;
	const Observation* next = nullptr;
	bool terminal = false;
};

/// Terminal items: the shaped reward. Otherwise
///   dqn:    r + gamma * max_a Q_target(s', a)
///   double: r + gamma * Q_target(s', argmax_a Q_online(s', a))
/// Dueling Double DQN uses the double rule; dueling only changes the network.
template <class Approx>
Eigen::VectorXd td_targets(Variant variant, std::span<const TdItem> batch, const Approx& online, const Approx& target_net,
                           double gamma)
{
	std::vector<const Observation*> next;
	next.reserve(batch.size());
	for (const auto& item : batch)
		next.push_back(item.next);
	const Eigen::MatrixXd q_target = target_net.q_values(std::span<const Observation* const>(next)).template cast<double>();
	Eigen::MatrixXd q_online;
	if (variant != Variant::dqn)
		q_online = online.q_values(std::span<const Observation* const>(next)).template cast<double>();

	Eigen::VectorXd targets(static_cast<Eigen::Index>(batch.size()));
	for (std::size_t j = 0; j < batch.size(); ++j) {
		const auto jj = static_cast<Eigen::Index>(j);
		const TdItem& item = batch[j];
		if (item.terminal) {
			targets[jj] = item.shaped_reward;
			continue;
		}
		double bootstrap;
		if (variant == Variant::dqn) {
			bootstrap = q_target.col(jj).maxCoeff();
		} else {
			const int a = greedy_action(q_online.col(jj));
			bootstrap = q_target(a, jj);
		}
		targets[jj] = item.shaped_reward + gamma * bootstrap;
	}
	if (!targets.allFinite())
		throw NumericalError("td_targets: non-finite Q evaluation");
	return targets;
}

template <class Approx>
void sync_target(const Approx& online, Approx& target_net)
{
	clone_into(online, target_net);
}

using QModel = std::variant<TabularQ<double>, MlpQ<double>>;

struct TrainResult
{
	TrainHistory history;
	QModel model; ///< the online approximator after training
};

/// Runs config.max_episodes episodes. One RNG seeded from config.seed is
/// consumed in this order: MLP weight initialization, then per episode one
/// word for the environment reset seed, then per step the action draw and,
/// on training steps, batch_size sample indices.
///
/// Throws NumericalError with episode/step context when training diverges.
TrainResult train(Environment& env, const AgentConfig& config,
                  const std::function<void(const EpisodeRecord&)>& on_episode = {});

/// Greedy action under the model for one observation.
int greedy_action(const QModel& model, const Observation& obs);

} // namespace shapedq
