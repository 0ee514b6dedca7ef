#include "shapedq/agent.hpp"

#include <chrono>
#include <stdexcept>

#include <fmt/format.h>

#include "shapedq/replay.hpp"

namespace shapedq {

std::string_view to_string(Variant v)
{
	switch (v) {
	case Variant::dqn: return "dqn";
	case Variant::double_dqn: return "double_dqn";
	case Variant::dueling_double_dqn: return "dueling_double_dqn";
	}
	return "?";
}

Variant parse_variant(std::string_view name)
{
	if (name == "dqn")
		return Variant::dqn;
	if (name == "double_dqn")
		return Variant::double_dqn;
	if (name == "dueling_double_dqn")
		return Variant::dueling_double_dqn;
	throw std::invalid_argument(fmt::format("unknown variant '{}' (dqn, double_dqn, dueling_double_dqn)", name));
}

std::string_view to_string(ApproximatorKind k)
{
	return k == ApproximatorKind::tabular ? "tabular" : "mlp";
}

ApproximatorKind parse_approximator(std::string_view name)
{
	if (name == "tabular")
		return ApproximatorKind::tabular;
	if (name == "mlp")
		return ApproximatorKind::mlp;
	throw std::invalid_argument(fmt::format("unknown approximator '{}' (tabular, mlp)", name));
}

double epsilon_at(const EpsilonSchedule& s, std::int64_t global_step)
{
	if (global_step < s.warmup)
		return s.start;
	const std::int64_t t = global_step - s.warmup;
	if (t >= s.decay_steps)
		return s.end;
	const double frac = static_cast<double>(t) / static_cast<double>(s.decay_steps);
	return s.start + (s.end - s.start) * frac;
}

int greedy_action(const Eigen::Ref<const Eigen::VectorXd>& qvals)
{
	if (qvals.size() == 0)
		throw std::invalid_argument("greedy_action: empty Q vector");
	Eigen::Index best = 0;
	for (Eigen::Index i = 1; i < qvals.size(); ++i)
		if (qvals[i] > qvals[best])
			best = i;
	return static_cast<int>(best);
}

int select_action(const Eigen::Ref<const Eigen::VectorXd>& qvals, double epsilon, Rng& rng)
{
	if (qvals.size() == 0)
		throw std::invalid_argument("select_action: empty Q vector");
	if (uniform01(rng) < epsilon)
		return static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(qvals.size())));
	return greedy_action(qvals);
}

void AgentConfig::validate() const
{
	auto fail = [](std::string_view field, std::string_view why) {
		throw std::invalid_argument(fmt::format("agent.{}: {}", field, why));
	};
	if (!(gamma >= 0.0 && gamma <= 1.0))
		fail("gamma", "must lie in [0, 1]");
	if (!(learning_rate > 0.0))
		fail("learning_rate", "must be positive");
	if (batch_size < 1)
		fail("batch_size", "must be positive");
	if (memory_capacity < 1)
		fail("memory_capacity", "must be positive");
	if (static_cast<std::size_t>(batch_size) > memory_capacity)
		fail("batch_size", "must not exceed memory_capacity");
	if (target_sync_interval < 1)
		fail("target_sync_interval", "must be positive");
	if (train_every < 1)
		fail("train_every", "must be positive");
	if (warmup_steps < 0)
		fail("warmup_steps", "must be nonnegative");
	if (max_episodes < 0)
		fail("max_episodes", "must be nonnegative");
	if (!(epsilon.start <= 1.0 && epsilon.start >= epsilon.end && epsilon.end >= 0.0))
		fail("epsilon", "need 1 >= start >= end >= 0");
	if (epsilon.decay_steps < 1)
		fail("epsilon.decay_steps", "must be positive");
	if (epsilon.warmup < 0)
		fail("epsilon.warmup", "must be nonnegative");
	if (!(huber_delta > 0.0))
		fail("huber_delta", "must be positive");
	if (!(rmsprop_decay > 0.0 && rmsprop_decay < 1.0))
		fail("rmsprop.decay", "must lie in (0, 1)");
	if (!(rmsprop_epsilon > 0.0))
		fail("rmsprop.epsilon", "must be positive");
	for (int w : hidden)
		if (w < 1)
			fail("hidden", "layer widths must be positive");
	if (approximator == ApproximatorKind::mlp && variant == Variant::dueling_double_dqn && hidden.empty())
		fail("hidden", "a dueling head needs at least one hidden layer");
	shaping.validate();
}

namespace {

struct TabularLearner
{
	TabularQ<double> online;
	TabularQ<double> target;
	double alpha;
	double delta;

	double fit(std::span<const TrainingSample> batch) { return update(online, batch, alpha, delta); }
};

struct MlpLearner
{
	MlpQ<double> online;
	MlpQ<double> target;
	RmsProp<double> optimizer;
	double delta;

	double fit(std::span<const TrainingSample> batch) { return update(online, batch, optimizer, delta); }
};

TabularLearner make_tabular(const Environment& env, const AgentConfig& c)
{
	TabularQ<double> q(env.spec().state_count, env.spec().action_count);
	return {q, q, c.learning_rate, c.huber_delta};
}

MlpLearner make_mlp(const Environment& env, const AgentConfig& c, Rng& rng)
{
	std::vector<int> widths{env.spec().feature_dim};
	widths.insert(widths.end(), c.hidden.begin(), c.hidden.end());
	widths.push_back(env.spec().action_count);
	MlpQ<double> online(widths, c.variant == Variant::dueling_double_dqn, rng);
	MlpQ<double> target = online;
	RmsProp<double> opt(online, {c.learning_rate, c.rmsprop_decay, c.rmsprop_epsilon});
	return {std::move(online), std::move(target), std::move(opt), c.huber_delta};
}

template <class Learner>
TrainHistory run_loop(Environment& env, const AgentConfig& config, Learner& learner, Rng& rng,
                      const std::function<void(const EpisodeRecord&)>& on_episode)
{
	using Clock = std::chrono::steady_clock;

	TrainHistory history;
	ReplayMemory memory(config.memory_capacity, config.shaping);
	std::int64_t global_step = 0;
	std::vector<TrainingSample> samples(static_cast<std::size_t>(config.batch_size));
	std::vector<TdItem> td(static_cast<std::size_t>(config.batch_size));

	for (int ep = 0; ep < config.max_episodes; ++ep) {
		const auto t0 = Clock::now();
		Observation obs = env.reset(rng());
		std::vector<double> rewards;
		double eps = epsilon_at(config.epsilon, global_step);
		bool terminal = false;
		while (!terminal) {
			eps = epsilon_at(config.epsilon, global_step);
			const Eigen::VectorXd q = learner.online.q_values(obs);
			const int action = select_action(q, eps, rng);
			StepResult r = env.step(action);
			terminal = r.terminal;
			rewards.push_back(r.reward);
			memory.push(obs, action, r.reward, r.next, r.terminal);
			obs = std::move(r.next);
			++global_step;

			if (global_step >= config.warmup_steps && global_step % config.train_every == 0 &&
			    memory.size() >= static_cast<std::size_t>(config.batch_size)) {
				try {
					const auto batch = memory.sample(static_cast<std::size_t>(config.batch_size), rng);
					for (std::size_t j = 0; j < batch.size(); ++j) {
						const Transition& t = batch[j].transition.get();
						td[j] = {batch[j].shaped_reward, &t.next_state, t.terminal};
					}
					const Eigen::VectorXd targets =
					    td_targets(config.variant, std::span<const TdItem>(td), learner.online, learner.target, config.gamma);
					for (std::size_t j = 0; j < batch.size(); ++j) {
						const Transition& t = batch[j].transition.get();
						samples[j] = {&t.state, t.action, targets[static_cast<Eigen::Index>(j)]};
					}
					learner.fit(samples);
				} catch (const NumericalError& e) {
					throw NumericalError(
					    fmt::format("episode {} step {} (global step {}): {}", ep, env.episode_length(), global_step, e.what()));
				}
			}
			if (global_step % config.target_sync_interval == 0)
				sync_target(learner.online, learner.target);
		}

		const auto shaped = shape_episode(Eigen::Map<const Eigen::VectorXd>(rewards.data(), static_cast<Eigen::Index>(rewards.size())),
		                                  episode_end_flags(static_cast<Eigen::Index>(rewards.size())), config.shaping);
		EpisodeRecord rec;
		rec.episode = ep;
		for (double r : rewards)
			rec.env_return += r;
		rec.shaped_return = shaped.sum();
		rec.length = static_cast<int>(rewards.size());
		rec.steps = global_step;
		rec.epsilon = eps;
		rec.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
		history.episodes.push_back(rec);
		if (on_episode)
			on_episode(rec);
	}
	return history;
}

} // namespace

TrainResult train(Environment& env, const AgentConfig& config, const std::function<void(const EpisodeRecord&)>& on_episode)
{
	config.validate();
	Rng rng(config.seed);
	if (config.approximator == ApproximatorKind::tabular) {
		TabularLearner learner = make_tabular(env, config);
		TrainHistory h = run_loop(env, config, learner, rng, on_episode);
		return {std::move(h), std::move(learner.online)};
	}
	MlpLearner learner = make_mlp(env, config, rng);
	TrainHistory h = run_loop(env, config, learner, rng, on_episode);
	return {std::move(h), std::move(learner.online)};
}

int greedy_action(const QModel& model, const Observation& obs)
{
	return std::visit([&](const auto& q) { return greedy_action(q.q_values(obs).template cast<double>().eval()); }, model);
}

} // namespace shapedq
