#include "shapedq/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>
#include <unordered_map>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>

#include "shapedq/replay.hpp"

namespace shapedq {

RewardShaper make_shaper(const ShapingConfig& config)
{
	config.validate();
	return [config](const Eigen::VectorXd& rewards, const FlagVector& terminal) -> Eigen::VectorXd {
		return shape_episode(rewards, terminal, config);
	};
}

RewardShaper square_plus_shaper(double a)
{
	return [a](const Eigen::VectorXd& rewards, const FlagVector&) -> Eigen::VectorXd {
		return (rewards.array().square() + a).matrix();
	};
}

MdpTable tabulate(const Environment& env, std::uint64_t seed)
{
	MdpTable mdp;
	mdp.spec = env.spec();
	mdp.start = env.initial_state(seed);
	for (const auto& row : enumerate_transitions(env))
		mdp.rows.push_back(row.outcome);
	return mdp;
}

Trajectory roll_policy(const MdpTable& mdp, const PolicyTable& policy)
{
	if (policy.size() != static_cast<std::size_t>(mdp.spec.state_count))
		throw std::invalid_argument("roll_policy: policy does not cover every state");
	Trajectory traj;
	std::vector<double> rewards;
	int s = mdp.start;
	traj.states.push_back(s);
	for (int t = 0; t < mdp.spec.max_episode_len; ++t) {
		const int a = policy[static_cast<std::size_t>(s)];
		const Outcome& o = mdp.at(s, a);
		traj.actions.push_back(a);
		rewards.push_back(o.reward);
		s = o.next_state;
		traj.states.push_back(s);
		if (o.terminal)
			break;
	}
	traj.rewards = Eigen::Map<const Eigen::VectorXd>(rewards.data(), static_cast<Eigen::Index>(rewards.size()));
	return traj;
}

double discounted_sum(const Eigen::Ref<const Eigen::VectorXd>& rewards, double gamma)
{
	double total = 0.0;
	double discount = 1.0;
	for (Eigen::Index i = 0; i < rewards.size(); ++i) {
		total += discount * rewards[i];
		discount *= gamma;
	}
	return total;
}

double n_step_target(const Trajectory& traj, std::size_t t, std::size_t n, double gamma, const TabularQ<double>& q)
{
	const auto len = static_cast<std::size_t>(traj.rewards.size());
	if (t >= len || n == 0)
		throw std::out_of_range("n_step_target: need t < episode length and n >= 1");
	double target = 0.0;
	double discount = 1.0;
	for (std::size_t i = 0; i < n && t + i < len; ++i) {
		target += discount * traj.rewards[static_cast<Eigen::Index>(t + i)];
		discount *= gamma;
	}
	if (t + n < len)
		target += discount * q.q_values(traj.states[t + n]).maxCoeff();
	return target;
}

PolicyReturn policy_return(const Environment& env, const PolicyTable& policy, double gamma, const RewardShaper& shaper,
                           std::optional<NStepPreview> preview, std::uint64_t seed)
{
	const MdpTable mdp = tabulate(env, seed);
	const Trajectory traj = roll_policy(mdp, policy);
	const auto n = traj.rewards.size();
	const FlagVector flags = episode_end_flags(n);

	PolicyReturn out;
	out.v = discounted_sum(traj.rewards, gamma);
	out.v_hat = discounted_sum(shaper(traj.rewards, flags), gamma);
	for (Eigen::Index i = 0; i < n; ++i) {
		const auto k = static_cast<std::size_t>(i);
		out.episode.push_back({env.observe(traj.states[k]), traj.actions[k], traj.rewards[i], env.observe(traj.states[k + 1]),
		                       flags[i]});
	}
	if (preview) {
		if (!preview->bootstrap)
			throw std::invalid_argument("policy_return: n-step preview needs a bootstrap Q table");
		for (std::size_t t = 0; t < static_cast<std::size_t>(n); ++t)
			out.n_step_targets.push_back(n_step_target(traj, t, preview->n, gamma, *preview->bootstrap));
	}
	return out;
}

PolicyEnumerator::PolicyEnumerator(int state_count, int action_count, std::uint64_t cap)
    : states_(state_count)
    , actions_(action_count)
    , count_(1)
{
	if (state_count < 1 || action_count < 1)
		throw std::invalid_argument("PolicyEnumerator: counts must be positive");
	bool overflow = false;
	for (int s = 0; s < state_count && !overflow; ++s) {
		if (count_ > std::numeric_limits<std::uint64_t>::max() / static_cast<std::uint64_t>(action_count))
			overflow = true;
		else
			count_ *= static_cast<std::uint64_t>(action_count);
	}
	if (overflow || count_ > cap)
		throw std::length_error(fmt::format("policy enumeration needs {}^{} = {} policies, above the cap of {}; raise the cap "
		                                    "to at least that count",
		                                    action_count, state_count, overflow ? std::string("> 2^64") : std::to_string(count_),
		                                    cap));
}

bool PolicyEnumerator::next(PolicyTable& policy)
{
	if (emitted_ == count_)
		return false;
	if (emitted_ == 0) {
		policy.assign(static_cast<std::size_t>(states_), 0);
	} else {
		for (int s = states_ - 1; s >= 0; --s) {
			auto& digit = policy[static_cast<std::size_t>(s)];
			if (++digit < actions_)
				break;
			digit = 0;
		}
	}
	++emitted_;
	return true;
}

std::vector<PolicyTable> enumerate_policies(const Environment& env, std::uint64_t cap)
{
	PolicyEnumerator en(env.spec().state_count, env.spec().action_count, cap);
	std::vector<PolicyTable> out;
	out.reserve(en.count());
	PolicyTable p;
	while (en.next(p))
		out.push_back(p);
	return out;
}

bool PirfReport::asserted_failure(double tolerance) const
{
	if (!asserted)
		return false;
	if (inversion_count > 0)
		return true;
	return closed_form != ClosedForm::none && !(max_shift_deviation <= tolerance);
}

namespace {

/// Each nonzero reward is preceded by at least l_min zero rewards, so its
/// backfill window is complete.
bool backfill_windows_complete(const Eigen::VectorXd& post_sp, std::size_t l_min)
{
	std::size_t zeros = 0;
	for (Eigen::Index i = 0; i < post_sp.size(); ++i) {
		if (post_sp[i] == 0.0) {
			++zeros;
			continue;
		}
		if (zeros < l_min)
			return false;
		zeros = 0;
	}
	return true;
}

struct Group
{
	std::uint64_t count = 0;
	PolicyTable witness;
};

PirfReport check_impl(const Environment& env, const RewardShaper& shaper, std::string shaper_name, double gamma,
                      const PirfOptions& options, const std::optional<ShapingConfig>& shaping)
{
	const MdpTable mdp = tabulate(env, options.seed);
	PolicyEnumerator en(mdp.spec.state_count, mdp.spec.action_count, options.cap);

	PirfReport report;
	report.env_name = env.name();
	report.shaper_name = std::move(shaper_name);
	report.gamma = gamma;
	report.shaping = shaping;
	report.policy_count = en.count();

	double p = 0.0;
	double z = 1.0;
	if (shaping) {
		if (shaping->sp_enabled)
			p = shaping->p;
		if (shaping->rb_enabled)
			z = constant_sum(shaping->lambda, shaping->l_min);
		if (shaping->sp_enabled && shaping->rb_enabled)
			report.closed_form = ClosedForm::shift_scale;
		else if (shaping->rb_enabled)
			report.closed_form = ClosedForm::scale;
		else
			report.closed_form = ClosedForm::shift; // p = 0 when shaping is off
	}

	std::map<std::pair<double, double>, Group> groups;
	report.max_v = -std::numeric_limits<double>::infinity();
	report.max_v_hat = -std::numeric_limits<double>::infinity();
	double max_dev = 0.0;

	PolicyTable policy;
	while (en.next(policy)) {
		const Trajectory traj = roll_policy(mdp, policy);
		const FlagVector flags = episode_end_flags(traj.rewards.size());
		const double v = discounted_sum(traj.rewards, gamma);
		const double v_hat = discounted_sum(shaper(traj.rewards, flags), gamma);
		report.max_v = std::max(report.max_v, v);
		report.max_v_hat = std::max(report.max_v_hat, v_hat);

		if (report.closed_form != ClosedForm::none) {
			const double expected = z * (v - p);
			max_dev = std::max(max_dev, std::abs(v_hat - expected) / std::max(1.0, std::abs(expected)));
			if (shaping->rb_enabled && report.hypothesis_holds) {
				Eigen::VectorXd post = traj.rewards;
				if (shaping->sp_enabled)
					post[post.size() - 1] -= shaping->p;
				report.hypothesis_holds = backfill_windows_complete(post, shaping->l_min);
			}
		}

		Group& g = groups[{v, v_hat}];
		if (g.count++ == 0)
			g.witness = policy;
	}
	report.max_shift_deviation = report.closed_form == ClosedForm::none ? std::numeric_limits<double>::quiet_NaN() : max_dev;
	report.distinct_returns = groups.size();
	report.pairs_checked = report.policy_count * (report.policy_count - 1);

	const double tol = options.tie_tolerance;
	for (const auto& [key_a, ga] : groups) {
		for (const auto& [key_b, gb] : groups) {
			const auto [va, vha] = key_a;
			const auto [vb, vhb] = key_b;
			if (va <= vb + tol && vha > vhb + tol) {
				report.inversion_count += ga.count * gb.count;
				if (report.inversions.size() < options.max_witnesses)
					report.inversions.push_back({ga.witness, gb.witness, va, vb, vha, vhb});
			}
		}
	}
	for (const auto& [key, g] : groups)
		if (key.second >= report.max_v_hat - tol && key.first < report.max_v - tol)
			report.argmax_consistent = false;

	report.asserted = gamma == 1.0 && report.hypothesis_holds;
	return report;
}

} // namespace

PirfReport check_pirf(const Environment& env, const ShapingConfig& shaping, double gamma, const PirfOptions& options)
{
	std::string name = "none";
	if (shaping.sp_enabled && shaping.rb_enabled)
		name = fmt::format("sp(p={})+rb(lambda={},l_min={})", shaping.p, shaping.lambda, shaping.l_min);
	else if (shaping.sp_enabled)
		name = fmt::format("sp(p={})", shaping.p);
	else if (shaping.rb_enabled)
		name = fmt::format("rb(lambda={},l_min={})", shaping.lambda, shaping.l_min);
	return check_impl(env, make_shaper(shaping), name, gamma, options, shaping);
}

PirfReport check_pirf(const Environment& env, const RewardShaper& shaper, std::string shaper_name, double gamma,
                      const PirfOptions& options)
{
	return check_impl(env, shaper, std::move(shaper_name), gamma, options, std::nullopt);
}

namespace {

std::string_view closed_form_name(ClosedForm f)
{
	switch (f) {
	case ClosedForm::none: return "none";
	case ClosedForm::shift: return "v_hat = v - p";
	case ClosedForm::scale: return "v_hat = z * v";
	case ClosedForm::shift_scale: return "v_hat = z * (v - p)";
	}
	return "?";
}

} // namespace

void write_report_text(std::ostream& os, const PirfReport& r)
{
	os << fmt::format("env: {}\nshaping: {}\ngamma: {}\n", r.env_name, r.shaper_name, r.gamma);
	os << fmt::format("policies: {}\npairs checked: {}\ndistinct (v, v_hat) values: {}\n", r.policy_count, r.pairs_checked,
	                  r.distinct_returns);
	os << fmt::format("{} inversions\n", r.inversion_count);
	os << fmt::format("argmax consistent: {}\n", r.argmax_consistent ? "yes" : "no");
	os << fmt::format("closed form: {}\n", closed_form_name(r.closed_form));
	if (r.closed_form != ClosedForm::none) {
		os << fmt::format("max deviation from closed form: {:.6e}\n", r.max_shift_deviation);
		os << fmt::format("backfill window condition: {}\n", r.hypothesis_holds ? "holds" : "violated");
	}
	os << fmt::format("guarantees asserted: {}\n", r.asserted ? "yes" : "no (deviations reported only)");
	for (const auto& inv : r.inversions)
		os << fmt::format("  witness: pi1={} pi2={} v=({}, {}) v_hat=({}, {})\n", inv.first, inv.second, inv.v_first,
		                  inv.v_second, inv.v_hat_first, inv.v_hat_second);
	if (r.asserted_failure())
		os << "RESULT: FAIL\n";
	else if (!r.asserted && (r.inversion_count > 0 || (r.closed_form != ClosedForm::none && r.max_shift_deviation > 1e-9)))
		os << "RESULT: WARN\n";
	else
		os << "RESULT: OK\n";
}

nlohmann::json report_to_json(const PirfReport& r)
{
	nlohmann::json j;
	j["env"] = r.env_name;
	j["shaping"] = r.shaper_name;
	j["gamma"] = r.gamma;
	j["policy_count"] = r.policy_count;
	j["pairs_checked"] = r.pairs_checked;
	j["distinct_returns"] = r.distinct_returns;
	j["inversion_count"] = r.inversion_count;
	j["argmax_consistent"] = r.argmax_consistent;
	j["closed_form"] = closed_form_name(r.closed_form);
	j["max_shift_deviation"] = r.closed_form == ClosedForm::none ? nlohmann::json(nullptr) : nlohmann::json(r.max_shift_deviation);
	j["hypothesis_holds"] = r.hypothesis_holds;
	j["asserted"] = r.asserted;
	j["asserted_failure"] = r.asserted_failure();
	j["max_v"] = r.max_v;
	j["max_v_hat"] = r.max_v_hat;
	auto& w = j["inversions"] = nlohmann::json::array();
	for (const auto& inv : r.inversions)
		w.push_back({{"pi1", inv.first},
		             {"pi2", inv.second},
		             {"v", {inv.v_first, inv.v_second}},
		             {"v_hat", {inv.v_hat_first, inv.v_hat_second}}});
	return j;
}

TabularQ<double> value_iteration(const Environment& env, double gamma, double tol, std::size_t max_iterations)
{
	const MdpTable mdp = tabulate(env);
	const int S = mdp.spec.state_count;
	const int A = mdp.spec.action_count;
	TabularQ<double> q(S, A);
	Eigen::MatrixXd next(S, A);
	for (std::size_t it = 0; it < max_iterations; ++it) {
		const Eigen::VectorXd v = q.table().rowwise().maxCoeff();
		for (int s = 0; s < S; ++s)
			for (int a = 0; a < A; ++a) {
				const Outcome& o = mdp.at(s, a);
				next(s, a) = o.terminal ? o.reward : o.reward + gamma * v[o.next_state];
			}
		const double residual = (next - q.table()).cwiseAbs().maxCoeff();
		q.table() = next;
		if (residual < tol)
			return q;
	}
	throw std::runtime_error(fmt::format("value_iteration did not reach tolerance {} in {} iterations", tol, max_iterations));
}

PolicyTable greedy_policy(const TabularQ<double>& q)
{
	PolicyTable policy(static_cast<std::size_t>(q.state_count()));
	for (int s = 0; s < q.state_count(); ++s) {
		const auto row = q.table().row(s);
		int best = 0;
		for (int a = 1; a < q.action_count(); ++a)
			if (row[a] > row[best])
				best = a;
		policy[static_cast<std::size_t>(s)] = best;
	}
	return policy;
}

double max_policy_return(const Environment& env, double gamma, std::uint64_t cap, std::uint64_t seed)
{
	const MdpTable mdp = tabulate(env, seed);
	PolicyEnumerator en(mdp.spec.state_count, mdp.spec.action_count, cap);
	double best = -std::numeric_limits<double>::infinity();
	PolicyTable policy;
	while (en.next(policy))
		best = std::max(best, discounted_sum(roll_policy(mdp, policy).rewards, gamma));
	return best;
}

double check_replay_equivalence(const std::vector<Episode>& episodes, const ShapingConfig& shaping, Rng& rng,
                                std::size_t random_samples)
{
	std::size_t total = 0;
	for (const auto& e : episodes)
		total += e.size();
	if (total == 0)
		return 0.0;

	std::vector<double> expected;
	expected.reserve(total);
	ReplayMemory memory(total, shaping);
	for (const auto& episode : episodes) {
		Eigen::VectorXd rewards(static_cast<Eigen::Index>(episode.size()));
		FlagVector flags(static_cast<Eigen::Index>(episode.size()));
		for (std::size_t i = 0; i < episode.size(); ++i) {
			rewards[static_cast<Eigen::Index>(i)] = episode[i].reward;
			flags[static_cast<Eigen::Index>(i)] = episode[i].terminal;
		}
		const Eigen::VectorXd oracle = shape_episode(rewards, flags, shaping);
		for (std::size_t i = 0; i < episode.size(); ++i) {
			const auto& s = episode[i];
			memory.push(s.state, s.action, s.reward, s.next, s.terminal);
			expected.push_back(oracle[static_cast<Eigen::Index>(i)]);
		}
	}
	if (memory.size() != total || memory.pending_size() != 0)
		throw std::logic_error("check_replay_equivalence: episodes did not all commit; are they complete?");

	double max_dev = 0.0;
	std::unordered_map<const Transition*, double> by_address;
	for (std::size_t i = 0; i < total; ++i) {
		const Transition& t = memory.at(i);
		max_dev = std::max(max_dev, std::abs(memory.shaped_reward(t) - expected[i]));
		by_address.emplace(&t, expected[i]);
	}
	if (random_samples > 0)
		for (const auto& s : memory.sample(random_samples, rng))
			max_dev = std::max(max_dev, std::abs(s.shaped_reward - by_address.at(&s.transition.get())));
	return max_dev;
}

Episode random_episode(Rng& rng, std::size_t length, double density)
{
	static constexpr double kValues[] = {1.0, 2.0, 5.0, -1.0};
	Episode e;
	e.reserve(length);
	for (std::size_t i = 0; i < length; ++i) {
		double r = 0.0;
		if (uniform01(rng) < density)
			r = kValues[uniform_index(rng, 4)];
		e.push_back({Observation{static_cast<int>(i), {}}, 0, r, Observation{static_cast<int>(i + 1), {}}, i + 1 == length});
	}
	return e;
}

} // namespace shapedq
