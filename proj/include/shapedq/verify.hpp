// Brute-force checks of policy-order preservation on small MDPs.
//
// A reshaping function preserves policy order when v(p1) <= v(p2) implies
// v_hat(p1) <= v_hat(p2) for every pair of deterministic policies, where v
// is the discounted return of the raw rewards from the start state and
// v_hat that of the reshaped rewards. Order preservation in turn keeps the
// optimal policy. The checker enumerates all policies and counts pairs
// that violate the implication.
#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "shapedq/approx/tabular.hpp"
#include "shapedq/env.hpp"
#include "shapedq/random.hpp"
#include "shapedq/shaping.hpp"

namespace shapedq {

using PolicyTable = std::vector<int>;

/// Maps an episode's raw rewards (with terminal flags) to reshaped rewards.
using RewardShaper = std::function<Eigen::VectorXd(const Eigen::VectorXd&, const FlagVector&)>;

RewardShaper make_shaper(const ShapingConfig& config);

/// r -> r^2 + a on every step. Not order preserving in general; used to
/// show the checker catches violations.
RewardShaper square_plus_shaper(double a);

/// The environment's transition function as a dense table plus its start
/// state and horizon.
struct MdpTable
{
	EnvSpec spec;
	int start = 0;
	std::vector<Outcome> rows; ///< index state * action_count + action

	const Outcome& at(int state, int action) const
	{
		return rows[static_cast<std::size_t>(state) * spec.action_count + action];
	}
};

MdpTable tabulate(const Environment& env, std::uint64_t seed = 0);

/// Raw rewards of the deterministic, horizon-capped episode under policy.
struct Trajectory
{
	std::vector<int> states; ///< visited states, start included, terminal state last
	std::vector<int> actions;
	Eigen::VectorXd rewards;
};

Trajectory roll_policy(const MdpTable& mdp, const PolicyTable& policy);

double discounted_sum(const Eigen::Ref<const Eigen::VectorXd>& rewards, double gamma);

/// n-step TD target at step t: sum_{i<n} gamma^i r_{t+i} + gamma^n max_a Q(s_{t+n}, a),
/// without the bootstrap term when the episode ends within the n steps.
double n_step_target(const Trajectory& trajectory, std::size_t t, std::size_t n, double gamma, const TabularQ<double>& q);

struct PolicyReturn
{
	double v = 0.0;
	double v_hat = 0.0;
	Episode episode;
	std::vector<double> n_step_targets; ///< filled when an n-step preview was requested
};

struct NStepPreview
{
	std::size_t n = 1;
	const TabularQ<double>* bootstrap = nullptr;
};

PolicyReturn policy_return(const Environment& env, const PolicyTable& policy, double gamma, const RewardShaper& shaper,
                           std::optional<NStepPreview> preview = std::nullopt, std::uint64_t seed = 0);

/// Lazily enumerates all action_count^state_count deterministic policies in
/// lexicographic order (state 0 most significant).
class PolicyEnumerator
{
public:
	static constexpr std::uint64_t kDefaultCap = std::uint64_t{1} << 20;

	/// Throws std::length_error, naming the required cap, when the policy
	/// count exceeds cap.
	PolicyEnumerator(int state_count, int action_count, std::uint64_t cap = kDefaultCap);

	std::uint64_t count() const { return count_; }
	/// Advances to the next policy; returns false after the last one.
	bool next(PolicyTable& policy);

private:
	int states_;
	int actions_;
	std::uint64_t count_;
	std::uint64_t emitted_ = 0;
};

std::vector<PolicyTable> enumerate_policies(const Environment& env, std::uint64_t cap = PolicyEnumerator::kDefaultCap);

struct Inversion
{
	PolicyTable first;
	PolicyTable second;
	double v_first;
	double v_second;
	double v_hat_first;
	double v_hat_second;
};

enum class ClosedForm
{
	none,
	shift,        ///< v_hat = v - p
	scale,        ///< v_hat = z v
	shift_scale,  ///< v_hat = z (v - p)
};

struct PirfReport
{
	std::string env_name;
	std::string shaper_name;
	double gamma = 1.0;
	std::optional<ShapingConfig> shaping;
	std::uint64_t policy_count = 0;
	std::uint64_t pairs_checked = 0;    ///< ordered pairs (p1, p2), p1 != p2
	std::uint64_t inversion_count = 0;  ///< ordered pairs violating the implication
	std::vector<Inversion> inversions;  ///< first few witnesses
	std::size_t distinct_returns = 0;
	bool argmax_consistent = true;      ///< every v_hat-maximizer also maximizes v
	ClosedForm closed_form = ClosedForm::none;
	bool hypothesis_holds = true;       ///< every policy meets the backfill-length condition
	double max_shift_deviation = 0.0;   ///< max |v_hat - closed form(v)|, NaN without a closed form
	double max_v = 0.0;
	double max_v_hat = 0.0;
	bool asserted = false;              ///< whether the exact guarantees apply to this case

	bool order_preserved() const { return inversion_count == 0; }
	/// An asserted case fails on any inversion or a closed-form deviation above tolerance.
	bool asserted_failure(double tolerance = 1e-9) const;
};

struct PirfOptions
{
	double tie_tolerance = 1e-12;
	std::uint64_t cap = PolicyEnumerator::kDefaultCap;
	std::size_t max_witnesses = 8;
	std::uint64_t seed = 0;
};

PirfReport check_pirf(const Environment& env, const ShapingConfig& shaping, double gamma, const PirfOptions& options = {});
PirfReport check_pirf(const Environment& env, const RewardShaper& shaper, std::string shaper_name, double gamma,
                      const PirfOptions& options = {});

void write_report_text(std::ostream& os, const PirfReport& report);
nlohmann::json report_to_json(const PirfReport& report);

/// Bellman optimality backups over the full table until the max-norm
/// change drops below tol. Terminal outcomes contribute their reward only.
/// Throws std::runtime_error if max_iterations is reached first.
TabularQ<double> value_iteration(const Environment& env, double gamma, double tol, std::size_t max_iterations = 1000000);

PolicyTable greedy_policy(const TabularQ<double>& q);

/// Maximum discounted raw return over all enumerated policies.
double max_policy_return(const Environment& env, double gamma, std::uint64_t cap = PolicyEnumerator::kDefaultCap,
                         std::uint64_t seed = 0);

/// Pushes complete episodes through a ReplayMemory, reads back every
/// committed transition and returns the max |replay shaped reward - offline
/// shape_episode value|. Also draws `random_samples` samples through
/// ReplayMemory::sample and checks each against its oracle value.
double check_replay_equivalence(const std::vector<Episode>& episodes, const ShapingConfig& shaping, Rng& rng,
                                std::size_t random_samples = 1000);

/// A synthetic episode of `length` steps with ids 0..length-1; each step's
/// reward is nonzero with probability density, drawn from {1, 2, 5, -1}.
Episode random_episode(Rng& rng, std::size_t length, double density);

} // namespace shapedq
