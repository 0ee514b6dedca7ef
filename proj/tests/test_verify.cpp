#include <cmath>
#include <set>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "shapedq/catalog.hpp"
#include "shapedq/verify.hpp"

using namespace shapedq;

TEST(Enumerate, Counts)
{
	PolicyEnumerator three(3, 2);
	EXPECT_EQ(three.count(), 8u);
	PolicyEnumerator one(1, 4);
	EXPECT_EQ(one.count(), 4u);
	PolicyEnumerator eight(8, 2);
	EXPECT_EQ(eight.count(), 256u);

	std::set<PolicyTable> seen;
	PolicyTable p;
	PolicyTable prev;
	while (eight.next(p)) {
		if (!prev.empty())
			EXPECT_LT(prev, p);
		prev = p;
		seen.insert(p);
	}
	EXPECT_EQ(seen.size(), 256u);
}

TEST(Enumerate, CapRefusal)
{
	try {
		PolicyEnumerator big(21, 2);
		FAIL() << "expected refusal";
	} catch (const std::length_error& e) {
		EXPECT_NE(std::string(e.what()).find("2097152"), std::string::npos) << e.what();
	}
	EXPECT_NO_THROW(PolicyEnumerator(21, 2, std::uint64_t{1} << 21));
}

TEST(PolicyReturn, IdentityShaping)
{
	SparseChain env(3);
	const auto r = policy_return(env, {1, 1, 1}, 1.0, make_shaper(ShapingConfig::none()));
	EXPECT_EQ(r.v, 1.0);
	EXPECT_EQ(r.v_hat, 1.0);
	EXPECT_EQ(r.episode.size(), 2u);
}

TEST(PolicyReturn, SpShiftsByP)
{
	GridCliff env(3, 2);
	for (const auto& pol : enumerate_policies(env)) {
		const auto r = policy_return(env, pol, 1.0, make_shaper(ShapingConfig::sp(1.0)));
		EXPECT_DOUBLE_EQ(r.v_hat, r.v - 1.0);
	}
}

TEST(PolicyReturn, DiscountedShiftsDiffer)
{
	auto env = discount_gap_env(0.5, 3, 4);
	const auto shaper = make_shaper(ShapingConfig::sp(1.0));
	const auto short_route = policy_return(*env, PolicyTable(static_cast<std::size_t>(env->spec().state_count), 0), 0.9, shaper);
	const auto long_route = policy_return(*env, PolicyTable(static_cast<std::size_t>(env->spec().state_count), 1), 0.9, shaper);
	EXPECT_EQ(short_route.episode.size(), 3u);
	EXPECT_EQ(long_route.episode.size(), 4u);
	EXPECT_NEAR(short_route.v - short_route.v_hat, 0.81, 1e-12);
	EXPECT_NEAR(long_route.v - long_route.v_hat, 0.729, 1e-12);
}

TEST(PolicyReturn, NStepPreview)
{
	SparseChain env(4);
	TabularQ<double> q(4, 2);
	q.table().setConstant(10.0);
	const auto r = policy_return(env, {1, 1, 1, 1}, 0.5, make_shaper(ShapingConfig::none()), NStepPreview{2, &q});
	// rewards [0, 0, 1]: t=0 bootstraps from s2, t=1 and t=2 end within two steps.
	ASSERT_EQ(r.n_step_targets.size(), 3u);
	EXPECT_DOUBLE_EQ(r.n_step_targets[0], 0.25 * 10.0);
	EXPECT_DOUBLE_EQ(r.n_step_targets[1], 0.5);
	EXPECT_DOUBLE_EQ(r.n_step_targets[2], 1.0);
}

TEST(CheckPirf, SpExactAtGammaOne)
{
	for (double p : {1.0, 10.0, 100.0}) {
		const auto rep = check_pirf(SparseChain(6), ShapingConfig::sp(p), 1.0);
		EXPECT_EQ(rep.policy_count, 64u);
		EXPECT_EQ(rep.pairs_checked, 64u * 63u);
		EXPECT_EQ(rep.inversion_count, 0u);
		EXPECT_LE(rep.max_shift_deviation, 1e-12);
		EXPECT_TRUE(rep.asserted);
		EXPECT_TRUE(rep.argmax_consistent);
		EXPECT_FALSE(rep.asserted_failure());
	}
}

TEST(CheckPirf, RbScalesUnderHypothesis)
{
	auto env = backfill_window_env(3);
	for (double lambda : {0.15, 0.65, 0.95}) {
		const auto rep = check_pirf(*env, ShapingConfig::rb(lambda, 3), 1.0);
		EXPECT_TRUE(rep.hypothesis_holds);
		EXPECT_EQ(rep.closed_form, ClosedForm::scale);
		EXPECT_EQ(rep.inversion_count, 0u);
		EXPECT_LE(rep.max_shift_deviation, 1e-9);
		EXPECT_FALSE(rep.asserted_failure());
	}
}

TEST(CheckPirf, RbHypothesisViolatedIsReportedOnly)
{
	auto env = backfill_window_env(3);
	const auto rep = check_pirf(*env, ShapingConfig::rb(0.5, 6), 1.0);
	EXPECT_FALSE(rep.hypothesis_holds);
	EXPECT_FALSE(rep.asserted);
	EXPECT_FALSE(rep.asserted_failure());
}

TEST(CheckPirf, DiscountGapInverts)
{
	auto env = discount_gap_env();
	const auto rep = check_pirf(*env, ShapingConfig::sp(10.0), 0.9);
	EXPECT_GE(rep.inversion_count, 1u);
	EXPECT_FALSE(rep.asserted);
	EXPECT_FALSE(rep.asserted_failure());
	ASSERT_FALSE(rep.inversions.empty());
	const auto& w = rep.inversions.front();
	EXPECT_LE(w.v_first, w.v_second);
	EXPECT_GT(w.v_hat_first, w.v_hat_second);

	// Below the threshold p(1 - gamma) > short_reward no inversion exists.
	EXPECT_EQ(check_pirf(*env, ShapingConfig::sp(4.0), 0.9).inversion_count, 0u);
}

TEST(CheckPirf, CheckerCatchesSquarePlus)
{
	auto env = mixed_reward_env();
	const auto rep = check_pirf(*env, square_plus_shaper(1.0), "square_plus", 1.0);
	EXPECT_GE(rep.inversion_count, 1u);
	EXPECT_TRUE(rep.asserted_failure());
	const auto minus = check_pirf(*env, square_plus_shaper(-5.0), "square_minus", 1.0);
	EXPECT_GE(minus.inversion_count, 1u);
}

TEST(CheckPirf, ReportOutputs)
{
	auto env = discount_gap_env();
	const auto rep = check_pirf(*env, ShapingConfig::sp(10.0), 0.9);
	std::ostringstream os;
	write_report_text(os, rep);
	EXPECT_NE(os.str().find("inversions"), std::string::npos);
	EXPECT_NE(os.str().find("RESULT: WARN"), std::string::npos);
	const auto j = report_to_json(rep);
	EXPECT_EQ(j.at("inversion_count").get<std::uint64_t>(), rep.inversion_count);
	EXPECT_FALSE(j.at("inversions").empty());
}

TEST(ValueIteration, TwoStepChain)
{
	SparseChain env(3);
	const auto q = value_iteration(env, 0.9, 1e-12);
	EXPECT_NEAR(q.table()(1, SparseChain::kRight), 1.0, 1e-12);
	EXPECT_NEAR(q.table()(0, SparseChain::kRight), 0.9, 1e-12);
}

TEST(ValueIteration, MyopicLimit)
{
	GridCliff env(4, 3);
	const auto q = value_iteration(env, 0.0, 1e-12);
	for (const auto& row : enumerate_transitions(env))
		EXPECT_EQ(q.table()(row.state, row.action), row.outcome.reward);
}

TEST(ValueIteration, GreedyAttainsEnumerationMax)
{
	std::vector<std::unique_ptr<Environment>> envs;
	envs.push_back(std::make_unique<SparseChain>(5));
	envs.push_back(std::make_unique<GridCliff>(3, 3));
	envs.push_back(discount_gap_env());
	envs.push_back(mixed_reward_env());
	// Long horizon: value iteration is stationary and ignores the cap.
	envs.push_back(backfill_window_env(2, 400));
	for (const auto& env : envs) {
		const double gamma = 0.9;
		const auto q = value_iteration(*env, gamma, 1e-12);
		const double best = max_policy_return(*env, gamma);
		const auto greedy = policy_return(*env, greedy_policy(q), gamma, make_shaper(ShapingConfig::none()));
		EXPECT_NEAR(greedy.v, best, 1e-9) << env->name();
	}
}

TEST(ReplayEquivalence, Examples)
{
	Rng rng(5);
	std::vector<Episode> episodes;
	for (int i = 0; i < 100; ++i)
		episodes.push_back(random_episode(rng, 1 + uniform_index(rng, 80), 0.1));
	EXPECT_EQ(check_replay_equivalence(episodes, ShapingConfig::hybrid(1.0, 0.65, 10), rng), 0.0);
	EXPECT_EQ(check_replay_equivalence(episodes, ShapingConfig::none(), rng), 0.0);

	std::vector<Episode> dense;
	for (int i = 0; i < 50; ++i)
		dense.push_back(random_episode(rng, 1 + uniform_index(rng, 40), 0.6));
	EXPECT_EQ(check_replay_equivalence(dense, ShapingConfig::hybrid(2.0, 0.5, 3), rng), 0.0);
}
