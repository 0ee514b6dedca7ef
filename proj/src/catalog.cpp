#include "shapedq/catalog.hpp"

#include <algorithm>
#include <stdexcept>

namespace shapedq {

std::unique_ptr<Environment> discount_gap_env(double short_reward, int short_len, int long_len)
{
	if (short_len < 1 || long_len < 1)
		throw std::invalid_argument("discount_gap_env: route lengths must be positive");
	// state 0: start; short route intermediates 1..short_len-1; long route
	// intermediates after those; last state: absorbing end.
	const int short_mid = short_len - 1;
	const int long_mid = long_len - 1;
	const int end = 1 + short_mid + long_mid;
	const int states = end + 1;
	std::vector<TableRow> rows;

	auto route = [&](int action_from_start, int first_mid, int mids, double reward) {
		// start -> first intermediate (or straight to the end)
		if (mids == 0) {
			rows.push_back({0, action_from_start, {end, reward, true}});
			return;
		}
		rows.push_back({0, action_from_start, {first_mid, 0.0, false}});
		for (int k = 0; k < mids; ++k) {
			const int s = first_mid + k;
			const bool last = k + 1 == mids;
			for (int a = 0; a < 2; ++a)
				rows.push_back({s, a, last ? Outcome{end, reward, true} : Outcome{s + 1, 0.0, false}});
		}
	};
	route(0, 1, short_mid, short_reward);
	route(1, 1 + short_mid, long_mid, 0.0);
	for (int a = 0; a < 2; ++a)
		rows.push_back({end, a, {end, 0.0, true}});
	return std::make_unique<TableEnv>("discount_gap", states, 2, 0, std::max(short_len, long_len) + 1, std::move(rows));
}

std::unique_ptr<Environment> mixed_reward_env()
{
	// 0 start, 1 route A middle, 2 route B middle, 3 end
	std::vector<TableRow> rows{
	    {0, 0, {1, 1.0, false}}, {0, 1, {2, 0.0, false}}, {1, 0, {3, 1.0, true}}, {1, 1, {3, 1.0, true}},
	    {2, 0, {3, 1.5, true}},  {2, 1, {3, 1.5, true}},  {3, 0, {3, 0.0, true}}, {3, 1, {3, 0.0, true}},
	};
	return std::make_unique<TableEnv>("mixed_reward", 4, 2, 0, 4, std::move(rows));
}

std::unique_ptr<Environment> backfill_window_env(int gap, int max_episode_len)
{
	if (gap < 1)
		throw std::invalid_argument("backfill_window_env: gap must be positive");
	const int top = gap;      // c_L
	const int end = gap + 1;  // absorbing
	std::vector<TableRow> rows;
	for (int k = 0; k < top; ++k) {
		rows.push_back({k, 0, {k + 1, 0.0, false}});
		rows.push_back({k, 1, {0, 0.0, false}});
	}
	rows.push_back({top, 0, {0, 1.0, false}});
	rows.push_back({top, 1, {end, 3.0, true}});
	rows.push_back({end, 0, {end, 0.0, true}});
	rows.push_back({end, 1, {end, 0.0, true}});
	const int horizon = max_episode_len > 0 ? max_episode_len : 3 * (gap + 1) + 1;
	return std::make_unique<TableEnv>("backfill_window", gap + 2, 2, 0, horizon, std::move(rows));
}

std::vector<std::string> catalog_names()
{
	return {"discount_gap", "mixed_reward", "backfill_window"};
}

std::unique_ptr<Environment> make_catalog_env(const std::string& name)
{
	if (name == "discount_gap")
		return discount_gap_env();
	if (name == "mixed_reward")
		return mixed_reward_env();
	if (name == "backfill_window")
		return backfill_window_env(3);
	throw std::invalid_argument("unknown catalog environment '" + name + "'");
}

} // namespace shapedq
