// Small hand-built MDPs for the order-preservation checks.
#pragma once

#include <memory>
#include <string>
#include <vector>

#include "shapedq/env.hpp"

namespace shapedq {

/// Two routes from the start state (action 0 short, action 1 long). The
/// short route takes short_len steps and pays short_reward on its last
/// step; the long route takes long_len steps and pays nothing. Under
/// discounting, self-punishment shifts the two returns by different
/// amounts (gamma^(short_len-1) p vs gamma^(long_len-1) p).
std::unique_ptr<Environment> discount_gap_env(double short_reward = 0.5, int short_len = 2, int long_len = 3);

/// Route A pays 1 then 1 (total 2); route B pays 0 then 1.5 (total 1.5).
/// Squaring rewards reverses their order.
std::unique_ptr<Environment> mixed_reward_env();

/// Counter states c_0..c_L with L = gap. From c_k, action 0 advances (reward
/// 0) and action 1 restarts at c_0 (reward 0). At c_L, action 0 pays 1 and
/// restarts; action 1 pays 3 and terminates. Every nonzero reward is
/// preceded by at least `gap` zero rewards.
std::unique_ptr<Environment> backfill_window_env(int gap, int max_episode_len = 0);

/// Names accepted by make_catalog_env.
std::vector<std::string> catalog_names();
/// Throws std::invalid_argument for unknown names.
std::unique_ptr<Environment> make_catalog_env(const std::string& name);

} // namespace shapedq
