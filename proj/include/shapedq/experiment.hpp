// Subcommand implementations behind the command-line tool. Each reads one
// JSON config, writes its outputs under an output directory and returns a
// process exit status.
//
// Exit codes: 0 success, 1 asserted verification failure, 2 configuration
// error, 3 numerical failure during training, 4 sweep finished with failed
// cells, 5 other runtime errors.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "shapedq/agent.hpp"
#include "shapedq/metrics.hpp"
#include "shapedq/shaping.hpp"

namespace shapedq {

enum ExitCode : int
{
	exit_ok = 0,
	exit_asserted_failure = 1,
	exit_config_error = 2,
	exit_numerical_failure = 3,
	exit_sweep_gaps = 4,
	exit_runtime_error = 5,
};

struct CliOptions
{
	std::string config_path;
	std::filesystem::path out_dir = ".";
	std::optional<int> jobs;
	std::optional<std::uint64_t> seed_override;
};

/// "original", "sp_p1", "rb_l0.65", "sp_p1+rb_l0.65".
std::string shaping_label(const ShapingConfig& shaping);

/// Header `episode,env_return,shaped_return,length,steps,epsilon`.
void write_history_csv(std::ostream& os, const TrainHistory& history);

int cmd_train(const CliOptions& options, std::ostream& log);
int cmd_sweep(const CliOptions& options, std::ostream& log);
int cmd_verify(const CliOptions& options, std::ostream& log);
int cmd_sparsity(const CliOptions& options, std::ostream& log);
int cmd_metrics(const CliOptions& options, std::ostream& log);

} // namespace shapedq
