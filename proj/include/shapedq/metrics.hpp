// Evaluation arithmetic: per-run performance and cross-environment
// comparisons (average rank, improvement percentage, percent improved).
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "shapedq/agent.hpp"

namespace shapedq {

struct Performance
{
	double value = 0.0;
	bool short_run = false; ///< fewer than `window` episodes were available
};

/// Mean env return over the final min(window, len) episodes. Throws
/// std::invalid_argument on an empty history.
Performance performance(const TrainHistory& history, std::size_t window = 100);

struct RunResult
{
	std::string env;
	std::string method;
	double performance = 0.0;
	int episodes_run = 0;
	std::uint64_t seed = 0;
	bool short_run = false;
};

/// Rows are environments, columns method labels, cells the seed-averaged
/// performance. Missing cells hold NaN.
struct ComparisonTable
{
	std::vector<std::string> envs;
	std::vector<std::string> labels;
	Eigen::MatrixXd cells;

	/// Rows and columns keep first-appearance order.
	static ComparisonTable from_runs(const std::vector<RunResult>& runs);

	bool complete() const { return cells.size() > 0 && cells.allFinite(); }
	/// Throws std::out_of_range for unknown labels.
	Eigen::Index label_index(const std::string& label) const;
	/// Restriction to a subset of columns, in the given order.
	ComparisonTable select(const std::vector<std::string>& labels) const;
};

/// Per environment rank 1 is the highest performance; tied methods share
/// the mean of their positions. Returns each method's rank averaged over
/// environments. Throws std::invalid_argument on an incomplete table.
Eigen::VectorXd average_rank(const ComparisonTable& table);

/// 100 (P_s - P_o) / |P_o|; nullopt when P_o == 0.
std::optional<double> improvement_pct(double p_original, double p_strategy);

/// Mean of the defined improvement_pct values per label against the
/// baseline column; NaN where no environment has a defined value.
Eigen::VectorXd average_improvement(const ComparisonTable& table, const std::string& baseline_label);

/// Percentage of environments where the label strictly beats the baseline.
Eigen::VectorXd percent_improved(const ComparisonTable& table, const std::string& baseline_label);

void write_comparison_csv(std::ostream& os, const ComparisonTable& table);
/// `label,average_rank,average_improvement_pct,percent_improved`
void write_rank_csv(std::ostream& os, const ComparisonTable& table, const std::string& baseline_label);

} // namespace shapedq
