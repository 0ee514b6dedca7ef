#include "shapedq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

namespace shapedq {

Performance performance(const TrainHistory& history, std::size_t window)
{
	const auto& eps = history.episodes;
	if (eps.empty())
		throw std::invalid_argument("performance: empty history");
	const std::size_t n = std::min(window, eps.size());
	double total = 0.0;
	for (std::size_t i = eps.size() - n; i < eps.size(); ++i)
		total += eps[i].env_return;
	return {total / static_cast<double>(n), eps.size() < window};
}

ComparisonTable ComparisonTable::from_runs(const std::vector<RunResult>& runs)
{
	ComparisonTable t;
	auto index_of = [](std::vector<std::string>& names, const std::string& name) {
		auto it = std::find(names.begin(), names.end(), name);
		if (it == names.end()) {
			names.push_back(name);
			return names.size() - 1;
		}
		return static_cast<std::size_t>(it - names.begin());
	};
	for (const auto& r : runs) {
		index_of(t.envs, r.env);
		index_of(t.labels, r.method);
	}
	const auto rows = static_cast<Eigen::Index>(t.envs.size());
	const auto cols = static_cast<Eigen::Index>(t.labels.size());
	Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(rows, cols);
	Eigen::MatrixXd count = Eigen::MatrixXd::Zero(rows, cols);
	for (const auto& r : runs) {
		const auto i = static_cast<Eigen::Index>(index_of(t.envs, r.env));
		const auto j = static_cast<Eigen::Index>(index_of(t.labels, r.method));
		sum(i, j) += r.performance;
		count(i, j) += 1.0;
	}
	t.cells = (count.array() > 0.0).select(sum.array() / count.array(), std::numeric_limits<double>::quiet_NaN());
	return t;
}

Eigen::Index ComparisonTable::label_index(const std::string& label) const
{
	auto it = std::find(labels.begin(), labels.end(), label);
	if (it == labels.end())
		throw std::out_of_range("comparison table has no column '" + label + "'");
	return static_cast<Eigen::Index>(it - labels.begin());
}

ComparisonTable ComparisonTable::select(const std::vector<std::string>& wanted) const
{
	ComparisonTable t;
	t.envs = envs;
	t.labels = wanted;
	t.cells.resize(cells.rows(), static_cast<Eigen::Index>(wanted.size()));
	for (std::size_t j = 0; j < wanted.size(); ++j)
		t.cells.col(static_cast<Eigen::Index>(j)) = cells.col(label_index(wanted[j]));
	return t;
}

Eigen::VectorXd average_rank(const ComparisonTable& table)
{
	if (!table.complete())
		throw std::invalid_argument("average_rank: comparison table has missing cells");
	const Eigen::Index m = table.cells.cols();
	Eigen::VectorXd total = Eigen::VectorXd::Zero(m);
	std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
	for (Eigen::Index row = 0; row < table.cells.rows(); ++row) {
		const auto perf = table.cells.row(row);
		std::iota(order.begin(), order.end(), Eigen::Index{0});
		std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return perf[a] > perf[b]; });
		for (std::size_t start = 0; start < order.size();) {
			std::size_t end = start + 1;
			while (end < order.size() && perf[order[end]] == perf[order[start]])
				++end;
			// Positions start+1 .. end share their mean.
			const double shared = (static_cast<double>(start + 1) + static_cast<double>(end)) / 2.0;
			for (std::size_t k = start; k < end; ++k)
				total[order[k]] += shared;
			start = end;
		}
	}
	return total / static_cast<double>(table.cells.rows());
}

std::optional<double> improvement_pct(double p_original, double p_strategy)
{
	if (p_original == 0.0)
		return std::nullopt;
	return 100.0 * (p_strategy - p_original) / std::abs(p_original);
}

Eigen::VectorXd average_improvement(const ComparisonTable& table, const std::string& baseline_label)
{
	const Eigen::Index base = table.label_index(baseline_label);
	Eigen::VectorXd out(table.cells.cols());
	for (Eigen::Index j = 0; j < table.cells.cols(); ++j) {
		double total = 0.0;
		int defined = 0;
		for (Eigen::Index i = 0; i < table.cells.rows(); ++i) {
			if (std::isnan(table.cells(i, base)) || std::isnan(table.cells(i, j)))
				continue;
			if (const auto pct = improvement_pct(table.cells(i, base), table.cells(i, j))) {
				total += *pct;
				++defined;
			}
		}
		out[j] = defined > 0 ? total / defined : std::numeric_limits<double>::quiet_NaN();
	}
	return out;
}

Eigen::VectorXd percent_improved(const ComparisonTable& table, const std::string& baseline_label)
{
	const Eigen::Index base = table.label_index(baseline_label);
	Eigen::VectorXd out = Eigen::VectorXd::Zero(table.cells.cols());
	if (table.cells.rows() == 0)
		return out;
	for (Eigen::Index j = 0; j < table.cells.cols(); ++j) {
		int improved = 0;
		for (Eigen::Index i = 0; i < table.cells.rows(); ++i)
			if (table.cells(i, j) > table.cells(i, base))
				++improved;
		out[j] = 100.0 * improved / static_cast<double>(table.cells.rows());
	}
	return out;
}

void write_comparison_csv(std::ostream& os, const ComparisonTable& table)
{
	os << "env";
	for (const auto& l : table.labels)
		os << ',' << l;
	os << '\n';
	for (Eigen::Index i = 0; i < table.cells.rows(); ++i) {
		os << table.envs[static_cast<std::size_t>(i)];
		for (Eigen::Index j = 0; j < table.cells.cols(); ++j)
			os << ',' << (std::isnan(table.cells(i, j)) ? std::string() : fmt::format("{}", table.cells(i, j)));
		os << '\n';
	}
}

void write_rank_csv(std::ostream& os, const ComparisonTable& table, const std::string& baseline_label)
{
	const Eigen::VectorXd ranks = average_rank(table);
	const Eigen::VectorXd improvement = average_improvement(table, baseline_label);
	const Eigen::VectorXd improved = percent_improved(table, baseline_label);
	os << "label,average_rank,average_improvement_pct,percent_improved\n";
	for (std::size_t j = 0; j < table.labels.size(); ++j) {
		const auto jj = static_cast<Eigen::Index>(j);
		os << fmt::format("{},{},{},{}\n", table.labels[j], ranks[jj],
		                  std::isnan(improvement[jj]) ? std::string() : fmt::format("{}", improvement[jj]), improved[jj]);
	}
}

} // namespace shapedq
