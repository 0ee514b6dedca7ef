#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include <fmt/format.h>

#include "shapedq/approx/huber.hpp"
#include "shapedq/approx/sample.hpp"
#include "shapedq/types.hpp"

namespace shapedq {

/// Q table indexed by (state id, action), zero-initialized.
template <class Scalar = double>
class TabularQ
{
public:
	TabularQ(int state_count, int action_count)
	    : table_(MatrixX<Scalar>::Zero(state_count, action_count))
	{
		if (state_count < 1 || action_count < 1)
			throw std::invalid_argument("TabularQ: dimensions must be positive");
	}

	int state_count() const { return static_cast<int>(table_.rows()); }
	int action_count() const { return static_cast<int>(table_.cols()); }

	VectorX<Scalar> q_values(int state) const
	{
		if (state < 0 || state >= state_count())
			throw std::invalid_argument(fmt::format("TabularQ: state {} outside [0, {})", state, state_count()));
		return table_.row(state).transpose();
	}
	VectorX<Scalar> q_values(const Observation& obs) const { return q_values(obs.id); }

	/// actions x batch
	MatrixX<Scalar> q_values(std::span<const Observation* const> batch) const
	{
		MatrixX<Scalar> out(action_count(), static_cast<Eigen::Index>(batch.size()));
		for (std::size_t j = 0; j < batch.size(); ++j)
			out.col(static_cast<Eigen::Index>(j)) = q_values(*batch[j]);
		return out;
	}

	MatrixX<Scalar>& table() { return table_; }
	const MatrixX<Scalar>& table() const { return table_; }

private:
	MatrixX<Scalar> table_;
};

/// Sequential Q <- Q + alpha (target - Q) over the batch. Returns the mean
/// Huber loss of the pre-update errors.
template <class Scalar>
Scalar update(TabularQ<Scalar>& q, std::span<const TrainingSample> batch, Scalar alpha, Scalar delta = Scalar(1))
{
	for (const auto& s : batch)
		if (!std::isfinite(s.target))
			throw NumericalError("TabularQ::update: non-finite target");
	Scalar total = 0;
	for (const auto& s : batch) {
		Scalar& cell = q.table()(s.state->id, s.action);
		const Scalar err = cell - static_cast<Scalar>(s.target);
		total += huber(err, delta).loss;
		cell += alpha * (static_cast<Scalar>(s.target) - cell);
	}
	return batch.empty() ? Scalar(0) : total / static_cast<Scalar>(batch.size());
}

template <class Scalar>
void clone_into(const TabularQ<Scalar>& source, TabularQ<Scalar>& destination)
{
	if (source.state_count() != destination.state_count() || source.action_count() != destination.action_count())
		throw std::invalid_argument("clone_into: TabularQ dimensions differ");
	destination.table() = source.table();
}

} // namespace shapedq
