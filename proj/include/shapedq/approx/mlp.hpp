// Multilayer perceptron Q-function with an optional dueling head.
//
// Layout of the parameter list: hidden layers in order, then the output
// layer (the advantage head when dueling), then the scalar value head when
// dueling. Hidden layers use ReLU, heads are linear. Batches are stored
// column-wise: features x batch in, actions x batch out.
#pragma once

#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "shapedq/approx/huber.hpp"
#include "shapedq/approx/sample.hpp"
#include "shapedq/random.hpp"
#include "shapedq/types.hpp"

namespace shapedq {

template <class Scalar>
struct DenseLayer
{
	MatrixX<Scalar> weight; ///< out x in
	VectorX<Scalar> bias;
};

template <class Scalar>
using Parameters = std::vector<DenseLayer<Scalar>>;

template <class Scalar>
Parameters<Scalar> zeros_like(const Parameters<Scalar>& params)
{
	Parameters<Scalar> out;
	out.reserve(params.size());
	for (const auto& l : params)
		out.push_back({MatrixX<Scalar>::Zero(l.weight.rows(), l.weight.cols()), VectorX<Scalar>::Zero(l.bias.size())});
	return out;
}

/// Q = V + A - mean(A), per column.
template <class Scalar>
MatrixX<Scalar> dueling_combine(const Eigen::Ref<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>>& value,
                                const Eigen::Ref<const MatrixX<Scalar>>& advantage)
{
	const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> shift = value - advantage.colwise().mean();
	return advantage.rowwise() + shift;
}

template <class Scalar>
VectorX<Scalar> dueling_combine(Scalar value, const Eigen::Ref<const VectorX<Scalar>>& advantage)
{
	return (advantage.array() + (value - advantage.mean())).matrix();
}

template <class Scalar = double>
class MlpQ
{
public:
	using Matrix = MatrixX<Scalar>;
	using Vector = VectorX<Scalar>;
	using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

	/// widths = {feature_dim, hidden..., action_count}. Weights are drawn
	/// uniformly from +-sqrt(6 / (fan_in + fan_out)); biases start at zero.
	MlpQ(std::vector<int> widths, bool dueling, Rng& rng)
	    : widths_(std::move(widths))
	    , dueling_(dueling)
	{
		check_widths();
		for (std::size_t l = 0; l + 1 < widths_.size(); ++l)
			params_.push_back(init_layer(widths_[l + 1], widths_[l], rng));
		if (dueling_)
			params_.push_back(init_layer(1, widths_[widths_.size() - 2], rng));
	}

	/// Adopts existing parameters; shapes must match widths and dueling.
	MlpQ(std::vector<int> widths, bool dueling, Parameters<Scalar> params)
	    : widths_(std::move(widths))
	    , dueling_(dueling)
	    , params_(std::move(params))
	{
		check_widths();
		const std::size_t expected = widths_.size() - 1 + (dueling_ ? 1 : 0);
		bool ok = params_.size() == expected;
		for (std::size_t l = 0; ok && l + 1 < widths_.size(); ++l)
			ok = params_[l].weight.rows() == widths_[l + 1] && params_[l].weight.cols() == widths_[l] &&
			     params_[l].bias.size() == widths_[l + 1];
		if (ok && dueling_) {
			const auto& v = params_.back();
			ok = v.weight.rows() == 1 && v.weight.cols() == widths_[widths_.size() - 2] && v.bias.size() == 1;
		}
		if (!ok)
			throw std::invalid_argument("MlpQ: parameter shapes do not match the layer widths");
	}

	const std::vector<int>& widths() const { return widths_; }
	bool dueling() const { return dueling_; }
	int input_dim() const { return widths_.front(); }
	int action_count() const { return widths_.back(); }
	std::size_t hidden_layer_count() const { return widths_.size() - 2; }

	Parameters<Scalar>& parameters() { return params_; }
	const Parameters<Scalar>& parameters() const { return params_; }

	std::size_t parameter_count() const
	{
		std::size_t n = 0;
		for (const auto& l : params_)
			n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
		return n;
	}

	Matrix forward(const Eigen::Ref<const Matrix>& inputs) const
	{
		check_input(inputs.rows());
		Matrix h = inputs;
		for (std::size_t l = 0; l < hidden_layer_count(); ++l)
			h = affine(params_[l], h).cwiseMax(Scalar(0));
		return head(h);
	}

	Vector q_values(const Eigen::Ref<const Vector>& x) const { return forward(x); }

	Vector q_values(const Observation& obs) const
	{
		check_input(obs.features.size());
		return forward(obs.features.template cast<Scalar>());
	}

	/// actions x batch
	Matrix q_values(std::span<const Observation* const> batch) const
	{
		Matrix inputs(input_dim(), static_cast<Eigen::Index>(batch.size()));
		for (std::size_t j = 0; j < batch.size(); ++j) {
			check_input(batch[j]->features.size());
			inputs.col(static_cast<Eigen::Index>(j)) = batch[j]->features.template cast<Scalar>();
		}
		return forward(inputs);
	}

	/// Mean Huber loss of Q(x_j, a_j) - t_j over the batch and its gradient
	/// with respect to every parameter (written into grad, reshaped as
	/// needed). Only the taken action's output carries error.
	Scalar loss_and_gradient(const Eigen::Ref<const Matrix>& inputs, std::span<const int> actions,
	                         const Eigen::Ref<const Vector>& targets, Scalar delta, Parameters<Scalar>& grad) const
	{
		check_batch(inputs, actions, targets);
		const Eigen::Index batch = inputs.cols();
		const std::size_t hidden = hidden_layer_count();

		std::vector<Matrix> acts;
		acts.reserve(hidden + 1);
		acts.push_back(inputs);
		for (std::size_t l = 0; l < hidden; ++l)
			acts.push_back(affine(params_[l], acts.back()).cwiseMax(Scalar(0)));
		const Matrix& top = acts.back();
		const Matrix q = head(top);

		Scalar loss = 0;
		Matrix dq = Matrix::Zero(q.rows(), batch);
		const Scalar inv_batch = Scalar(1) / static_cast<Scalar>(batch);
		for (Eigen::Index j = 0; j < batch; ++j) {
			const auto h = huber<Scalar>(q(actions[j], j) - targets[j], delta);
			loss += h.loss;
			dq(actions[j], j) = h.grad * inv_batch;
		}
		loss *= inv_batch;

		if (grad.size() != params_.size())
			grad = zeros_like(params_);

		const std::size_t out_idx = hidden;
		Matrix d_top;
		if (dueling_) {
			const RowVector dv = dq.colwise().sum();
			const Matrix da = dq.rowwise() - dv / static_cast<Scalar>(action_count());
			const auto& value = params_.back();
			write_grad(grad[out_idx], da, top);
			write_grad(grad.back(), dv, top);
			d_top = params_[out_idx].weight.transpose() * da + value.weight.transpose() * dv;
		} else {
			write_grad(grad[out_idx], dq, top);
			d_top = params_[out_idx].weight.transpose() * dq;
		}

		for (std::size_t l = hidden; l-- > 0;) {
			// ReLU derivative: pass gradient where the activation was positive.
			const Matrix dz = (acts[l + 1].array() > Scalar(0)).select(d_top, Scalar(0));
			write_grad(grad[l], dz, acts[l]);
			if (l > 0)
				d_top = params_[l].weight.transpose() * dz;
		}
		return loss;
	}

	Scalar loss(const Eigen::Ref<const Matrix>& inputs, std::span<const int> actions, const Eigen::Ref<const Vector>& targets,
	            Scalar delta) const
	{
		check_batch(inputs, actions, targets);
		const Matrix q = forward(inputs);
		Scalar total = 0;
		for (Eigen::Index j = 0; j < inputs.cols(); ++j)
			total += huber<Scalar>(q(actions[j], j) - targets[j], delta).loss;
		return total / static_cast<Scalar>(inputs.cols());
	}

	/// Value (1 x batch) and advantage (actions x batch) heads of a dueling net.
	std::pair<RowVector, Matrix> dueling_heads(const Eigen::Ref<const Matrix>& inputs) const
	{
		if (!dueling_)
			throw std::logic_error("MlpQ::dueling_heads on a non-dueling network");
		Matrix h = inputs;
		for (std::size_t l = 0; l < hidden_layer_count(); ++l)
			h = affine(params_[l], h).cwiseMax(Scalar(0));
		return {affine(params_.back(), h), affine(params_[hidden_layer_count()], h)};
	}

private:
	static DenseLayer<Scalar> init_layer(int out, int in, Rng& rng)
	{
		const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
		DenseLayer<Scalar> layer{Matrix(out, in), Vector::Zero(out)};
		for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
			for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
				layer.weight(r, c) = static_cast<Scalar>(uniform_real(rng, -bound, bound));
		return layer;
	}

	static Matrix affine(const DenseLayer<Scalar>& layer, const Eigen::Ref<const Matrix>& x)
	{
		return (layer.weight * x).colwise() + layer.bias;
	}

	static void write_grad(DenseLayer<Scalar>& g, const Eigen::Ref<const Matrix>& dz, const Eigen::Ref<const Matrix>& input)
	{
		g.weight.noalias() = dz * input.transpose();
		g.bias = dz.rowwise().sum();
	}

	Matrix head(const Eigen::Ref<const Matrix>& h) const
	{
		Matrix adv = affine(params_[hidden_layer_count()], h);
		if (!dueling_)
			return adv;
		const RowVector value = affine(params_.back(), h);
		return dueling_combine<Scalar>(value, adv);
	}

	void check_widths() const
	{
		if (widths_.size() < 2)
			throw std::invalid_argument("MlpQ: need at least input and output widths");
		for (int w : widths_)
			if (w < 1)
				throw std::invalid_argument("MlpQ: layer widths must be positive");
		if (dueling_ && widths_.size() < 3)
			throw std::invalid_argument("MlpQ: a dueling head needs at least one hidden layer");
	}

	void check_input(Eigen::Index rows) const
	{
		if (rows != input_dim())
			throw std::invalid_argument(fmt::format("MlpQ: input has {} features, expected {}", rows, input_dim()));
	}

	void check_batch(const Eigen::Ref<const Matrix>& inputs, std::span<const int> actions,
	                 const Eigen::Ref<const Vector>& targets) const
	{
		check_input(inputs.rows());
		if (static_cast<Eigen::Index>(actions.size()) != inputs.cols() || targets.size() != inputs.cols())
			throw std::invalid_argument("MlpQ: batch sizes of inputs, actions and targets differ");
		for (int a : actions)
			if (a < 0 || a >= action_count())
				throw std::invalid_argument(fmt::format("MlpQ: action {} outside [0, {})", a, action_count()));
	}

	std::vector<int> widths_;
	bool dueling_;
	Parameters<Scalar> params_;
};

/// RMSprop: ms <- decay ms + (1 - decay) g^2; theta <- theta - lr g / (sqrt(ms) + eps).
template <class Scalar = double>
class RmsProp
{
public:
	struct Options
	{
		Scalar learning_rate = Scalar(1e-4);
		Scalar decay = Scalar(0.95);
		Scalar epsilon = Scalar(1e-6);
	};

	RmsProp(const MlpQ<Scalar>& net, Options options)
	    : options_(options)
	    , mean_square_(zeros_like(net.parameters()))
	{
		if (!(options_.learning_rate > 0) || !(options_.decay > 0 && options_.decay < 1) || !(options_.epsilon > 0))
			throw std::invalid_argument("RmsProp: need learning_rate > 0, decay in (0, 1), epsilon > 0");
	}

	void step(Parameters<Scalar>& params, const Parameters<Scalar>& grad)
	{
		const Scalar keep = options_.decay;
		const Scalar mix = Scalar(1) - keep;
		for (std::size_t l = 0; l < params.size(); ++l) {
			auto& ms = mean_square_[l];
			ms.weight = keep * ms.weight + mix * grad[l].weight.cwiseAbs2();
			ms.bias = keep * ms.bias + mix * grad[l].bias.cwiseAbs2();
			params[l].weight.array() -=
			    options_.learning_rate * grad[l].weight.array() / (ms.weight.array().sqrt() + options_.epsilon);
			params[l].bias.array() -= options_.learning_rate * grad[l].bias.array() / (ms.bias.array().sqrt() + options_.epsilon);
		}
	}

	const Options& options() const { return options_; }
	const Parameters<Scalar>& accumulators() const { return mean_square_; }

private:
	Options options_;
	Parameters<Scalar> mean_square_;
};

template <class Scalar>
bool all_finite(const Parameters<Scalar>& params)
{
	for (const auto& l : params)
		if (!l.weight.allFinite() || !l.bias.allFinite())
			return false;
	return true;
}

/// One RMSprop step on the mean Huber loss of the batch. Returns the loss
/// before the step. Throws NumericalError, leaving the net untouched, when
/// the loss or gradient is not finite.
template <class Scalar>
Scalar update(MlpQ<Scalar>& net, std::span<const TrainingSample> batch, RmsProp<Scalar>& optimizer, Scalar delta = Scalar(1))
{
	if (batch.empty())
		return Scalar(0);
	MatrixX<Scalar> inputs(net.input_dim(), static_cast<Eigen::Index>(batch.size()));
	std::vector<int> actions(batch.size());
	VectorX<Scalar> targets(static_cast<Eigen::Index>(batch.size()));
	for (std::size_t j = 0; j < batch.size(); ++j) {
		const auto jj = static_cast<Eigen::Index>(j);
		if (batch[j].state->features.size() != net.input_dim())
			throw std::invalid_argument("MlpQ update: feature width mismatch");
		inputs.col(jj) = batch[j].state->features.template cast<Scalar>();
		actions[j] = batch[j].action;
		targets[jj] = static_cast<Scalar>(batch[j].target);
	}
	if (!targets.allFinite())
		throw NumericalError("MlpQ update: non-finite target");
	Parameters<Scalar> grad;
	const Scalar loss = net.loss_and_gradient(inputs, actions, targets, delta, grad);
	if (!std::isfinite(loss) || !all_finite(grad))
		throw NumericalError("MlpQ update: non-finite loss or gradient");
	optimizer.step(net.parameters(), grad);
	return loss;
}

template <class Scalar>
void clone_into(const MlpQ<Scalar>& source, MlpQ<Scalar>& destination)
{
	if (source.widths() != destination.widths() || source.dueling() != destination.dueling())
		throw std::invalid_argument("clone_into: network architectures differ");
	destination.parameters() = source.parameters();
}

} // namespace shapedq
