#pragma once

#include <cmath>

namespace shapedq {

template <class Scalar>
struct HuberValue
{
	Scalar loss;
	Scalar grad; ///< d loss / d error
};

/// e^2/2 inside [-delta, delta], linear with slope delta outside.
template <class Scalar>
HuberValue<Scalar> huber(Scalar error, Scalar delta)
{
	const Scalar a = std::abs(error);
	if (a <= delta)
		return {Scalar(0.5) * error * error, error};
	return {delta * (a - Scalar(0.5) * delta), error > Scalar(0) ? delta : -delta};
}

} // namespace shapedq
