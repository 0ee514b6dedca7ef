#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace shapedq {

template <class Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// What an environment emits per state: a discrete id for tabular methods
/// and the exhaustive checks, plus a fixed-width feature vector for the MLP.
struct Observation
{
	int id = 0;
	Eigen::VectorXd features;
};

/// Raised when a loss, gradient or Q evaluation stops being finite.
class NumericalError : public std::runtime_error
{
public:
	using std::runtime_error::runtime_error;
};

} // namespace shapedq
