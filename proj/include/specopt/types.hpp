#pragma once

#include <Eigen/Core>

namespace specopt
{

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// N x d stack of per-node parameter vectors; row i is node i.
template <typename Scalar>
using ParameterMatrixT = Matrix<Scalar>;

using ParameterMatrix = ParameterMatrixT<double>;
using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;

} // namespace specopt
