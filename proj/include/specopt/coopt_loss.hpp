#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "specopt/param_graph.hpp"
#include "specopt/types.hpp"

namespace specopt
{

struct JointLossConfig
{
    double lambda = 0.0;

    void validate() const
    {
        if (!std::isfinite(lambda) || lambda < 0.0)
            throw std::invalid_argument("regularization weight lambda must be finite and >= 0");
    }
};

struct LossBreakdown
{
    double task = 0.0;
    double spec = 0.0;
    double joint = 0.0;
};

namespace detail
{
inline void require_rows(Index rows, Index nodes, const char* what)
{
    if (rows != nodes)
        throw std::invalid_argument(std::string(what) + " has " + std::to_string(rows) + " rows but the graph has " +
                                    std::to_string(nodes) + " nodes");
}
} // namespace detail

/**
 * Graph Dirichlet energy of the parameter rows,
 *   sum_{i<j} W_ij |theta_i - theta_j|^2 = trace(Theta^T L Theta),
 * which equals sum_k lambda_k |(U^T Theta)_k|^2 in the Laplacian eigenbasis.
 */
template <typename Scalar, typename Derived>
Scalar spectral_reg(const ParameterGraphT<Scalar>& g, const Eigen::MatrixBase<Derived>& theta)
{
    detail::require_rows(theta.rows(), g.n_nodes(), "parameter matrix");
    return (theta.array() * (g.laplacian() * theta).array()).sum();
}

/// d/dTheta of spectral_reg: 2 L Theta.
template <typename Scalar, typename Derived>
Matrix<Scalar> spectral_reg_grad(const ParameterGraphT<Scalar>& g, const Eigen::MatrixBase<Derived>& theta)
{
    detail::require_rows(theta.rows(), g.n_nodes(), "parameter matrix");
    return Scalar(2) * (g.laplacian() * theta);
}

inline LossBreakdown joint_loss(double task, double spec, const JointLossConfig& cfg)
{
    cfg.validate();
    if (!std::isfinite(task) || !std::isfinite(spec))
        throw std::invalid_argument("joint_loss inputs must be finite");
    return {task, spec, task + cfg.lambda * spec};
}

template <typename Scalar, typename DerivedG, typename DerivedT>
Matrix<Scalar> joint_grad(const Eigen::MatrixBase<DerivedG>& task_grad, const ParameterGraphT<Scalar>& g,
                          const Eigen::MatrixBase<DerivedT>& theta, const JointLossConfig& cfg)
{
    cfg.validate();
    detail::require_rows(task_grad.rows(), g.n_nodes(), "task gradient");
    detail::require_rows(theta.rows(), g.n_nodes(), "parameter matrix");
    if (task_grad.cols() != theta.cols())
        throw std::invalid_argument("task gradient and parameter matrix widths differ");
    if (cfg.lambda == 0.0)
        return task_grad;
    return task_grad + Scalar(cfg.lambda) * spectral_reg_grad(g, theta);
}

} // namespace specopt
