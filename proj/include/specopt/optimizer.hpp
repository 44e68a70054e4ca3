#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "specopt/coopt_loss.hpp"
#include "specopt/param_graph.hpp"
#include "specopt/spectral.hpp"
#include "specopt/toy_tasks.hpp"

namespace specopt
{

enum class FilterTarget
{
    task_gradient,
    total_gradient,
};

struct OptimizerConfig
{
    double eta = 0.1;
    double lambda = 0.0;
    FilterSpec filter = FilterSpec::identity();
    FilterTarget filter_target = FilterTarget::task_gradient;
    int max_steps = 100;
    std::optional<double> stop_loss;
    std::uint64_t seed = 0;
    /// false drops the task gradient from the descent direction (the losses are still recorded).
    bool use_task_gradient = true;

    /// Throws std::invalid_argument; `n_nodes` is used to check the filter.
    void validate(Index n_nodes) const;
};

/// Losses are measured at the iterate the step starts from; dirichlet_energy at the iterate it produces.
struct TraceRecord
{
    int step = 0;
    double task_loss = 0.0;
    double spec_loss = 0.0;
    double joint_loss = 0.0;
    double grad_norm_pre = 0.0;
    double grad_norm_post = 0.0;
    double dirichlet_energy = 0.0;
};

using TrainTrace = std::vector<TraceRecord>;

enum class RunStatus
{
    completed,
    stop_loss_reached,
    diverged,
};

std::string to_string(RunStatus s);

struct TrainResult
{
    TrainTrace trace;
    ParameterMatrix theta;
    RunStatus status = RunStatus::completed;
    std::string diagnostic;
};

/// Loss above which a run is declared diverged.
inline constexpr double kDivergenceLoss = 1e12;

/// Thrown by step() on a non-finite gradient or iterate.
class NonFiniteError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// U g(Lambda) U^T applied to the task gradient.
MatrixXd filtered_task_grad(const SpectralBasis& basis, const FilterSpec& filter, const MatrixXd& task_grad);

struct Direction
{
    MatrixXd value;
    double norm_pre = 0.0;
    double norm_post = 0.0;
};

/**
 * Descent direction for one step.
 *
 * task_gradient target:  filter(task_grad) + lambda * 2 L Theta
 * total_gradient target: filter(task_grad + lambda * 2 L Theta)
 *
 * norm_pre / norm_post are the Frobenius norms of whatever passes through the filter.
 */
Direction descent_direction(const ParameterMatrix& theta, const SpectralBasis& basis, const ParameterGraph& g,
                            const OptimizerConfig& cfg, const MatrixXd& task_grad);

/// Theta - eta * descent_direction(...).
ParameterMatrix step(const ParameterMatrix& theta, const SpectralBasis& basis, const ParameterGraph& g,
                     const OptimizerConfig& cfg, const MatrixXd& task_grad);

/// Runs up to cfg.max_steps; the basis is taken from `g` once, before the first step.
TrainResult train(const ToyTask& task, const ParameterGraph& g, const OptimizerConfig& cfg,
                  const ParameterMatrix& theta0);

/// Same as above with a precomputed basis of g.
TrainResult train(const ToyTask& task, const ParameterGraph& g, const SpectralBasis& basis,
                  const OptimizerConfig& cfg, const ParameterMatrix& theta0);

} // namespace specopt
