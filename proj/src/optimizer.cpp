#include "specopt/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace specopt
{

std::string to_string(RunStatus s)
{
    switch (s)
    {
    case RunStatus::completed:
        return "completed";
    case RunStatus::stop_loss_reached:
        return "stop_loss_reached";
    case RunStatus::diverged:
        return "diverged";
    }
    return "unknown";
}

void OptimizerConfig::validate(Index n_nodes) const
{
    if (!std::isfinite(eta) || eta <= 0.0)
        throw std::invalid_argument("learning rate eta must be finite and > 0");
    JointLossConfig{lambda}.validate();
    if (max_steps < 1)
        throw std::invalid_argument("max_steps must be >= 1");
    if (stop_loss && !std::isfinite(*stop_loss))
        throw std::invalid_argument("stop_loss must be finite");
    validate_filter(filter, n_nodes);
}

MatrixXd filtered_task_grad(const SpectralBasis& basis, const FilterSpec& filter, const MatrixXd& task_grad)
{
    return apply_filter(basis, filter, task_grad);
}

Direction descent_direction(const ParameterMatrix& theta, const SpectralBasis& basis, const ParameterGraph& g,
                            const OptimizerConfig& cfg, const MatrixXd& task_grad)
{
    if (task_grad.rows() != theta.rows() || task_grad.cols() != theta.cols())
        throw std::invalid_argument("task gradient shape does not match the parameter matrix");
    if (basis.size() != g.n_nodes())
        throw std::invalid_argument("spectral basis does not belong to this graph");
    if (!task_grad.allFinite())
        throw NonFiniteError("task gradient contains non-finite entries");

    const MatrixXd task_part = cfg.use_task_gradient ? task_grad : MatrixXd::Zero(theta.rows(), theta.cols());
    const JointLossConfig loss_cfg{cfg.lambda};

    Direction out;
    if (cfg.filter_target == FilterTarget::task_gradient)
    {
        out.norm_pre = task_part.norm();
        MatrixXd filtered = filtered_task_grad(basis, cfg.filter, task_part);
        out.norm_post = filtered.norm();
        out.value = cfg.lambda == 0.0 ? std::move(filtered)
                                      : MatrixXd(filtered + cfg.lambda * spectral_reg_grad(g, theta));
    }
    else
    {
        const MatrixXd total = joint_grad(task_part, g, theta, loss_cfg);
        out.norm_pre = total.norm();
        out.value = apply_filter(basis, cfg.filter, total);
        out.norm_post = out.value.norm();
    }
    if (!out.value.allFinite())
        throw NonFiniteError("descent direction contains non-finite entries");
    return out;
}

ParameterMatrix step(const ParameterMatrix& theta, const SpectralBasis& basis, const ParameterGraph& g,
                     const OptimizerConfig& cfg, const MatrixXd& task_grad)
{
    if (!std::isfinite(cfg.eta) || cfg.eta <= 0.0)
        throw std::invalid_argument("learning rate eta must be finite and > 0");
    return theta - cfg.eta * descent_direction(theta, basis, g, cfg, task_grad).value;
}

TrainResult train(const ToyTask& task, const ParameterGraph& g, const OptimizerConfig& cfg,
                  const ParameterMatrix& theta0)
{
    const SpectralBasis basis = eigendecompose(g);
    return train(task, g, basis, cfg, theta0);
}

TrainResult train(const ToyTask& task, const ParameterGraph& g, const SpectralBasis& basis,
                  const OptimizerConfig& cfg, const ParameterMatrix& theta0)
{
    cfg.validate(g.n_nodes());
    if (task.n_nodes() != g.n_nodes())
        throw std::invalid_argument("task has " + std::to_string(task.n_nodes()) + " nodes but the graph has " +
                                    std::to_string(g.n_nodes()));
    if (theta0.rows() != task.n_nodes() || theta0.cols() != task.dim())
        throw std::invalid_argument("initial parameters do not match the task dimensions");
    if (basis.size() != g.n_nodes())
        throw std::invalid_argument("spectral basis does not belong to this graph");

    TrainResult result;
    result.theta = theta0;
    result.trace.reserve(static_cast<std::size_t>(cfg.max_steps));

    for (int t = 1; t <= cfg.max_steps; ++t)
    {
        const TaskEval eval = task.evaluate(result.theta);
        TraceRecord rec;
        rec.step = t;
        rec.task_loss = eval.loss;
        rec.spec_loss = spectral_reg(g, result.theta);
        rec.joint_loss = rec.task_loss + cfg.lambda * rec.spec_loss;

        if (!std::isfinite(rec.joint_loss) || rec.joint_loss > kDivergenceLoss)
        {
            result.status = RunStatus::diverged;
            result.diagnostic = "joint loss " + std::to_string(rec.joint_loss) + " at step " + std::to_string(t);
            return result;
        }

        Direction dir;
        try
        {
            dir = descent_direction(result.theta, basis, g, cfg, eval.gradient);
        }
        catch (const NonFiniteError& e)
        {
            result.status = RunStatus::diverged;
            result.diagnostic = std::string(e.what()) + " at step " + std::to_string(t);
            return result;
        }

        ParameterMatrix next = result.theta - cfg.eta * dir.value;
        if (!next.allFinite())
        {
            result.status = RunStatus::diverged;
            result.diagnostic = "non-finite parameters after step " + std::to_string(t);
            return result;
        }
        result.theta = std::move(next);
        rec.grad_norm_pre = dir.norm_pre;
        rec.grad_norm_post = dir.norm_post;
        rec.dirichlet_energy = spectral_reg(g, result.theta);
        result.trace.push_back(rec);

        if (cfg.stop_loss && rec.joint_loss <= *cfg.stop_loss)
        {
            result.status = RunStatus::stop_loss_reached;
            break;
        }
    }
    return result;
}

} // namespace specopt
