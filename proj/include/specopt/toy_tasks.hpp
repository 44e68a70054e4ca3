#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"

#include "specopt/spectral.hpp"
#include "specopt/types.hpp"

namespace specopt
{

struct TaskEval
{
    double loss = 0.0;
    MatrixXd gradient;
};

/**
 * A differentiable objective over an N x d parameter matrix with an exact gradient.
 */
class ToyTask
{
  public:
    virtual ~ToyTask() = default;

    virtual Index n_nodes() const = 0;
    virtual Index dim() const = 0;

    virtual TaskEval evaluate(const ParameterMatrix& theta) const = 0;

    double loss(const ParameterMatrix& theta) const { return evaluate(theta).loss; }
    MatrixXd gradient(const ParameterMatrix& theta) const { return evaluate(theta).gradient; }

    /// Dataset snapshot for audit.
    virtual nlohmann::json dump() const = 0;

  protected:
    void check_shape(const ParameterMatrix& theta) const;
};

/// Low-frequency ground truth: K random spectral rows, zero above.
struct SmoothSignalSpec
{
    Index cutoff = 1;
    double scale = 1.0;
    double noise_sd = 0.0;
};

/// Theta* = U C with C(k, :) ~ N(0, scale^2) for k < cutoff and zero otherwise.
ParameterMatrix gen_smooth_signal(const SpectralBasis& basis, const SmoothSignalSpec& spec, Index dim,
                                  std::uint64_t seed);

/**
 * Per-node linear regression: node i sees rows a of `probes[i]` with targets
 * y = a . theta*_i + noise, and
 *   L(Theta) = (1/M) sum_i |A_i theta_i - y_i|^2
 * where M counts every retained observation.
 */
class NodeRegressionTask final : public ToyTask
{
  public:
    NodeRegressionTask(std::vector<MatrixXd> probes, std::vector<VectorXd> targets);

    Index n_nodes() const override { return static_cast<Index>(probes_.size()); }
    Index dim() const override { return dim_; }
    Index total_observations() const { return total_; }

    TaskEval evaluate(const ParameterMatrix& theta) const override;
    nlohmann::json dump() const override;

    const std::vector<MatrixXd>& probes() const { return probes_; }
    const std::vector<VectorXd>& targets() const { return targets_; }

    /// Largest Hessian eigenvalue of the task loss.
    double max_curvature() const;

    // provenance, only used by dump()
    std::uint64_t seed = 0;
    double noise_sd = 0.0;
    double sample_fraction = 1.0;

  private:
    std::vector<MatrixXd> probes_;
    std::vector<VectorXd> targets_;
    Index dim_ = 0;
    Index total_ = 0;
};

/// Number of items kept out of `total` for a sampling fraction in (0, 1].
Index retained_count(double sample_fraction, Index total);

NodeRegressionTask node_regression_task(const ParameterMatrix& ground_truth, double noise_sd, Index observations,
                                        double sample_fraction, std::uint64_t seed);

struct TinyNetWidths
{
    Index in = 2;
    Index hidden = 8;
    Index out = 3;
};

/**
 * One-hidden-layer tanh classifier with softmax cross-entropy.
 *
 * Node i is hidden unit i; its parameter row is [incoming weights (in),
 * outgoing weights (out)], so d = in + out. There are no bias terms.
 */
class TinyNetTask final : public ToyTask
{
  public:
    TinyNetTask(TinyNetWidths widths, MatrixXd inputs, std::vector<Index> labels);

    Index n_nodes() const override { return widths_.hidden; }
    Index dim() const override { return widths_.in + widths_.out; }
    const TinyNetWidths& widths() const { return widths_; }
    Index n_samples() const { return inputs_.rows(); }

    TaskEval evaluate(const ParameterMatrix& theta) const override;
    nlohmann::json dump() const override;

    double accuracy(const ParameterMatrix& theta) const;

    const MatrixXd& inputs() const { return inputs_; }
    const std::vector<Index>& labels() const { return labels_; }
    /// Indices of the retained samples within the full seeded dataset.
    std::vector<Index> sample_indices;
    std::uint64_t dataset_seed = 0;
    double sample_fraction = 1.0;

  private:
    MatrixXd forward_hidden(const ParameterMatrix& theta) const;

    TinyNetWidths widths_;
    MatrixXd inputs_;
    std::vector<Index> labels_;
};

/// Gaussian-blob classification set with `samples` points, subsampled by sample_fraction.
TinyNetTask tiny_net_task(const TinyNetWidths& widths, std::uint64_t dataset_seed, double sample_fraction,
                          Index samples = 96);

/// iid N(0, scale^2) entries.
ParameterMatrix random_parameters(Index rows, Index cols, double scale, std::uint64_t seed);

} // namespace specopt
