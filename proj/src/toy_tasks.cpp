#include "specopt/toy_tasks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

namespace specopt
{

namespace
{

MatrixXd gaussian_matrix(Index rows, Index cols, double scale, std::mt19937_64& rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    MatrixXd m(rows, cols);
    // fill row by row so the draw order is independent of storage order
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j)
            m(i, j) = scale * normal(rng);
    return m;
}

std::vector<Index> seeded_prefix(Index total, Index keep, std::mt19937_64& rng)
{
    std::vector<Index> idx(static_cast<std::size_t>(total));
    std::iota(idx.begin(), idx.end(), Index(0));
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(static_cast<std::size_t>(keep));
    std::sort(idx.begin(), idx.end());
    return idx;
}

nlohmann::json matrix_rows(const MatrixXd& m)
{
    nlohmann::json rows = nlohmann::json::array();
    for (Index i = 0; i < m.rows(); ++i)
    {
        nlohmann::json row = nlohmann::json::array();
        for (Index j = 0; j < m.cols(); ++j)
            row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace

void ToyTask::check_shape(const ParameterMatrix& theta) const
{
    if (theta.rows() != n_nodes() || theta.cols() != dim())
        throw std::invalid_argument("parameter matrix is " + std::to_string(theta.rows()) + "x" +
                                    std::to_string(theta.cols()) + ", task expects " + std::to_string(n_nodes()) +
                                    "x" + std::to_string(dim()));
}

ParameterMatrix random_parameters(Index rows, Index cols, double scale, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    return gaussian_matrix(rows, cols, scale, rng);
}

ParameterMatrix gen_smooth_signal(const SpectralBasis& basis, const SmoothSignalSpec& spec, Index dim,
                                  std::uint64_t seed)
{
    const Index n = basis.size();
    if (spec.cutoff < 1 || spec.cutoff > n)
        throw std::invalid_argument("smooth signal cutoff K=" + std::to_string(spec.cutoff) + " must lie in [1, " +
                                    std::to_string(n) + "]");
    if (dim < 1)
        throw std::invalid_argument("smooth signal width must be >= 1");
    std::mt19937_64 rng(seed);
    MatrixXd coeffs = MatrixXd::Zero(n, dim);
    coeffs.topRows(spec.cutoff) = gaussian_matrix(spec.cutoff, dim, spec.scale, rng);
    return basis.eigenvectors * coeffs;
}

// ---------------------------------------------------------------------------
// NodeRegression

NodeRegressionTask::NodeRegressionTask(std::vector<MatrixXd> probes, std::vector<VectorXd> targets)
    : probes_(std::move(probes))
    , targets_(std::move(targets))
{
    if (probes_.empty() || probes_.size() != targets_.size())
        throw std::invalid_argument("node regression needs one probe block and one target vector per node");
    dim_ = probes_.front().cols();
    if (dim_ < 1)
        throw std::invalid_argument("node regression needs d >= 1");
    for (std::size_t i = 0; i < probes_.size(); ++i)
    {
        if (probes_[i].cols() != dim_ || probes_[i].rows() != targets_[i].size())
            throw std::invalid_argument("node " + std::to_string(i) + " has inconsistent probe/target shapes");
        if (probes_[i].rows() < 1)
            throw std::invalid_argument("node " + std::to_string(i) + " retains no observations");
        total_ += probes_[i].rows();
    }
}

TaskEval NodeRegressionTask::evaluate(const ParameterMatrix& theta) const
{
    check_shape(theta);
    const double inv_m = 1.0 / static_cast<double>(total_);
    TaskEval out{0.0, MatrixXd::Zero(theta.rows(), theta.cols())};
    for (Index i = 0; i < n_nodes(); ++i)
    {
        const VectorXd residual = probes_[i] * theta.row(i).transpose() - targets_[i];
        out.loss += residual.squaredNorm();
        out.gradient.row(i) = (2.0 * inv_m) * (probes_[i].transpose() * residual).transpose();
    }
    out.loss *= inv_m;
    return out;
}

double NodeRegressionTask::max_curvature() const
{
    double worst = 0.0;
    for (const auto& a : probes_)
    {
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(a.transpose() * a, Eigen::EigenvaluesOnly);
        worst = std::max(worst, es.eigenvalues().maxCoeff());
    }
    return 2.0 * worst / static_cast<double>(total_);
}

nlohmann::json NodeRegressionTask::dump() const
{
    nlohmann::json nodes = nlohmann::json::array();
    for (std::size_t i = 0; i < probes_.size(); ++i)
    {
        nodes.push_back({{"probes", matrix_rows(probes_[i])},
                         {"targets", std::vector<double>(targets_[i].data(), targets_[i].data() + targets_[i].size())}});
    }
    return {{"type", "node_regression"}, {"seed", seed},   {"noise_sd", noise_sd}, {"sample_fraction", sample_fraction},
            {"n", n_nodes()},            {"d", dim()},     {"nodes", std::move(nodes)}};
}

Index retained_count(double sample_fraction, Index total)
{
    if (!(sample_fraction > 0.0) || sample_fraction > 1.0)
        throw std::invalid_argument("sample_fraction must lie in (0, 1]");
    // small slack so that e.g. 0.6 * 10 does not round up to 7
    const auto keep = static_cast<Index>(std::ceil(sample_fraction * static_cast<double>(total) - 1e-9));
    if (keep < 1)
        throw std::invalid_argument("sample_fraction retains zero observations");
    return std::min(keep, total);
}

NodeRegressionTask node_regression_task(const ParameterMatrix& ground_truth, double noise_sd, Index observations,
                                        double sample_fraction, std::uint64_t seed)
{
    if (observations < 1)
        throw std::invalid_argument("need at least one observation per node");
    if (!std::isfinite(noise_sd) || noise_sd < 0.0)
        throw std::invalid_argument("noise_sd must be finite and >= 0");
    const Index keep = retained_count(sample_fraction, observations);
    const Index n = ground_truth.rows();
    const Index d = ground_truth.cols();

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<MatrixXd> probes;
    std::vector<VectorXd> targets;
    for (Index i = 0; i < n; ++i)
    {
        MatrixXd a = gaussian_matrix(observations, d, 1.0, rng);
        a.rowwise().normalize();
        VectorXd y = a * ground_truth.row(i).transpose();
        for (Index r = 0; r < observations; ++r)
            y(r) += noise_sd * normal(rng);

        const auto kept = seeded_prefix(observations, keep, rng);
        MatrixXd a_kept(keep, d);
        VectorXd y_kept(keep);
        for (Index r = 0; r < keep; ++r)
        {
            a_kept.row(r) = a.row(kept[r]);
            y_kept(r) = y(kept[r]);
        }
        probes.push_back(std::move(a_kept));
        targets.push_back(std::move(y_kept));
    }
    NodeRegressionTask task(std::move(probes), std::move(targets));
    task.seed = seed;
    task.noise_sd = noise_sd;
    task.sample_fraction = sample_fraction;
    return task;
}

// ---------------------------------------------------------------------------
// TinyNet

TinyNetTask::TinyNetTask(TinyNetWidths widths, MatrixXd inputs, std::vector<Index> labels)
    : widths_(widths)
    , inputs_(std::move(inputs))
    , labels_(std::move(labels))
{
    if (widths_.in < 1 || widths_.hidden < 1 || widths_.out < 2)
        throw std::invalid_argument("tiny net widths need in >= 1, hidden >= 1, out >= 2");
    if (inputs_.cols() != widths_.in)
        throw std::invalid_argument("tiny net inputs have the wrong width");
    if (inputs_.rows() < 1 || static_cast<Index>(labels_.size()) != inputs_.rows())
        throw std::invalid_argument("tiny net needs one label per sample and at least one sample");
    for (Index y : labels_)
        if (y < 0 || y >= widths_.out)
            throw std::invalid_argument("tiny net label out of range");
}

MatrixXd TinyNetTask::forward_hidden(const ParameterMatrix& theta) const
{
    const auto w1 = theta.leftCols(widths_.in); // hidden x in
    return (inputs_ * w1.transpose()).array().tanh().matrix();
}

TaskEval TinyNetTask::evaluate(const ParameterMatrix& theta) const
{
    check_shape(theta);
    const Index s = n_samples();
    const auto w2 = theta.rightCols(widths_.out).transpose(); // out x hidden

    const MatrixXd h = forward_hidden(theta); // s x hidden
    MatrixXd z = h * w2.transpose();          // s x out

    // softmax cross-entropy, averaged over samples; z becomes dL/dz in place
    double loss = 0.0;
    for (Index r = 0; r < s; ++r)
    {
        const double zmax = z.row(r).maxCoeff();
        const double lse = zmax + std::log((z.row(r).array() - zmax).exp().sum());
        const Index y = labels_[r];
        loss += lse - z(r, y);
        z.row(r) = (z.row(r).array() - lse).exp().matrix();
        z(r, y) -= 1.0;
    }
    const double inv_s = 1.0 / static_cast<double>(s);
    loss *= inv_s;
    z *= inv_s;

    const MatrixXd dw2 = z.transpose() * h;                                   // out x hidden
    const MatrixXd da = ((z * w2).array() * (1.0 - h.array().square())).matrix(); // s x hidden
    const MatrixXd dw1 = da.transpose() * inputs_;                            // hidden x in

    TaskEval out{loss, MatrixXd(theta.rows(), theta.cols())};
    out.gradient.leftCols(widths_.in) = dw1;
    out.gradient.rightCols(widths_.out) = dw2.transpose();
    return out;
}

double TinyNetTask::accuracy(const ParameterMatrix& theta) const
{
    check_shape(theta);
    const MatrixXd z = forward_hidden(theta) * theta.rightCols(widths_.out);
    Index correct = 0;
    for (Index r = 0; r < n_samples(); ++r)
    {
        Index arg = 0;
        z.row(r).maxCoeff(&arg);
        correct += (arg == labels_[r]) ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(n_samples());
}

nlohmann::json TinyNetTask::dump() const
{
    return {{"type", "tiny_net"},
            {"dataset_seed", dataset_seed},
            {"sample_fraction", sample_fraction},
            {"widths", {widths_.in, widths_.hidden, widths_.out}},
            {"sample_indices", sample_indices},
            {"inputs", matrix_rows(inputs_)},
            {"labels", labels_}};
}

TinyNetTask tiny_net_task(const TinyNetWidths& widths, std::uint64_t dataset_seed, double sample_fraction,
                          Index samples)
{
    if (samples < 1)
        throw std::invalid_argument("tiny net needs at least one sample");
    if (widths.in < 1 || widths.out < 2)
        throw std::invalid_argument("tiny net widths need in >= 1 and out >= 2");
    const Index keep = retained_count(sample_fraction, samples);

    std::mt19937_64 rng(dataset_seed);
    const MatrixXd centers = gaussian_matrix(widths.out, widths.in, 1.5, rng);
    const MatrixXd jitter = gaussian_matrix(samples, widths.in, 0.6, rng);
    MatrixXd full(samples, widths.in);
    std::vector<Index> full_labels(static_cast<std::size_t>(samples));
    for (Index r = 0; r < samples; ++r)
    {
        const Index y = r % widths.out;
        full_labels[r] = y;
        full.row(r) = centers.row(y) + jitter.row(r);
    }

    const auto kept = seeded_prefix(samples, keep, rng);
    MatrixXd inputs(keep, widths.in);
    std::vector<Index> labels;
    for (Index r = 0; r < keep; ++r)
    {
        inputs.row(r) = full.row(kept[r]);
        labels.push_back(full_labels[kept[r]]);
    }
    TinyNetTask task(widths, std::move(inputs), std::move(labels));
    task.sample_indices = kept;
    task.dataset_seed = dataset_seed;
    task.sample_fraction = sample_fraction;
    return task;
}

} // namespace specopt
