#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "specopt/types.hpp"

namespace specopt
{

using Index = Eigen::Index;

template <typename Scalar>
struct WeightedEdge
{
    Index i{};
    Index j{};
    Scalar w{};
};

/**
 * Weighted undirected graph over parameter nodes.
 *
 * Owns the symmetric weight matrix W together with the derived degree matrix D
 * and the combinatorial Laplacian L = D - W. Instances are immutable once built;
 * every factory validates W (symmetric, nonnegative, zero diagonal).
 */
template <typename Scalar>
class ParameterGraphT
{
  public:
    using MatrixType = Matrix<Scalar>;

    /// Builds a graph from an explicit weight matrix. Throws std::invalid_argument on a malformed W.
    static ParameterGraphT from_weights(MatrixType weights)
    {
        const Index n = weights.rows();
        if (n < 1 || weights.cols() != n)
            throw std::invalid_argument("weight matrix must be square with at least one node");
        for (Index i = 0; i < n; ++i)
        {
            if (weights(i, i) != Scalar(0))
                throw std::invalid_argument("weight matrix diagonal must be zero (node " + std::to_string(i) + ")");
            for (Index j = 0; j < n; ++j)
            {
                const Scalar w = weights(i, j);
                if (!std::isfinite(static_cast<double>(w)) || w < Scalar(0))
                    throw std::invalid_argument("weights must be finite and nonnegative");
                if (w != weights(j, i))
                    throw std::invalid_argument("weight matrix must be exactly symmetric");
            }
        }
        return ParameterGraphT(std::move(weights));
    }

    /// n nodes, undirected edges (i, j, w) with i != j and w > 0; each unordered pair at most once.
    static ParameterGraphT from_edge_list(Index n, const std::vector<WeightedEdge<Scalar>>& edges)
    {
        if (n < 1)
            throw std::invalid_argument("graph needs at least one node");
        MatrixType weights = MatrixType::Zero(n, n);
        std::set<std::pair<Index, Index>> seen;
        for (const auto& e : edges)
        {
            if (e.i < 0 || e.j < 0 || e.i >= n || e.j >= n)
                throw std::invalid_argument("edge (" + std::to_string(e.i) + ", " + std::to_string(e.j) +
                                            ") has an out-of-range node index");
            if (e.i == e.j)
                throw std::invalid_argument("self-loop on node " + std::to_string(e.i));
            if (!(e.w > Scalar(0)) || !std::isfinite(static_cast<double>(e.w)))
                throw std::invalid_argument("edge weight must be positive and finite");
            const auto key = std::minmax(e.i, e.j);
            if (!seen.insert(key).second)
                throw std::invalid_argument("duplicate edge (" + std::to_string(key.first) + ", " +
                                            std::to_string(key.second) + ")");
            weights(e.i, e.j) = e.w;
            weights(e.j, e.i) = e.w;
        }
        return ParameterGraphT(std::move(weights));
    }

    Index n_nodes() const { return weights_.rows(); }
    const MatrixType& weights() const { return weights_; }
    const MatrixType& degree() const { return degree_; }
    const MatrixType& laplacian() const { return laplacian_; }

    /// Edges with i < j, in row-major order.
    std::vector<WeightedEdge<Scalar>> edges() const
    {
        std::vector<WeightedEdge<Scalar>> out;
        for (Index i = 0; i < n_nodes(); ++i)
            for (Index j = i + 1; j < n_nodes(); ++j)
                if (weights_(i, j) > Scalar(0))
                    out.push_back({i, j, weights_(i, j)});
        return out;
    }

  private:
    explicit ParameterGraphT(MatrixType weights)
        : weights_(std::move(weights))
    {
        degree_ = weights_.rowwise().sum().asDiagonal();
        laplacian_ = degree_ - weights_;
    }

    MatrixType weights_;
    MatrixType degree_;
    MatrixType laplacian_;
};

using ParameterGraph = ParameterGraphT<double>;
using Edge = WeightedEdge<double>;

/**
 * Layered structural prior: nodes of one layer are fully connected at intra_w,
 * nodes of adjacent layers are fully connected at inter_w. Zero weights leave
 * the corresponding pairs unconnected.
 */
template <typename Scalar>
ParameterGraphT<Scalar> layer_chain_graph(const std::vector<Index>& group_sizes, Scalar intra_w, Scalar inter_w)
{
    if (group_sizes.empty())
        throw std::invalid_argument("layer_chain_graph needs at least one layer");
    if (intra_w < Scalar(0) || inter_w < Scalar(0))
        throw std::invalid_argument("layer weights must be nonnegative");
    for (Index s : group_sizes)
        if (s < 1)
            throw std::invalid_argument("every layer needs at least one node");

    std::vector<Index> offsets(group_sizes.size() + 1, 0);
    std::partial_sum(group_sizes.begin(), group_sizes.end(), offsets.begin() + 1);
    const Index n = offsets.back();

    Matrix<Scalar> w = Matrix<Scalar>::Zero(n, n);
    for (std::size_t g = 0; g < group_sizes.size(); ++g)
    {
        const Index begin = offsets[g];
        const Index size = group_sizes[g];
        w.block(begin, begin, size, size).setConstant(intra_w);
        if (g + 1 < group_sizes.size())
        {
            const Index next = offsets[g + 1];
            const Index next_size = group_sizes[g + 1];
            w.block(begin, next, size, next_size).setConstant(inter_w);
            w.block(next, begin, next_size, size).setConstant(inter_w);
        }
    }
    w.diagonal().setZero();
    return ParameterGraphT<Scalar>::from_weights(std::move(w));
}

/**
 * Gaussian-kernel k-nearest-neighbour graph over the rows of `vectors`.
 *
 * Candidate weight w_ij = exp(-|v_i - v_j|^2 / (2 sigma^2)). The pair is kept
 * when either endpoint lists the other among its k nearest rows (union rule).
 * Distance ties are broken by the lower node index.
 */
template <typename Derived>
ParameterGraphT<typename Derived::Scalar> similarity_graph(const Eigen::MatrixBase<Derived>& vectors, Index k,
                                                           typename Derived::Scalar sigma)
{
    using Scalar = typename Derived::Scalar;
    const Index n = vectors.rows();
    if (n < 2)
        throw std::invalid_argument("similarity_graph needs at least two rows");
    if (k < 1 || k >= n)
        throw std::invalid_argument("neighbour count k must satisfy 1 <= k < N");
    if (!(sigma > Scalar(0)))
        throw std::invalid_argument("kernel width sigma must be positive");

    Matrix<Scalar> dist2 = Matrix<Scalar>::Zero(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j)
        {
            const Scalar d = (vectors.row(i) - vectors.row(j)).squaredNorm();
            dist2(i, j) = d;
            dist2(j, i) = d;
        }

    Matrix<Scalar> w = Matrix<Scalar>::Zero(n, n);
    std::vector<Index> order;
    for (Index i = 0; i < n; ++i)
    {
        order.clear();
        for (Index j = 0; j < n; ++j)
            if (j != i)
                order.push_back(j);
        std::stable_sort(order.begin(), order.end(),
                         [&](Index a, Index b) { return dist2(i, a) < dist2(i, b); });
        for (Index r = 0; r < k; ++r)
        {
            const Index j = order[static_cast<std::size_t>(r)];
            const Scalar kernel = std::exp(-dist2(i, j) / (Scalar(2) * sigma * sigma));
            w(i, j) = kernel;
            w(j, i) = kernel;
        }
    }
    return ParameterGraphT<Scalar>::from_weights(std::move(w));
}

struct Components
{
    Index count{};
    std::vector<Index> labels;
};

/// Components under edges with W_ij > 0. Labels are assigned in order of lowest member node.
template <typename Scalar>
Components connected_components(const ParameterGraphT<Scalar>& g)
{
    const Index n = g.n_nodes();
    Components out{0, std::vector<Index>(static_cast<std::size_t>(n), -1)};
    for (Index start = 0; start < n; ++start)
    {
        if (out.labels[start] >= 0)
            continue;
        std::queue<Index> frontier;
        frontier.push(start);
        out.labels[start] = out.count;
        while (!frontier.empty())
        {
            const Index u = frontier.front();
            frontier.pop();
            for (Index v = 0; v < n; ++v)
                if (g.weights()(u, v) > Scalar(0) && out.labels[v] < 0)
                {
                    out.labels[v] = out.count;
                    frontier.push(v);
                }
        }
        ++out.count;
    }
    return out;
}

} // namespace specopt
