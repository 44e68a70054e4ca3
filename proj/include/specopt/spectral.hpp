#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Jacobi>

#include "specopt/param_graph.hpp"
#include "specopt/types.hpp"

namespace specopt
{

/// Raised when the Jacobi sweeps run out before the off-diagonal mass is small enough.
class EigenSolverError : public std::runtime_error
{
  public:
    EigenSolverError(const std::string& what, double off_norm)
        : std::runtime_error(what)
        , off_norm_(off_norm)
    {
    }
    double off_norm() const { return off_norm_; }

  private:
    double off_norm_;
};

struct JacobiOptions
{
    double tol = 1e-12;
    int max_sweeps = 64;
};

/// Eigenpairs of a symmetric matrix: eigenvalue k pairs with column k of `eigenvectors`.
template <typename Scalar>
struct SymmetricEigenResult
{
    Vector<Scalar> eigenvalues;
    Matrix<Scalar> eigenvectors;
    int sweeps = 0;
    Scalar off_norm = 0;
};

/**
 * Graph Fourier basis of a Laplacian: L = U diag(eigenvalues) U^T.
 *
 * Eigenvalues are ascending and nonnegative, columns of U orthonormal. Each
 * column is sign-normalised so that its entry of largest magnitude is positive;
 * within a degenerate eigenspace the basis is otherwise arbitrary.
 */
template <typename Scalar>
struct SpectralBasisT
{
    Vector<Scalar> eigenvalues;
    Matrix<Scalar> eigenvectors;

    Index size() const { return eigenvalues.size(); }
};

using SpectralBasis = SpectralBasisT<double>;

/// Frequency-domain coefficients U^T Theta; row k belongs to eigenvalue k.
template <typename Scalar>
struct SpectralSignalT
{
    Matrix<Scalar> coeffs;
};

using SpectralSignal = SpectralSignalT<double>;

namespace detail
{

template <typename Scalar>
Scalar off_diagonal_norm(const Matrix<Scalar>& a)
{
    Scalar sum = 0;
    for (Index j = 0; j < a.cols(); ++j)
        for (Index i = 0; i < a.rows(); ++i)
            if (i != j)
                sum += a(i, j) * a(i, j);
    return std::sqrt(sum);
}

inline void require(bool ok, const std::string& what)
{
    if (!ok)
        throw std::invalid_argument(what);
}

} // namespace detail

/**
 * Cyclic Jacobi eigensolver for dense symmetric matrices.
 *
 * Sweeps over all (p, q) pairs in row order, annihilating each off-diagonal
 * entry with a plane rotation, until the off-diagonal Frobenius norm drops to
 * tol * |A|_F. Eigenpairs come back sorted by ascending eigenvalue.
 */
template <typename Derived>
SymmetricEigenResult<typename Derived::Scalar> symmetric_eigen(const Eigen::MatrixBase<Derived>& input,
                                                               JacobiOptions opts = {})
{
    using Scalar = typename Derived::Scalar;
    const Index n = input.rows();
    detail::require(n >= 1 && input.cols() == n, "eigensolver input must be a non-empty square matrix");
    detail::require(input.allFinite(), "eigensolver input must be finite");

    const Scalar scale = std::max(Scalar(1), input.cwiseAbs().maxCoeff());
    const Scalar asym = (input - input.transpose()).cwiseAbs().maxCoeff();
    if (asym > Scalar(1e-10) * scale)
        throw std::invalid_argument("eigensolver input is not symmetric (max |A - A^T| = " + std::to_string(asym) + ")");

    Matrix<Scalar> a = (input + input.transpose()) / Scalar(2);
    Matrix<Scalar> v = Matrix<Scalar>::Identity(n, n);
    const Scalar threshold = Scalar(opts.tol) * a.norm();

    SymmetricEigenResult<Scalar> result;
    Scalar off = detail::off_diagonal_norm(a);
    int sweep = 0;
    for (; off > threshold; ++sweep)
    {
        if (sweep >= opts.max_sweeps)
            throw EigenSolverError("Jacobi eigensolver did not converge after " + std::to_string(opts.max_sweeps) +
                                       " sweeps (off-diagonal norm " + std::to_string(static_cast<double>(off)) + ")",
                                   static_cast<double>(off));
        for (Index p = 0; p < n - 1; ++p)
            for (Index q = p + 1; q < n; ++q)
            {
                if (a(p, q) == Scalar(0))
                    continue;
                Eigen::JacobiRotation<Scalar> rot;
                if (!rot.makeJacobi(a, p, q))
                    continue;
                a.applyOnTheLeft(p, q, rot.adjoint());
                a.applyOnTheRight(p, q, rot);
                v.applyOnTheRight(p, q, rot);
                a(p, q) = Scalar(0);
                a(q, p) = Scalar(0);
            }
        off = detail::off_diagonal_norm(a);
    }

    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index(0));
    std::stable_sort(order.begin(), order.end(), [&](Index i, Index j) { return a(i, i) < a(j, j); });

    result.eigenvalues.resize(n);
    result.eigenvectors.resize(n, n);
    for (Index k = 0; k < n; ++k)
    {
        result.eigenvalues(k) = a(order[k], order[k]);
        result.eigenvectors.col(k) = v.col(order[k]);
    }
    result.sweeps = sweep;
    result.off_norm = off;
    return result;
}

/// Flips each column so that its largest-magnitude entry (first on ties) is positive.
template <typename Scalar>
void normalize_signs(Matrix<Scalar>& u)
{
    for (Index k = 0; k < u.cols(); ++k)
    {
        Index arg = 0;
        u.col(k).cwiseAbs().maxCoeff(&arg);
        if (u(arg, k) < Scalar(0))
            u.col(k) = -u.col(k);
    }
}

/**
 * Spectral basis of a graph Laplacian (or any symmetric PSD matrix).
 *
 * Round-off negatives are clamped to zero; an eigenvalue below
 * -1e-9 * max(1, |L|_F) means the input is not PSD and is rejected.
 */
template <typename Derived>
SpectralBasisT<typename Derived::Scalar> eigendecompose(const Eigen::MatrixBase<Derived>& laplacian,
                                                        JacobiOptions opts = {})
{
    using Scalar = typename Derived::Scalar;
    auto eig = symmetric_eigen(laplacian, opts);
    const Scalar floor = -Scalar(1e-9) * std::max(Scalar(1), laplacian.norm());
    if (eig.eigenvalues(0) < floor)
        throw std::invalid_argument("matrix is not positive semidefinite (eigenvalue " +
                                    std::to_string(static_cast<double>(eig.eigenvalues(0))) + ")");
    SpectralBasisT<Scalar> basis{eig.eigenvalues.cwiseMax(Scalar(0)), std::move(eig.eigenvectors)};
    normalize_signs(basis.eigenvectors);
    return basis;
}

template <typename Scalar>
SpectralBasisT<Scalar> eigendecompose(const ParameterGraphT<Scalar>& g, JacobiOptions opts = {})
{
    return eigendecompose(g.laplacian(), opts);
}

template <typename Scalar, typename Derived>
SpectralSignalT<Scalar> to_spectral(const SpectralBasisT<Scalar>& basis, const Eigen::MatrixBase<Derived>& theta)
{
    detail::require(theta.rows() == basis.size(), "parameter rows (" + std::to_string(theta.rows()) +
                                                       ") do not match basis size (" + std::to_string(basis.size()) + ")");
    return {basis.eigenvectors.transpose() * theta};
}

template <typename Scalar>
Matrix<Scalar> from_spectral(const SpectralBasisT<Scalar>& basis, const SpectralSignalT<Scalar>& signal)
{
    detail::require(signal.coeffs.rows() == basis.size(), "spectral rows (" + std::to_string(signal.coeffs.rows()) +
                                                              ") do not match basis size (" +
                                                              std::to_string(basis.size()) + ")");
    return basis.eigenvectors * signal.coeffs;
}

enum class FilterKind
{
    identity,
    ideal_lowpass,
    heat,
    tikhonov,
};

/**
 * Spectral gain g(lambda). Every variant satisfies 0 <= g <= 1 and is
 * nonincreasing in lambda:
 *   identity       g = 1
 *   ideal_lowpass  g = 1 for the `keep` lowest frequencies, 0 above
 *   heat           g = exp(-t lambda)
 *   tikhonov       g = 1 / (1 + t lambda)
 */
struct FilterSpec
{
    FilterKind kind = FilterKind::identity;
    Index keep = 0;
    double t = 0.0;

    static FilterSpec identity() { return {}; }
    static FilterSpec ideal_lowpass(Index k) { return {FilterKind::ideal_lowpass, k, 0.0}; }
    static FilterSpec heat(double t) { return {FilterKind::heat, 0, t}; }
    static FilterSpec tikhonov(double t) { return {FilterKind::tikhonov, 0, t}; }

    bool operator==(const FilterSpec&) const = default;
};

inline std::string to_string(FilterKind kind)
{
    switch (kind)
    {
    case FilterKind::identity:
        return "identity";
    case FilterKind::ideal_lowpass:
        return "ideal_lowpass";
    case FilterKind::heat:
        return "heat";
    case FilterKind::tikhonov:
        return "tikhonov";
    }
    return "unknown";
}

/// Throws std::invalid_argument when the filter cannot act on an n-node spectrum.
inline void validate_filter(const FilterSpec& f, Index n)
{
    switch (f.kind)
    {
    case FilterKind::identity:
        return;
    case FilterKind::ideal_lowpass:
        detail::require(f.keep >= 1, "ideal_lowpass needs keep >= 1 (keep = 0 removes every component)");
        detail::require(f.keep <= n, "ideal_lowpass keep (" + std::to_string(f.keep) + ") exceeds node count (" +
                                         std::to_string(n) + ")");
        return;
    case FilterKind::heat:
    case FilterKind::tikhonov:
        detail::require(std::isfinite(f.t) && f.t >= 0.0, to_string(f.kind) + " filter needs a finite t >= 0");
        return;
    }
}

template <typename Derived>
Vector<typename Derived::Scalar> filter_gains(const FilterSpec& f, const Eigen::MatrixBase<Derived>& eigenvalues)
{
    using Scalar = typename Derived::Scalar;
    const Index n = eigenvalues.size();
    validate_filter(f, n);
    detail::require((eigenvalues.array() >= Scalar(0)).all(), "filter gains need nonnegative eigenvalues");

    Vector<Scalar> g(n);
    switch (f.kind)
    {
    case FilterKind::identity:
        g.setOnes();
        break;
    case FilterKind::ideal_lowpass: {
        std::vector<Index> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), Index(0));
        std::stable_sort(order.begin(), order.end(),
                         [&](Index i, Index j) { return eigenvalues(i) < eigenvalues(j); });
        g.setZero();
        for (Index r = 0; r < f.keep; ++r)
            g(order[r]) = Scalar(1);
        break;
    }
    case FilterKind::heat:
        g = (-Scalar(f.t) * eigenvalues.array()).exp().matrix();
        break;
    case FilterKind::tikhonov:
        g = (Scalar(1) / (Scalar(1) + Scalar(f.t) * eigenvalues.array())).matrix();
        break;
    }
    return g;
}

/// U diag(g(lambda)) U^T X. The identity filter returns X untouched.
template <typename Scalar, typename Derived>
Matrix<Scalar> apply_filter(const SpectralBasisT<Scalar>& basis, const FilterSpec& f,
                            const Eigen::MatrixBase<Derived>& x)
{
    detail::require(x.rows() == basis.size(), "filter input rows (" + std::to_string(x.rows()) +
                                                  ") do not match basis size (" + std::to_string(basis.size()) + ")");
    const Vector<Scalar> gains = filter_gains(f, basis.eigenvalues);
    if (f.kind == FilterKind::identity)
        return x;
    return basis.eigenvectors * (gains.asDiagonal() * (basis.eigenvectors.transpose() * x));
}

/// sum_k lambda_k |row k of U^T X|^2, the Dirichlet energy evaluated in the frequency domain.
template <typename Scalar, typename Derived>
Scalar spectral_energy(const SpectralBasisT<Scalar>& basis, const Eigen::MatrixBase<Derived>& x)
{
    const SpectralSignalT<Scalar> hat = to_spectral(basis, x);
    return basis.eigenvalues.dot(hat.coeffs.rowwise().squaredNorm());
}

} // namespace specopt
