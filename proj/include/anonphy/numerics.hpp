#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "anonphy/errors.hpp"

namespace anonphy {

using cdouble = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

/// Largest entry magnitude, used to scale the hybrid absolute/relative tolerances.
template <typename Derived>
double max_magnitude(const Eigen::MatrixBase<Derived>& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
    return m.allFinite();
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
    if (!m.allFinite()) {
        throw std::invalid_argument(std::string(what) + ": non-finite entry");
    }
}

/// Tolerance `tol` scaled by max(1, largest magnitude).
template <typename Derived>
double scaled_tolerance(const Eigen::MatrixBase<Derived>& m, double tol) {
    return tol * std::max(1.0, max_magnitude(m));
}

inline bool is_hermitian(const ComplexMatrix& a, double tol = 1e-10) {
    if (a.rows() != a.cols()) return false;
    return max_magnitude(ComplexMatrix(a - a.adjoint())) <= scaled_tolerance(a, tol);
}

/// Moore-Penrose pseudo-inverse through the SVD. Singular values below
/// 1e-12 * sigma_max are treated as zero. Tall inputs must have full column
/// rank; anything else is rejected with the estimated rank attached.
inline ComplexMatrix pseudo_inverse(const ComplexMatrix& m) {
    if (m.rows() == 0 || m.cols() == 0) {
        throw std::invalid_argument("pseudo_inverse: empty matrix");
    }
    require_finite(m, "pseudo_inverse");

    Eigen::JacobiSVD<ComplexMatrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const RealVector& sv = svd.singularValues();
    const double cutoff = 1e-12 * (sv.size() > 0 ? sv(0) : 0.0);
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > cutoff) ++rank;
    }
    if (m.rows() >= m.cols() && rank < m.cols()) {
        throw RankDeficientError("pseudo_inverse: tall matrix is numerically rank deficient (rank " +
                                     std::to_string(rank) + " of " + std::to_string(m.cols()) + ")",
                                 rank);
    }
    RealVector inv = RealVector::Zero(sv.size());
    for (int i = 0; i < rank; ++i) inv(i) = 1.0 / sv(i);
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
}

struct HermitianEig {
    RealVector values;      // descending
    ComplexMatrix vectors;  // columns match `values`
};

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted descending.
inline HermitianEig hermitian_eig(const ComplexMatrix& a) {
    if (a.rows() != a.cols()) {
        throw std::invalid_argument("hermitian_eig: matrix is not square");
    }
    require_finite(a, "hermitian_eig");
    if (!is_hermitian(a, 1e-10)) {
        throw std::invalid_argument("hermitian_eig: matrix is not Hermitian");
    }
    const Eigen::Index n = a.rows();
    if (n == 0) return {};

    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(a);
    if (es.info() != Eigen::Success) {
        throw std::runtime_error("hermitian_eig: eigen-solver did not converge");
    }
    // Eigen returns ascending order.
    HermitianEig out;
    out.values = es.eigenvalues().reverse();
    out.vectors = es.eigenvectors().rowwise().reverse();
    return out;
}

/// Frobenius norm of a - b relative to max(1, |a|_F).
template <typename A, typename B>
double relative_residual(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
    return (a - b).norm() / std::max(1.0, a.norm());
}

}  // namespace anonphy
