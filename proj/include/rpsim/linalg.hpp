#pragma once

#include <algorithm>
#include <cmath>
#include <complex>

#include <Eigen/Dense>

#include "rpsim/errors.hpp"

namespace rpsim {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr Complex kI{0.0, 1.0};

inline Matrix identity(Eigen::Index dim) { return Matrix::Identity(dim, dim); }

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline double real_trace(const Matrix& m) { return m.trace().real(); }

// Tr{A B} without forming the product.
inline Complex trace_of_product(const Matrix& a, const Matrix& b) {
  return (a.transpose().array() * b.array()).sum();
}

inline Matrix commutator(const Matrix& a, const Matrix& b) { return a * b - b * a; }

// Largest entrywise |a_ij - b_ij|.
inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.size() == 0) return 0.0;
  return (a - b).cwiseAbs().maxCoeff();
}

inline double max_abs(const Matrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

inline double hermiticity_defect(const Matrix& m) { return max_abs_diff(m, m.adjoint()); }

inline Matrix hermitian_part(const Matrix& m) { return 0.5 * (m + m.adjoint()); }

inline void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0)
    throw InputError(std::string(what) + " must be a non-empty square matrix");
}

inline void require_same_dim(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InputError(std::string("dimension mismatch: ") + what);
}

inline Eigen::VectorXd hermitian_eigenvalues(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

inline double min_eigenvalue(const Matrix& m) { return hermitian_eigenvalues(m).minCoeff(); }

// Largest |eigenvalue| of a Hermitian matrix.
inline double spectral_norm_hermitian(const Matrix& m) {
  auto ev = hermitian_eigenvalues(m);
  return std::max(std::abs(ev.minCoeff()), std::abs(ev.maxCoeff()));
}

// exp(-i H t) for Hermitian H via its eigendecomposition.
inline Matrix unitary_propagator(const Matrix& hamiltonian, double t) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(hamiltonian));
  const auto& v = es.eigenvectors();
  Vector phases = (es.eigenvalues().cast<Complex>() * (-kI * t)).array().exp().matrix();
  return v * phases.asDiagonal() * v.adjoint();
}

}  // namespace rpsim
