/*
 * This code is part of cpdil.
 *
 * (C) Copyright cpdil contributors 2026.
 *
 * This code is licensed under the Apache License, Version 2.0. You may
 * obtain a copy of this license in the LICENSE.txt file in the root directory
 * of this source tree or at http://www.apache.org/licenses/LICENSE-2.0.
 *
 * Any modifications or derivative works of this code must retain this
 * copyright notice, and modified files need to carry a notice indicating
 * that they have been altered from the originals.
 */

#ifndef CPDIL_MATRIX_CORE_HPP
#define CPDIL_MATRIX_CORE_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cpdil/errors.hpp"

namespace cpdil {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

//=========================================================================
// Tolerances
//=========================================================================

// eq_tol: relative comparison tolerance, scaled by max(||.||_F, 1).
// rank_tol: absolute eigenvalue threshold for rank decisions.
struct ToleranceProfile {
  double eq_tol = 1e-9;
  double rank_tol = 1e-10;
};

// ||a - b||_F / max(1, ||b||_F)
inline double rel_residual(const CMatrix& a, const CMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw input_error("rel_residual: shape mismatch " + std::to_string(a.rows()) + "x" +
                      std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                      std::to_string(b.cols()));
  return (a - b).norm() / std::max(1.0, b.norm());
}

inline bool approx_equal(const CMatrix& a, const CMatrix& b, const ToleranceProfile& tol = {}) {
  return rel_residual(a, b) <= tol.eq_tol;
}

inline CMatrix cidentity(Eigen::Index n) { return CMatrix::Identity(n, n); }

//=========================================================================
// Kronecker products
//=========================================================================

// Kronecker product with row-major pair convention: (a (x) b) maps
// e_i (x) e_j to (a e_i) (x) (b e_j); entry ((ia,ib),(ja,jb)) = a(ia,ja) b(ib,jb).
inline CMatrix tensor(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index ia = 0; ia < a.rows(); ++ia)
    for (Eigen::Index ja = 0; ja < a.cols(); ++ja)
      out.block(ia * b.rows(), ja * b.cols(), b.rows(), b.cols()) = a(ia, ja) * b;
  return out;
}

inline CMatrix tensor(const std::vector<CMatrix>& factors) {
  CMatrix out = CMatrix::Identity(1, 1);
  for (const auto& f : factors) out = tensor(out, f);
  return out;
}

//=========================================================================
// Norms and classification
//=========================================================================

// Largest singular value via the Hermitian eigenproblem of m* m.
inline double op_norm(const CMatrix& m) {
  if (m.rows() == 0 || m.cols() == 0) return 0.0;
  const CMatrix g = (m.cols() <= m.rows()) ? CMatrix(m.adjoint() * m) : CMatrix(m * m.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(g, Eigen::EigenvaluesOnly);
  double lmax = es.eigenvalues().maxCoeff();
  return std::sqrt(std::max(0.0, lmax));
}

struct ClassifyReport {
  bool isometry = false;
  bool coisometry = false;
  bool unitary = false;
  bool contraction = false;
  double isometry_residual = 0.0;    // ||m*m - I|| relative
  double coisometry_residual = 0.0;  // ||m m* - I|| relative
  double contraction_excess = 0.0;   // max(0, sigma_max - 1)
};

inline ClassifyReport classify(const CMatrix& m, const ToleranceProfile& tol = {}) {
  ClassifyReport r;
  r.isometry_residual = rel_residual(m.adjoint() * m, cidentity(m.cols()));
  r.coisometry_residual = rel_residual(m * m.adjoint(), cidentity(m.rows()));
  r.contraction_excess = std::max(0.0, op_norm(m) - 1.0);
  r.isometry = r.isometry_residual <= tol.eq_tol;
  r.coisometry = r.coisometry_residual <= tol.eq_tol;
  r.unitary = r.isometry && r.coisometry;
  r.contraction = r.contraction_excess <= tol.eq_tol;
  return r;
}

//=========================================================================
// PSD square roots and defects
//=========================================================================

// Hermitian PSD square root with negative-clamp. Eigenvalues below
// -neg_tol abort; values in [-neg_tol, 0] are clamped to zero.
inline CMatrix psd_sqrt(const CMatrix& h, double neg_tol, const char* who = "psd_sqrt") {
  CMatrix sym = 0.5 * (h + h.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(sym);
  Eigen::VectorXd ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < -neg_tol)
      throw domain_error(std::string(who) + ": matrix is not PSD, eigenvalue " +
                         std::to_string(ev(i)));
    ev(i) = std::sqrt(std::max(0.0, ev(i)));
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

// Defect operator (I - t*t)^{1/2} of a contraction.
inline CMatrix defect(const CMatrix& t, const ToleranceProfile& tol = {}) {
  double sv = op_norm(t);
  if (sv > 1.0 + tol.eq_tol)
    throw domain_error("defect: not a contraction, largest singular value " + std::to_string(sv));
  CMatrix h = cidentity(t.cols()) - t.adjoint() * t;
  // The contraction gate bounds eigenvalues below by about -2 eq_tol.
  return psd_sqrt(h, 4.0 * tol.eq_tol + tol.rank_tol, "defect");
}

//=========================================================================
// Gram quotients (Hausdorff completion at finite dimension)
//=========================================================================

struct GramQuotient {
  CMatrix gram;    // the input Hermitian PSD matrix
  Eigen::Index dim = 0;
  CMatrix factor;  // dim x n, factor* factor = gram; rows = quotient coordinates
};

// Quotient of a semi-inner-product space by its null vectors, by Hermitian
// eigen-decomposition. dim counts eigenvalues above rank_tol.
inline GramQuotient gram_quotient(const CMatrix& gram, const ToleranceProfile& tol = {}) {
  if (gram.rows() != gram.cols()) throw input_error("gram_quotient: matrix not square");
  if (rel_residual(gram, gram.adjoint()) > tol.eq_tol)
    throw domain_error("gram_quotient: matrix is not Hermitian within tolerance");
  CMatrix sym = 0.5 * (gram + gram.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(sym);
  const Eigen::VectorXd ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev(i) < -tol.rank_tol)
      throw domain_error("gram_quotient: indefinite gram, eigenvalue " + std::to_string(ev(i)));
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev(i) > tol.rank_tol) keep.push_back(i);
  GramQuotient q;
  q.gram = sym;
  q.dim = static_cast<Eigen::Index>(keep.size());
  q.factor.resize(q.dim, gram.rows());
  // Largest eigenvalues first for a reproducible coordinate order.
  std::reverse(keep.begin(), keep.end());
  for (Eigen::Index r = 0; r < q.dim; ++r)
    q.factor.row(r) = std::sqrt(ev(keep[static_cast<size_t>(r)])) *
                      es.eigenvectors().col(keep[static_cast<size_t>(r)]).adjoint();
  return q;
}

// Right inverse of the quotient factor on quotient coordinates:
// factor * pinv = I_dim. Valid because the factor has full row rank.
inline CMatrix factor_pinv(const GramQuotient& q) {
  if (q.dim == 0) return CMatrix(q.gram.rows(), 0);
  CMatrix ff = q.factor * q.factor.adjoint();
  return q.factor.adjoint() * ff.inverse();
}

//=========================================================================
// Small helpers
//=========================================================================

// Orthonormal columns spanning the range of m (rank decided by s > rank_tol).
inline CMatrix range_basis(const CMatrix& m, double rank_tol) {
  if (m.cols() == 0 || m.rows() == 0) return CMatrix(m.rows(), 0);
  Eigen::JacobiSVD<CMatrix> svd(m, Eigen::ComputeThinU);
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > rank_tol) ++r;
  return svd.matrixU().leftCols(r);
}

// Extend the orthonormal columns of b to a full orthonormal basis.
inline CMatrix orth_complement(const CMatrix& b) {
  Eigen::Index n = b.rows();
  CMatrix proj = cidentity(n) - b * b.adjoint();
  return range_basis(proj, 1e-8);
}

// Incremental modified Gram-Schmidt: orthogonalize cols against basis
// (orthonormal columns) and against each other; survivors are appended to
// basis. Returns the number of appended columns.
inline Eigen::Index grow_orthonormal_basis(CMatrix& basis, const CMatrix& cols,
                                           double drop_tol = 1e-10) {
  if (cols.cols() == 0) return 0;
  std::vector<CVector> added;
  for (Eigen::Index j = 0; j < cols.cols(); ++j) {
    CVector v = cols.col(j);
    for (int pass = 0; pass < 2; ++pass) {
      if (basis.cols() > 0) v -= basis * (basis.adjoint() * v);
      for (const auto& w : added) v -= w * w.dot(v);
    }
    double nrm = v.norm();
    if (nrm > drop_tol) added.push_back(v / nrm);
  }
  if (!added.empty()) {
    CMatrix nb(basis.rows(), basis.cols() + static_cast<Eigen::Index>(added.size()));
    nb.leftCols(basis.cols()) = basis;
    for (size_t k = 0; k < added.size(); ++k)
      nb.col(basis.cols() + static_cast<Eigen::Index>(k)) = added[k];
    basis = std::move(nb);
  }
  return static_cast<Eigen::Index>(added.size());
}

} // namespace cpdil

#endif
