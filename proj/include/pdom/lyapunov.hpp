#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "errors.hpp"
#include "matrix.hpp"
#include "numeric_policy.hpp"
#include "schur.hpp"

namespace pdom {

/**
 * @brief Bartels-Stewart solve of the Sylvester equation A X + X B = C.
 *
 * Both coefficients are brought to real Schur form; the transformed equation
 * is then solved block by block (blocks of size 1 or 2). Throws
 * SolvabilityError when A and -B share an eigenvalue.
 */
inline Matrix solve_sylvester(const Matrix& a, const Matrix& b, const Matrix& c,
                              const NumericPolicy& policy = {}) {
  if (!a.square() || !b.square() || c.rows() != a.rows() || c.cols() != b.rows())
    throw DimensionError("Sylvester dimensions: A " + a.shape() + ", B " + b.shape() + ", C " + c.shape());
  if (a.rows() == 0 || b.rows() == 0) return Matrix(a.rows(), b.rows());
  const SchurForm sa = real_schur(a, policy);
  const SchurForm sb = real_schur(b, policy);
  const Matrix& ta = sa.T;
  const Matrix& tb = sb.T;
  // Ta Y + Y Tb = F with F = Ua^T C Ub
  Matrix f = sa.Q.transpose() * c * sb.Q;
  Matrix y(c.rows(), c.cols());

  const auto ba = schur_blocks(ta);
  const auto bb = schur_blocks(tb);
  const double scale = std::max({ta.max_abs(), tb.max_abs(), 1e-300});

  // Ta is upper: row block i depends on row blocks below it; Tb upper: column block j on columns left.
  for (std::size_t ii = ba.size(); ii-- > 0;) {
    const auto& ri = ba[ii];
    for (const auto& cj : bb) {
      Matrix rhs = f.block(ri.start, cj.start, ri.size, cj.size);
      for (std::size_t r = ri.start + ri.size; r < ta.rows(); ++r)
        for (std::size_t i = 0; i < ri.size; ++i)
          for (std::size_t j = 0; j < cj.size; ++j)
            rhs(i, j) -= ta(ri.start + i, r) * y(r, cj.start + j);
      for (std::size_t l = 0; l < cj.start; ++l)
        for (std::size_t i = 0; i < ri.size; ++i)
          for (std::size_t j = 0; j < cj.size; ++j)
            rhs(i, j) -= y(ri.start + i, l) * tb(l, cj.start + j);
      // small Kronecker system: Taa Yij + Yij Tbb = rhs
      const std::size_t p = ri.size, q = cj.size;
      Matrix k(p * q, p * q);
      Vector v(p * q);
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < q; ++j) {
          const std::size_t row = i * q + j;
          v[row] = rhs(i, j);
          for (std::size_t l = 0; l < p; ++l) k(row, l * q + j) += ta(ri.start + i, ri.start + l);
          for (std::size_t l = 0; l < q; ++l) k(row, i * q + l) += tb(cj.start + l, cj.start + j);
        }
      LuDecomposition lu(k);
      double min_piv = std::numeric_limits<double>::infinity();
      if (!lu.singular()) {
        // reject near-singular blocks relative to the coefficient scale
        const double det = std::abs(lu.determinant());
        min_piv = std::pow(det, 1.0 / static_cast<double>(p * q));
      }
      if (lu.singular() || min_piv <= 1e-13 * scale)
        throw SolvabilityError("Sylvester operator is singular: A and -B share an eigenvalue");
      const Vector sol = lu.solve(v);
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < q; ++j) y(ri.start + i, cj.start + j) = sol[i * q + j];
    }
  }
  Matrix x = sa.Q * y * sb.Q.transpose();
  if (!x.all_finite()) throw SolvabilityError("Sylvester solution is not finite");
  return x;
}

/**
 * @brief Solves M^T X + X M = -Q for symmetric X.
 *
 * Requires M and -M^T to share no eigenvalue (no pair mu_i + mu_j = 0).
 */
inline SymmetricMatrix lyapunov_solve(const Matrix& m, const SymmetricMatrix& q, const NumericPolicy& policy = {}) {
  if (!m.square() || m.rows() != q.dim())
    throw DimensionError("Lyapunov dimensions: M " + m.shape() + ", Q " + std::to_string(q.dim()));
  const Matrix x = solve_sylvester(m.transpose(), m, -q.matrix(), policy);
  return SymmetricMatrix::symmetric_part(x);
}

/// Residual |M^T X + X M + Q|_F.
inline double lyapunov_residual(const Matrix& m, const SymmetricMatrix& x, const SymmetricMatrix& q) {
  return (m.transpose() * x.matrix() + x.matrix() * m + q.matrix()).frobenius_norm();
}

}  // namespace pdom
