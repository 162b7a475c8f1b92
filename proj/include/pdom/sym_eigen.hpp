#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "errors.hpp"
#include "matrix.hpp"
#include "numeric_policy.hpp"

namespace pdom {

struct SymEigen {
  Vector values;   ///< ascending
  Matrix vectors;  ///< orthogonal, column k pairs with values[k]
};

/**
 * @brief Symmetric eigendecomposition by cyclic Jacobi rotations.
 *
 * Sweeps until the off-diagonal mass drops below machine precision relative
 * to the Frobenius norm. Throws NumericalFailure past `max_sweeps`.
 */
inline SymEigen sym_eigen(const SymmetricMatrix& s, int max_sweeps = NumericPolicy{}.jacobi_max_sweeps) {
  const std::size_t n = s.dim();
  Matrix a = s.matrix();
  Matrix v = Matrix::identity(n);
  const double fro = a.frobenius_norm();

  auto off_norm = [&] {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += 2.0 * a(i, j) * a(i, j);
    return std::sqrt(off);
  };

  int sweep = 0;
  while (off_norm() > 1e-15 * fro && fro > 0.0) {
    if (++sweep > max_sweeps) throw NumericalFailure("Jacobi eigensolver did not converge");
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });

  SymEigen out{Vector(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

inline double lambda_max(const SymmetricMatrix& s) {
  return s.dim() ? sym_eigen(s).values.back() : -std::numeric_limits<double>::infinity();
}
inline double lambda_min(const SymmetricMatrix& s) {
  return s.dim() ? sym_eigen(s).values.front() : std::numeric_limits<double>::infinity();
}

/// Spectral norm of a symmetric matrix.
inline double spectral_norm(const SymmetricMatrix& s) {
  if (s.dim() == 0) return 0.0;
  const auto e = sym_eigen(s);
  return std::max(std::abs(e.values.front()), std::abs(e.values.back()));
}

/// Singular values of a general matrix, ascending (square roots of eig(M^T M)).
inline Vector singular_values(const Matrix& m) {
  const auto e = sym_eigen(SymmetricMatrix::symmetric_part(m.transpose() * m));
  Vector s(e.values.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::sqrt(std::max(0.0, e.values[i]));
  return s;
}

/// V f(Lambda) V^T for a scalar function applied to the spectrum.
template <typename F>
SymmetricMatrix spectral_map(const SymEigen& e, F&& f) {
  const std::size_t n = e.values.size();
  Matrix out(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const double fk = f(e.values[k]);
    if (fk == 0.0) continue;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) out(i, j) += fk * e.vectors(i, k) * e.vectors(j, k);
  }
  return SymmetricMatrix::symmetric_part(out);
}

/**
 * @brief Signature (negative, zero, positive) of a symmetric matrix.
 */
struct Inertia {
  std::size_t negative = 0;
  std::size_t zero = 0;
  std::size_t positive = 0;

  friend bool operator==(const Inertia&, const Inertia&) = default;
  [[nodiscard]] std::size_t dim() const { return negative + zero + positive; }
  [[nodiscard]] std::string str() const {
    return "(" + std::to_string(negative) + "," + std::to_string(zero) + "," + std::to_string(positive) + ")";
  }
};

/// Counts eigenvalues below -z_tol, inside [-z_tol, z_tol] and above z_tol.
inline Inertia inertia_of(const SymmetricMatrix& s, double z_tol) {
  if (z_tol < 0) throw InputError("inertia zero band must be non-negative");
  Inertia in;
  if (s.dim() == 0) return in;
  for (double l : sym_eigen(s).values) {
    if (l < -z_tol)
      ++in.negative;
    else if (l > z_tol)
      ++in.positive;
    else
      ++in.zero;
  }
  return in;
}

/// Inertia with the policy's relative zero band, zTol = zero_band_rel * |S|_2.
inline Inertia inertia_of(const SymmetricMatrix& s, const NumericPolicy& policy = {}) {
  return inertia_of(s, policy.zero_band_rel * spectral_norm(s));
}

}  // namespace pdom
