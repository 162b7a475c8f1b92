#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "errors.hpp"
#include "matrix.hpp"
#include "numeric_policy.hpp"

namespace pdom {

/// One diagonal block of a quasi-upper-triangular matrix.
struct SchurBlock {
  std::size_t start = 0;
  std::size_t size = 1;  ///< 1 (real eigenvalue) or 2 (complex pair)
  std::complex<double> eigenvalue;  ///< for a pair, the one with positive imaginary part
};

/**
 * @brief Real Schur form A = Q T Q^T.
 *
 * T is quasi-upper-triangular; every 2x2 diagonal block carries a complex
 * conjugate pair (real pairs are always split into two 1x1 blocks).
 */
struct SchurForm {
  Matrix Q;
  Matrix T;
  std::vector<std::complex<double>> ordering;  ///< eigenvalues in diagonal order, pairs listed twice

  [[nodiscard]] std::size_t dim() const { return T.rows(); }
};

namespace detail {

// Householder reflector v (unnormalised) mapping x onto -sign(x0)|x| e1.
inline bool householder(std::span<const double> x, Vector& v) {
  const double nrm = norm2(x);
  v.assign(x.begin(), x.end());
  if (nrm == 0.0) return false;
  const double alpha = x[0] >= 0 ? -nrm : nrm;
  v[0] -= alpha;
  return norm2(v) > 0.0;
}

// H <- P H P and Z <- Z P where P = I - 2 v v^T / v^T v acts on indices r0..r0+len-1.
inline void apply_reflector(Matrix& h, Matrix* z, std::size_t r0, const Vector& v) {
  const std::size_t n = h.rows();
  const std::size_t len = v.size();
  const double beta = 2.0 / dot(v, v);
  for (std::size_t j = 0; j < h.cols(); ++j) {
    double s = 0.0;
    for (std::size_t k = 0; k < len; ++k) s += v[k] * h(r0 + k, j);
    s *= beta;
    for (std::size_t k = 0; k < len; ++k) h(r0 + k, j) -= s * v[k];
  }
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < len; ++k) s += h(i, r0 + k) * v[k];
    s *= beta;
    for (std::size_t k = 0; k < len; ++k) h(i, r0 + k) -= s * v[k];
  }
  if (z != nullptr) {
    for (std::size_t i = 0; i < z->rows(); ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < len; ++k) s += (*z)(i, r0 + k) * v[k];
      s *= beta;
      for (std::size_t k = 0; k < len; ++k) (*z)(i, r0 + k) -= s * v[k];
    }
  }
}

// Similarity by the plane rotation G = [[c, -s], [s, c]] on indices (k, k+1): T <- G^T T G, Z <- Z G.
inline void apply_rotation(Matrix& t, Matrix& z, std::size_t k, double c, double s) {
  for (std::size_t j = 0; j < t.cols(); ++j) {
    const double a = t(k, j);
    const double b = t(k + 1, j);
    t(k, j) = c * a + s * b;
    t(k + 1, j) = -s * a + c * b;
  }
  for (std::size_t i = 0; i < t.rows(); ++i) {
    const double a = t(i, k);
    const double b = t(i, k + 1);
    t(i, k) = c * a + s * b;
    t(i, k + 1) = -s * a + c * b;
  }
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const double a = z(i, k);
    const double b = z(i, k + 1);
    z(i, k) = c * a + s * b;
    z(i, k + 1) = -s * a + c * b;
  }
}

inline std::complex<double> block_eigenvalue(const Matrix& t, std::size_t k, std::size_t size) {
  if (size == 1) return {t(k, k), 0.0};
  const double a = t(k, k), b = t(k, k + 1), c = t(k + 1, k), d = t(k + 1, k + 1);
  const double half = 0.5 * (a - d);
  const double disc = half * half + b * c;
  const double re = 0.5 * (a + d);
  if (disc >= 0) return {re, 0.0};  // degenerate pair left in a block
  return {re, std::sqrt(-disc)};
}

// Split every 2x2 block with real eigenvalues into two 1x1 blocks.
inline void standardize_blocks(Matrix& t, Matrix& z) {
  const std::size_t n = t.rows();
  for (std::size_t k = 0; k + 1 < n; ++k) {
    if (t(k + 1, k) == 0.0) continue;
    const double a = t(k, k), b = t(k, k + 1), c = t(k + 1, k), d = t(k + 1, k + 1);
    const double half = 0.5 * (a - d);
    const double disc = half * half + b * c;
    if (disc < 0) {
      ++k;  // genuine complex pair
      continue;
    }
    const double root = std::sqrt(disc);
    const double lam = 0.5 * (a + d) + (half >= 0 ? root : -root);
    double vx = b, vy = lam - a;
    if (std::abs(vx) + std::abs(vy) < std::abs(lam - d) + std::abs(c)) {
      vx = lam - d;
      vy = c;
    }
    const double nv = std::hypot(vx, vy);
    if (nv == 0.0) {
      t(k + 1, k) = 0.0;
      continue;
    }
    apply_rotation(t, z, k, vx / nv, vy / nv);
    t(k + 1, k) = 0.0;
  }
}

// Solves T11 X - X T22 = C for blocks of size at most 2 (Kronecker form).
inline Matrix small_sylvester(const Matrix& t11, const Matrix& t22, const Matrix& c) {
  const std::size_t p = t11.rows(), q = t22.rows();
  Matrix k(p * q, p * q);
  Vector rhs(p * q);
  auto idx = [q](std::size_t i, std::size_t j) { return i * q + j; };
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < q; ++j) {
      const std::size_t row = idx(i, j);
      rhs[row] = c(i, j);
      for (std::size_t l = 0; l < p; ++l) k(row, idx(l, j)) += t11(i, l);
      for (std::size_t l = 0; l < q; ++l) k(row, idx(i, l)) -= t22(l, j);
    }
  LuDecomposition lu(k);
  if (lu.singular()) throw SolvabilityError("Schur block swap: blocks share an eigenvalue");
  const Vector x = lu.solve(rhs);
  Matrix out(p, q);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < q; ++j) out(i, j) = x[idx(i, j)];
  return out;
}

}  // namespace detail

/// Diagonal blocks of a quasi-upper-triangular matrix, in order.
inline std::vector<SchurBlock> schur_blocks(const Matrix& t) {
  std::vector<SchurBlock> blocks;
  const std::size_t n = t.rows();
  for (std::size_t k = 0; k < n;) {
    const std::size_t size = (k + 1 < n && t(k + 1, k) != 0.0) ? 2 : 1;
    blocks.push_back({k, size, detail::block_eigenvalue(t, k, size)});
    k += size;
  }
  return blocks;
}

inline std::vector<std::complex<double>> schur_eigenvalues(const Matrix& t) {
  std::vector<std::complex<double>> out;
  for (const auto& b : schur_blocks(t)) {
    out.push_back(b.eigenvalue);
    if (b.size == 2) out.push_back(std::conj(b.eigenvalue));
  }
  return out;
}

/// Reduction to upper Hessenberg form, A = Q H Q^T.
inline std::pair<Matrix, Matrix> hessenberg(const Matrix& a) {
  if (!a.square()) throw DimensionError("Hessenberg reduction of non-square matrix");
  const std::size_t n = a.rows();
  Matrix h = a;
  Matrix q = Matrix::identity(n);
  Vector v;
  for (std::size_t k = 0; k + 2 < n; ++k) {
    Vector x(n - k - 1);
    for (std::size_t i = k + 1; i < n; ++i) x[i - k - 1] = h(i, k);
    if (!detail::householder(x, v)) continue;
    detail::apply_reflector(h, &q, k + 1, v);
    for (std::size_t i = k + 2; i < n; ++i) h(i, k) = 0.0;
  }
  return {h, q};
}

/**
 * @brief Real Schur decomposition by Hessenberg reduction and Francis
 * double-shift QR with deflation.
 *
 * Throws NumericalFailure if an eigenvalue takes more than
 * `qr_max_iter_per_eig` sweeps to deflate.
 */
inline SchurForm real_schur(const Matrix& a, const NumericPolicy& policy = {}) {
  if (!a.square()) throw DimensionError("Schur decomposition of non-square matrix " + a.shape());
  if (!a.all_finite()) throw NumericalFailure("Schur decomposition of non-finite matrix");
  auto [h, z] = hessenberg(a);
  const std::size_t n = h.rows();
  const double eps = std::numeric_limits<double>::epsilon();
  const double anorm = std::max(h.frobenius_norm(), std::numeric_limits<double>::min());

  std::ptrdiff_t iu = static_cast<std::ptrdiff_t>(n) - 1;
  int iter = 0;
  Vector v;
  while (iu > 0) {
    std::ptrdiff_t l = iu;
    while (l > 0) {
      double s = std::abs(h(l - 1, l - 1)) + std::abs(h(l, l));
      if (s == 0.0) s = anorm;
      if (std::abs(h(l, l - 1)) < eps * s) {
        h(l, l - 1) = 0.0;
        break;
      }
      --l;
    }
    if (l == iu) {
      --iu;
      iter = 0;
      continue;
    }
    if (l == iu - 1) {
      iu -= 2;
      iter = 0;
      continue;
    }
    if (++iter > policy.qr_max_iter_per_eig)
      throw NumericalFailure("Francis QR did not converge");

    double s, t;
    if (iter % 10 == 0) {
      // exceptional shift to break cycles
      const double sh = std::abs(h(iu, iu - 1)) + std::abs(h(iu - 1, iu - 2));
      s = 1.5 * sh + h(iu, iu);
      t = sh * sh;
    } else {
      s = h(iu - 1, iu - 1) + h(iu, iu);
      t = h(iu - 1, iu - 1) * h(iu, iu) - h(iu - 1, iu) * h(iu, iu - 1);
    }
    double x = h(l, l) * h(l, l) + h(l, l + 1) * h(l + 1, l) - s * h(l, l) + t;
    double y = h(l + 1, l) * (h(l, l) + h(l + 1, l + 1) - s);
    double zz = h(l + 1, l) * h(l + 2, l + 1);
    for (std::ptrdiff_t k = l - 1; k <= iu - 3; ++k) {
      const double xs[3] = {x, y, zz};
      if (detail::householder(xs, v)) {
        detail::apply_reflector(h, &z, static_cast<std::size_t>(k + 1), v);
        if (k >= l) {
          h(k + 2, k) = 0.0;
          h(k + 3, k) = 0.0;
        }
      }
      x = h(k + 2, k + 1);
      y = h(k + 3, k + 1);
      if (k + 4 <= iu) zz = h(k + 4, k + 1);
    }
    const double xs[2] = {x, y};
    if (detail::householder(xs, v)) {
      detail::apply_reflector(h, &z, static_cast<std::size_t>(iu - 1), v);
      h(iu, iu - 2) = 0.0;
    }
  }

  // clean the strictly lower part below the subdiagonal
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j + 1 < i; ++j) h(i, j) = 0.0;
  detail::standardize_blocks(h, z);
  SchurForm out{z, h, schur_eigenvalues(h)};
  return out;
}

/**
 * @brief Swaps the adjacent diagonal blocks starting at `k` (sizes p then q)
 * by an orthogonal similarity, updating T and Q in place.
 */
inline void swap_schur_blocks(SchurForm& sf, std::size_t k, std::size_t p, std::size_t q) {
  Matrix& t = sf.T;
  const std::size_t m = p + q;
  const Matrix t11 = t.block(k, k, p, p);
  const Matrix t22 = t.block(k + p, k + p, q, q);
  const Matrix t12 = t.block(k, k + p, p, q);
  const Matrix x = detail::small_sylvester(t11, t22, t12);

  // Orthonormal basis of span([-X; I]) completed to Q_loc by Householder QR.
  Matrix basis(m, q);
  basis.set_block(0, 0, -x);
  basis.set_block(p, 0, Matrix::identity(q));
  Matrix qloc = Matrix::identity(m);
  Vector v;
  for (std::size_t j = 0; j < q; ++j) {
    Vector col(m - j);
    for (std::size_t i = j; i < m; ++i) col[i - j] = basis(i, j);
    if (!detail::householder(col, v)) continue;
    const double beta = 2.0 / dot(v, v);
    for (std::size_t c = j; c < q; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * basis(j + i, c);
      s *= beta;
      for (std::size_t i = 0; i < v.size(); ++i) basis(j + i, c) -= s * v[i];
    }
    for (std::size_t r = 0; r < m; ++r) {
      double s = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) s += qloc(r, j + i) * v[i];
      s *= beta;
      for (std::size_t i = 0; i < v.size(); ++i) qloc(r, j + i) -= s * v[i];
    }
  }

  const std::size_t n = t.rows();
  // rows: T[k:k+m, :] <- Qloc^T T[k:k+m, :]
  for (std::size_t c = 0; c < n; ++c) {
    Vector col(m);
    for (std::size_t i = 0; i < m; ++i) col[i] = t(k + i, c);
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      for (std::size_t l = 0; l < m; ++l) s += qloc(l, i) * col[l];
      t(k + i, c) = s;
    }
  }
  auto right_multiply = [&](Matrix& mat) {
    for (std::size_t r = 0; r < mat.rows(); ++r) {
      Vector row(m);
      for (std::size_t i = 0; i < m; ++i) row[i] = mat(r, k + i);
      for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t l = 0; l < m; ++l) s += row[l] * qloc(l, i);
        mat(r, k + i) = s;
      }
    }
  };
  right_multiply(t);
  right_multiply(sf.Q);

  double leak = 0.0;
  for (std::size_t i = q; i < m; ++i)
    for (std::size_t j = 0; j < q; ++j) {
      leak = std::max(leak, std::abs(t(k + i, k + j)));
      t(k + i, k + j) = 0.0;
    }
  if (leak > 1e-8 * std::max(1.0, t.frobenius_norm()))
    throw NumericalFailure("Schur block swap is ill-conditioned");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j + 1 < i; ++j) t(i, j) = 0.0;
  detail::standardize_blocks(t, sf.Q);
  sf.ordering = schur_eigenvalues(t);
}

/**
 * @brief Reorders a real Schur form so that blocks whose eigenvalue satisfies
 * `select` come first. Returns the dimension of the selected subspace.
 */
inline std::size_t reorder_schur(SchurForm& sf, const std::function<bool(std::complex<double>)>& select) {
  std::size_t ptr = 0;
  std::size_t selected_dim = 0;
  while (true) {
    auto blocks = schur_blocks(sf.T);
    auto it = std::find_if(blocks.begin(), blocks.end(), [&](const SchurBlock& b) {
      return b.start >= ptr && select(b.eigenvalue);
    });
    if (it == blocks.end()) break;
    std::size_t start = it->start;
    const std::size_t size = it->size;
    while (start > ptr) {
      blocks = schur_blocks(sf.T);
      auto prev = std::find_if(blocks.begin(), blocks.end(),
                               [&](const SchurBlock& b) { return b.start + b.size == start; });
      if (prev == blocks.end()) throw NumericalFailure("Schur block structure lost during reordering");
      swap_schur_blocks(sf, prev->start, prev->size, size);
      start = prev->start;
    }
    ptr += size;
    selected_dim += size;
  }
  sf.ordering = schur_eigenvalues(sf.T);
  return selected_dim;
}

/// Result of splitting the spectrum of A + shift I at the imaginary axis.
struct SchurSplit {
  SchurForm form;           ///< Schur form of A + shift I, unstable eigenvalues leading
  std::size_t unstable_dim = 0;
  double margin = 0.0;      ///< min |Re| of the shifted spectrum
};

/**
 * @brief Ordered Schur form of A + shift I with all eigenvalues of positive
 * real part leading.
 *
 * Throws NonHyperbolicError when some shifted eigenvalue has |Re| <= split_tol.
 */
inline SchurSplit schur_split(const Matrix& a, double shift, const NumericPolicy& policy = {}) {
  if (!a.square()) throw DimensionError("schur_split needs a square matrix, got " + a.shape());
  const std::size_t n = a.rows();
  SchurSplit out;
  out.form = real_schur(a + shift * Matrix::identity(n), policy);
  out.margin = std::numeric_limits<double>::infinity();
  for (const auto& ev : out.form.ordering) {
    if (std::abs(ev.real()) <= policy.split_tol)
      throw NonHyperbolicError("eigenvalue with real part " + std::to_string(ev.real() - shift) +
                               " lies on the split line -lambda = " + std::to_string(-shift));
    out.margin = std::min(out.margin, std::abs(ev.real()));
  }
  if (n == 0) out.margin = 0.0;
  out.unstable_dim = reorder_schur(out.form, [](std::complex<double> ev) { return ev.real() > 0.0; });
  return out;
}

}  // namespace pdom
