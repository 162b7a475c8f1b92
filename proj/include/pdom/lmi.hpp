#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "lti.hpp"
#include "matrix.hpp"
#include "numeric_policy.hpp"
#include "sym_eigen.hpp"

namespace pdom {

/**
 * @brief Feasibility problem in a symmetric unknown P.
 *
 * Every residual block must be affine in P and is required to satisfy
 * block(P) <= -epsilon I. Every equality map must be affine in P and is
 * required to vanish. The inertia target is checked on the result.
 */
struct LmiProblem {
  using BlockMap = std::function<SymmetricMatrix(const SymmetricMatrix&)>;
  using EqualityMap = std::function<Matrix(const SymmetricMatrix&)>;

  std::size_t n = 0;
  std::vector<BlockMap> blocks;
  std::vector<EqualityMap> equalities;
  Inertia target;
  double epsilon = 1e-6;
};

struct LmiResult {
  enum class Status { feasible, budget_exhausted, stalled, inertia_mismatch, inconsistent_equalities };

  Status status = Status::budget_exhausted;
  std::optional<SymmetricMatrix> P;
  std::size_t iterations = 0;
  double violation = std::numeric_limits<double>::infinity();  ///< max_i lambda_max(block_i) + epsilon
  double equality_residual = 0.0;
  Inertia inertia;
  std::string message;

  [[nodiscard]] bool feasible() const { return status == Status::feasible; }
};

inline std::string to_string(LmiResult::Status s) {
  switch (s) {
    case LmiResult::Status::feasible: return "feasible";
    case LmiResult::Status::budget_exhausted: return "budget_exhausted";
    case LmiResult::Status::stalled: return "stalled";
    case LmiResult::Status::inertia_mismatch: return "inertia_mismatch";
    case LmiResult::Status::inconsistent_equalities: return "inconsistent_equalities";
  }
  return "unknown";
}

/// Nearest symmetric matrix (Frobenius) with lambda_max <= cap.
inline SymmetricMatrix project_spectral(const SymmetricMatrix& s, double cap) {
  if (s.dim() == 0) return s;
  const SymEigen e = sym_eigen(s);
  if (e.values.back() <= cap) return s;
  return spectral_map(e, [cap](double v) { return std::min(v, cap); });
}

namespace detail {

/// Symmetric basis element for the k-th upper-triangular coordinate.
inline SymmetricMatrix vech_basis(std::size_t n, std::size_t k) {
  Matrix e(n, n);
  std::size_t idx = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j, ++idx)
      if (idx == k) {
        e(i, j) = 1.0;
        e(j, i) = 1.0;
        return SymmetricMatrix(e);
      }
  throw DimensionError("vech index out of range");
}

inline Vector vech(const SymmetricMatrix& p) {
  const std::size_t n = p.dim();
  Vector v;
  v.reserve(n * (n + 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) v.push_back(p(i, j));
  return v;
}

inline SymmetricMatrix unvech(std::size_t n, std::span<const double> v) {
  Matrix m(n, n);
  std::size_t idx = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j, ++idx) {
      m(i, j) = v[idx];
      m(j, i) = v[idx];
    }
  return SymmetricMatrix(m);
}

inline double inner(const Matrix& a, const Matrix& b) {
  double s = 0.0;
  const auto da = a.data();
  const auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) s += da[i] * db[i];
  return s;
}

/// Affine parameterization vech(P) = offset + basis * z of the equality-feasible set.
struct AffineParam {
  Vector offset;
  Matrix basis;  // d x k
  double residual = 0.0;
};

/// Gauss-Jordan elimination with full pivoting on G y = h.
inline AffineParam eliminate(Matrix g, Vector h, double tol) {
  const std::size_t rows = g.rows();
  const std::size_t d = g.cols();
  std::vector<std::size_t> pivot_col;
  std::vector<bool> is_pivot(d, false);
  const double scale = std::max(1.0, g.max_abs());
  std::size_t r = 0;
  for (; r < rows; ++r) {
    double best = 0.0;
    std::size_t bi = r, bj = 0;
    for (std::size_t i = r; i < rows; ++i)
      for (std::size_t j = 0; j < d; ++j)
        if (!is_pivot[j] && std::abs(g(i, j)) > best) {
          best = std::abs(g(i, j));
          bi = i;
          bj = j;
        }
    if (best <= tol * scale) break;
    for (std::size_t j = 0; j < d; ++j) std::swap(g(r, j), g(bi, j));
    std::swap(h[r], h[bi]);
    const double piv = g(r, bj);
    for (std::size_t j = 0; j < d; ++j) g(r, j) /= piv;
    h[r] /= piv;
    g(r, bj) = 1.0;
    for (std::size_t i = 0; i < rows; ++i) {
      if (i == r || g(i, bj) == 0.0) continue;
      const double f = g(i, bj);
      for (std::size_t j = 0; j < d; ++j) g(i, j) -= f * g(r, j);
      g(i, bj) = 0.0;
      h[i] -= f * h[r];
    }
    is_pivot[bj] = true;
    pivot_col.push_back(bj);
  }
  AffineParam out;
  for (std::size_t i = r; i < rows; ++i) out.residual = std::max(out.residual, std::abs(h[i]));
  std::vector<std::size_t> free_cols;
  for (std::size_t j = 0; j < d; ++j)
    if (!is_pivot[j]) free_cols.push_back(j);
  out.offset.assign(d, 0.0);
  for (std::size_t k = 0; k < pivot_col.size(); ++k) out.offset[pivot_col[k]] = h[k];
  out.basis = Matrix(d, free_cols.size());
  for (std::size_t f = 0; f < free_cols.size(); ++f) {
    out.basis(free_cols[f], f) = 1.0;
    for (std::size_t k = 0; k < pivot_col.size(); ++k) out.basis(pivot_col[k], f) = -g(k, free_cols[f]);
  }
  return out;
}

}  // namespace detail

/**
 * @brief Alternating projections between the affine range of the residual
 * blocks and the set {block <= -epsilon I}.
 *
 * Equalities are eliminated exactly before iterating, so every iterate
 * satisfies them. Success requires every block at or below -epsilon + lmi_tol,
 * the equalities to 1e-10 and the inertia target. A failure report is not a
 * proof of infeasibility.
 */
inline LmiResult solve(const LmiProblem& problem, const SymmetricMatrix& seed, const NumericPolicy& policy = {}) {
  const std::size_t n = problem.n;
  if (problem.blocks.empty()) throw InputError("LMI problem needs at least one residual block");
  if (seed.dim() != n) throw DimensionError("LMI seed has dimension " + std::to_string(seed.dim()));
  if (!(problem.epsilon > 0.0)) throw InputError("LMI solve needs epsilon > 0");
  if (problem.target.dim() != n) throw DimensionError("LMI inertia target does not match n");

  const std::size_t d = n * (n + 1) / 2;
  const SymmetricMatrix zero(Matrix(n, n));
  std::vector<SymmetricMatrix> basis;
  basis.reserve(d);
  for (std::size_t k = 0; k < d; ++k) basis.push_back(detail::vech_basis(n, k));

  // equality constraints as G vech(P) = h
  std::vector<Vector> g_rows;
  Vector h;
  for (const auto& eq : problem.equalities) {
    const Matrix e0 = eq(zero);
    std::vector<Matrix> ek;
    ek.reserve(d);
    for (std::size_t k = 0; k < d; ++k) ek.push_back(eq(basis[k]) - e0);
    for (std::size_t i = 0; i < e0.rows() * e0.cols(); ++i) {
      Vector row(d);
      for (std::size_t k = 0; k < d; ++k) row[k] = ek[k].data()[i];
      g_rows.push_back(std::move(row));
      h.push_back(-e0.data()[i]);
    }
  }
  detail::AffineParam param;
  if (g_rows.empty()) {
    param.offset.assign(d, 0.0);
    param.basis = Matrix::identity(d);
  } else {
    Matrix g(g_rows.size(), d);
    for (std::size_t i = 0; i < g_rows.size(); ++i)
      for (std::size_t k = 0; k < d; ++k) g(i, k) = g_rows[i][k];
    param = detail::eliminate(g, h, 1e-12);
  }

  LmiResult result;
  if (param.residual > 1e-10) {
    result.status = LmiResult::Status::inconsistent_equalities;
    result.equality_residual = param.residual;
    result.message = "equality constraints are inconsistent (residual " + num(param.residual) + ")";
    return result;
  }
  const std::size_t k_free = param.basis.cols();
  auto p_of = [&](const Vector& z) {
    Vector v = param.offset;
    for (std::size_t k = 0; k < d; ++k)
      for (std::size_t f = 0; f < k_free; ++f) v[k] += param.basis(k, f) * z[f];
    return detail::unvech(n, v);
  };

  // affine structure of the blocks in z
  const SymmetricMatrix p_off = detail::unvech(n, param.offset);
  std::vector<Matrix> f0;
  std::vector<std::vector<Matrix>> fz(problem.blocks.size());
  for (std::size_t b = 0; b < problem.blocks.size(); ++b) {
    const Matrix c = problem.blocks[b](zero).matrix();
    f0.push_back(problem.blocks[b](p_off).matrix());
    std::vector<Matrix> lin;
    lin.reserve(d);
    for (std::size_t k = 0; k < d; ++k) lin.push_back(problem.blocks[b](basis[k]).matrix() - c);
    for (std::size_t f = 0; f < k_free; ++f) {
      Matrix m(c.rows(), c.cols());
      for (std::size_t k = 0; k < d; ++k)
        if (param.basis(k, f) != 0.0) m += param.basis(k, f) * lin[k];
      fz[b].push_back(std::move(m));
    }
  }
  auto blocks_at = [&](const Vector& z) {
    std::vector<SymmetricMatrix> out;
    for (std::size_t b = 0; b < f0.size(); ++b) {
      Matrix m = f0[b];
      for (std::size_t f = 0; f < k_free; ++f) m += z[f] * fz[b][f];
      out.emplace_back(SymmetricMatrix::symmetric_part(m));
    }
    return out;
  };

  // seed coordinates: least-squares fit of vech(seed) in the free directions
  Vector z(k_free, 0.0);
  if (k_free > 0) {
    const Vector target = detail::vech(seed);
    Matrix ntn(k_free, k_free);
    Vector rhs(k_free, 0.0);
    for (std::size_t a = 0; a < k_free; ++a) {
      for (std::size_t c = 0; c < k_free; ++c)
        for (std::size_t k = 0; k < d; ++k) ntn(a, c) += param.basis(k, a) * param.basis(k, c);
      for (std::size_t k = 0; k < d; ++k) rhs[a] += param.basis(k, a) * (target[k] - param.offset[k]);
    }
    z = LuDecomposition(ntn).solve(rhs);
  }

  // Gram matrix of the range map with a small proximal term
  Matrix gram(k_free, k_free);
  for (std::size_t a = 0; a < k_free; ++a)
    for (std::size_t c = a; c < k_free; ++c) {
      double s = 0.0;
      for (std::size_t b = 0; b < f0.size(); ++b) s += detail::inner(fz[b][a], fz[b][c]);
      gram(a, c) = s;
      gram(c, a) = s;
    }
  const double mu = 1e-10 * std::max(1.0, k_free > 0 ? gram.trace() / static_cast<double>(k_free) : 1.0);
  for (std::size_t a = 0; a < k_free; ++a) gram(a, a) += mu;
  const LuDecomposition gram_lu(gram);

  const double eps = problem.epsilon;
  const double cap = -eps - (0.1 * eps + 10.0 * policy.lmi_tol);
  auto violation_of = [&](const std::vector<SymmetricMatrix>& bl) {
    double v = -std::numeric_limits<double>::infinity();
    for (const auto& s : bl) v = std::max(v, (s.dim() ? lambda_max(s) : -eps) + eps);
    return v;
  };
  auto equality_residual = [&](const SymmetricMatrix& p) {
    double r = 0.0;
    for (const auto& eq : problem.equalities) r = std::max(r, eq(p).max_abs());
    return r;
  };

  std::vector<double> history;
  history.reserve(static_cast<std::size_t>(policy.lmi_max_iter) + 1);
  for (std::size_t it = 0;; ++it) {
    const auto bl = blocks_at(z);
    const double viol = violation_of(bl);
    history.push_back(viol);
    result.iterations = it;
    result.violation = viol;
    if (viol <= policy.lmi_tol) {
      const SymmetricMatrix p = p_of(z);
      result.P = p;
      result.equality_residual = equality_residual(p);
      result.inertia = inertia_of(p, policy);
      if (result.equality_residual > 1e-10) {
        result.status = LmiResult::Status::inconsistent_equalities;
        result.message = "equalities drifted to " + num(result.equality_residual);
      } else if (!(result.inertia == problem.target)) {
        result.status = LmiResult::Status::inertia_mismatch;
        result.message = "feasible point has inertia " + result.inertia.str() + ", target " + problem.target.str();
      } else {
        result.status = LmiResult::Status::feasible;
        result.message = "feasible after " + std::to_string(it) + " iterations";
      }
      return result;
    }
    if (k_free == 0 || it >= static_cast<std::size_t>(policy.lmi_max_iter)) {
      result.status = LmiResult::Status::budget_exhausted;
      break;
    }
    const auto window = static_cast<std::size_t>(policy.lmi_stall_window);
    if (history.size() > window && history[history.size() - 1 - window] - viol < policy.lmi_stall_tol) {
      result.status = LmiResult::Status::stalled;
      break;
    }
    // project blocks onto the spectral set, then back onto the affine range
    Vector rhs(k_free, 0.0);
    for (std::size_t b = 0; b < bl.size(); ++b) {
      const Matrix target = project_spectral(bl[b], cap).matrix() - f0[b];
      for (std::size_t f = 0; f < k_free; ++f) rhs[f] += detail::inner(fz[b][f], target);
    }
    for (std::size_t f = 0; f < k_free; ++f) rhs[f] += mu * z[f];
    z = gram_lu.solve(rhs);
  }
  result.P = p_of(z);
  result.equality_residual = equality_residual(*result.P);
  result.inertia = inertia_of(*result.P, policy);
  result.message = to_string(result.status) + " after " + std::to_string(result.iterations) +
                   " iterations, final violation " + num(result.violation);
  return result;
}

/// The Def.-1 problem A^T P + P A + 2 lambda P <= -epsilon I with inertia (p, 0, n-p).
inline LmiProblem dominance_problem(const Matrix& a, double lambda, std::size_t p, double epsilon = 1e-6) {
  if (!a.square()) throw DimensionError("dominance problem needs a square matrix");
  if (p > a.rows()) throw InputError("dominance degree exceeds state dimension");
  LmiProblem prob;
  prob.n = a.rows();
  prob.blocks.emplace_back([a, lambda](const SymmetricMatrix& x) { return residual(a, x, lambda); });
  prob.target = Inertia{p, 0, a.rows() - p};
  prob.epsilon = epsilon;
  return prob;
}

/// blockdiag(-I_p, I_{n-p})
inline SymmetricMatrix default_seed(std::size_t n, std::size_t p) {
  Vector d(n, 1.0);
  for (std::size_t i = 0; i < p && i < n; ++i) d[i] = -1.0;
  return SymmetricMatrix::diagonal(d);
}

/**
 * @brief Dominance storage search, gated by check_dominance.
 *
 * Seeds from construct_certificate when the spectrum splits, otherwise from
 * default_seed.
 */
inline LmiResult find_dominance_storage(const Matrix& a, double lambda, std::size_t p, const NumericPolicy& policy = {},
                                        double epsilon = 1e-6) {
  const LmiProblem prob = dominance_problem(a, lambda, p, epsilon);
  SymmetricMatrix seed = default_seed(a.rows(), p);
  try {
    seed = construct_certificate(a, lambda, p, policy).P;
  } catch (const Error&) {
  }
  LmiResult r = solve(prob, seed, policy);
  if (r.feasible()) {
    const auto v = check_dominance(a, DominanceCertificate{*r.P, lambda, epsilon, p}, policy);
    if (!v.pass) {
      r.status = LmiResult::Status::budget_exhausted;
      r.message = "solver point rejected by check_dominance: " + v.message;
    }
  }
  return r;
}

}  // namespace pdom
