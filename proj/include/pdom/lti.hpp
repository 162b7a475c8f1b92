#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>

#include "errors.hpp"
#include "lyapunov.hpp"
#include "matrix.hpp"
#include "numeric_policy.hpp"
#include "schur.hpp"
#include "sym_eigen.hpp"

namespace pdom {

/**
 * @brief Continuous-time state-space model x' = Ax + Bu, y = Cx + Du.
 */
class LtiSystem {
 public:
  LtiSystem() = default;
  LtiSystem(Matrix a, Matrix b, Matrix c, Matrix d, std::string name = {})
      : A(std::move(a)), B(std::move(b)), C(std::move(c)), D(std::move(d)), name(std::move(name)) {
    validate();
  }

  /// Autonomous system x' = Ax (no input, no output channels).
  static LtiSystem autonomous(Matrix a, std::string name = {}) {
    const std::size_t n = a.rows();
    return {std::move(a), Matrix(n, 0), Matrix(0, n), Matrix(0, 0), std::move(name)};
  }

  /// System with D = 0.
  static LtiSystem strictly_proper(Matrix a, Matrix b, Matrix c, std::string name = {}) {
    Matrix d(c.rows(), b.cols());
    return {std::move(a), std::move(b), std::move(c), std::move(d), std::move(name)};
  }

  [[nodiscard]] std::size_t states() const { return A.rows(); }
  [[nodiscard]] std::size_t inputs() const { return B.cols(); }
  [[nodiscard]] std::size_t outputs() const { return C.rows(); }
  [[nodiscard]] bool has_feedthrough() const { return D.max_abs() != 0.0; }

  void validate() const {
    const std::size_t n = A.rows();
    if (!A.square()) throw DimensionError("A must be square, got " + A.shape());
    if (B.rows() != n) throw DimensionError("B must have " + std::to_string(n) + " rows, got " + B.shape());
    if (C.cols() != n) throw DimensionError("C must have " + std::to_string(n) + " columns, got " + C.shape());
    if (D.rows() != C.rows() || D.cols() != B.cols())
      throw DimensionError("D must be " + std::to_string(C.rows()) + "x" + std::to_string(B.cols()) + ", got " +
                           D.shape());
    if (!A.all_finite() || !B.all_finite() || !C.all_finite() || !D.all_finite())
      throw InputError("system matrices must be finite");
  }

  Matrix A, B, C, D;
  std::string name;
};

/// Storage P with rate lambda and margin epsilon witnessing p-dominance.
struct DominanceCertificate {
  SymmetricMatrix P;
  double lambda = 0.0;
  double epsilon = 0.0;
  std::size_t p = 0;
};

/// Outcome of the dominance LMI check.
struct DominanceVerdict {
  enum class Failure { none, inertia, residual, inertia_and_residual };

  bool pass = false;
  Failure failure = Failure::none;
  double residual_max = 0.0;  ///< largest eigenvalue of A^T P + P A + 2 lambda P
  Inertia inertia;            ///< measured inertia of P
  Inertia expected;           ///< (p, 0, n - p)
  Vector witness;             ///< eigenvector of the largest residual eigenvalue
  std::string message;
};

/// Outcome of counting the eigenvalues of A + lambda I on either side of the axis.
struct SplitVerdict {
  enum class Status { pass, fail, inconclusive };

  Status status = Status::fail;
  std::size_t unstable = 0;  ///< eigenvalues with Re > split_tol
  std::size_t stable = 0;    ///< eigenvalues with Re < -split_tol
  double margin = 0.0;       ///< min |Re| of the shifted spectrum

  [[nodiscard]] bool pass() const { return status == Status::pass; }
};

/**
 * @brief Invariant splitting of R^n into the dominant and transient
 * eigenspaces, with decay constants for both components.
 *
 * For x' = Ax and every t >= 0,
 *   |Pi_p x(t)| >= C_p exp(-lambda_p t) |Pi_p x(0)|,
 *   |Pi_s x(t)| <= C_s exp(-lambda_s t) |Pi_s x(0)|.
 */
struct ModalSplit {
  Matrix Pi_p;
  Matrix Pi_s;
  double lambda_p = 0.0;
  double lambda_s = 0.0;
  double C_p = 1.0;
  double C_s = 1.0;
  double lambda = 0.0;
  std::size_t p = 0;
  Matrix basis;          ///< W: first p columns span E_p, remaining span E_{n-p}
  Matrix basis_inverse;  ///< W^{-1}
  Matrix dominant_block;   ///< restriction of A to E_p in basis coordinates
  Matrix transient_block;  ///< restriction of A to E_{n-p} in basis coordinates
};

/// R = A^T P + P A + 2 lambda P.
inline SymmetricMatrix residual(const Matrix& a, const SymmetricMatrix& p, double lambda) {
  if (!a.square() || a.rows() != p.dim())
    throw DimensionError("residual: A " + a.shape() + " vs P of dim " + std::to_string(p.dim()));
  const Matrix& pm = p.matrix();
  return SymmetricMatrix::symmetric_part(a.transpose() * pm + pm * a + (2.0 * lambda) * pm);
}

/**
 * @brief Checks A^T P + P A + 2 lambda P <= -epsilon I (up to lmi_tol) and
 * inertia(P) = (p, 0, n - p).
 */
inline DominanceVerdict check_dominance(const Matrix& a, const DominanceCertificate& cert,
                                        const NumericPolicy& policy = {}) {
  const std::size_t n = a.rows();
  if (cert.P.dim() != n)
    throw DimensionError("certificate P has dim " + std::to_string(cert.P.dim()) + ", system has " +
                         std::to_string(n) + " states");
  if (cert.p > n) throw DimensionError("claimed dominant dimension exceeds state dimension");
  DominanceVerdict v;
  v.expected = Inertia{cert.p, 0, n - cert.p};
  v.inertia = inertia_of(cert.P, policy);
  const bool inertia_ok = v.inertia == v.expected;
  bool residual_ok = true;
  if (n > 0) {
    const auto e = sym_eigen(residual(a, cert.P, cert.lambda), policy.jacobi_max_sweeps);
    v.residual_max = e.values.back();
    v.witness = e.vectors.col_vector(n - 1);
    residual_ok = v.residual_max <= -cert.epsilon + policy.lmi_tol;
  }
  v.pass = inertia_ok && residual_ok;
  if (!inertia_ok && !residual_ok)
    v.failure = DominanceVerdict::Failure::inertia_and_residual;
  else if (!inertia_ok)
    v.failure = DominanceVerdict::Failure::inertia;
  else if (!residual_ok)
    v.failure = DominanceVerdict::Failure::residual;
  if (!inertia_ok) v.message += "inertia " + v.inertia.str() + " != expected " + v.expected.str() + ". ";
  if (!residual_ok)
    v.message += "residual eigenvalue " + num(v.residual_max) + " > " + num(-cert.epsilon) + ". ";
  if (v.pass) v.message = "inertia " + v.inertia.str() + ", residual max " + num(v.residual_max);
  return v;
}

inline DominanceVerdict check_dominance(const LtiSystem& sys, const DominanceCertificate& cert,
                                        const NumericPolicy& policy = {}) {
  return check_dominance(sys.A, cert, policy);
}

/// Counts eigenvalues of A + lambda I strictly right/left of the imaginary axis.
inline SplitVerdict eigen_split_test(const Matrix& a, double lambda, std::size_t p, const NumericPolicy& policy = {}) {
  if (lambda < 0) throw InputError("rate lambda must be non-negative");
  if (!a.square()) throw DimensionError("A must be square");
  SplitVerdict v;
  v.margin = std::numeric_limits<double>::infinity();
  bool on_axis = false;
  for (const auto& ev : real_schur(a, policy).ordering) {
    const double re = ev.real() + lambda;
    v.margin = std::min(v.margin, std::abs(re));
    if (re > policy.split_tol)
      ++v.unstable;
    else if (re < -policy.split_tol)
      ++v.stable;
    else
      on_axis = true;
  }
  if (a.rows() == 0) v.margin = 0.0;
  if (on_axis)
    v.status = SplitVerdict::Status::inconclusive;
  else
    v.status = v.unstable == p ? SplitVerdict::Status::pass : SplitVerdict::Status::fail;
  return v;
}

inline SplitVerdict eigen_split_test(const LtiSystem& sys, double lambda, std::size_t p,
                                     const NumericPolicy& policy = {}) {
  return eigen_split_test(sys.A, lambda, p, policy);
}

namespace detail {

/// Block-diagonalizing basis W of A + lambda I, unstable block first.
struct DominantBasis {
  std::size_t p = 0;
  Matrix W, W_inv;
  Matrix F_u;  ///< (A + lambda I) restricted to E_p, in W coordinates
  Matrix F_s;  ///< (A + lambda I) restricted to E_{n-p}
  double margin = 0.0;
};

inline DominantBasis dominant_basis(const Matrix& a, double lambda, std::size_t p, const NumericPolicy& policy) {
  if (lambda < 0) throw InputError("rate lambda must be non-negative");
  const SchurSplit split = schur_split(a, lambda, policy);
  if (split.unstable_dim != p)
    throw CertificationError("A + lambda I has " + std::to_string(split.unstable_dim) +
                             " unstable eigenvalues, claimed p = " + std::to_string(p));
  const std::size_t n = a.rows();
  const Matrix& t = split.form.T;
  const Matrix& z = split.form.Q;
  DominantBasis out;
  out.p = p;
  out.margin = split.margin;
  out.F_u = t.block(0, 0, p, p);
  out.F_s = t.block(p, p, n - p, n - p);
  // T11 X - X T22 = -T12 decouples the blocks: S^{-1} T S = blockdiag(T11, T22), S = [[I, X], [0, I]]
  Matrix x(p, n - p);
  if (p > 0 && p < n) x = solve_sylvester(out.F_u, -out.F_s, -t.block(0, p, p, n - p), policy);
  Matrix s = Matrix::identity(n);
  Matrix s_inv = Matrix::identity(n);
  s.set_block(0, p, x);
  s_inv.set_block(0, p, -x);
  out.W = z * s;
  out.W_inv = s_inv * z.transpose();
  return out;
}

/// Exponential rate and transient constant for z' = F z in the Lyapunov metric.
struct BlockDecay {
  double rate = 0.0;
  double constant = 1.0;
};

inline bool nearly_normal(const Matrix& f) {
  const double scale = std::max(1.0, f.frobenius_norm() * f.frobenius_norm());
  return (f.transpose() * f - f * f.transpose()).frobenius_norm() <= 1e-10 * scale;
}

}  // namespace detail

/**
 * @brief Checks that A + lambda I has p eigenvalues with positive real part
 * and builds P = W^{-T} blockdiag(-P_u, P_s) W^{-1} from the block-diagonal
 * Schur basis W.
 *
 * P_u and P_s solve the block Lyapunov equations with right-hand sides +I and
 * -I. The result is re-verified; epsilon is half the residual margin.
 */
inline DominanceCertificate construct_certificate(const Matrix& a, double lambda, std::size_t p,
                                                  const NumericPolicy& policy = {}) {
  const std::size_t n = a.rows();
  const detail::DominantBasis basis = detail::dominant_basis(a, lambda, p, policy);
  const SymmetricMatrix pu = lyapunov_solve(basis.F_u, -1.0 * SymmetricMatrix::identity(p), policy);
  const SymmetricMatrix ps = lyapunov_solve(basis.F_s, SymmetricMatrix::identity(n - p), policy);
  const SymmetricMatrix blk = block_diag(-1.0 * pu, ps);
  DominanceCertificate cert;
  cert.P = blk.congruence(basis.W_inv);
  cert.lambda = lambda;
  cert.p = p;
  cert.epsilon = n > 0 ? -0.5 * lambda_max(residual(a, cert.P, lambda)) : 0.0;
  if (!(cert.epsilon > 0))
    throw NumericalFailure("constructed certificate has no strict margin (epsilon = " +
                           num(cert.epsilon) + ")");
  const auto verdict = check_dominance(a, cert, policy);
  if (!verdict.pass) throw NumericalFailure("constructed certificate failed verification: " + verdict.message);
  return cert;
}

inline DominanceCertificate construct_certificate(const LtiSystem& sys, double lambda, std::size_t p,
                                                  const NumericPolicy& policy = {}) {
  return construct_certificate(sys.A, lambda, p, policy);
}

/**
 * @brief Spectral projectors onto the dominant and transient eigenspaces,
 * with rates and constants for the two decay bounds.
 *
 * On a block whose restriction is normal the rates are the exact extreme
 * real parts. Otherwise the rate is moved 10% of the way towards -lambda and
 * the constant comes from the block Lyapunov metric.
 */
inline ModalSplit modal_split(const Matrix& a, double lambda, std::size_t p, const NumericPolicy& policy = {}) {
  const std::size_t n = a.rows();
  const detail::DominantBasis basis = detail::dominant_basis(a, lambda, p, policy);
  ModalSplit out;
  out.p = p;
  out.lambda = lambda;
  out.basis = basis.W;
  out.basis_inverse = basis.W_inv;
  const Matrix wp = basis.W.block(0, 0, n, p);
  const Matrix ws = basis.W.block(0, p, n, n - p);
  out.Pi_p = wp * basis.W_inv.block(0, 0, p, n);
  out.Pi_s = ws * basis.W_inv.block(p, 0, n - p, n);
  out.dominant_block = basis.F_u - lambda * Matrix::identity(p);
  out.transient_block = basis.F_s - lambda * Matrix::identity(n - p);

  auto cond = [](const Matrix& w) {
    if (w.cols() == 0) return 1.0;
    const Vector sv = singular_values(w);
    return sv.back() / sv.front();
  };

  // dominant block: |z(t)| >= c exp(-lambda_p t) |z(0)|
  if (p > 0) {
    const Matrix& f = out.dominant_block;
    double min_re = std::numeric_limits<double>::infinity();
    for (auto ev : schur_eigenvalues(real_schur(f, policy).T)) min_re = std::min(min_re, ev.real());
    double c = 1.0;
    if (detail::nearly_normal(f)) {
      out.lambda_p = -min_re;
    } else {
      out.lambda_p = -min_re + 0.1 * (lambda + min_re);
      const Matrix shifted = f + out.lambda_p * Matrix::identity(p);
      const SymmetricMatrix h = lyapunov_solve(shifted, -1.0 * SymmetricMatrix::identity(p), policy);
      const auto he = sym_eigen(h);
      c = std::sqrt(he.values.front() / he.values.back());
    }
    out.C_p = c / cond(wp);
  } else {
    out.lambda_p = -std::numeric_limits<double>::infinity();
  }

  // transient block: |z(t)| <= c exp(-lambda_s t) |z(0)|
  if (p < n) {
    const Matrix& f = out.transient_block;
    double max_re = -std::numeric_limits<double>::infinity();
    for (auto ev : schur_eigenvalues(real_schur(f, policy).T)) max_re = std::max(max_re, ev.real());
    double c = 1.0;
    if (detail::nearly_normal(f)) {
      out.lambda_s = -max_re;
    } else {
      out.lambda_s = -max_re - 0.1 * (-max_re - lambda);
      const Matrix shifted = f + out.lambda_s * Matrix::identity(n - p);
      const SymmetricMatrix h = lyapunov_solve(shifted, SymmetricMatrix::identity(n - p), policy);
      const auto he = sym_eigen(h);
      c = std::sqrt(he.values.back() / he.values.front());
    }
    out.C_s = c * cond(ws);
  } else {
    out.lambda_s = std::numeric_limits<double>::infinity();
  }
  return out;
}

inline ModalSplit modal_split(const LtiSystem& sys, double lambda, std::size_t p, const NumericPolicy& policy = {}) {
  return modal_split(sys.A, lambda, p, policy);
}

}  // namespace pdom
