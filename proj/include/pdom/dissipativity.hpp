#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>

#include "errors.hpp"
#include "lmi.hpp"
#include "lti.hpp"
#include "matrix.hpp"
#include "numeric_policy.hpp"
#include "sym_eigen.hpp"

namespace pdom {

/// s(y, u) = y'Qy + y'Lu + u'L'y + u'Ru
struct SupplyRate {
  SymmetricMatrix Q;
  Matrix L;
  SymmetricMatrix R;

  SupplyRate() = default;
  SupplyRate(SymmetricMatrix q, Matrix l, SymmetricMatrix r) : Q(std::move(q)), L(std::move(l)), R(std::move(r)) {
    if (L.rows() != Q.dim() || L.cols() != R.dim())
      throw DimensionError("supply L is " + L.shape() + " but Q is " + std::to_string(Q.dim()) + "x" +
                           std::to_string(Q.dim()) + " and R is " + std::to_string(R.dim()) + "x" +
                           std::to_string(R.dim()));
  }

  [[nodiscard]] std::size_t outputs() const { return Q.dim(); }
  [[nodiscard]] std::size_t inputs() const { return R.dim(); }

  [[nodiscard]] double evaluate(std::span<const double> y, std::span<const double> u) const {
    if (y.size() != outputs() || u.size() != inputs()) throw DimensionError("supply evaluated with wrong sizes");
    return quad_form(Q.matrix(), y) + 2.0 * quad_form(L, y, u) + quad_form(R.matrix(), u);
  }

  /// The supply tau * s.
  [[nodiscard]] SupplyRate scaled(double tau) const { return {tau * Q, tau * L, tau * R}; }

  /// The full (r+m) symmetric matrix [[Q, L], [L', R]].
  [[nodiscard]] SymmetricMatrix matrix() const {
    return SymmetricMatrix(vstack(hstack(Q.matrix(), L), hstack(L.transpose(), R.matrix())));
  }
};

inline SupplyRate supply_passivity(std::size_t r, std::size_t m) {
  if (r != m) throw DimensionError("passivity supply needs a square channel");
  return {SymmetricMatrix(r), Matrix::identity(r), SymmetricMatrix(r)};
}

inline SupplyRate supply_passivity(std::size_t r) { return supply_passivity(r, r); }

inline SupplyRate supply_gain(double gamma, std::size_t r, std::size_t m) {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw InputError("gain must be finite and non-negative");
  return {-1.0 * SymmetricMatrix::identity(r), Matrix(r, m), gamma * gamma * SymmetricMatrix::identity(m)};
}

inline SupplyRate supply_zero(std::size_t r, std::size_t m) { return {SymmetricMatrix(r), Matrix(r, m), SymmetricMatrix(m)}; }

struct DissipativityCertificate {
  SymmetricMatrix P;
  double lambda = 0.0;
  double epsilon = 0.0;
  std::size_t p = 0;
  SupplyRate supply;
};

inline void check_supply_dims(const LtiSystem& sys, const SupplyRate& s) {
  if (s.outputs() != sys.outputs() || s.inputs() != sys.inputs())
    throw DimensionError("supply is for (" + std::to_string(s.outputs()) + " outputs, " +
                         std::to_string(s.inputs()) + " inputs), system has (" + std::to_string(sys.outputs()) +
                         ", " + std::to_string(sys.inputs()) + ")");
}

/**
 * [[A'P + PA + 2 lambda P - C'QC + eps I,  PB - C'L - C'QD        ],
 *  [B'P - L'C - D'QC,                      -D'QD - L'D - D'L - R  ]]
 */
inline SymmetricMatrix dissipativity_block(const LtiSystem& sys, const SymmetricMatrix& p, double lambda,
                                           const SupplyRate& s, double epsilon) {
  check_supply_dims(sys, s);
  if (p.dim() != sys.states()) throw DimensionError("storage does not match state dimension");
  const Matrix& a = sys.A;
  const Matrix& b = sys.B;
  const Matrix& c = sys.C;
  const Matrix& d = sys.D;
  const Matrix& pm = p.matrix();
  const Matrix& q = s.Q.matrix();
  const Matrix ct = c.transpose();
  const Matrix m11 = a.transpose() * pm + pm * a + 2.0 * lambda * pm - ct * q * c +
                     epsilon * Matrix::identity(sys.states());
  const Matrix m12 = pm * b - ct * s.L - ct * q * d;
  const Matrix dt = d.transpose();
  const Matrix m22 = -1.0 * (dt * q * d) - s.L.transpose() * d - dt * s.L - s.R.matrix();
  return SymmetricMatrix::symmetric_part(vstack(hstack(m11, m12), hstack(m12.transpose(), m22)));
}

struct DissipativityVerdict {
  bool pass = false;
  bool inertia_ok = false;
  bool residual_ok = false;
  double block_max = 0.0;
  Inertia inertia;
  Inertia expected;
  Vector witness;  ///< (x, u) direction of the largest block eigenvalue
  std::string message;
};

inline DissipativityVerdict verify_dissipativity(const LtiSystem& sys, const DissipativityCertificate& cert,
                                                 const NumericPolicy& policy = {}) {
  const std::size_t n = sys.states();
  if (cert.P.dim() != n) throw DimensionError("certificate storage does not match state dimension");
  if (cert.p > n) throw InputError("dissipativity degree exceeds state dimension");
  DissipativityVerdict v;
  const SymmetricMatrix blk = dissipativity_block(sys, cert.P, cert.lambda, cert.supply, cert.epsilon);
  const SymEigen e = sym_eigen(blk);
  v.block_max = e.values.empty() ? 0.0 : e.values.back();
  if (!e.values.empty()) v.witness = e.vectors.col_vector(e.values.size() - 1);
  v.residual_ok = v.block_max <= policy.lmi_tol;
  v.inertia = inertia_of(cert.P, policy);
  v.expected = Inertia{cert.p, 0, n - cert.p};
  v.inertia_ok = v.inertia == v.expected;
  v.pass = v.residual_ok && v.inertia_ok;
  if (v.pass) {
    v.message = "dissipation LMI holds, lambda_max = " + num(v.block_max);
  } else {
    if (!v.inertia_ok) v.message = "storage inertia " + v.inertia.str() + " differs from " + v.expected.str();
    if (!v.residual_ok) {
      if (!v.message.empty()) v.message += "; ";
      v.message += "dissipation block has eigenvalue " + num(v.block_max);
    }
  }
  return v;
}

/**
 * @brief Smallest gamma for which the gain supply certifies (P, lambda).
 *
 * Bisection on [lo, hi]; the returned value is the upper end of a final
 * bracket of width below gain_tol, so it is itself feasible.
 */
inline double min_gain_bisection(const LtiSystem& sys, const SymmetricMatrix& p, double lambda, std::size_t degree,
                                 std::pair<double, double> bracket, const NumericPolicy& policy = {}) {
  auto [lo, hi] = bracket;
  if (!(lo >= 0.0) || !(hi > lo) || !std::isfinite(hi))
    throw InvalidBracket("gain bracket must satisfy 0 <= lo < hi");
  auto feasible = [&](double g) {
    return verify_dissipativity(sys, {p, lambda, 0.0, degree, supply_gain(g, sys.outputs(), sys.inputs())}, policy).pass;
  };
  if (!feasible(hi)) throw InvalidBracket("gain supply infeasible at the upper end " + std::to_string(hi));
  if (feasible(lo)) throw InvalidBracket("gain supply already feasible at the lower end " + num(lo));
  while (hi - lo > policy.gain_tol) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid) ? hi : lo) = mid;
  }
  return hi;
}

/// Same as above with the degree read off the storage inertia.
inline double min_gain_bisection(const LtiSystem& sys, const SymmetricMatrix& p, double lambda,
                                 std::pair<double, double> bracket, const NumericPolicy& policy = {}) {
  return min_gain_bisection(sys, p, lambda, inertia_of(p, policy).negative, bracket, policy);
}

struct PassivityStorageResult {
  bool found = false;
  DissipativityCertificate certificate;
  LmiResult report;
};

/**
 * @brief Storage search for {A'P + PA + 2 lambda P <= -eps I, PB = C'}.
 *
 * Gated by verify_dissipativity with the passivity supply.
 */
inline PassivityStorageResult find_passivity_storage(const LtiSystem& sys, double lambda, std::size_t p,
                                                     const NumericPolicy& policy = {}, double epsilon = 1e-6) {
  if (sys.has_feedthrough()) throw UnsupportedConfiguration("passivity storage search requires D = 0");
  if (sys.inputs() != sys.outputs()) throw DimensionError("passivity needs as many inputs as outputs");
  LmiProblem prob = dominance_problem(sys.A, lambda, p, epsilon);
  const Matrix b = sys.B;
  const Matrix ct = sys.C.transpose();
  prob.equalities.emplace_back([b, ct](const SymmetricMatrix& x) { return x.matrix() * b - ct; });

  SymmetricMatrix seed = default_seed(sys.states(), p);
  try {
    seed = construct_certificate(sys.A, lambda, p, policy).P;
  } catch (const Error&) {
  }
  PassivityStorageResult out;
  out.report = solve(prob, seed, policy);
  if (!out.report.feasible()) return out;
  out.certificate = {*out.report.P, lambda, epsilon, p, supply_passivity(sys.outputs(), sys.inputs())};
  const auto v = verify_dissipativity(sys, out.certificate, policy);
  if (!v.pass) {
    out.report.status = LmiResult::Status::budget_exhausted;
    out.report.message = "solver point rejected by verify_dissipativity: " + v.message;
    return out;
  }
  out.found = true;
  return out;
}

/**
 * @brief Storage search for an arbitrary supply.
 *
 * Passivity supplies (Q = 0, L = I, R = 0) go through the equality-constrained
 * search. Other supplies use the full dissipation block with margin epsilon,
 * seeded from the constructed dominance certificate at the scale with the
 * smallest top block eigenvalue.
 */
inline PassivityStorageResult find_dissipativity_storage(const LtiSystem& sys, double lambda, std::size_t p,
                                                         const SupplyRate& supply, const NumericPolicy& policy = {},
                                                         double epsilon = 1e-6) {
  check_supply_dims(sys, supply);
  const bool passive = supply.outputs() == supply.inputs() && supply.Q.matrix().max_abs() == 0.0 &&
                       supply.R.matrix().max_abs() == 0.0 &&
                       (supply.L - Matrix::identity(supply.outputs())).max_abs() == 0.0;
  if (passive && !sys.has_feedthrough()) return find_passivity_storage(sys, lambda, p, policy, epsilon);
  LmiProblem prob;
  prob.n = sys.states();
  prob.target = Inertia{p, 0, sys.states() - p};
  prob.epsilon = epsilon;
  prob.blocks.emplace_back(
      [sys, lambda, supply](const SymmetricMatrix& x) { return dissipativity_block(sys, x, lambda, supply, 0.0); });
  SymmetricMatrix seed = default_seed(sys.states(), p);
  try {
    const auto cert = construct_certificate(sys.A, lambda, p, policy);
    // the block is affine in the scale, so its top eigenvalue is convex along the ray
    double best = INFINITY;
    for (int k = -60; k <= 60; ++k) {
      const SymmetricMatrix trial = std::pow(10.0, k / 10.0) * cert.P;
      const double top = lambda_max(dissipativity_block(sys, trial, lambda, supply, 0.0));
      if (top < best) {
        best = top;
        seed = trial;
      }
    }
  } catch (const Error&) {
  }
  PassivityStorageResult out;
  out.report = solve(prob, seed, policy);
  if (!out.report.feasible()) return out;
  out.certificate = {*out.report.P, lambda, epsilon, p, supply};
  const auto v = verify_dissipativity(sys, out.certificate, policy);
  if (!v.pass) {
    out.report.status = LmiResult::Status::budget_exhausted;
    out.report.message = "solver point rejected by verify_dissipativity: " + v.message;
    return out;
  }
  out.found = true;
  return out;
}

}  // namespace pdom
