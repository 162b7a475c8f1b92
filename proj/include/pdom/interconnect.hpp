#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "dissipativity.hpp"
#include "errors.hpp"
#include "lti.hpp"
#include "matrix.hpp"
#include "numeric_policy.hpp"
#include "sym_eigen.hpp"

namespace pdom {

/// Negative feedback u1 = -y2 + v1, u2 = y1 + v2.
struct FeedbackLoop {
  LtiSystem sys1;
  LtiSystem sys2;
  LtiSystem closed;
};

inline void check_loop_channels(std::size_t r1, std::size_t m1, std::size_t r2, std::size_t m2) {
  if (m1 != r2 || m2 != r1)
    throw DimensionError("loop channels incompatible: sys1 has " + std::to_string(m1) + " inputs / " +
                         std::to_string(r1) + " outputs, sys2 has " + std::to_string(m2) + " inputs / " +
                         std::to_string(r2) + " outputs");
}

/**
 * A_cl = [[A1, -B1 C2], [B2 C1, A2]], B_cl = blockdiag(B1, B2),
 * C_cl = blockdiag(C1, C2), D_cl = 0.
 */
inline LtiSystem feedback_compose(const LtiSystem& s1, const LtiSystem& s2) {
  if (s1.has_feedthrough() || s2.has_feedthrough())
    throw UnsupportedConfiguration("feedback_compose requires D = 0 in both subsystems");
  if (s1.states() == 0 || s2.states() == 0)
    throw DimensionError("feedback_compose needs dynamic subsystems; use static_feedback for gains");
  check_loop_channels(s1.outputs(), s1.inputs(), s2.outputs(), s2.inputs());
  const Matrix a = vstack(hstack(s1.A, -1.0 * (s1.B * s2.C)), hstack(s2.B * s1.C, s2.A));
  const Matrix b = block_diag(s1.B, s2.B);
  const Matrix c = block_diag(s1.C, s2.C);
  LtiSystem out(a, b, c, Matrix(c.rows(), b.cols()));
  out.name = s1.name.empty() && s2.name.empty() ? "" : "loop(" + s1.name + "," + s2.name + ")";
  return out;
}

inline FeedbackLoop make_loop(const LtiSystem& s1, const LtiSystem& s2) { return {s1, s2, feedback_compose(s1, s2)}; }

/// u = -K y + v on a strictly proper system: A - B K C.
inline LtiSystem static_feedback(const LtiSystem& sys, const Matrix& k) {
  if (sys.has_feedthrough()) throw UnsupportedConfiguration("static_feedback requires D = 0");
  if (k.rows() != sys.inputs() || k.cols() != sys.outputs())
    throw DimensionError("feedback gain is " + k.shape() + ", expected " + std::to_string(sys.inputs()) + "x" +
                         std::to_string(sys.outputs()));
  LtiSystem out(sys.A - sys.B * k * sys.C, sys.B, sys.C, Matrix(sys.outputs(), sys.inputs()));
  out.name = sys.name;
  return out;
}

inline LtiSystem static_feedback(const LtiSystem& sys, double k) {
  return static_feedback(sys, k * Matrix::identity(sys.outputs()).block(0, 0, sys.inputs(), sys.outputs()));
}

/**
 * Supply on (y, v) with y = (y1, y2), v = (v1, v2):
 * Q = [[Q1 + R2, -L1 + L2'], [-L1' + L2, Q2 + R1]],
 * L = [[L1, R2], [-R1, L2]], R = blockdiag(R1, R2).
 */
inline SupplyRate compose_supply(const SupplyRate& s1, const SupplyRate& s2) {
  check_loop_channels(s1.outputs(), s1.inputs(), s2.outputs(), s2.inputs());
  const Matrix& q1 = s1.Q.matrix();
  const Matrix& q2 = s2.Q.matrix();
  const Matrix& r1 = s1.R.matrix();
  const Matrix& r2 = s2.R.matrix();
  const Matrix q = vstack(hstack(q1 + r2, s2.L.transpose() - s1.L), hstack(s2.L - s1.L.transpose(), q2 + r1));
  const Matrix l = vstack(hstack(s1.L, r2), hstack(-1.0 * r1, s2.L));
  return {SymmetricMatrix(q), l, block_diag(s1.R, s2.R)};
}

struct CouplingVerdict {
  bool pass = false;
  double lambda_max = 0.0;
  double tau1 = 1.0;
  double tau2 = 1.0;
  std::string message;
};

/// lambda_max of the closed-loop output weight for tau1 s1 and tau2 s2.
inline CouplingVerdict coupling_condition(const SupplyRate& s1, const SupplyRate& s2, double tau1, double tau2,
                                          const NumericPolicy& policy = {}) {
  if (!(tau1 > 0.0) || !(tau2 > 0.0)) throw InputError("supply scalings must be positive");
  CouplingVerdict v;
  v.tau1 = tau1;
  v.tau2 = tau2;
  const SupplyRate cl = compose_supply(s1.scaled(tau1), s2.scaled(tau2));
  v.lambda_max = cl.Q.dim() ? lambda_max(cl.Q) : 0.0;
  v.pass = v.lambda_max <= policy.lmi_tol;
  v.message = std::string(v.pass ? "coupling holds" : "coupling violated") +
              ", lambda_max = " + num(v.lambda_max);
  return v;
}

inline CouplingVerdict coupling_condition(const SupplyRate& s1, const SupplyRate& s2, const NumericPolicy& policy = {}) {
  return coupling_condition(s1, s2, 1.0, 1.0, policy);
}

/**
 * @brief Coupling test over positive supply scalings.
 *
 * Scaling a supply by tau > 0 keeps it certified (storage and margin scale
 * with it). The output weight is affine in tau = tau1 / tau2, so its largest
 * eigenvalue is convex in tau; golden-section search runs in log tau over
 * [1e-8, 1e8].
 */
inline CouplingVerdict scaled_coupling_condition(const SupplyRate& s1, const SupplyRate& s2,
                                                 const NumericPolicy& policy = {}) {
  check_loop_channels(s1.outputs(), s1.inputs(), s2.outputs(), s2.inputs());
  auto f = [&](double log_tau) {
    // normalize so that tau1 + tau2 = 2
    const double tau = std::exp(log_tau);
    return lambda_max(compose_supply(s1.scaled(2 * tau / (1 + tau)), s2.scaled(2 / (1 + tau))).Q);
  };
  double lo = std::log(1e-8), hi = std::log(1e8);
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = f(x2);
    }
  }
  const double best = f1 <= f2 ? x1 : x2;
  const double tau = std::exp(best);
  CouplingVerdict unit = coupling_condition(s1, s2, policy);
  CouplingVerdict scaled = coupling_condition(s1, s2, 2 * tau / (1 + tau), 2 / (1 + tau), policy);
  return unit.lambda_max <= scaled.lambda_max ? unit : scaled;
}

/**
 * @brief Dominance certificate of the negative feedback loop.
 *
 * P = blockdiag(tau1 P1, tau2 P2) with degree p1 + p2. Both certificates
 * must share the rate and the scaled supplies must pass the coupling test.
 */
inline DominanceCertificate closed_loop_certificate(const DissipativityCertificate& c1,
                                                    const DissipativityCertificate& c2, double tau1 = 1.0,
                                                    double tau2 = 1.0, const NumericPolicy& policy = {}) {
  const double scale = std::max({1.0, std::abs(c1.lambda), std::abs(c2.lambda)});
  if (std::abs(c1.lambda - c2.lambda) > 1e-12 * scale)
    throw RateMismatch("subsystem rates differ: " + num(c1.lambda) + " vs " + num(c2.lambda));
  const auto coupling = coupling_condition(c1.supply, c2.supply, tau1, tau2, policy);
  if (!coupling.pass) throw CertificationError("coupling condition fails: " + coupling.message);
  DominanceCertificate cert;
  cert.P = block_diag(tau1 * c1.P, tau2 * c2.P);
  cert.lambda = c1.lambda;
  cert.epsilon = std::min(tau1 * c1.epsilon, tau2 * c2.epsilon);
  cert.p = c1.p + c2.p;
  return cert;
}

}  // namespace pdom
