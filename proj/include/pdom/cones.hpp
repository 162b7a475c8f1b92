#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "errors.hpp"
#include "expm.hpp"
#include "lti.hpp"
#include "matrix.hpp"
#include "numeric_policy.hpp"
#include "sym_eigen.hpp"
#include "trajectory.hpp"

namespace pdom {

/// K = {x : x^T P x <= 0} for P of inertia (p, 0, n - p).
class QuadraticCone {
 public:
  explicit QuadraticCone(SymmetricMatrix p, const NumericPolicy& policy = {}) : P_(std::move(p)) {
    const Inertia in = inertia_of(P_, policy);
    if (in.zero != 0) throw CertificationError("cone matrix is singular, inertia " + in.str());
    p_ = in.negative;
    z_tol_ = policy.zero_band_rel * spectral_norm(P_);
  }

  [[nodiscard]] const SymmetricMatrix& P() const { return P_; }
  [[nodiscard]] std::size_t rank() const { return p_; }
  [[nodiscard]] std::size_t dim() const { return P_.dim(); }
  [[nodiscard]] double zero_band() const { return z_tol_; }

 private:
  SymmetricMatrix P_;
  std::size_t p_ = 0;
  double z_tol_ = 0.0;
};

enum class ConePosition { interior, boundary, exterior, apex };

inline const char* to_string(ConePosition c) {
  switch (c) {
    case ConePosition::interior: return "interior";
    case ConePosition::boundary: return "boundary";
    case ConePosition::exterior: return "exterior";
    case ConePosition::apex: return "apex";
  }
  return "?";
}

struct ConeClassification {
  ConePosition position = ConePosition::apex;
  double value = 0.0;  ///< x^T P x
};

inline ConeClassification classify(const QuadraticCone& cone, std::span<const double> x) {
  if (x.size() != cone.dim()) throw DimensionError("classify: vector size mismatch");
  const double nx2 = dot(x, x);
  ConeClassification c;
  if (nx2 == 0.0) return c;
  c.value = quad_form(cone.P().matrix(), x);
  const double band = cone.zero_band() * nx2;
  if (c.value < -band)
    c.position = ConePosition::interior;
  else if (c.value > band)
    c.position = ConePosition::exterior;
  else
    c.position = ConePosition::boundary;
  return c;
}

/**
 * @brief Random point on the cone boundary x^T P x = 0, unit norm.
 *
 * Mixes a random direction from the negative eigenspace of P with one from
 * the positive eigenspace, scaled to equal quadratic weight.
 */
template <typename Rng>
Vector sample_boundary(const QuadraticCone& cone, Rng& rng) {
  const std::size_t n = cone.dim();
  const std::size_t p = cone.rank();
  if (p == 0 || p == n) throw CertificationError("cone boundary is only the apex for p = 0 or p = n");
  const auto e = sym_eigen(cone.P());
  std::normal_distribution<double> nd(0.0, 1.0);
  Vector neg(n, 0.0), pos(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double w = nd(rng);
    Vector& target = k < p ? neg : pos;
    for (std::size_t i = 0; i < n; ++i) target[i] += w * e.vectors(i, k);
  }
  const double qn = -quad_form(cone.P().matrix(), neg);
  const double qp = quad_form(cone.P().matrix(), pos);
  Vector x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = neg[i] / std::sqrt(qn) + pos[i] / std::sqrt(qp);
  const double nx = norm2(x);
  for (double& v : x) v /= nx;
  return x;
}

struct ProbeVerdict {
  bool pass = true;
  std::size_t checked = 0;
  std::size_t violations = 0;
  double worst = -std::numeric_limits<double>::infinity();  ///< max over probes of y^T P y / |y|^2
  std::string note;
};

/**
 * @brief Strict positivity probe: boundary points must be mapped strictly
 * inside the cone by e^{At} for every probed t > 0.
 */
template <typename Rng>
ProbeVerdict positivity_probe(const Matrix& a, const QuadraticCone& cone, std::span<const double> times,
                              std::size_t samples, Rng& rng, const NumericPolicy& policy = {}) {
  if (a.rows() != cone.dim()) throw DimensionError("positivity_probe: system and cone dimensions differ");
  ProbeVerdict v;
  if (cone.rank() == 0 || cone.rank() == cone.dim()) {
    v.note = "cone boundary reduces to the apex; nothing to probe";
    return v;
  }
  std::vector<Matrix> flows;
  flows.reserve(times.size());
  for (double t : times) {
    if (!(t > 0)) throw InputError("probe times must be positive");
    flows.push_back(expm(a, t));
  }
  for (std::size_t s = 0; s < samples; ++s) {
    const Vector x = sample_boundary(cone, rng);
    for (const auto& flow : flows) {
      const Vector y = flow * x;
      const double ny2 = dot(y, y);
      const double q = quad_form(cone.P().matrix(), y);
      ++v.checked;
      v.worst = std::max(v.worst, ny2 > 0 ? q / ny2 : 0.0);
      if (!(q < -policy.probe_margin * ny2)) ++v.violations;
    }
  }
  v.pass = v.violations == 0;
  return v;
}

template <typename Rng>
ProbeVerdict positivity_probe(const LtiSystem& sys, const QuadraticCone& cone, std::span<const double> times,
                              std::size_t samples, Rng& rng, const NumericPolicy& policy = {}) {
  return positivity_probe(sys.A, cone, times, samples, rng, policy);
}

/**
 * @brief Rank-p and rank-(n-p) semidefinite forms U(x) = x^T P_u x and
 * S(x) = x^T P_s x whose ratio S/U contracts at rate 2 epsilon_hat.
 */
struct ProjectiveMeasure {
  enum class Construction { projector, lyapunov_weighted };

  SymmetricMatrix P_u;
  SymmetricMatrix P_s;
  double lambda = 0.0;
  double epsilon_hat = 0.0;
  Construction construction = Construction::projector;

  [[nodiscard]] double U(std::span<const double> x) const { return quad_form(P_u.matrix(), x); }
  [[nodiscard]] double S(std::span<const double> x) const { return quad_form(P_s.matrix(), x); }
};

namespace detail {

// Orthonormal basis for the column space of a full-column-rank matrix (MGS, two passes).
inline Matrix orthonormal_columns(const Matrix& m) {
  Matrix q = m;
  for (std::size_t j = 0; j < q.cols(); ++j) {
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t k = 0; k < j; ++k) {
        double r = 0.0;
        for (std::size_t i = 0; i < q.rows(); ++i) r += q(i, k) * q(i, j);
        for (std::size_t i = 0; i < q.rows(); ++i) q(i, j) -= r * q(i, k);
      }
    double nrm = 0.0;
    for (std::size_t i = 0; i < q.rows(); ++i) nrm += q(i, j) * q(i, j);
    nrm = std::sqrt(nrm);
    if (nrm == 0.0) throw NumericalFailure("rank-deficient subspace basis");
    for (std::size_t i = 0; i < q.rows(); ++i) q(i, j) /= nrm;
  }
  return q;
}

inline Matrix reconstruct_a(const ModalSplit& split) {
  return split.basis * block_diag(split.dominant_block, split.transient_block) * split.basis_inverse;
}

}  // namespace detail

/**
 * @brief P_u = Pi_p^T Pi_p and P_s = Pi_s^T Pi_s from the modal projectors,
 * with the largest epsilon_hat for which
 *   A^T P_u + P_u A >= (-2 lambda + epsilon_hat) P_u,
 *   A^T P_s + P_s A <= (-2 lambda - epsilon_hat) P_s.
 *
 * When the Euclidean projector norms do not contract (strongly non-normal
 * restrictions) the forms are weighted by the block Lyapunov metrics
 * instead. Throws CertificationError if neither construction verifies.
 */
inline ProjectiveMeasure projective_measure_from_split(const ModalSplit& split, const NumericPolicy& policy = {}) {
  const Matrix a = detail::reconstruct_a(split);
  const std::size_t n = a.rows();
  const std::size_t p = split.p;
  const double lambda = split.lambda;

  auto verify = [&](const ProjectiveMeasure& m) -> std::string {
    const double scale = std::max({1.0, a.frobenius_norm(), m.P_u.matrix().max_abs(), m.P_s.matrix().max_abs()});
    const double tol = policy.lmi_tol * scale * scale;
    const Matrix& pu = m.P_u.matrix();
    const Matrix& ps = m.P_s.matrix();
    const auto gu = SymmetricMatrix::symmetric_part(a.transpose() * pu + pu * a - (-2 * lambda + m.epsilon_hat) * pu);
    const auto gs = SymmetricMatrix::symmetric_part(a.transpose() * ps + ps * a - (-2 * lambda - m.epsilon_hat) * ps);
    if (n > 0 && lambda_min(gu) < -tol) return "dominant side: A^T P_u + P_u A >= (-2 lambda + eps) P_u violated";
    if (n > 0 && lambda_max(gs) > tol) return "transient side: A^T P_s + P_s A <= (-2 lambda - eps) P_s violated";
    return {};
  };

  ProjectiveMeasure m;
  m.lambda = lambda;
  m.P_u = SymmetricMatrix::symmetric_part(split.Pi_p.transpose() * split.Pi_p);
  m.P_s = SymmetricMatrix::symmetric_part(split.Pi_s.transpose() * split.Pi_s);
  double eps_u = std::numeric_limits<double>::infinity();
  double eps_s = std::numeric_limits<double>::infinity();
  if (p > 0) {
    const Matrix q = split.basis.block(0, 0, n, p);  // orthonormal by construction
    const Matrix g = q.transpose() * a * q;
    eps_u = 2.0 * (lambda_min(SymmetricMatrix::symmetric_part(g)) + lambda);
  }
  if (p < n) {
    const Matrix q = detail::orthonormal_columns(split.basis.block(0, p, n, n - p));
    const Matrix g = q.transpose() * a * q;
    eps_s = 2.0 * (-lambda - lambda_max(SymmetricMatrix::symmetric_part(g)));
  }
  m.epsilon_hat = std::min(eps_u, eps_s);
  std::string failure;
  if (m.epsilon_hat > 0 && std::isfinite(m.epsilon_hat)) {
    failure = verify(m);
    if (failure.empty()) return m;
  }

  // Lyapunov-weighted forms in the block-diagonal coordinates z = W^{-1} x
  m.construction = ProjectiveMeasure::Construction::lyapunov_weighted;
  eps_u = eps_s = std::numeric_limits<double>::infinity();
  Matrix hu_full(n, n);
  if (p > 0) {
    const Matrix fu = split.dominant_block + lambda * Matrix::identity(p);
    const SymmetricMatrix hu = lyapunov_solve(fu, -1.0 * SymmetricMatrix::identity(p), policy);
    eps_u = 1.0 / lambda_max(hu);
    hu_full.set_block(0, 0, hu.matrix());
  }
  Matrix hs_full(n, n);
  if (p < n) {
    const Matrix fs = split.transient_block + lambda * Matrix::identity(n - p);
    const SymmetricMatrix hs = lyapunov_solve(fs, SymmetricMatrix::identity(n - p), policy);
    eps_s = 1.0 / lambda_max(hs);
    hs_full.set_block(p, p, hs.matrix());
  }
  m.P_u = SymmetricMatrix::symmetric_part(hu_full).congruence(split.basis_inverse);
  m.P_s = SymmetricMatrix::symmetric_part(hs_full).congruence(split.basis_inverse);
  m.epsilon_hat = std::min(eps_u, eps_s);
  if (!std::isfinite(m.epsilon_hat)) m.epsilon_hat = 0.0;
  failure = verify(m);
  if (!failure.empty()) throw CertificationError("projective measure: " + failure);
  return m;
}

struct RatioSample {
  double t = 0.0;
  double U = 0.0;
  double S = 0.0;
  double ratio = 0.0;
};

struct RatioTrace {
  std::vector<RatioSample> series;
  bool truncated = false;     ///< U dropped into the zero band before the end
  bool monotone = true;       ///< non-increasing up to the relative tolerance
  bool within_envelope = true;  ///< ratio(t) <= exp(-2 eps_hat t) ratio(0)
  double rel_tol = 1e-6;

  /// CSV with columns t,U,S,S/U.
  void write_csv(std::ostream& os) const {
    os << "t,U,S,S/U\n";
    os.precision(12);
    for (const auto& s : series) os << s.t << "," << s.U << "," << s.S << "," << s.ratio << "\n";
  }
};

/**
 * @brief Series S(x(t))/U(x(t)) along a trajectory with the monotonicity and
 * exponential-envelope verdicts.
 */
inline RatioTrace ratio_trace(const ProjectiveMeasure& measure, const Trajectory& traj,
                              const NumericPolicy& policy = {}, double rel_tol = 1e-6) {
  RatioTrace out;
  out.rel_tol = rel_tol;
  if (traj.size() == 0) return out;
  const double band = policy.zero_band_rel * std::max(1.0, spectral_norm(measure.P_u));
  const double u0 = measure.U(traj.states.front());
  if (!(u0 > band * std::max(1.0, dot(traj.states.front(), traj.states.front()))))
    throw InputError("ratio_trace needs U(x(0)) > 0");
  const double s_round = 8.0 * static_cast<double>(measure.P_s.dim() + 1) * std::numeric_limits<double>::epsilon() *
                         spectral_norm(measure.P_s);
  double ratio0 = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const auto& x = traj.states[k];
    RatioSample s{traj.time(k), measure.U(x), measure.S(x), 0.0};
    if (!(s.U > band * dot(x, x))) {
      out.truncated = true;
      break;
    }
    s.ratio = s.S / s.U;
    if (k == 0) ratio0 = s.ratio;
    // rounding level of the quadratic form S(x), relative to U(x)
    const double floor = s_round * dot(x, x) / s.U;
    if (s.ratio > prev * (1 + rel_tol) + floor) out.monotone = false;
    const double envelope = std::exp(-2.0 * measure.epsilon_hat * (s.t - traj.t0)) * ratio0;
    if (s.ratio > envelope * (1 + rel_tol) + floor) out.within_envelope = false;
    prev = s.ratio;
    out.series.push_back(s);
  }
  return out;
}

}  // namespace pdom
