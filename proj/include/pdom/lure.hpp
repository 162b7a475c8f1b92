#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "dissipativity.hpp"
#include "errors.hpp"
#include "interconnect.hpp"
#include "lmi.hpp"
#include "lti.hpp"
#include "matrix.hpp"
#include "numeric_policy.hpp"

namespace pdom {

/**
 * @brief Scalar static nonlinearity of a Lur'e channel.
 *
 * cubic_saturated: scale * (s - min(s^2, 4) s / 3).
 * linear: scale * s.
 * tabulated: piecewise linear through the knots, extended linearly with
 * the end segment slopes.
 *
 * Derivatives at kinks are taken from the left.
 */
class Nonlinearity {
 public:
  enum class Kind { cubic_saturated, linear, tabulated };

  static Nonlinearity cubic_saturated(double scale = 1.0) { return Nonlinearity(Kind::cubic_saturated, scale, {}, {}); }
  static Nonlinearity linear(double slope) { return Nonlinearity(Kind::linear, slope, {}, {}); }
  static Nonlinearity tabulated(std::vector<double> s, std::vector<double> v) {
    if (s.size() < 2 || s.size() != v.size()) throw InputError("tabulated nonlinearity needs at least two knots");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!std::isfinite(s[i]) || !std::isfinite(v[i])) throw InputError("tabulated knots must be finite");
      if (i > 0 && !(s[i] > s[i - 1])) throw InputError("tabulated knots must be strictly increasing");
    }
    return Nonlinearity(Kind::tabulated, 1.0, std::move(s), std::move(v));
  }

  [[nodiscard]] Kind kind() const { return kind_; }
  [[nodiscard]] double scale() const { return scale_; }
  [[nodiscard]] const std::vector<double>& knots() const { return s_; }
  [[nodiscard]] const std::vector<double>& values() const { return v_; }

  [[nodiscard]] std::string name() const {
    switch (kind_) {
      case Kind::cubic_saturated: return "cubic_saturated";
      case Kind::linear: return "linear";
      case Kind::tabulated: return "tabulated";
    }
    return "unknown";
  }

  [[nodiscard]] double operator()(double s) const {
    switch (kind_) {
      case Kind::cubic_saturated: return scale_ * (s - std::min(s * s, 4.0) * s / 3.0);
      case Kind::linear: return scale_ * s;
      case Kind::tabulated: {
        const std::size_t k = segment(s);
        return v_[k] + slope_of(k) * (s - s_[k]);
      }
    }
    return 0.0;
  }

  /// Left derivative.
  [[nodiscard]] double slope(double s) const {
    switch (kind_) {
      case Kind::cubic_saturated: return scale_ * (s > -2.0 && s <= 2.0 ? 1.0 - s * s : -1.0 / 3.0);
      case Kind::linear: return scale_;
      case Kind::tabulated: return slope_of(segment_left(s));
    }
    return 0.0;
  }

  /// Exact range of the derivative from the branch formulas.
  [[nodiscard]] std::pair<double, double> slope_range() const {
    switch (kind_) {
      case Kind::cubic_saturated: {
        const double a = -3.0 * scale_, b = 1.0 * scale_;
        return {std::min(a, b), std::max(a, b)};
      }
      case Kind::linear: return {scale_, scale_};
      case Kind::tabulated: {
        double lo = slope_of(0), hi = lo;
        for (std::size_t k = 1; k + 1 < s_.size(); ++k) {
          lo = std::min(lo, slope_of(k));
          hi = std::max(hi, slope_of(k));
        }
        return {lo, hi};
      }
    }
    return {0.0, 0.0};
  }

  /// Points where the derivative jumps.
  [[nodiscard]] std::vector<double> kinks() const {
    if (kind_ == Kind::cubic_saturated) return {-2.0, 2.0};
    if (kind_ == Kind::tabulated) return s_;
    return {};
  }

 private:
  Nonlinearity(Kind k, double scale, std::vector<double> s, std::vector<double> v)
      : kind_(k), scale_(scale), s_(std::move(s)), v_(std::move(v)) {
    if (!std::isfinite(scale_)) throw InputError("nonlinearity scale must be finite");
  }

  [[nodiscard]] double slope_of(std::size_t k) const { return (v_[k + 1] - v_[k]) / (s_[k + 1] - s_[k]); }

  // segment index in [0, knots-2] containing s, half-open to the right
  [[nodiscard]] std::size_t segment(double s) const {
    const auto it = std::upper_bound(s_.begin(), s_.end(), s);
    const auto idx = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, it - s_.begin() - 1));
    return std::min(idx, s_.size() - 2);
  }

  // segment with s in its half-open interval (s_k, s_{k+1}]
  [[nodiscard]] std::size_t segment_left(double s) const {
    const auto it = std::lower_bound(s_.begin(), s_.end(), s);
    const auto idx = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, it - s_.begin() - 1));
    return std::min(idx, s_.size() - 2);
  }

  Kind kind_;
  double scale_;
  std::vector<double> s_;
  std::vector<double> v_;
};

/// Channel g * sigma(h' x) with declared slope bounds alpha <= sigma' <= beta.
struct LureChannel {
  Vector g;
  Vector h;
  Nonlinearity sigma = Nonlinearity::linear(0.0);
  double alpha = 0.0;
  double beta = 0.0;
};

struct SlopeValidation {
  double range = 10.0;  ///< samples cover [-range, range]
  std::size_t samples = 10000;
};

/**
 * @brief x' = A x + sum_i g_i sigma_i(h_i' x) + B u, y = C x.
 *
 * Construction validates every channel: closed-form slope range and
 * dense sampling must stay inside the declared bounds.
 */
class LureSystem {
 public:
  Matrix A;
  std::vector<LureChannel> channels;
  Matrix B;
  Matrix C;
  std::string name;

  LureSystem() = default;
  LureSystem(Matrix a, std::vector<LureChannel> ch, Matrix b, Matrix c, std::string nm = {},
             const SlopeValidation& validation = {})
      : A(std::move(a)), channels(std::move(ch)), B(std::move(b)), C(std::move(c)), name(std::move(nm)) {
    if (!A.square()) throw DimensionError("Lur'e A must be square, got " + A.shape());
    const std::size_t n = A.rows();
    if (B.rows() != n) throw DimensionError("Lur'e B has " + std::to_string(B.rows()) + " rows, expected " + std::to_string(n));
    if (C.cols() != n) throw DimensionError("Lur'e C has " + std::to_string(C.cols()) + " columns, expected " + std::to_string(n));
    if (!A.all_finite() || !B.all_finite() || !C.all_finite()) throw InputError("Lur'e matrices must be finite");
    for (std::size_t i = 0; i < channels.size(); ++i) validate_channel(i, validation);
  }

  [[nodiscard]] std::size_t states() const { return A.rows(); }
  [[nodiscard]] std::size_t inputs() const { return B.cols(); }
  [[nodiscard]] std::size_t outputs() const { return C.rows(); }

  /// Autonomous part f(x).
  [[nodiscard]] Vector field(std::span<const double> x) const {
    Vector dx = A * x;
    for (const auto& ch : channels) {
      const double v = ch.sigma(dot(ch.h, x));
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += ch.g[i] * v;
    }
    return dx;
  }

  [[nodiscard]] Vector rhs(std::span<const double> x, std::span<const double> u) const {
    Vector dx = field(x);
    if (!u.empty()) {
      const Vector bu = B * u;
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += bu[i];
    }
    return dx;
  }

  [[nodiscard]] Vector output(std::span<const double> x) const { return C * x; }

  /// The linear part with each nonlinearity replaced by the given slopes.
  [[nodiscard]] Matrix with_slopes(std::span<const double> slopes) const {
    Matrix j = A;
    for (std::size_t c = 0; c < channels.size(); ++c)
      for (std::size_t i = 0; i < states(); ++i)
        for (std::size_t k = 0; k < states(); ++k) j(i, k) += channels[c].g[i] * slopes[c] * channels[c].h[k];
    return j;
  }

  [[nodiscard]] LtiSystem linear_part() const { return LtiSystem::strictly_proper(A, B, C); }

 private:
  void validate_channel(std::size_t i, const SlopeValidation& val) const {
    const auto& ch = channels[i];
    const std::string tag = "channel " + std::to_string(i) + ": ";
    if (ch.g.size() != states() || ch.h.size() != states()) throw DimensionError(tag + "g and h must have n entries");
    if (!std::isfinite(ch.alpha) || !std::isfinite(ch.beta) || ch.alpha > ch.beta)
      throw InputError(tag + "slope bounds must be finite with alpha <= beta");
    constexpr double slack = 1e-12;
    const auto [lo, hi] = ch.sigma.slope_range();
    if (lo < ch.alpha - slack || hi > ch.beta + slack)
      throw InputError(tag + "slope range [" + num(lo) + ", " + num(hi) +
                       "] exceeds declared bounds [" + num(ch.alpha) + ", " + num(ch.beta) + "]");
    const std::size_t ns = std::max<std::size_t>(val.samples, 2);
    for (std::size_t k = 0; k < ns; ++k) {
      const double s = -val.range + 2.0 * val.range * static_cast<double>(k) / static_cast<double>(ns - 1);
      const double d = ch.sigma.slope(s);
      if (d < ch.alpha - slack || d > ch.beta + slack)
        throw InputError(tag + "sampled slope " + num(d) + " at s = " + num(s) +
                         " outside declared bounds");
    }
  }
};

/// Jacobian A + sum_i g_i sigma_i'(h_i' x) h_i'.
inline Matrix jacobian(const LureSystem& sys, std::span<const double> x) {
  if (x.size() != sys.states()) throw DimensionError("state has wrong dimension for the Jacobian");
  Vector slopes;
  slopes.reserve(sys.channels.size());
  for (const auto& ch : sys.channels) slopes.push_back(ch.sigma.slope(dot(ch.h, x)));
  return sys.with_slopes(slopes);
}

struct VertexFamily {
  std::vector<Matrix> vertices;
  std::vector<Vector> corners;  ///< slope substituted in each channel
};

/// All 2^k substitutions sigma_i' in {alpha_i, beta_i}; channel 0 varies fastest.
inline VertexFamily vertex_family(const LureSystem& sys) {
  const std::size_t k = sys.channels.size();
  if (k > 20) throw UnsupportedConfiguration("too many channels for vertex enumeration");
  VertexFamily fam;
  const std::size_t count = std::size_t{1} << k;
  for (std::size_t mask = 0; mask < count; ++mask) {
    Vector slopes(k);
    for (std::size_t c = 0; c < k; ++c) slopes[c] = (mask >> c) & 1U ? sys.channels[c].beta : sys.channels[c].alpha;
    fam.vertices.push_back(sys.with_slopes(slopes));
    fam.corners.push_back(std::move(slopes));
  }
  return fam;
}

struct DiffDominanceVerdict {
  bool pass = false;
  std::vector<DominanceVerdict> vertices;
  std::vector<bool> split_matches;  ///< A_i + lambda I has exactly p eigenvalues in the open right half plane
  std::string message;
};

inline DiffDominanceVerdict check_diff_dominance(const LureSystem& sys, const DominanceCertificate& cert,
                                                 const NumericPolicy& policy = {}) {
  const VertexFamily fam = vertex_family(sys);
  DiffDominanceVerdict out;
  out.pass = true;
  for (std::size_t i = 0; i < fam.vertices.size(); ++i) {
    auto v = check_dominance(fam.vertices[i], cert, policy);
    const auto split = eigen_split_test(fam.vertices[i], cert.lambda, cert.p, policy);
    out.split_matches.push_back(split.pass());
    if (!v.pass) {
      out.pass = false;
      if (!out.message.empty()) out.message += "; ";
      out.message += "vertex " + std::to_string(i) + ": " + v.message;
    }
    out.vertices.push_back(std::move(v));
  }
  if (out.pass) out.message = "all " + std::to_string(fam.vertices.size()) + " vertices pass";
  return out;
}

struct DiffDissipativityVerdict {
  bool pass = false;
  std::vector<DissipativityVerdict> vertices;
  std::string message;
};

inline DiffDissipativityVerdict check_diff_dissipativity(const LureSystem& sys, const DissipativityCertificate& cert,
                                                         const NumericPolicy& policy = {}) {
  const VertexFamily fam = vertex_family(sys);
  DiffDissipativityVerdict out;
  out.pass = true;
  for (std::size_t i = 0; i < fam.vertices.size(); ++i) {
    const auto vsys = LtiSystem::strictly_proper(fam.vertices[i], sys.B, sys.C);
    auto v = verify_dissipativity(vsys, cert, policy);
    if (!v.pass) {
      out.pass = false;
      if (!out.message.empty()) out.message += "; ";
      out.message += "vertex " + std::to_string(i) + ": " + v.message;
    }
    out.vertices.push_back(std::move(v));
  }
  if (out.pass) out.message = "all " + std::to_string(fam.vertices.size()) + " vertices pass";
  return out;
}

/// Negative feedback of two Lur'e systems; channels are zero-padded into the joint state.
inline LureSystem diff_feedback_compose(const LureSystem& s1, const LureSystem& s2) {
  check_loop_channels(s1.outputs(), s1.inputs(), s2.outputs(), s2.inputs());
  const std::size_t n1 = s1.states(), n2 = s2.states();
  if (n1 == 0 || n2 == 0) throw DimensionError("diff_feedback_compose needs dynamic subsystems");
  const Matrix a = vstack(hstack(s1.A, -1.0 * (s1.B * s2.C)), hstack(s2.B * s1.C, s2.A));
  std::vector<LureChannel> ch;
  for (const auto& c : s1.channels) {
    LureChannel lifted = c;
    lifted.g.resize(n1 + n2, 0.0);
    lifted.h.resize(n1 + n2, 0.0);
    ch.push_back(std::move(lifted));
  }
  for (const auto& c : s2.channels) {
    LureChannel lifted = c;
    lifted.g.insert(lifted.g.begin(), n1, 0.0);
    lifted.h.insert(lifted.h.begin(), n1, 0.0);
    ch.push_back(std::move(lifted));
  }
  // the channels were validated on the subsystems
  return LureSystem(a, std::move(ch), block_diag(s1.B, s2.B), block_diag(s1.C, s2.C),
                    s1.name.empty() && s2.name.empty() ? "" : "loop(" + s1.name + "," + s2.name + ")",
                    SlopeValidation{1.0, 2});
}

/**
 * @brief Common dominance storage for every vertex, gated by
 * check_diff_dominance.
 */
inline LmiResult find_diff_dominance_storage(const LureSystem& sys, double lambda, std::size_t p,
                                             const NumericPolicy& policy = {}, double epsilon = 1e-6) {
  if (p > sys.states()) throw InputError("dominance degree exceeds state dimension");
  const VertexFamily fam = vertex_family(sys);
  LmiProblem prob;
  prob.n = sys.states();
  prob.target = Inertia{p, 0, sys.states() - p};
  prob.epsilon = epsilon;
  Matrix center(sys.states(), sys.states());
  for (const auto& v : fam.vertices) {
    prob.blocks.emplace_back([v, lambda](const SymmetricMatrix& x) { return residual(v, x, lambda); });
    center += (1.0 / static_cast<double>(fam.vertices.size())) * v;
  }
  SymmetricMatrix seed = default_seed(sys.states(), p);
  try {
    seed = construct_certificate(center, lambda, p, policy).P;
  } catch (const Error&) {
  }
  LmiResult r = solve(prob, seed, policy);
  if (r.feasible()) {
    const auto v = check_diff_dominance(sys, {*r.P, lambda, epsilon, p}, policy);
    if (!v.pass) {
      r.status = LmiResult::Status::budget_exhausted;
      r.message = "solver point rejected by check_diff_dominance: " + v.message;
    }
  }
  return r;
}

/**
 * @brief Differential passivity storage over the vertex family.
 *
 * One residual block per vertex plus PB = C'. Seeded from the certificate of
 * the vertex average when its spectrum splits. Gated by
 * check_diff_dissipativity.
 */
inline PassivityStorageResult find_diff_passivity_storage(const LureSystem& sys, double lambda, std::size_t p,
                                                          const NumericPolicy& policy = {}, double epsilon = 1e-6) {
  if (sys.inputs() != sys.outputs()) throw DimensionError("passivity needs as many inputs as outputs");
  const VertexFamily fam = vertex_family(sys);
  LmiProblem prob;
  prob.n = sys.states();
  prob.target = Inertia{p, 0, sys.states() - p};
  prob.epsilon = epsilon;
  Matrix center(sys.states(), sys.states());
  for (const auto& v : fam.vertices) {
    prob.blocks.emplace_back([v, lambda](const SymmetricMatrix& x) { return residual(v, x, lambda); });
    center += (1.0 / static_cast<double>(fam.vertices.size())) * v;
  }
  const Matrix b = sys.B;
  const Matrix ct = sys.C.transpose();
  prob.equalities.emplace_back([b, ct](const SymmetricMatrix& x) { return x.matrix() * b - ct; });
  SymmetricMatrix seed = default_seed(sys.states(), p);
  try {
    seed = construct_certificate(center, lambda, p, policy).P;
  } catch (const Error&) {
  }
  PassivityStorageResult out;
  out.report = solve(prob, seed, policy);
  if (!out.report.feasible()) return out;
  out.certificate = {*out.report.P, lambda, epsilon, p, supply_passivity(sys.outputs(), sys.inputs())};
  const auto v = check_diff_dissipativity(sys, out.certificate, policy);
  if (!v.pass) {
    out.report.status = LmiResult::Status::budget_exhausted;
    out.report.message = "solver point rejected by check_diff_dissipativity: " + v.message;
    return out;
  }
  out.found = true;
  return out;
}

}  // namespace pdom
