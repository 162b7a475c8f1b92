#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "lti.hpp"
#include "lure.hpp"
#include "matrix.hpp"
#include "numeric_policy.hpp"
#include "trajectory.hpp"

namespace pdom {

/// Input applied during integration: zero, constant, or u(t, x).
struct InputSignal {
  enum class Kind { zero, constant, callback };

  Kind kind = Kind::zero;
  Vector value;
  std::function<Vector(double, std::span<const double>)> fn;

  static InputSignal zero() { return {}; }
  static InputSignal constant(Vector u) { return {Kind::constant, std::move(u), {}}; }
  static InputSignal callback(std::function<Vector(double, std::span<const double>)> f) {
    return {Kind::callback, {}, std::move(f)};
  }

  [[nodiscard]] Vector at(double t, std::span<const double> x, std::size_t m) const {
    switch (kind) {
      case Kind::zero: return Vector(m, 0.0);
      case Kind::constant:
        if (value.size() != m) throw DimensionError("constant input has " + std::to_string(value.size()) + " entries, expected " + std::to_string(m));
        return value;
      case Kind::callback: {
        Vector u = fn(t, x);
        if (u.size() != m) throw DimensionError("input callback returned " + std::to_string(u.size()) + " entries, expected " + std::to_string(m));
        return u;
      }
    }
    return {};
  }
};

struct IntegrationOptions {
  double t_end = 100.0;
  double dt = 1e-3;
  std::size_t stride = 1;           ///< record every stride-th step
  double divergence_bound = 1e9;    ///< state norm that stops integration
};

/// dx = f(t, x), written into the output span.
using VectorField = std::function<void(double, std::span<const double>, std::span<double>)>;

/**
 * @brief Classical fourth-order Runge-Kutta on a uniform grid.
 *
 * Samples are stored every `stride` steps, so the trajectory grid spacing is
 * stride * dt. Integration stops with `diverged` set once the norm exceeds
 * the bound or a value is not finite.
 */
inline Trajectory integrate_field(const VectorField& f, std::span<const double> x0, const IntegrationOptions& opt) {
  if (!(opt.dt > 0.0) || !std::isfinite(opt.dt)) throw InputError("dt must be positive");
  if (!(opt.t_end >= opt.dt) || !std::isfinite(opt.t_end)) throw InputError("t_end must be at least dt");
  for (double v : x0)
    if (!std::isfinite(v)) throw InputError("initial state must be finite");
  const std::size_t stride = std::max<std::size_t>(opt.stride, 1);
  const auto steps = static_cast<std::size_t>(std::llround(opt.t_end / opt.dt));
  const std::size_t n = x0.size();
  Trajectory tr;
  tr.dt = opt.dt * static_cast<double>(stride);
  tr.states.reserve(steps / stride + 1);
  tr.states.emplace_back(x0.begin(), x0.end());
  Vector x(x0.begin(), x0.end()), k1(n), k2(n), k3(n), k4(n), tmp(n);
  const double h = opt.dt;
  for (std::size_t s = 0; s < steps; ++s) {
    const double t = static_cast<double>(s) * h;
    f(t, x, k1);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
    f(t + 0.5 * h, tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
    f(t + 0.5 * h, tmp, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * k3[i];
    f(t + h, tmp, k4);
    double sq = 0.0;
    bool finite = true;
    for (std::size_t i = 0; i < n; ++i) {
      tmp[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      finite = finite && std::isfinite(tmp[i]);
      sq += tmp[i] * tmp[i];
    }
    if (!finite || std::sqrt(sq) > opt.divergence_bound) {
      tr.diverged = true;
      break;
    }
    x.swap(tmp);
    if ((s + 1) % stride == 0) tr.states.push_back(x);
  }
  return tr;
}

namespace detail {

inline void record_inputs(Trajectory& tr, const InputSignal& u, std::size_t m) {
  if (m == 0 || u.kind == InputSignal::Kind::zero) return;
  tr.inputs.reserve(tr.states.size());
  for (std::size_t k = 0; k < tr.states.size(); ++k) tr.inputs.push_back(u.at(tr.time(k), tr.states[k], m));
}

}  // namespace detail

inline Trajectory integrate(const LtiSystem& sys, std::span<const double> x0, const InputSignal& u = {},
                            const IntegrationOptions& opt = {}) {
  if (x0.size() != sys.states()) throw DimensionError("initial state has wrong dimension");
  const std::size_t n = sys.states(), m = sys.inputs();
  const bool forced = m > 0 && u.kind != InputSignal::Kind::zero;
  auto f = [&](double t, std::span<const double> x, std::span<double> dx) {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += sys.A(i, k) * x[k];
      dx[i] = acc;
    }
    if (forced) {
      const Vector v = u.at(t, x, m);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < m; ++k) dx[i] += sys.B(i, k) * v[k];
    }
  };
  Trajectory tr = integrate_field(f, x0, opt);
  detail::record_inputs(tr, u, m);
  return tr;
}

inline Trajectory integrate(const LureSystem& sys, std::span<const double> x0, const InputSignal& u = {},
                            const IntegrationOptions& opt = {}) {
  if (x0.size() != sys.states()) throw DimensionError("initial state has wrong dimension");
  const std::size_t n = sys.states(), m = sys.inputs();
  const bool forced = m > 0 && u.kind != InputSignal::Kind::zero;
  auto f = [&](double t, std::span<const double> x, std::span<double> dx) {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += sys.A(i, k) * x[k];
      dx[i] = acc;
    }
    for (const auto& ch : sys.channels) {
      const double v = ch.sigma(dot(ch.h, x));
      for (std::size_t i = 0; i < n; ++i) dx[i] += ch.g[i] * v;
    }
    if (forced) {
      const Vector v = u.at(t, x, m);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < m; ++k) dx[i] += sys.B(i, k) * v[k];
    }
  };
  Trajectory tr = integrate_field(f, x0, opt);
  detail::record_inputs(tr, u, m);
  return tr;
}

struct AsymptoticVerdict {
  enum class Kind { fixed_point, limit_cycle, divergent, undecided };

  Kind kind = Kind::undecided;
  Vector location;          ///< last state for fixed points
  double period = 0.0;      ///< mean of the last five periods
  double amplitude = 0.0;   ///< peak-to-peak of the tracked coordinate over the last period
  double tail_displacement = 0.0;
  double fp_tol = 0.0;
  double period_jitter = 0.0;   ///< (max - min) / mean over the last five periods
  double amplitude_change = 0.0;
  std::size_t coordinate = 0;
  std::size_t window = 0;
  std::string message;
};

inline const char* to_string(AsymptoticVerdict::Kind k) {
  switch (k) {
    case AsymptoticVerdict::Kind::fixed_point: return "fixed_point";
    case AsymptoticVerdict::Kind::limit_cycle: return "limit_cycle";
    case AsymptoticVerdict::Kind::divergent: return "divergent";
    case AsymptoticVerdict::Kind::undecided: return "undecided";
  }
  return "unknown";
}

/**
 * @brief Classifies the tail of a trajectory.
 *
 * Window: the last 20% of samples. Fixed point: tail displacement from the
 * last state below fp_tol_rel (1 + |x_last|). Limit cycle: at least six
 * upward crossings of the centered coordinate with the largest tail spread,
 * relative period jitter below cycle_tol over the last five periods, and
 * peak-to-peak values of every coordinate repeating to cycle_tol.
 */
inline AsymptoticVerdict classify_asymptotics(const Trajectory& tr, const NumericPolicy& policy = {}) {
  using K = AsymptoticVerdict::Kind;
  AsymptoticVerdict v;
  if (tr.diverged) {
    v.kind = K::divergent;
    v.message = "state norm exceeded the divergence bound";
    return v;
  }
  const std::size_t n = tr.dim();
  v.window = tr.size() / 5;
  if (v.window < 2 || n == 0) {
    v.message = "trajectory too short to classify";
    return v;
  }
  const std::size_t start = tr.size() - v.window;
  const Vector& last = tr.back();
  v.fp_tol = policy.fp_tol_rel * (1.0 + norm2(last));
  for (std::size_t k = start; k < tr.size(); ++k) {
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) sq += (tr.states[k][i] - last[i]) * (tr.states[k][i] - last[i]);
    v.tail_displacement = std::max(v.tail_displacement, std::sqrt(sq));
  }
  if (v.tail_displacement < v.fp_tol) {
    v.kind = K::fixed_point;
    v.location = last;
    v.message = "tail displacement " + num(v.tail_displacement) + " below " + num(v.fp_tol);
    return v;
  }

  // coordinate with the widest tail range
  Vector mean(n, 0.0), lo(n, INFINITY), hi(n, -INFINITY);
  for (std::size_t k = start; k < tr.size(); ++k)
    for (std::size_t i = 0; i < n; ++i) {
      mean[i] += tr.states[k][i] / static_cast<double>(v.window);
      lo[i] = std::min(lo[i], tr.states[k][i]);
      hi[i] = std::max(hi[i], tr.states[k][i]);
    }
  for (std::size_t i = 1; i < n; ++i)
    if (hi[i] - lo[i] > hi[v.coordinate] - lo[v.coordinate]) v.coordinate = i;
  const std::size_t c = v.coordinate;
  std::vector<double> crossings;
  std::vector<std::size_t> crossing_index;
  for (std::size_t k = start + 1; k < tr.size(); ++k) {
    const double a = tr.states[k - 1][c] - mean[c], b = tr.states[k][c] - mean[c];
    if (a < 0.0 && b >= 0.0) {
      crossings.push_back(tr.time(k - 1) + tr.dt * a / (a - b));
      crossing_index.push_back(k);
    }
  }
  if (crossings.size() < 6) {
    v.message = "tail is not constant and shows " + std::to_string(crossings.size()) +
                " upward crossings; six are needed for five periods";
    return v;
  }
  const std::size_t q = crossings.size();
  double pmin = INFINITY, pmax = 0.0, psum = 0.0;
  for (std::size_t j = q - 5; j < q; ++j) {
    const double p = crossings[j] - crossings[j - 1];
    pmin = std::min(pmin, p);
    pmax = std::max(pmax, p);
    psum += p;
  }
  v.period = psum / 5.0;
  v.period_jitter = (pmax - pmin) / v.period;

  auto ptp = [&](std::size_t k0, std::size_t k1, std::size_t i) {
    double a = INFINITY, b = -INFINITY;
    for (std::size_t k = k0; k < k1; ++k) {
      a = std::min(a, tr.states[k][i]);
      b = std::max(b, tr.states[k][i]);
    }
    return b - a;
  };
  const std::size_t i0 = crossing_index[q - 3], i1 = crossing_index[q - 2], i2 = crossing_index[q - 1];
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, ptp(i1, i2, i));
  for (std::size_t i = 0; i < n; ++i)
    v.amplitude_change = std::max(v.amplitude_change, std::abs(ptp(i1, i2, i) - ptp(i0, i1, i)) / scale);
  v.amplitude = ptp(i1, i2, c);

  if (v.period_jitter < policy.cycle_tol && v.amplitude_change < policy.cycle_tol) {
    v.kind = K::limit_cycle;
    v.message = "period " + num(v.period) + ", jitter " + num(v.period_jitter);
  } else {
    v.message = "oscillation not settled: period jitter " + num(v.period_jitter) + ", amplitude change " +
                num(v.amplitude_change);
  }
  return v;
}

struct ModalDecayVerdict {
  bool pass = false;
  double worst_dominant_ratio = INFINITY;  ///< min |Pi_p x(t)| / (C_p e^{-lambda_p t} |Pi_p x0|)
  double worst_transient_ratio = 0.0;     ///< max |Pi_s x(t)| / (C_s e^{-lambda_s t} |Pi_s x0|)
  std::size_t first_violation = 0;
  std::string message;
};

/**
 * @brief Checks both modal decay bounds at every sample of x' = Ax.
 *
 * Relative slack `rel_tol` and absolute slack abs_tol * |x0| absorb
 * integration and rounding error.
 */
inline ModalDecayVerdict modal_decay_check(const Trajectory& tr, const ModalSplit& split, double rel_tol = 1e-6,
                                           double abs_tol = 1e-9) {
  if (tr.dim() != split.Pi_p.rows()) throw DimensionError("trajectory dimension does not match the split");
  ModalDecayVerdict v;
  v.pass = true;
  const Vector& x0 = tr.states.front();
  const double p0 = norm2(split.Pi_p * x0), s0 = norm2(split.Pi_s * x0);
  const double floor = abs_tol * std::max(1.0, norm2(x0));
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const double t = tr.time(k) - tr.t0;
    const double pk = norm2(split.Pi_p * tr.states[k]), sk = norm2(split.Pi_s * tr.states[k]);
    const double lower = split.C_p * std::exp(-split.lambda_p * t) * p0;
    const double upper = split.C_s * std::exp(-split.lambda_s * t) * s0;
    if (lower > 0.0) v.worst_dominant_ratio = std::min(v.worst_dominant_ratio, pk / lower);
    if (upper > 0.0) v.worst_transient_ratio = std::max(v.worst_transient_ratio, sk / upper);
    const bool ok = pk >= lower * (1.0 - rel_tol) - floor && sk <= upper * (1.0 + rel_tol) + floor;
    if (!ok && v.pass) {
      v.pass = false;
      v.first_violation = k;
      v.message = "bound violated at t = " + num(t);
    }
  }
  if (v.pass) v.message = "both bounds hold at " + std::to_string(tr.size()) + " samples";
  return v;
}

struct MultistabilityReport {
  bool property_holds = false;
  std::vector<AsymptoticVerdict> verdicts;
  std::vector<Vector> equilibria;    ///< cluster representatives
  std::vector<std::size_t> cluster;  ///< cluster index per fixed-point verdict, or npos
  std::vector<std::size_t> violations;
  std::size_t divergent = 0;
};

/// Runs `fn(i)` for i in [0, count) on up to `jobs` threads.
template <typename Fn>
void parallel_for(std::size_t count, unsigned jobs, Fn&& fn) {
  jobs = std::max(1U, std::min<unsigned>(jobs, static_cast<unsigned>(count)));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(jobs);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < jobs; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < count; i = next++) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/**
 * @brief Integrates from every grid point and clusters the fixed points reached.
 *
 * The property holds when every bounded trajectory classifies as a fixed
 * point. Clusters use radius 10 fp_tol around their first member.
 */
inline MultistabilityReport multistability_probe(const LureSystem& sys, const std::vector<Vector>& grid,
                                                 const IntegrationOptions& opt = {}, const NumericPolicy& policy = {},
                                                 unsigned jobs = 1) {
  MultistabilityReport r;
  r.verdicts.resize(grid.size());
  parallel_for(grid.size(), jobs, [&](std::size_t i) {
    r.verdicts[i] = classify_asymptotics(integrate(sys, grid[i], InputSignal::zero(), opt), policy);
  });
  r.property_holds = true;
  r.cluster.assign(grid.size(), static_cast<std::size_t>(-1));
  std::vector<double> radius;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto& v = r.verdicts[i];
    if (v.kind == AsymptoticVerdict::Kind::divergent) {
      ++r.divergent;
      continue;
    }
    if (v.kind != AsymptoticVerdict::Kind::fixed_point) {
      r.property_holds = false;
      r.violations.push_back(i);
      continue;
    }
    for (std::size_t c = 0; c < r.equilibria.size(); ++c) {
      double sq = 0.0;
      for (std::size_t k = 0; k < v.location.size(); ++k)
        sq += (v.location[k] - r.equilibria[c][k]) * (v.location[k] - r.equilibria[c][k]);
      if (std::sqrt(sq) <= radius[c]) {
        r.cluster[i] = c;
        break;
      }
    }
    if (r.cluster[i] == static_cast<std::size_t>(-1)) {
      r.cluster[i] = r.equilibria.size();
      r.equilibria.push_back(v.location);
      radius.push_back(10.0 * v.fp_tol);
    }
  }
  return r;
}

/// d_P(a, b) = sqrt((a - b)' P (a - b)).
inline double incremental_distance(const SymmetricMatrix& p, std::span<const double> a, std::span<const double> b) {
  Vector d(a.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = a[i] - b[i];
  return std::sqrt(std::max(0.0, quad_form(p.matrix(), d)));
}

struct ContractionVerdict {
  bool pass = false;
  double worst_increase = 0.0;  ///< largest d_P(k+1) - d_P(k) relative to d_P(k)
  double final_ratio = 0.0;     ///< d_P(end) / d_P(0)
  std::size_t first_violation = 0;
};

/// d_P along a pair of trajectories must be non-increasing up to `rel_tol` and 1e-12 d_P(0).
inline ContractionVerdict incremental_contraction_check(const SymmetricMatrix& p, const Trajectory& a,
                                                        const Trajectory& b, double rel_tol = 1e-9) {
  if (a.size() != b.size() || a.dim() != b.dim() || a.dim() != p.dim())
    throw DimensionError("trajectory pair does not match the metric");
  ContractionVerdict v;
  v.pass = true;
  const double d0 = incremental_distance(p, a.states[0], b.states[0]);
  double prev = d0;
  for (std::size_t k = 1; k < a.size(); ++k) {
    const double d = incremental_distance(p, a.states[k], b.states[k]);
    const double rel = prev > 0.0 ? (d - prev) / prev : 0.0;
    v.worst_increase = std::max(v.worst_increase, rel);
    if (d > prev * (1.0 + rel_tol) + 1e-12 * d0 && v.pass) {
      v.pass = false;
      v.first_violation = k;
    }
    prev = d;
  }
  v.final_ratio = d0 > 0.0 ? prev / d0 : 0.0;
  return v;
}

}  // namespace pdom
