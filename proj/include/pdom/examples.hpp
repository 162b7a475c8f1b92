#pragma once

#include <cmath>

#include "dissipativity.hpp"
#include "lti.hpp"
#include "lure.hpp"
#include "matrix.hpp"

namespace pdom::examples {

/// Mass-spring-damper x1' = x2, x2' = -x1 - c x2 + u, y = x2.
inline LtiSystem mass_spring_damper(double c = 4.0) {
  return LtiSystem::strictly_proper(Matrix{{0, 1}, {-1, -c}}, Matrix{{0}, {1}}, Matrix{{0, 1}},
                                    "msd(c=" + num(c) + ")");
}

/// Rate 1.2679 used with the c = 4 and c = 8 storages.
inline constexpr double msd_rate = 1.2679;

inline SymmetricMatrix msd4_storage() { return SymmetricMatrix{{-0.4338, 0.6535}, {0.6535, 1.4338}}; }
inline SymmetricMatrix msd8_storage() { return SymmetricMatrix::diagonal({-1.0, 1.0}); }

/// x1' = x2, x2' = phi(x1) - 8 x2 + u with phi(s) = s - min(s^2, 4) s / 3.
inline LureSystem spring_cubic(Matrix c = Matrix{{1, 2}}) {
  LureChannel ch{Vector{0, 1}, Vector{1, 0}, Nonlinearity::cubic_saturated(), -3.0, 1.0};
  return LureSystem(Matrix{{0, 1}, {0, -8}}, {ch}, Matrix{{0}, {1}}, std::move(c), "spring_cubic");
}

/// Piecewise-linear spring with slope `inner` on |s| <= 1 and `outer` beyond.
inline Nonlinearity two_slope_spring(double inner, double outer) {
  const double e = 10.0;
  return Nonlinearity::tabulated({-e, -1, 1, e}, {-inner - outer * (e - 1), -inner, inner, inner + outer * (e - 1)});
}

/// Monotone spring with slopes in [-2, -1/2].
inline LureSystem spring_monotone(Matrix c = Matrix{{0, 1}}) {
  LureChannel ch{Vector{0, 1}, Vector{1, 0}, two_slope_spring(-2.0, -0.5), -2.0, -0.5};
  return LureSystem(Matrix{{0, 1}, {0, -8}}, {ch}, Matrix{{0}, {1}}, std::move(c), "spring_monotone");
}

/// Monotone spring with slopes in [-2, -1.2].
inline LureSystem spring_contractive(Matrix c = Matrix{{0, 1}}) {
  LureChannel ch{Vector{0, 1}, Vector{1, 0}, two_slope_spring(-2.0, -1.2), -2.0, -1.2};
  return LureSystem(Matrix{{0, 1}, {0, -8}}, {ch}, Matrix{{0}, {1}}, std::move(c), "spring_contractive");
}

inline SymmetricMatrix spring_monotone_storage() { return SymmetricMatrix{{1.0, 0.5}, {0.5, 1.0}}; }
inline SymmetricMatrix spring_cubic_dominance_storage() { return SymmetricMatrix::diagonal({-1.0, 1.0}); }
inline SymmetricMatrix spring_cubic_passivity_storage() { return SymmetricMatrix{{-2.0, 1.0}, {1.0, 2.0}}; }

/// Negative feedback of two cubic springs through y = x1 + 2 x2.
inline LureSystem spring_loop() { return diff_feedback_compose(spring_cubic(), spring_cubic()); }

}  // namespace pdom::examples
