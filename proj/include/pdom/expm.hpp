#pragma once

#include <cmath>
#include <cstddef>

#include "errors.hpp"
#include "matrix.hpp"

namespace pdom {

/**
 * @brief Matrix exponential e^{A t} by scaling and squaring with a diagonal
 * [8/8] Pade approximant.
 *
 * The argument is scaled so that |A t / 2^s|_1 <= 1/2, where the truncation
 * error of the approximant is far below double precision.
 */
inline Matrix expm(const Matrix& a, double t) {
  if (!a.square()) throw DimensionError("expm of non-square matrix " + a.shape());
  if (!std::isfinite(t)) throw RangeError("expm time must be finite");
  const std::size_t n = a.rows();
  if (n == 0) return {};
  Matrix x = a * t;
  const double nrm = x.norm_1();
  if (!std::isfinite(nrm)) throw RangeError("expm argument is not finite");
  int s = 0;
  if (nrm > 0.5) s = static_cast<int>(std::ceil(std::log2(nrm / 0.5)));
  if (s > 1000) throw RangeError("expm argument norm too large");
  x *= std::ldexp(1.0, -s);

  constexpr int q = 8;
  // c_k = (2q-k)! q! / ((2q)! k! (q-k)!)
  double c = 1.0;
  const Matrix id = Matrix::identity(n);
  Matrix num = id;
  Matrix den = id;
  Matrix power = id;
  for (int k = 1; k <= q; ++k) {
    c *= static_cast<double>(q - k + 1) / static_cast<double>(k * (2 * q - k + 1));
    power = power * x;
    num += c * power;
    den += ((k % 2 == 0) ? c : -c) * power;
  }
  LuDecomposition lu(den);
  if (lu.singular()) throw NumericalFailure("expm: singular Pade denominator");
  Matrix e = lu.solve(num);
  for (int i = 0; i < s; ++i) {
    e = e * e;
    if (!e.all_finite()) throw RangeError("expm overflow during squaring");
  }
  if (!e.all_finite()) throw RangeError("expm overflow");
  return e;
}

}  // namespace pdom
