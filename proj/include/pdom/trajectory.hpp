#pragma once

#include <cstddef>
#include <ostream>
#include <vector>

#include "errors.hpp"
#include "matrix.hpp"

namespace pdom {

/**
 * @brief Samples of a solution on the uniform grid t_k = t0 + k dt.
 *
 * `states[k]` is the state at t_k. When integration stops early because the
 * state norm blew up, `diverged` is set and the sequence ends at the last
 * finite sample.
 */
struct Trajectory {
  double t0 = 0.0;
  double dt = 0.0;
  std::vector<Vector> states;
  std::vector<Vector> inputs;  ///< empty, or one entry per state sample
  bool diverged = false;

  [[nodiscard]] std::size_t size() const { return states.size(); }
  [[nodiscard]] double time(std::size_t k) const { return t0 + static_cast<double>(k) * dt; }
  [[nodiscard]] std::size_t dim() const { return states.empty() ? 0 : states.front().size(); }
  [[nodiscard]] const Vector& back() const { return states.back(); }

  void check() const {
    if (!inputs.empty() && inputs.size() != states.size())
      throw DimensionError("trajectory input samples do not match state samples");
    for (const auto& s : states)
      if (s.size() != dim()) throw DimensionError("trajectory state dimension changes");
  }

  /// CSV with header "t,x1,...,xn[,u1,...]". `stride` thins the output.
  void write_csv(std::ostream& os, std::size_t stride = 1) const {
    const std::size_t n = dim();
    const std::size_t m = inputs.empty() ? 0 : inputs.front().size();
    os << "t";
    for (std::size_t i = 0; i < n; ++i) os << ",x" << i + 1;
    for (std::size_t i = 0; i < m; ++i) os << ",u" << i + 1;
    os << "\n";
    os.precision(12);
    if (stride == 0) stride = 1;
    for (std::size_t k = 0; k < states.size(); k += stride) {
      os << time(k);
      for (double v : states[k]) os << "," << v;
      if (m > 0)
        for (double v : inputs[k]) os << "," << v;
      os << "\n";
    }
  }
};

}  // namespace pdom
