#pragma once

namespace pdom {

/**
 * @brief Central tolerance record shared by every check in the library.
 *
 * Absolute tolerances unless noted. `zero_band_rel` is relative to the
 * spectral norm of the matrix whose inertia is taken.
 */
struct NumericPolicy {
  double sym_tol = 1e-9;         ///< asymmetry accepted before symmetrizing (relative to max(1, |S|_F))
  double zero_band_rel = 1e-8;   ///< inertia zero band, times |S|_2
  double split_tol = 1e-7;       ///< hyperbolicity margin around the imaginary axis
  double recon_tol = 1e-9;       ///< decomposition / linear solve residuals
  double exp_tol = 1e-8;         ///< matrix exponential accuracy target
  double lmi_tol = 1e-8;         ///< definiteness slack for LMI residuals
  double proj_tol = 1e-9;        ///< spectral projector identities
  double probe_margin = 1e-8;    ///< strict cone-interior margin
  double gain_tol = 1e-4;        ///< gain bisection width
  double fp_tol_rel = 1e-6;      ///< fixed-point tail displacement, times (1 + |x_tail|)
  double cycle_tol = 1e-2;       ///< relative period jitter for limit cycles
  int jacobi_max_sweeps = 100;
  int qr_max_iter_per_eig = 60;
  int lmi_max_iter = 5000;
  int lmi_stall_window = 100;
  double lmi_stall_tol = 1e-12;

  [[nodiscard]] bool valid() const {
    return sym_tol > 0 && zero_band_rel > 0 && split_tol > 0 && recon_tol > 0 && exp_tol > 0 &&
           lmi_tol > 0 && proj_tol > 0 && probe_margin > 0 && gain_tol > 0 && fp_tol_rel > 0 &&
           cycle_tol > 0 && jacobi_max_sweeps > 0 && qr_max_iter_per_eig > 0 && lmi_max_iter > 0 &&
           lmi_stall_window > 0 && lmi_stall_tol > 0;
  }
};

}  // namespace pdom
