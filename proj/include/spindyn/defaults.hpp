#pragma once

// Central registry of tolerances and default parameters.  Anything a result
// can depend on lives here and is stamped into run manifests via `version`.

namespace spindyn::defaults {

// Geometry / symmetry
constexpr double position_tol = 1e-6;       // fractional site matching
constexpr double orthogonality_tol = 1e-8;  // Cartesian rotation check
constexpr int group_cap = 192;              // generated group size limit
constexpr int max_supercell_sites = 1 << 22;

// Couplings
constexpr double coupling_sym_tol = 1e-8;   // J vs allowed subspace

// Integrators
constexpr double fp_tol = 1e-12;
constexpr int max_fp_iters = 100;

// Energy minimization
constexpr double minimize_step = 0.1;
constexpr double minimize_tol = 1e-10;
constexpr int minimize_max_iters = 50000;

// Monte Carlo
constexpr double wl_flatness = 0.8;
constexpr double wl_lnf0 = 1.0;
constexpr double wl_lnf_final = 1e-6;
constexpr long wl_check_interval = 1000;
constexpr long wl_recompute_interval = 100000;
constexpr double pt_burnin_fraction = 0.5;
constexpr int pt_swap_interval = 10;
constexpr double proposal_target_acceptance = 0.5;

// Spin waves
constexpr double colpa_shift = 1e-10;       // relative semidefinite shift
constexpr double colpa_psd_tol = 1e-8;      // tolerated negative eigenvalue
constexpr double omega_zero_tol = 1e-6;     // frequencies snapped to zero
constexpr double stationarity_tol = 1e-8;   // ground-state torque bound

// Version tag for the complete set above; bump on any change.
constexpr const char* version = "spindyn-defaults-1";

} // namespace spindyn::defaults
