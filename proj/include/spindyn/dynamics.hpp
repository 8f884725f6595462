#pragma once

#include <cstdint>

#include "spindyn/hamiltonian.hpp"

namespace spindyn {

struct StepInfo {
  int fp_iters = 0;        // fixed-point iterations used
  double norm_residual = 0; // max | |u|-1 | before renormalization
};

// One step of the undamped equation du/dt = u x B(m), discretized as
//   u' = u + dt * m x B(m),   m = (u + u')/2,
// solved by fixed-point iteration to fp_tol (max-norm change of u').
// Directors are renormalized afterwards; the pre-normalization residual is
// returned.  Throws integration_error if the iteration does not contract.
StepInfo ll_step_midpoint(const Hamiltonian& H, SpinConfig& cfg, double dt,
                          double fp_tol = defaults::fp_tol,
                          int max_fp_iters = defaults::max_fp_iters);

// One stochastic step of the damped/thermal equation
//   du/dt = u x (B + xi) - lambda * u x (u x (B + xi)),
// integrated by the Heun predictor-corrector with the same noise realization
// in both stages.  Per-component noise variance is 2*lambda*T/(s_i*dt).
void langevin_step_heun(const Hamiltonian& H, SpinConfig& cfg, double dt,
                        double lambda, double T, Rng& rng);

struct TrajectorySpec {
  enum class Kind { midpoint, langevin };
  Kind kind = Kind::midpoint;
  double dt = 0.01;
  long nsteps = 1000;
  long stride = 1;       // record every `stride` steps, plus step 0
  long burnin = 0;       // unrecorded steps before frame 0
  double lambda = 0.1;   // langevin only
  double temperature = 0;
  double fp_tol = defaults::fp_tol;
  int max_fp_iters = defaults::max_fp_iters;
};

struct Trajectory {
  double dt = 0;            // integration step
  long stride = 1;          // frames are dt*stride apart
  bool frames_are_moments = false; // true: frames hold m_i; false: directors
  std::vector<double> site_spin;   // s_i, to form moments from directors
  std::vector<std::vector<Vec3>> frames;

  double frame_dt() const { return dt * static_cast<double>(stride); }
  long nframes() const { return static_cast<long>(frames.size()); }
  // Moment of site i in frame f.
  Vec3 moment(long f, long i) const {
    return frames_are_moments ? frames[f][i] : site_spin[i] * frames[f][i];
  }
};

// Integrate nsteps from `cfg`, recording frame 0 and every stride-th step:
// 1 + floor(nsteps/stride) frames.  `stream_seed` fully determines the noise.
Trajectory run_trajectory(const Hamiltonian& H, SpinConfig cfg,
                          const TrajectorySpec& spec, std::uint64_t stream_seed);

} // namespace spindyn
