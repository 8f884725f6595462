#include "spindyn/dynamics.hpp"

#include <cmath>

namespace spindyn {

StepInfo ll_step_midpoint(const Hamiltonian& H, SpinConfig& cfg, double dt,
                          double fp_tol, int max_fp_iters) {
  const long n = cfg.size();
  SpinConfig mid = cfg;                 // midpoint directors (not unit)
  std::vector<Vec3> u0 = cfg.dir;
  std::vector<Vec3> up = cfg.dir;       // current iterate for u'
  std::vector<Vec3> fields;

  StepInfo info;
  double delta = 0.0;
  for (int it = 0; it < max_fp_iters; ++it) {
    for (long i = 0; i < n; ++i) mid.dir[i] = 0.5 * (u0[i] + up[i]);
    H.local_fields(mid, fields);
    delta = 0.0;
    for (long i = 0; i < n; ++i) {
      Vec3 next = u0[i] + dt * mid.dir[i].cross(fields[i]);
      delta = std::max(delta, (next - up[i]).lpNorm<Eigen::Infinity>());
      up[i] = next;
    }
    info.fp_iters = it + 1;
    if (delta < fp_tol) break;
  }
  if (delta >= fp_tol)
    throw integration_error("midpoint fixed-point iteration did not converge",
                            delta);

  double res = 0.0;
  for (long i = 0; i < n; ++i) res = std::max(res, std::abs(up[i].norm() - 1.0));
  info.norm_residual = res;
  for (long i = 0; i < n; ++i) cfg.dir[i] = up[i].normalized();
  return info;
}

void langevin_step_heun(const Hamiltonian& H, SpinConfig& cfg, double dt,
                        double lambda, double T, Rng& rng) {
  const long n = cfg.size();
  const auto& spin = H.cell().spin;

  std::vector<Vec3> xi(n);
  for (long i = 0; i < n; ++i) {
    double sigma = std::sqrt(2.0 * lambda * T / (spin[i] * dt));
    xi[i] = sigma * rng.gaussian3();
  }

  auto drift = [&](const SpinConfig& state, std::vector<Vec3>& out) {
    std::vector<Vec3> fields;
    H.local_fields(state, fields);
    out.resize(n);
    for (long i = 0; i < n; ++i) {
      Vec3 h = fields[i] + xi[i];
      const Vec3& u = state.dir[i];
      out[i] = u.cross(h) - lambda * u.cross(u.cross(h));
    }
  };

  std::vector<Vec3> k1, k2;
  drift(cfg, k1);
  SpinConfig pred = cfg;
  for (long i = 0; i < n; ++i) pred.dir[i] = cfg.dir[i] + dt * k1[i];
  drift(pred, k2);
  for (long i = 0; i < n; ++i)
    cfg.dir[i] = (cfg.dir[i] + 0.5 * dt * (k1[i] + k2[i])).normalized();
}

Trajectory run_trajectory(const Hamiltonian& H, SpinConfig cfg,
                          const TrajectorySpec& spec,
                          std::uint64_t stream_seed) {
  Trajectory traj;
  traj.dt = spec.dt;
  traj.stride = spec.stride;
  traj.frames_are_moments = false;
  traj.site_spin = H.cell().spin;
  traj.frames.reserve(1 + spec.nsteps / spec.stride);

  Rng rng(stream_seed);
  for (long step = 0; step < spec.burnin; ++step) {
    if (spec.kind == TrajectorySpec::Kind::midpoint)
      ll_step_midpoint(H, cfg, spec.dt, spec.fp_tol, spec.max_fp_iters);
    else
      langevin_step_heun(H, cfg, spec.dt, spec.lambda, spec.temperature, rng);
  }
  traj.frames.push_back(cfg.dir);

  for (long step = 1; step <= spec.nsteps; ++step) {
    if (spec.kind == TrajectorySpec::Kind::midpoint)
      ll_step_midpoint(H, cfg, spec.dt, spec.fp_tol, spec.max_fp_iters);
    else
      langevin_step_heun(H, cfg, spec.dt, spec.lambda, spec.temperature, rng);
    if (step % spec.stride == 0) traj.frames.push_back(cfg.dir);
  }
  return traj;
}

} // namespace spindyn
