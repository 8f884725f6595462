#include "spindyn/sun.hpp"

#include <cmath>

namespace spindyn {

SpinOperators spin_matrices(int N) {
  if (N < 2) throw model_error("spin representation needs N >= 2 levels");
  SpinOperators ops;
  ops.N = N;
  double s = (N - 1) / 2.0;
  MatXc Sp = MatXc::Zero(N, N);
  MatXc Sz = MatXc::Zero(N, N);
  for (int k = 0; k < N; ++k) {
    double m = s - k; // basis ordered m = s, s-1, ..., -s
    Sz(k, k) = m;
    if (k > 0) Sp(k - 1, k) = std::sqrt(s * (s + 1) - m * (m + 1));
  }
  MatXc Sm = Sp.adjoint();
  ops.Sx = 0.5 * (Sp + Sm);
  ops.Sy = cplx(0, -0.5) * (Sp - Sm);
  ops.Sz = Sz;
  return ops;
}

VecXc coherent_state(int N, const Vec3& dir) {
  Vec3 n = dir.normalized();
  VecXc top = VecXc::Zero(N);
  top[0] = 1.0; // |m = s>
  double c = n.z();
  if (c > 1.0 - 1e-14) return top;

  auto ops = spin_matrices(N);
  Vec3 axis = Vec3::UnitZ().cross(n);
  double theta = std::acos(std::max(-1.0, std::min(1.0, c)));
  if (axis.norm() < 1e-14) axis = Vec3::UnitX(); // n = -z: any transverse axis
  axis.normalize();
  MatXc K = axis.x() * ops.Sx + axis.y() * ops.Sy + axis.z() * ops.Sz;
  Eigen::SelfAdjointEigenSolver<MatXc> es(K);
  VecXc phases(N);
  for (int k = 0; k < N; ++k)
    phases[k] = std::exp(cplx(0, -theta * es.eigenvalues()[k]));
  return es.eigenvectors() * phases.asDiagonal() *
         es.eigenvectors().adjoint() * top;
}

SunSystem::SunSystem(const Crystal& crystal, const ModelTerms& terms,
                     const Vec3i& dims, std::vector<MatXc> onsite_per_basis)
    : ham_(crystal, strip_single_ion(terms), dims) {
  for (int b = 0; b < crystal.nsites(); ++b) {
    double s = crystal.spin_s[b];
    double Nf = 2.0 * s + 1.0;
    int N = static_cast<int>(std::lround(Nf));
    if (std::abs(Nf - N) > 1e-9)
      throw model_error("spin magnitude " + std::to_string(s) +
                        " is not a half-integer; no finite representation");
    ops_.push_back(spin_matrices(N));
  }

  onsite_.resize(crystal.nsites());
  for (int b = 0; b < crystal.nsites(); ++b)
    onsite_[b] = MatXc::Zero(ops_[b].N, ops_[b].N);
  for (const auto& t : terms.aniso) {
    const auto& op = ops_[t.site];
    Vec3 n = t.axis.normalized();
    MatXc nS = n.x() * op.Sx + n.y() * op.Sy + n.z() * op.Sz;
    onsite_[t.site] += t.c2 * nS * nS;
  }
  if (!onsite_per_basis.empty()) {
    if (static_cast<int>(onsite_per_basis.size()) != crystal.nsites())
      throw model_error("onsite matrix count does not match the basis");
    for (int b = 0; b < crystal.nsites(); ++b) {
      const MatXc& M = onsite_per_basis[b];
      if (M.size() == 0) continue;
      if (M.rows() != ops_[b].N || M.cols() != ops_[b].N)
        throw model_error("onsite matrix dimension does not match 2s+1");
      if ((M - M.adjoint()).lpNorm<Eigen::Infinity>() > 1e-10)
        throw model_error("onsite matrix is not Hermitian");
      onsite_[b] += M;
    }
  }
}

ModelTerms SunSystem::strip_single_ion(const ModelTerms& terms) {
  ModelTerms t = terms;
  t.aniso.clear();
  return t;
}

Vec3 SunSystem::dipole(const SunConfig& cfg, long i) const {
  const auto& op = ops(i);
  const VecXc& z = cfg.Z[i];
  return Vec3(std::real(cplx(z.dot(op.Sx * z))),
              std::real(cplx(z.dot(op.Sy * z))),
              std::real(cplx(z.dot(op.Sz * z))));
}

void SunSystem::dipoles(const SunConfig& cfg, std::vector<Vec3>& out) const {
  out.resize(cfg.size());
  for (long i = 0; i < cfg.size(); ++i) out[i] = dipole(cfg, i);
}

double SunSystem::energy(const SunConfig& cfg) const {
  std::vector<Vec3> d;
  dipoles(cfg, d);
  double e = 0.0;
  for (const auto& p : ham_.pairs()) e += d[p.a].dot(p.J * d[p.b]);
  for (const auto& p : ham_.bq_pairs()) {
    double x = d[p.a].dot(d[p.b]);
    e += p.coef * x * x;
  }
  const auto& cell = ham_.cell();
  for (long i = 0; i < nsites(); ++i) {
    e -= cell.g[i] * ham_.field().dot(d[i]);
    const MatXc& on = onsite_[basis_of(i)];
    e += std::real(cplx(cfg.Z[i].dot(on * cfg.Z[i])));
  }
  return e;
}

MatXc SunSystem::mean_field(const SunConfig& cfg, const std::vector<Vec3>& d,
                            long i) const {
  const auto& cell = ham_.cell();
  // Gradient of the dipole-coupled terms with respect to <S>_i.
  Vec3 grad = -cell.g[i] * ham_.field();
  for (int idx : ham_.pairs_at(i)) {
    const auto& p = ham_.pairs()[idx];
    if (p.a == p.b)
      grad += (p.J + p.J.transpose()) * d[i];
    else if (p.a == i)
      grad += p.J * d[p.b];
    else
      grad += p.J.transpose() * d[p.a];
  }
  for (int idx : ham_.bq_at(i)) {
    const auto& p = ham_.bq_pairs()[idx];
    if (p.a == p.b) {
      grad += 4.0 * p.coef * d[i].dot(d[i]) * d[i];
    } else {
      long o = (p.a == i) ? p.b : p.a;
      grad += 2.0 * p.coef * d[i].dot(d[o]) * d[o];
    }
  }
  const auto& op = ops(i);
  MatXc H = onsite_[basis_of(i)] + grad.x() * op.Sx + grad.y() * op.Sy +
            grad.z() * op.Sz;
  return H;
}

SunConfig SunSystem::from_directors(const SpinConfig& cfg) const {
  SunConfig out;
  out.Z.resize(cfg.size());
  for (long i = 0; i < cfg.size(); ++i)
    out.Z[i] = coherent_state(levels(i), cfg.dir[i]);
  return out;
}

StepInfo sun_step_midpoint(const SunSystem& sys, SunConfig& cfg, double dt,
                           double fp_tol, int max_fp_iters) {
  const long n = cfg.size();
  std::vector<VecXc> z0 = cfg.Z;
  std::vector<VecXc> zp = cfg.Z;
  SunConfig mid = cfg;
  std::vector<Vec3> d;

  StepInfo info;
  double delta = 0.0;
  const cplx idt(0, dt);
  for (int it = 0; it < max_fp_iters; ++it) {
    for (long i = 0; i < n; ++i) mid.Z[i] = 0.5 * (z0[i] + zp[i]);
    sys.dipoles(mid, d);
    delta = 0.0;
    for (long i = 0; i < n; ++i) {
      VecXc next = z0[i] - idt * (sys.mean_field(mid, d, i) * mid.Z[i]);
      double dmax = (next - zp[i]).lpNorm<Eigen::Infinity>();
      delta = std::max(delta, dmax);
      zp[i] = std::move(next);
    }
    info.fp_iters = it + 1;
    if (delta < fp_tol) break;
  }
  if (delta >= fp_tol)
    throw integration_error(
        "mean-field midpoint fixed-point iteration did not converge", delta);

  double res = 0.0;
  for (long i = 0; i < n; ++i) res = std::max(res, std::abs(zp[i].norm() - 1.0));
  info.norm_residual = res;
  for (long i = 0; i < n; ++i) cfg.Z[i] = zp[i].normalized();
  return info;
}

Trajectory run_sun_trajectory(const SunSystem& sys, SunConfig cfg,
                              const TrajectorySpec& spec) {
  Trajectory traj;
  traj.dt = spec.dt;
  traj.stride = spec.stride;
  traj.frames_are_moments = true;
  traj.site_spin = sys.cell().spin;

  for (long step = 0; step < spec.burnin; ++step)
    sun_step_midpoint(sys, cfg, spec.dt, spec.fp_tol, spec.max_fp_iters);

  std::vector<Vec3> d;
  sys.dipoles(cfg, d);
  traj.frames.push_back(d);
  for (long step = 1; step <= spec.nsteps; ++step) {
    sun_step_midpoint(sys, cfg, spec.dt, spec.fp_tol, spec.max_fp_iters);
    if (step % spec.stride == 0) {
      sys.dipoles(cfg, d);
      traj.frames.push_back(d);
    }
  }
  return traj;
}

} // namespace spindyn
