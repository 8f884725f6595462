#pragma once

#include <cstdint>

#include "spindyn/dynamics.hpp"
#include "spindyn/hamiltonian.hpp"

namespace spindyn {

// Spin operators in the N-dimensional irrep (N = 2s+1), basis ordered
// m = s, s-1, ..., -s.
struct SpinOperators {
  int N = 0;
  MatXc Sx, Sy, Sz;
  const MatXc& component(int a) const { return a == 0 ? Sx : (a == 1 ? Sy : Sz); }
};

SpinOperators spin_matrices(int N);

// Coherent state |Z> with <Z|S|Z> = s * dir.
VecXc coherent_state(int N, const Vec3& dir);

// Per-site complex amplitudes.
struct SunConfig {
  std::vector<VecXc> Z;
  long size() const { return static_cast<long>(Z.size()); }
  void normalize_all() {
    for (auto& z : Z) z.normalize();
  }
};

// Generalized spin system: the pair/biquadratic/Zeeman terms of a
// Hamiltonian act through dipole expectations <S>_i = Z_i^dag S Z_i, while
// single-ion anisotropy enters exactly through per-site onsite matrices.
class SunSystem {
 public:
  // `terms.aniso` is converted to onsite matrices c2 (n.S)^2; additional
  // explicit onsite matrices (per basis site, may be empty) are added.
  SunSystem(const Crystal& crystal, const ModelTerms& terms, const Vec3i& dims,
            std::vector<MatXc> onsite_per_basis = {});

  const Hamiltonian& pair_hamiltonian() const { return ham_; }
  const Supercell& cell() const { return ham_.cell(); }
  long nsites() const { return ham_.nsites(); }
  int levels(long site) const { return ops_[basis_of(site)].N; }
  const SpinOperators& ops(long site) const { return ops_[basis_of(site)]; }

  Vec3 dipole(const SunConfig& cfg, long i) const;
  void dipoles(const SunConfig& cfg, std::vector<Vec3>& out) const;

  double energy(const SunConfig& cfg) const;
  // Mean-field matrix: dE/dZbar_i = mean_field(i) * Z_i.
  MatXc mean_field(const SunConfig& cfg, const std::vector<Vec3>& dips,
                   long i) const;

  SunConfig from_directors(const SpinConfig& cfg) const;

 private:
  int basis_of(long site) const { return ham_.cell().basis_of(site); }
  static ModelTerms strip_single_ion(const ModelTerms& terms);

  Hamiltonian ham_;                 // pair terms only (no single-ion part)
  std::vector<SpinOperators> ops_;  // per basis site
  std::vector<MatXc> onsite_;      // per basis site, N x N
};

// Implicit midpoint step of dZ_i/dt = -i Hmf_i(Z) Z_i, with the mean field
// evaluated at the midpoint configuration.  Amplitudes are renormalized; the
// pre-normalization residual is returned.
StepInfo sun_step_midpoint(const SunSystem& sys, SunConfig& cfg, double dt,
                           double fp_tol = defaults::fp_tol,
                           int max_fp_iters = defaults::max_fp_iters);

// Integrate and record dipole expectations as moment frames.
Trajectory run_sun_trajectory(const SunSystem& sys, SunConfig cfg,
                              const TrajectorySpec& spec);

} // namespace spindyn
