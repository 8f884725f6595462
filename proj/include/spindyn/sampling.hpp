#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "spindyn/hamiltonian.hpp"

namespace spindyn {

// Metropolis acceptance probabilities, exposed so property tests and the
// samplers share one definition.
inline double accept_probability(double beta, double dE) {
  double x = -beta * dE;
  return x >= 0.0 ? 1.0 : std::exp(x);
}
// Replica-exchange acceptance for configurations at (beta_a, E_a), (beta_b, E_b).
inline double swap_probability(double beta_a, double E_a, double beta_b,
                               double E_b) {
  double x = (beta_a - beta_b) * (E_a - E_b);
  return x >= 0.0 ? 1.0 : std::exp(x);
}

struct Proposal {
  enum class Kind { uniform, cone };
  Kind kind = Kind::uniform;
  double angle = 0.5; // cone half-angle
  Vec3 draw(const Vec3& current, Rng& rng) const {
    return kind == Kind::uniform ? rng.sphere() : rng.cone(current, angle);
  }
};

// One sweep of sequential single-site Metropolis updates (sites 0..N-1).
// `energy` is kept in sync incrementally.  Returns the acceptance fraction.
double metropolis_sweep(const Hamiltonian& H, SpinConfig& cfg, double beta,
                        double& energy, const Proposal& prop, Rng& rng);

struct PtOptions {
  std::vector<double> betas;      // sorted ascending, size >= 2
  long nsweeps = 1000;            // total sweeps per replica
  int swap_interval = defaults::pt_swap_interval;
  double burnin_fraction = defaults::pt_burnin_fraction;
  // Proposal policy: sites move uniformly on the sphere when T >= coupling
  // scale, otherwise through a cone auto-tuned during burn-in toward
  // ~50% acceptance and frozen afterwards.
  std::uint64_t seed = 1;
};

struct PtResult {
  std::vector<double> betas;
  std::vector<double> mean_energy;     // per beta, post burn-in
  std::vector<double> specific_heat;   // beta^2 (<E^2>-<E>^2)
  std::vector<double> acceptance;      // site-move acceptance per beta
  std::vector<double> swap_acceptance; // per adjacent pair (size nbetas-1)
  std::vector<SpinConfig> configs;     // final configuration per beta
};

PtResult parallel_tempering(const Hamiltonian& H, const SpinConfig& init,
                            const PtOptions& opts);

struct WlOptions {
  double e_min = 0, e_max = 1;
  int nbins = 64;
  double ln_f0 = defaults::wl_lnf0;
  double ln_f_final = defaults::wl_lnf_final;
  double flatness = defaults::wl_flatness;
  long max_steps = 100000000;
  long check_interval = defaults::wl_check_interval;
  Proposal prop{};
  std::uint64_t seed = 1;
};

struct WlState {
  double e_min = 0, e_max = 1;
  int nbins = 0;
  std::vector<double> ln_g;     // shifted so min over visited bins is 0
  std::vector<long> histogram;  // current stage
  std::vector<long> visits;     // lifetime visits (defines the visited set)
  double ln_f = 0;
  long steps = 0;
  int stages_completed = 0;

  int bin_of(double e) const {
    double w = (e_max - e_min) / nbins;
    int b = static_cast<int>(std::floor((e - e_min) / w));
    if (b < 0 || e < e_min) return -1;
    if (b >= nbins) return e <= e_max ? nbins - 1 : -1;
    return b;
  }
  double bin_center(int b) const {
    double w = (e_max - e_min) / nbins;
    return e_min + (b + 0.5) * w;
  }
};

// Flatness rule shared by the sampler and its tests: every count exceeds
// flatness × mean.  Empty input is not flat.
inline bool histogram_flat(const std::vector<long>& counts, double flatness) {
  if (counts.empty()) return false;
  long mn = counts[0];
  double sum = 0;
  for (long c : counts) {
    mn = std::min(mn, c);
    sum += static_cast<double>(c);
  }
  return static_cast<double>(mn) > flatness * (sum / counts.size());
}

// Thrown when max_steps is exhausted before ln_f reaches ln_f_final.
struct wl_incomplete_error : numerical_error {
  WlState state;
  explicit wl_incomplete_error(WlState s)
      : numerical_error("flat-histogram run hit the step limit at ln_f = " +
                        std::to_string(s.ln_f)),
        state(std::move(s)) {}
};

// Flat-histogram estimation of ln g(E) over [e_min, e_max].  The initial
// configuration must fall inside the window; proposals leaving it are
// rejected (the current bin is revisited).  Every step updates
// ln_g += ln_f and the histogram; when the histogram over all visited bins
// is flatter than `flatness`, it is reset and ln_f is halved.
WlState wang_landau(const Hamiltonian& H, SpinConfig& cfg, const WlOptions& opts);

// <E>(beta) and C(beta) from a density of states, log-sum-exp stabilized,
// restricted to visited bins.
struct WlThermo {
  std::vector<double> beta, mean_energy, specific_heat;
};
WlThermo wl_thermodynamics(const WlState& state, const std::vector<double>& betas);

} // namespace spindyn
