#include "spindyn/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "spindyn/parallel.hpp"

namespace spindyn {

double metropolis_sweep(const Hamiltonian& H, SpinConfig& cfg, double beta,
                        double& energy, const Proposal& prop, Rng& rng) {
  long n = cfg.size();
  long accepted = 0;
  for (long i = 0; i < n; ++i) {
    Vec3 cand = prop.draw(cfg.dir[i], rng);
    double dE = H.energy_delta(cfg, i, cand);
    double p = accept_probability(beta, dE);
    if (p >= 1.0 || rng.uniform() < p) {
      cfg.dir[i] = cand;
      energy += dE;
      ++accepted;
    }
  }
  return static_cast<double>(accepted) / static_cast<double>(n);
}

PtResult parallel_tempering(const Hamiltonian& H, const SpinConfig& init,
                            const PtOptions& opts) {
  const int nb = static_cast<int>(opts.betas.size());
  if (nb < 2)
    throw model_error("replica exchange needs at least two temperatures");
  for (int k = 0; k + 1 < nb; ++k)
    if (!(opts.betas[k] < opts.betas[k + 1]))
      throw model_error("replica temperatures must be strictly sorted");
  if (init.size() != H.nsites())
    throw model_error("initial configuration size mismatch");

  const double scale = std::max(H.coupling_scale(), 1e-300);
  std::vector<Rng> rng;
  std::vector<SpinConfig> cfg(nb, init);
  std::vector<double> energy(nb, H.energy(init));
  std::vector<Proposal> prop(nb);
  std::vector<bool> tune(nb);
  for (int k = 0; k < nb; ++k) {
    rng.emplace_back(derive_stream(opts.seed, "pt-replica", k));
    double T = 1.0 / opts.betas[k];
    if (T >= scale) {
      prop[k] = {Proposal::Kind::uniform, 0.0};
      tune[k] = false;
    } else {
      prop[k] = {Proposal::Kind::cone, 0.8};
      tune[k] = true;
    }
  }
  Rng swap_rng(derive_stream(opts.seed, "pt-swap"));

  const long burnin = static_cast<long>(opts.nsweeps * opts.burnin_fraction);
  std::vector<double> sumE(nb, 0), sumE2(nb, 0), acc_sum(nb, 0);
  std::vector<long> swap_try(nb - 1, 0), swap_ok(nb - 1, 0);
  long nmeas = 0;
  int swap_parity = 0;

  std::vector<double> sweep_acc(nb, 0.0);
  for (long sweep = 0; sweep < opts.nsweeps; ++sweep) {
    parallel_for(nb, [&](std::size_t k) {
      sweep_acc[k] =
          metropolis_sweep(H, cfg[k], opts.betas[k], energy[k], prop[k], rng[k]);
    });
    bool in_burnin = sweep < burnin;
    for (int k = 0; k < nb; ++k) {
      if (in_burnin && tune[k]) {
        // Nudge the cone toward the target acceptance; frozen after burn-in.
        prop[k].angle *= std::exp(
            0.3 * (sweep_acc[k] - defaults::proposal_target_acceptance));
        prop[k].angle = std::clamp(prop[k].angle, 1e-3, pi);
      }
      if (!in_burnin) acc_sum[k] += sweep_acc[k];
    }

    if ((sweep + 1) % opts.swap_interval == 0) {
      for (int k = swap_parity; k + 1 < nb; k += 2) {
        ++swap_try[k];
        double p = swap_probability(opts.betas[k], energy[k],
                                    opts.betas[k + 1], energy[k + 1]);
        if (p >= 1.0 || swap_rng.uniform() < p) {
          std::swap(cfg[k], cfg[k + 1]);
          std::swap(energy[k], energy[k + 1]);
          ++swap_ok[k];
        }
      }
      swap_parity ^= 1;
    }

    if (!in_burnin) {
      ++nmeas;
      for (int k = 0; k < nb; ++k) {
        sumE[k] += energy[k];
        sumE2[k] += energy[k] * energy[k];
      }
    }
  }

  PtResult out;
  out.betas = opts.betas;
  out.configs = std::move(cfg);
  out.mean_energy.resize(nb);
  out.specific_heat.resize(nb);
  out.acceptance.resize(nb);
  long nacc = opts.nsweeps - burnin;
  for (int k = 0; k < nb; ++k) {
    double m = sumE[k] / nmeas;
    double v = sumE2[k] / nmeas - m * m;
    out.mean_energy[k] = m;
    out.specific_heat[k] = opts.betas[k] * opts.betas[k] * std::max(v, 0.0);
    out.acceptance[k] = acc_sum[k] / nacc;
  }
  out.swap_acceptance.resize(nb - 1);
  for (int k = 0; k + 1 < nb; ++k)
    out.swap_acceptance[k] =
        swap_try[k] ? static_cast<double>(swap_ok[k]) / swap_try[k] : 0.0;
  return out;
}

WlState wang_landau(const Hamiltonian& H, SpinConfig& cfg,
                    const WlOptions& opts) {
  if (opts.nbins < 1 || !(opts.e_max > opts.e_min))
    throw model_error("invalid density-of-states window");
  WlState st;
  st.e_min = opts.e_min;
  st.e_max = opts.e_max;
  st.nbins = opts.nbins;
  st.ln_g.assign(opts.nbins, 0.0);
  st.histogram.assign(opts.nbins, 0);
  st.visits.assign(opts.nbins, 0);
  st.ln_f = opts.ln_f0;

  Rng rng(derive_stream(opts.seed, "wl"));
  double energy = H.energy(cfg);
  int bin = st.bin_of(energy);
  if (bin < 0)
    throw model_error("initial configuration energy lies outside the window");

  const long n = H.nsites();
  auto flat_enough = [&]() {
    std::vector<long> counts;
    counts.reserve(st.nbins);
    for (int b = 0; b < st.nbins; ++b)
      if (st.visits[b] > 0) counts.push_back(st.histogram[b]);
    return histogram_flat(counts, opts.flatness);
  };

  while (st.ln_f >= opts.ln_f_final) {
    if (st.steps >= opts.max_steps) {
      // Canonical shift before reporting partial state.
      double mn = 0;
      bool first = true;
      for (int b = 0; b < st.nbins; ++b)
        if (st.visits[b] && (first || st.ln_g[b] < mn)) {
          mn = st.ln_g[b];
          first = false;
        }
      for (int b = 0; b < st.nbins; ++b)
        if (st.visits[b]) st.ln_g[b] -= mn;
      throw wl_incomplete_error(std::move(st));
    }
    ++st.steps;

    long site = static_cast<long>(rng.below(n));
    Vec3 cand = opts.prop.draw(cfg.dir[site], rng);
    double dE = H.energy_delta(cfg, site, cand);
    int nb = st.bin_of(energy + dE);
    if (nb >= 0) {
      double lacc = st.ln_g[bin] - st.ln_g[nb];
      if (lacc >= 0.0 || rng.uniform() < std::exp(lacc)) {
        cfg.dir[site] = cand;
        energy += dE;
        bin = nb;
      }
    }
    // Out-of-window proposals are rejected and count as a revisit.
    st.ln_g[bin] += st.ln_f;
    ++st.histogram[bin];
    ++st.visits[bin];

    if (st.steps % defaults::wl_recompute_interval == 0)
      energy = H.energy(cfg); // shed accumulated round-off

    if (st.steps % opts.check_interval == 0 && flat_enough()) {
      std::fill(st.histogram.begin(), st.histogram.end(), 0);
      st.ln_f /= 2.0;
      ++st.stages_completed;
    }
  }

  double mn = 0;
  bool first = true;
  for (int b = 0; b < st.nbins; ++b)
    if (st.visits[b] && (first || st.ln_g[b] < mn)) {
      mn = st.ln_g[b];
      first = false;
    }
  for (int b = 0; b < st.nbins; ++b)
    if (st.visits[b]) st.ln_g[b] -= mn;
  return st;
}

WlThermo wl_thermodynamics(const WlState& st, const std::vector<double>& betas) {
  WlThermo out;
  out.beta = betas;
  for (double beta : betas) {
    double lmax = -1e300;
    for (int b = 0; b < st.nbins; ++b)
      if (st.visits[b])
        lmax = std::max(lmax, st.ln_g[b] - beta * st.bin_center(b));
    double z = 0, ze = 0, ze2 = 0;
    for (int b = 0; b < st.nbins; ++b) {
      if (!st.visits[b]) continue;
      double e = st.bin_center(b);
      double w = std::exp(st.ln_g[b] - beta * e - lmax);
      z += w;
      ze += w * e;
      ze2 += w * e * e;
    }
    double me = ze / z;
    double var = ze2 / z - me * me;
    out.mean_energy.push_back(me);
    out.specific_heat.push_back(beta * beta * std::max(var, 0.0));
  }
  return out;
}

} // namespace spindyn
