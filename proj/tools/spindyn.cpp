// spindyn: batch driver for the spin simulation library.
//
//   spindyn <subcommand> <model.toml> --out DIR [options]
//
// Subcommands: minimize, dynamics, sample, lswt, structfact.  Every run
// writes CSV outputs plus a run.json manifest into --out.  Exit codes:
// 0 success, 1 bad input (model/parse/usage), 2 numerical failure.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spindyn/correlate.hpp"
#include "spindyn/dynamics.hpp"
#include "spindyn/lswt.hpp"
#include "spindyn/model_file.hpp"
#include "spindyn/run_io.hpp"
#include "spindyn/sampling.hpp"
#include "spindyn/sun.hpp"

using namespace spindyn;

namespace {

struct Common {
  std::string model_path;
  std::string out_dir;
  std::uint64_t seed = 1;
  std::string mode_override; // "", "dipole", "sun"
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("model", c.model_path, "model file")->required();
  cmd->add_option("--out", c.out_dir, "output directory")->required();
  cmd->add_option("--seed", c.seed, "master seed (default 1)");
  cmd->add_option("--mode", c.mode_override, "override [mode]: dipole or sun")
      ->check(CLI::IsMember({"dipole", "sun"}));
}

ModelFile load_model(const Common& c) {
  ModelFile mf = load_model_file(c.model_path);
  if (c.mode_override == "dipole") mf.mode = ModelFile::Mode::dipole;
  if (c.mode_override == "sun") mf.mode = ModelFile::Mode::sun;
  return mf;
}

std::string join_path(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

// Parse "0,0,0;0.5,0,0;0.5,0.5,0" into fractional q vertices.
std::vector<Vec3> parse_qpath(const std::string& s) {
  std::vector<Vec3> verts;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ';')) {
    if (part.empty()) continue;
    Vec3 v;
    int n = std::sscanf(part.c_str(), "%lf,%lf,%lf", &v.x(), &v.y(), &v.z());
    if (n != 3)
      throw model_error("bad q-path vertex '" + part +
                        "' (expected three comma-separated numbers)");
    verts.push_back(v);
  }
  if (verts.empty()) throw model_error("empty q-path");
  return verts;
}

std::vector<double> parse_list(const std::string& s, const char* what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part.empty()) continue;
    try {
      out.push_back(std::stod(part));
    } catch (const std::exception&) {
      throw model_error(std::string("bad ") + what + " entry '" + part + "'");
    }
  }
  if (out.empty()) throw model_error(std::string("empty ") + what + " list");
  return out;
}

void write_config_csv(const std::string& path, const Supercell& sc,
                      const std::vector<Vec3>& dir) {
  CsvWriter w(path, {"site", "x", "y", "z", "ux", "uy", "uz"});
  for (long i = 0; i < sc.nsites; ++i) {
    w.field(i);
    for (int a = 0; a < 3; ++a) w.field(sc.pos_cart[i][a]);
    for (int a = 0; a < 3; ++a) w.field(dir[i][a]);
    w.end_row();
  }
  w.close();
}

SpinConfig read_config_csv(const std::string& path, long nsites) {
  std::ifstream in(path);
  if (!in) throw model_error("cannot open configuration file " + path);
  std::string line;
  if (!std::getline(in, line))
    throw model_error("empty configuration file " + path);
  std::vector<std::string> cols;
  {
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
  }
  int iu[3] = {-1, -1, -1};
  const char* names[3] = {"ux", "uy", "uz"};
  for (std::size_t k = 0; k < cols.size(); ++k)
    for (int a = 0; a < 3; ++a)
      if (cols[k] == names[a]) iu[a] = static_cast<int>(k);
  for (int a = 0; a < 3; ++a)
    if (iu[a] < 0)
      throw model_error("configuration file " + path + " lacks column " +
                        names[a]);
  SpinConfig cfg;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string c;
    std::vector<double> vals;
    while (std::getline(ss, c, ',')) vals.push_back(std::stod(c));
    Vec3 u;
    for (int a = 0; a < 3; ++a) {
      if (iu[a] >= static_cast<int>(vals.size()))
        throw model_error("short row in configuration file " + path);
      u[a] = vals[iu[a]];
    }
    double n = u.norm();
    if (n < 1e-12)
      throw model_error("zero direction in configuration file " + path);
    cfg.dir.push_back(u / n);
  }
  if (static_cast<long>(cfg.dir.size()) != nsites)
    throw model_error("configuration file " + path + " has " +
                      std::to_string(cfg.dir.size()) + " sites, model has " +
                      std::to_string(nsites));
  return cfg;
}

// Ground-state search: best of `restarts` seeded minimizations.
SpinConfig best_minimum(const Hamiltonian& H, std::uint64_t seed, int restarts,
                        const MinimizeOptions& opts, MinimizeResult* best_out) {
  SpinConfig best;
  MinimizeResult best_res;
  double best_e = 0;
  bool have = false;
  for (int r = 0; r < restarts; ++r) {
    Rng rng(derive_stream(seed, "init", r));
    SpinConfig cfg = random_config(H.nsites(), rng);
    MinimizeResult res = minimize(H, cfg, opts);
    if (!have || res.energy < best_e) {
      best = cfg;
      best_res = res;
      best_e = res.energy;
      have = true;
    }
  }
  if (best_out) *best_out = best_res;
  return best;
}

// Initial state resolution shared by dynamics/sample/structfact:
// "minimize", "random", or a config.csv path.
SpinConfig initial_config(const Hamiltonian& H, const std::string& init,
                          std::uint64_t seed, int restarts) {
  if (init == "random") {
    Rng rng(derive_stream(seed, "init"));
    return random_config(H.nsites(), rng);
  }
  if (init == "minimize") return best_minimum(H, seed, restarts, {}, nullptr);
  return read_config_csv(init, H.nsites());
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  CsvWriter w(path, {"frame", "time", "site", "mx", "my", "mz"});
  long nsites = static_cast<long>(traj.site_spin.size());
  for (long f = 0; f < traj.nframes(); ++f)
    for (long i = 0; i < nsites; ++i) {
      Vec3 m = traj.moment(f, i);
      w.field(f);
      w.field(static_cast<double>(f) * traj.frame_dt());
      w.field(i);
      for (int a = 0; a < 3; ++a) w.field(m[a]);
      w.end_row();
    }
  w.close();
}

// Long-format S^{ab} rows: one (alpha, beta) component per line.
void write_sab_rows(CsvWriter& w, const std::vector<long>& keys,
                    const Mat3c& S) {
  const char* xyz = "xyz";
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      for (long k : keys) w.field(k);
      w.field(std::string(1, xyz[a]));
      w.field(std::string(1, xyz[b]));
      w.field(S(a, b).real());
      w.field(S(a, b).imag());
      w.end_row();
    }
}

// ---------------------------------------------------------------- minimize

int run_minimize(const Common& c, int restarts, double tol, int max_iters) {
  double t0 = now_seconds();
  ModelFile mf = load_model(c);
  Hamiltonian H(mf.crystal, mf.terms, mf.dims);

  MinimizeOptions opts;
  opts.tol = tol;
  opts.max_iters = max_iters;

  std::filesystem::create_directories(c.out_dir);
  CsvWriter runs(join_path(c.out_dir, "restarts.csv"),
                 {"restart", "converged", "iterations", "energy",
                  "energy_per_site", "grad_norm"});
  SpinConfig best;
  MinimizeResult best_res;
  double best_e = 0;
  bool have = false;
  for (int r = 0; r < restarts; ++r) {
    Rng rng(derive_stream(c.seed, "init", r));
    SpinConfig cfg = random_config(H.nsites(), rng);
    MinimizeResult res = minimize(H, cfg, opts);
    runs.field(static_cast<long>(r));
    runs.field(static_cast<long>(res.converged ? 1 : 0));
    runs.field(static_cast<long>(res.iterations));
    runs.field(res.energy);
    runs.field(res.energy / static_cast<double>(H.nsites()));
    runs.field(res.grad_norm);
    runs.end_row();
    if (!have || res.energy < best_e) {
      best = cfg;
      best_res = res;
      best_e = res.energy;
      have = true;
    }
  }
  runs.close();
  write_config_csv(join_path(c.out_dir, "minimized.csv"), H.cell(), best.dir);

  RunManifest man("minimize", c.model_path, c.seed);
  man.set_param("restarts", static_cast<long>(restarts));
  man.set_param("tol", tol);
  man.set_param("max_iters", static_cast<long>(max_iters));
  man.set_param("energy", best_res.energy);
  man.set_param("final_gradnorm", best_res.grad_norm);
  man.set_param("converged", static_cast<long>(best_res.converged ? 1 : 0));
  man.add_output("restarts.csv");
  man.add_output("minimized.csv");
  man.write(c.out_dir, now_seconds() - t0);
  return 0;
}

// ---------------------------------------------------------------- dynamics

int run_dynamics(const Common& c, const std::string& method, long steps,
                 double dt, long stride, long burnin, double temp,
                 double lambda, const std::string& init, int restarts) {
  double t0 = now_seconds();
  ModelFile mf = load_model(c);

  std::filesystem::create_directories(c.out_dir);
  RunManifest man("dynamics", c.model_path, c.seed);
  man.set_param("method", method);
  man.set_param("steps", steps);
  man.set_param("dt", dt);
  man.set_param("stride", stride);
  man.set_param("burnin", burnin);
  man.set_param("temperature", temp);
  man.set_param("lambda", lambda);
  man.set_param("init", init);
  man.set_param("mode", mf.mode == ModelFile::Mode::sun ? "sun" : "dipole");

  Hamiltonian H(mf.crystal, mf.terms, mf.dims);
  SpinConfig cfg = initial_config(H, init, c.seed, restarts);

  TrajectorySpec spec;
  spec.kind = method == "langevin" ? TrajectorySpec::Kind::langevin
                                   : TrajectorySpec::Kind::midpoint;
  spec.dt = dt;
  spec.nsteps = steps;
  spec.stride = stride;
  spec.burnin = burnin;
  spec.temperature = temp;
  spec.lambda = lambda;

  Trajectory traj;
  if (mf.mode == ModelFile::Mode::sun) {
    if (method == "langevin")
      throw model_error("stochastic dynamics is defined for dipole mode only");
    SunSystem sys(mf.crystal, mf.terms, mf.dims, mf.onsite);
    SunConfig z = sys.from_directors(cfg);
    traj.dt = spec.dt;
    traj.stride = spec.stride;
    traj.frames_are_moments = true;
    traj.site_spin = sys.cell().spin;
    CsvWriter en(join_path(c.out_dir, "energies.csv"),
                 {"frame", "time", "energy"});
    for (long b = 0; b < spec.burnin; ++b)
      sun_step_midpoint(sys, z, spec.dt, spec.fp_tol, spec.max_fp_iters);
    std::vector<Vec3> d;
    long frame = 0;
    sys.dipoles(z, d);
    traj.frames.push_back(d);
    en.field(frame);
    en.field(0.0);
    en.field(sys.energy(z));
    en.end_row();
    for (long s = 1; s <= spec.nsteps; ++s) {
      sun_step_midpoint(sys, z, spec.dt, spec.fp_tol, spec.max_fp_iters);
      if (s % spec.stride == 0) {
        ++frame;
        sys.dipoles(z, d);
        traj.frames.push_back(d);
        en.field(frame);
        en.field(static_cast<double>(frame) * traj.frame_dt());
        en.field(sys.energy(z));
        en.end_row();
      }
    }
    en.close();
    man.add_output("energies.csv");
  } else {
    traj = run_trajectory(H, cfg, spec, derive_stream(c.seed, "member", 0));
    CsvWriter en(join_path(c.out_dir, "energies.csv"),
                 {"frame", "time", "energy"});
    SpinConfig tmp;
    for (long f = 0; f < traj.nframes(); ++f) {
      tmp.dir = traj.frames[f];
      en.field(f);
      en.field(static_cast<double>(f) * traj.frame_dt());
      en.field(H.energy(tmp));
      en.end_row();
    }
    en.close();
    man.add_output("energies.csv");
  }

  write_trajectory_csv(join_path(c.out_dir, "trajectory.csv"), traj);
  man.add_output("trajectory.csv");
  man.write(c.out_dir, now_seconds() - t0);
  return 0;
}

// ------------------------------------------------------------------ sample

int run_sample_metropolis(const Common& c, const ModelFile& mf, double temp,
                          long sweeps, long burnin, const std::string& init,
                          int restarts, double t0) {
  if (temp <= 0) throw model_error("metropolis sampling needs --temp > 0");
  Hamiltonian H(mf.crystal, mf.terms, mf.dims);
  SpinConfig cfg = initial_config(H, init, c.seed, restarts);
  double beta = 1.0 / temp;

  Rng rng(derive_stream(c.seed, "metropolis"));
  Proposal prop;
  prop.kind = temp >= H.coupling_scale() ? Proposal::Kind::uniform
                                         : Proposal::Kind::cone;
  double energy = H.energy(cfg);
  double sum_e = 0, sum_e2 = 0, sum_acc = 0;
  long nmeas = 0;
  for (long s = 0; s < sweeps; ++s) {
    double acc = metropolis_sweep(H, cfg, beta, energy, prop, rng);
    if (s < burnin) {
      if (prop.kind == Proposal::Kind::cone) {
        prop.angle *= std::exp(0.3 * (acc - defaults::proposal_target_acceptance));
        prop.angle = std::min(pi, std::max(1e-3, prop.angle));
      }
    } else {
      sum_e += energy;
      sum_e2 += energy * energy;
      sum_acc += acc;
      ++nmeas;
    }
  }
  if (nmeas == 0) throw model_error("no measurement sweeps after burn-in");

  double mean_e = sum_e / nmeas;
  double var = std::max(0.0, sum_e2 / nmeas - mean_e * mean_e);
  std::filesystem::create_directories(c.out_dir);
  CsvWriter w(join_path(c.out_dir, "thermo.csv"),
              {"temperature", "beta", "mean_energy", "mean_energy_per_site",
               "specific_heat", "specific_heat_per_site", "acceptance"});
  w.field(temp);
  w.field(beta);
  w.field(mean_e);
  w.field(mean_e / H.nsites());
  w.field(beta * beta * var);
  w.field(beta * beta * var / H.nsites());
  w.field(sum_acc / nmeas);
  w.end_row();
  w.close();
  write_config_csv(join_path(c.out_dir, "config.csv"), H.cell(), cfg.dir);

  RunManifest man("sample", c.model_path, c.seed);
  man.set_param("method", "metropolis");
  man.set_param("temperature", temp);
  man.set_param("sweeps", sweeps);
  man.set_param("burnin", burnin);
  man.set_param("init", init);
  man.add_output("thermo.csv");
  man.add_output("config.csv");
  man.write(c.out_dir, now_seconds() - t0);
  return 0;
}

int run_sample_pt(const Common& c, const ModelFile& mf,
                  const std::string& betas_str, long sweeps, int swap_interval,
                  const std::string& init, int restarts, double t0) {
  if (betas_str.empty())
    throw model_error("parallel tempering needs --betas b1,b2,...");
  Hamiltonian H(mf.crystal, mf.terms, mf.dims);
  SpinConfig cfg = initial_config(H, init, c.seed, restarts);

  PtOptions opts;
  opts.betas = parse_list(betas_str, "beta");
  opts.nsweeps = sweeps;
  opts.swap_interval = swap_interval;
  opts.seed = c.seed;
  PtResult res = parallel_tempering(H, cfg, opts);

  std::filesystem::create_directories(c.out_dir);
  CsvWriter w(join_path(c.out_dir, "pt.csv"),
              {"replica", "beta", "mean_energy", "mean_energy_per_site",
               "specific_heat", "acceptance"});
  for (std::size_t k = 0; k < res.betas.size(); ++k) {
    w.field(static_cast<long>(k));
    w.field(res.betas[k]);
    w.field(res.mean_energy[k]);
    w.field(res.mean_energy[k] / H.nsites());
    w.field(res.specific_heat[k]);
    w.field(res.acceptance[k]);
    w.end_row();
  }
  w.close();
  CsvWriter sw(join_path(c.out_dir, "swaps.csv"),
               {"pair", "beta_low", "beta_high", "acceptance"});
  for (std::size_t k = 0; k + 1 < res.betas.size(); ++k) {
    sw.field(static_cast<long>(k));
    sw.field(res.betas[k]);
    sw.field(res.betas[k + 1]);
    sw.field(res.swap_acceptance[k]);
    sw.end_row();
  }
  sw.close();
  CsvWriter cw(join_path(c.out_dir, "configs.csv"),
               {"replica", "site", "ux", "uy", "uz"});
  for (std::size_t k = 0; k < res.configs.size(); ++k)
    for (long i = 0; i < H.nsites(); ++i) {
      cw.field(static_cast<long>(k));
      cw.field(i);
      for (int a = 0; a < 3; ++a) cw.field(res.configs[k].dir[i][a]);
      cw.end_row();
    }
  cw.close();

  RunManifest man("sample", c.model_path, c.seed);
  man.set_param("method", "pt");
  man.set_param("betas", betas_str);
  man.set_param("sweeps", sweeps);
  man.set_param("swap_interval", static_cast<long>(swap_interval));
  man.set_param("init", init);
  man.add_output("pt.csv");
  man.add_output("swaps.csv");
  man.add_output("configs.csv");
  man.write(c.out_dir, now_seconds() - t0);
  return 0;
}

void write_wl_csv(const std::string& path, const WlState& st) {
  CsvWriter w(path, {"bin", "e_center", "ln_g", "histogram", "visits"});
  for (int b = 0; b < st.nbins; ++b) {
    w.field(static_cast<long>(b));
    w.field(st.bin_center(b));
    w.field(st.ln_g[b]);
    w.field(st.histogram[b]);
    w.field(st.visits[b]);
    w.end_row();
  }
  w.close();
}

int run_sample_wl(const Common& c, const ModelFile& mf, double emin,
                  double emax, int bins, long max_steps, double flatness,
                  double lnf_final, const std::string& betas_str,
                  const std::string& init, int restarts, double t0) {
  if (!(emax > emin)) throw model_error("need --emax > --emin");
  Hamiltonian H(mf.crystal, mf.terms, mf.dims);
  SpinConfig cfg = initial_config(H, init, c.seed, restarts);

  WlOptions opts;
  opts.e_min = emin;
  opts.e_max = emax;
  opts.nbins = bins;
  opts.max_steps = max_steps;
  opts.flatness = flatness;
  opts.ln_f_final = lnf_final;
  opts.seed = c.seed;

  std::filesystem::create_directories(c.out_dir);
  RunManifest man("sample", c.model_path, c.seed);
  man.set_param("method", "wl");
  man.set_param("emin", emin);
  man.set_param("emax", emax);
  man.set_param("bins", static_cast<long>(bins));
  man.set_param("max_steps", max_steps);
  man.set_param("flatness", flatness);
  man.set_param("lnf_final", lnf_final);
  man.set_param("init", init);

  WlState st;
  bool complete = true;
  try {
    st = wang_landau(H, cfg, opts);
  } catch (const wl_incomplete_error& e) {
    st = e.state;
    complete = false;
  }
  write_wl_csv(join_path(c.out_dir, "wl.csv"), st);
  man.add_output("wl.csv");
  man.set_param("status", complete ? "complete" : "incomplete");
  man.set_param("ln_f", st.ln_f);
  man.set_param("steps", st.steps);
  man.set_param("stages", static_cast<long>(st.stages_completed));

  if (!betas_str.empty()) {
    WlThermo th = wl_thermodynamics(st, parse_list(betas_str, "beta"));
    CsvWriter w(join_path(c.out_dir, "wl_thermo.csv"),
                {"beta", "mean_energy", "specific_heat"});
    for (std::size_t k = 0; k < th.beta.size(); ++k) {
      w.field(th.beta[k]);
      w.field(th.mean_energy[k]);
      w.field(th.specific_heat[k]);
      w.end_row();
    }
    w.close();
    man.add_output("wl_thermo.csv");
  }
  man.write(c.out_dir, now_seconds() - t0);
  if (!complete)
    throw numerical_error("flat-histogram run incomplete (partial wl.csv written)");
  return 0;
}

// -------------------------------------------------------------------- lswt

int run_lswt(const Common& c, const std::string& qpath_str, int points,
             double sigma, int bins, const std::string& ground_file,
             int restarts, bool no_connect) {
  double t0 = now_seconds();
  ModelFile mf = load_model(c);
  if (mf.mode == ModelFile::Mode::sun)
    throw model_error("linear spin wave theory runs in dipole mode");
  Hamiltonian H(mf.crystal, mf.terms, mf.dims);

  SpinConfig ground;
  if (!ground_file.empty()) {
    ground = read_config_csv(ground_file, H.nsites());
  } else {
    MinimizeOptions mo;
    ground = best_minimum(H, c.seed, restarts, mo, nullptr);
  }
  MagneticCell mc(mf.crystal, mf.terms, mf.dims, ground);

  QPath path = qpath(mf.crystal.reciprocal(), parse_qpath(qpath_str), points);
  DispersionOptions dopts;
  dopts.connect_bands = !no_connect;
  Dispersion disp = dispersion(mc, path.q, dopts);

  std::filesystem::create_directories(c.out_dir);
  long L = mc.nsites();
  CsvWriter w(join_path(c.out_dir, "dispersion.csv"),
              {"iq", "arc", "q1", "q2", "q3", "band", "omega",
               "intensity_perp", "unprojected"});
  double omega_max = 0;
  std::vector<ModeIntensities> modes(disp.q_frac.size());
  for (std::size_t iq = 0; iq < disp.q_frac.size(); ++iq) {
    modes[iq] = lswt_intensities(mc, disp.T[iq], disp.omega[iq]);
    for (long m = 0; m < L; ++m)
      omega_max = std::max(omega_max, disp.omega[iq][m]);
  }
  for (std::size_t iq = 0; iq < disp.q_frac.size(); ++iq)
    for (long m = 0; m < L; ++m) {
      bool unproj = false;
      double perp = perp_intensity(modes[iq].S[m], disp.q_cart[iq], &unproj);
      w.field(static_cast<long>(iq));
      w.field(path.arclength[iq]);
      for (int a = 0; a < 3; ++a) w.field(disp.q_frac[iq][a]);
      w.field(m);
      w.field(disp.omega[iq][m]);
      w.field(perp);
      w.field(static_cast<long>(unproj ? 1 : 0));
      w.end_row();
    }
  w.close();

  RunManifest man("lswt", c.model_path, c.seed);
  man.set_param("qpath", qpath_str);
  man.set_param("points", static_cast<long>(points));
  man.set_param("sigma", sigma);
  man.set_param("connect_bands", static_cast<long>(no_connect ? 0 : 1));
  man.set_param("ground", ground_file.empty() ? "minimize" : ground_file);
  man.set_param("restarts", static_cast<long>(restarts));
  man.add_output("dispersion.csv");

  if (sigma > 0) {
    VecX grid(bins);
    double top = 1.1 * omega_max + 5.0 * sigma;
    for (int k = 0; k < bins; ++k)
      grid[k] = top * static_cast<double>(k) / (bins - 1);
    CsvWriter iw(join_path(c.out_dir, "intensity.csv"),
                 {"iq", "arc", "omega", "value", "unprojected"});
    for (std::size_t iq = 0; iq < disp.q_frac.size(); ++iq) {
      BroadenedSpectrum sp = broaden(modes[iq], disp.q_cart[iq], grid, sigma);
      for (int k = 0; k < bins; ++k) {
        iw.field(static_cast<long>(iq));
        iw.field(path.arclength[iq]);
        iw.field(sp.omega_grid[k]);
        iw.field(sp.scalar[k]);
        iw.field(static_cast<long>(sp.unprojected ? 1 : 0));
        iw.end_row();
      }
    }
    iw.close();
    man.set_param("bins", static_cast<long>(bins));
    man.add_output("intensity.csv");
  }
  man.write(c.out_dir, now_seconds() - t0);
  return 0;
}

// -------------------------------------------------------------- structfact

int run_structfact(const Common& c, const std::string& what, int ensemble,
                   long frames, long stride, double dt, double temp,
                   double lambda, long burnin, const std::string& record,
                   const std::string& qpath_str, int points,
                   const std::string& window, bool keep_mean,
                   const std::string& init, int restarts) {
  double t0 = now_seconds();
  ModelFile mf = load_model(c);
  if (frames < 2) throw model_error("need --frames >= 2");
  Hamiltonian H(mf.crystal, mf.terms, mf.dims);
  SpinConfig start = initial_config(H, init, c.seed, restarts);

  bool sun_mode = mf.mode == ModelFile::Mode::sun;
  if (sun_mode && record == "langevin")
    throw model_error("stochastic dynamics is defined for dipole mode only");

  TrajectorySpec rec;
  rec.kind = record == "langevin" ? TrajectorySpec::Kind::langevin
                                  : TrajectorySpec::Kind::midpoint;
  rec.dt = dt;
  rec.stride = stride;
  rec.nsteps = (frames - 1) * stride;
  rec.temperature = temp;
  rec.lambda = lambda;

  // Per-member thermalization: Langevin at --temp on the directors (also in
  // SU(N) mode, where the coherent state is then rebuilt from the thermal
  // directors), followed by the recording integrator.
  std::vector<Trajectory> ens(ensemble);
  SunSystem* sys = nullptr;
  std::unique_ptr<SunSystem> sys_holder;
  if (sun_mode) {
    sys_holder = std::make_unique<SunSystem>(mf.crystal, mf.terms, mf.dims,
                                             mf.onsite);
    sys = sys_holder.get();
  }
  for (int k = 0; k < ensemble; ++k) {
    SpinConfig cfg = start;
    if (burnin > 0 && temp > 0) {
      Rng rng(derive_stream(c.seed, "thermalize", k));
      for (long s = 0; s < burnin; ++s)
        langevin_step_heun(H, cfg, dt, lambda, temp, rng);
    }
    if (sun_mode)
      ens[k] = run_sun_trajectory(*sys, sys->from_directors(cfg), rec);
    else
      ens[k] = run_trajectory(H, cfg, rec, derive_stream(c.seed, "member", k));
  }

  std::vector<Vec3> qs;
  std::vector<long> path_map; // path point -> grid index (when --qpath given)
  QPath path;
  if (!qpath_str.empty()) {
    path = qpath(mf.crystal.reciprocal(), parse_qpath(qpath_str), points);
    for (const Vec3& qf : path.q)
      path_map.push_back(nearest_grid_point(mf.crystal.reciprocal(), mf.dims, qf));
    std::vector<Vec3> grid = commensurate_grid(mf.dims);
    for (long g : path_map) qs.push_back(grid[g]);
  } else {
    qs = commensurate_grid(mf.dims);
  }

  std::filesystem::create_directories(c.out_dir);
  RunManifest man("structfact", c.model_path, c.seed);
  man.set_param("what", what);
  man.set_param("ensemble", static_cast<long>(ensemble));
  man.set_param("frames", frames);
  man.set_param("stride", stride);
  man.set_param("dt", dt);
  man.set_param("temperature", temp);
  man.set_param("lambda", lambda);
  man.set_param("burnin", burnin);
  man.set_param("record", record);
  man.set_param("window", window);
  man.set_param("subtract_mean", static_cast<long>(keep_mean ? 0 : 1));
  man.set_param("init", init);
  man.set_param("mode", sun_mode ? "sun" : "dipole");
  if (!qpath_str.empty()) man.set_param("qpath", qpath_str);

  // q mapping: grid coordinates, Cartesian vector, and (for paths) the
  // arclength and the grid point each path point snapped to.
  {
    std::vector<std::string> cols = {"iq", "q1", "q2", "q3",
                                     "qx", "qy", "qz"};
    if (!qpath_str.empty()) {
      cols.push_back("arc");
      cols.push_back("grid_index");
    }
    CsvWriter w(join_path(c.out_dir, "qpoints.csv"), cols);
    Mat3 rec = mf.crystal.reciprocal();
    for (std::size_t iq = 0; iq < qs.size(); ++iq) {
      w.field(static_cast<long>(iq));
      for (int a = 0; a < 3; ++a) w.field(qs[iq][a]);
      Vec3 qc = rec * qs[iq];
      for (int a = 0; a < 3; ++a) w.field(qc[a]);
      if (!qpath_str.empty()) {
        w.field(path.arclength[iq]);
        w.field(path_map[iq]);
      }
      w.end_row();
    }
    w.close();
    man.add_output("qpoints.csv");
  }

  if (what == "static" || what == "both") {
    StaticSF st = static_structure_factor(H.cell(), ens, qs);
    CsvWriter w(join_path(c.out_dir, "static.csv"),
                {"iq", "alpha", "beta", "re", "im"});
    CsvWriter ws(join_path(c.out_dir, "static_scalar.csv"),
                 {"iq", "trace_re", "perp", "unprojected"});
    for (std::size_t iq = 0; iq < st.q_frac.size(); ++iq) {
      write_sab_rows(w, {static_cast<long>(iq)}, st.S[iq]);
      ws.field(static_cast<long>(iq));
      ws.field(st.S[iq].trace().real());
      bool unproj = false;
      ws.field(perp_intensity(st.S[iq], st.q_cart[iq], &unproj));
      ws.field(static_cast<long>(unproj ? 1 : 0));
      ws.end_row();
    }
    w.close();
    ws.close();
    man.add_output("static.csv");
    man.add_output("static_scalar.csv");
  }

  if (what == "dynamic" || what == "both") {
    DynOptions dopts;
    dopts.window = window == "hann" ? Window::hann : Window::rect;
    dopts.subtract_mean = !keep_mean;
    DynamicSF dyn = dynamic_structure_factor(H.cell(), ens, qs, dopts);
    CsvWriter w(join_path(c.out_dir, "dynamic.csv"),
                {"iq", "iw", "omega", "alpha", "beta", "re", "im"});
    CsvWriter ws(join_path(c.out_dir, "dynamic_scalar.csv"),
                 {"iq", "iw", "omega", "perp", "unprojected"});
    for (std::size_t iq = 0; iq < dyn.q_frac.size(); ++iq)
      for (std::size_t iw = 0; iw < dyn.omega.size(); ++iw) {
        const Mat3c& S = dyn.S[iq][iw];
        const char* xyz = "xyz";
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b) {
            w.field(static_cast<long>(iq));
            w.field(static_cast<long>(iw));
            w.field(dyn.omega[iw]);
            w.field(std::string(1, xyz[a]));
            w.field(std::string(1, xyz[b]));
            w.field(S(a, b).real());
            w.field(S(a, b).imag());
            w.end_row();
          }
        ws.field(static_cast<long>(iq));
        ws.field(static_cast<long>(iw));
        ws.field(dyn.omega[iw]);
        bool unproj = false;
        ws.field(perp_intensity(S, dyn.q_cart[iq], &unproj));
        ws.field(static_cast<long>(unproj ? 1 : 0));
        ws.end_row();
      }
    w.close();
    ws.close();
    man.add_output("dynamic.csv");
    man.add_output("dynamic_scalar.csv");
  }
  man.write(c.out_dir, now_seconds() - t0);
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"spindyn: classical spin models — ground states, dynamics, "
               "sampling, spin waves, structure factors"};
  app.require_subcommand(1);

  Common c_min, c_dyn, c_smp, c_lswt, c_sf;

  // minimize
  auto* cmd_min = app.add_subcommand("minimize", "find a ground state");
  add_common(cmd_min, c_min);
  int min_restarts = 8, min_iters = defaults::minimize_max_iters;
  double min_tol = defaults::minimize_tol;
  cmd_min->add_option("--restarts", min_restarts, "random restarts (default 8)");
  cmd_min->add_option("--tol", min_tol, "gradient tolerance");
  cmd_min->add_option("--max-iters", min_iters, "iteration cap");

  // dynamics
  auto* cmd_dyn = app.add_subcommand("dynamics", "integrate a trajectory");
  add_common(cmd_dyn, c_dyn);
  std::string dyn_method = "midpoint", dyn_init = "minimize";
  long dyn_steps = 1000, dyn_stride = 1, dyn_burnin = 0;
  double dyn_dt = 0.01, dyn_temp = 0, dyn_lambda = 0.1;
  int dyn_restarts = 8;
  cmd_dyn->add_option("--method", dyn_method, "midpoint or langevin")
      ->check(CLI::IsMember({"midpoint", "langevin"}));
  cmd_dyn->add_option("--steps", dyn_steps, "integration steps");
  cmd_dyn->add_option("--dt", dyn_dt, "time step");
  cmd_dyn->add_option("--stride", dyn_stride, "record every n-th step");
  cmd_dyn->add_option("--burnin", dyn_burnin, "unrecorded leading steps");
  cmd_dyn->add_option("--temp", dyn_temp, "temperature (langevin)");
  cmd_dyn->add_option("--lambda", dyn_lambda, "damping (langevin)");
  cmd_dyn->add_option("--init", dyn_init, "minimize, random, or a config.csv");
  cmd_dyn->add_option("--restarts", dyn_restarts, "restarts for --init minimize");

  // sample
  auto* cmd_smp = app.add_subcommand("sample", "Monte Carlo sampling");
  add_common(cmd_smp, c_smp);
  std::string smp_method = "metropolis", smp_betas, smp_init = "minimize";
  double smp_temp = 0, smp_emin = 0, smp_emax = 1, smp_flatness = defaults::wl_flatness;
  double smp_lnf_final = defaults::wl_lnf_final;
  long smp_sweeps = 10000, smp_burnin = -1, smp_maxsteps = 100000000;
  int smp_swap = defaults::pt_swap_interval, smp_bins = 64, smp_restarts = 8;
  cmd_smp->add_option("--method", smp_method, "metropolis, pt, or wl")
      ->check(CLI::IsMember({"metropolis", "pt", "wl"}));
  cmd_smp->add_option("--temp", smp_temp, "temperature (metropolis)");
  cmd_smp->add_option("--sweeps", smp_sweeps, "sweeps (per replica for pt)");
  cmd_smp->add_option("--burnin", smp_burnin,
                      "burn-in sweeps (metropolis; default sweeps/2)");
  cmd_smp->add_option("--betas", smp_betas, "comma list, ascending (pt/wl)");
  cmd_smp->add_option("--swap-interval", smp_swap, "sweeps between swaps (pt)");
  cmd_smp->add_option("--emin", smp_emin, "energy window lower edge (wl)");
  cmd_smp->add_option("--emax", smp_emax, "energy window upper edge (wl)");
  cmd_smp->add_option("--bins", smp_bins, "energy bins (wl)");
  cmd_smp->add_option("--maxsteps", smp_maxsteps, "step cap (wl)");
  cmd_smp->add_option("--flatness", smp_flatness, "flatness threshold (wl)");
  cmd_smp->add_option("--lnf-final", smp_lnf_final, "target ln f (wl)");
  cmd_smp->add_option("--init", smp_init, "minimize, random, or a config.csv");
  cmd_smp->add_option("--restarts", smp_restarts, "restarts for --init minimize");

  // lswt
  auto* cmd_lswt = app.add_subcommand("lswt", "linear spin wave spectra");
  add_common(cmd_lswt, c_lswt);
  std::string lswt_qpath = "0,0,0;0.5,0,0", lswt_ground;
  int lswt_points = 64, lswt_bins = 256, lswt_restarts = 8;
  double lswt_sigma = 0;
  bool lswt_noconnect = false;
  cmd_lswt->add_option("--qpath", lswt_qpath,
                       "vertices 'q1,q2,q3;...' in reciprocal coordinates");
  cmd_lswt->add_option("--points", lswt_points, "points per segment");
  cmd_lswt->add_option("--sigma", lswt_sigma,
                       "Gaussian broadening (writes intensity.csv)");
  cmd_lswt->add_option("--bins", lswt_bins, "energy grid size for --sigma");
  cmd_lswt->add_option("--ground", lswt_ground, "config.csv with the ground state");
  cmd_lswt->add_option("--restarts", lswt_restarts, "ground-state restarts");
  cmd_lswt->add_flag("--no-connect", lswt_noconnect, "raw band ordering");

  // structfact
  auto* cmd_sf = app.add_subcommand("structfact", "structure factors");
  add_common(cmd_sf, c_sf);
  std::string sf_what = "both", sf_record = "midpoint", sf_window = "hann";
  std::string sf_qpath, sf_init = "minimize";
  int sf_ensemble = 8, sf_points = 17, sf_restarts = 8;
  long sf_frames = 128, sf_stride = 25, sf_burnin = 2000;
  double sf_dt = 0.01, sf_temp = 0.1, sf_lambda = 0.2;
  bool sf_keepmean = false;
  cmd_sf->add_option("--method", sf_what, "static, dynamic, or both")
      ->check(CLI::IsMember({"static", "dynamic", "both"}));
  cmd_sf->add_option("--ensemble", sf_ensemble, "independent members");
  cmd_sf->add_option("--frames", sf_frames, "recorded frames per member");
  cmd_sf->add_option("--stride", sf_stride, "steps between frames");
  cmd_sf->add_option("--dt", sf_dt, "time step");
  cmd_sf->add_option("--temp", sf_temp, "thermalization temperature");
  cmd_sf->add_option("--lambda", sf_lambda, "thermalization damping");
  cmd_sf->add_option("--burnin", sf_burnin, "thermalization steps per member");
  cmd_sf->add_option("--record", sf_record, "recording integrator")
      ->check(CLI::IsMember({"midpoint", "langevin"}));
  cmd_sf->add_option("--qpath", sf_qpath,
                     "snap path to the commensurate grid (default: full grid)");
  cmd_sf->add_option("--points", sf_points, "points per path segment");
  cmd_sf->add_option("--window", sf_window, "rect or hann")
      ->check(CLI::IsMember({"rect", "hann"}));
  cmd_sf->add_flag("--keep-mean", sf_keepmean, "skip mean subtraction");
  cmd_sf->add_option("--init", sf_init, "minimize, random, or a config.csv");
  cmd_sf->add_option("--restarts", sf_restarts, "restarts for --init minimize");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (cmd_min->parsed())
      return run_minimize(c_min, min_restarts, min_tol, min_iters);
    if (cmd_dyn->parsed())
      return run_dynamics(c_dyn, dyn_method, dyn_steps, dyn_dt, dyn_stride,
                          dyn_burnin, dyn_temp, dyn_lambda, dyn_init,
                          dyn_restarts);
    if (cmd_smp->parsed()) {
      double t0 = now_seconds();
      ModelFile mf = load_model(c_smp);
      if (smp_burnin < 0) smp_burnin = smp_sweeps / 2;
      if (smp_method == "metropolis")
        return run_sample_metropolis(c_smp, mf, smp_temp, smp_sweeps,
                                     smp_burnin, smp_init, smp_restarts, t0);
      if (smp_method == "pt")
        return run_sample_pt(c_smp, mf, smp_betas, smp_sweeps, smp_swap,
                             smp_init, smp_restarts, t0);
      return run_sample_wl(c_smp, mf, smp_emin, smp_emax, smp_bins,
                           smp_maxsteps, smp_flatness, smp_lnf_final,
                           smp_betas, smp_init, smp_restarts, t0);
    }
    if (cmd_lswt->parsed())
      return run_lswt(c_lswt, lswt_qpath, lswt_points, lswt_sigma, lswt_bins,
                      lswt_ground, lswt_restarts, lswt_noconnect);
    if (cmd_sf->parsed())
      return run_structfact(c_sf, sf_what, sf_ensemble, sf_frames, sf_stride,
                            sf_dt, sf_temp, sf_lambda, sf_burnin, sf_record,
                            sf_qpath, sf_points, sf_window, sf_keepmean,
                            sf_init, sf_restarts);
  } catch (const numerical_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const model_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
