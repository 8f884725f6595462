#pragma once

#include <vector>

#include "spindyn/crystal.hpp"
#include "spindyn/rng.hpp"
#include "spindyn/types.hpp"

namespace spindyn {

// Unit directors, one per supercell site.  The moment of site i is
// m_i = s_i * dir[i].
struct SpinConfig {
  std::vector<Vec3> dir;

  long size() const { return static_cast<long>(dir.size()); }
  void normalize_all() {
    for (auto& u : dir) u.normalize();
  }
};

SpinConfig random_config(long nsites, Rng& rng);

// Crystal-level interaction terms.  Bonds must be canonical and unique.
struct ExchangeTerm {
  Bond bond;
  Mat3 J;
};
struct BiquadTerm {
  Bond bond;
  double coef = 0.0;
};
// Easy-axis/easy-plane single-ion term c2 (n . m_i)^2 on a basis site.
struct AnisoTerm {
  int site = 0;
  Vec3 axis = Vec3::UnitZ();
  double c2 = 0.0;
};

struct ModelTerms {
  std::vector<ExchangeTerm> exchange;
  std::vector<BiquadTerm> biquad;
  std::vector<AnisoTerm> aniso;
  Vec3 field = Vec3::Zero();
};

// Interactions instantiated on a periodic supercell.
//
//   E = sum_pairs m_a^T J m_b + sum_bq c (m_a . m_b)^2
//     + sum_sites sum_axes c2 (n . m_i)^2 - sum_sites g_i B . m_i
//
// with m_i = s_i dir_i.  Every bond appears exactly once per cell; bonds may
// wrap around the periodic boundary, including onto their own origin site.
class Hamiltonian {
 public:
  struct Pair {
    long a, b;
    Mat3 J;
  };
  struct BqPair {
    long a, b;
    double coef;
  };
  struct Axis {
    Vec3 n;
    double c2;
  };

  Hamiltonian(const Crystal& crystal, const ModelTerms& terms,
              const Vec3i& dims);

  const Supercell& cell() const { return cell_; }
  long nsites() const { return cell_.nsites; }
  const ModelTerms& terms() const { return terms_; }
  const Vec3& field() const { return field_; }
  const std::vector<Pair>& pairs() const { return pairs_; }
  const std::vector<BqPair>& bq_pairs() const { return bq_; }
  const std::vector<Axis>& axes(long site) const { return aniso_[site]; }
  const std::vector<int>& pairs_at(long site) const { return pair_at_[site]; }
  const std::vector<int>& bq_at(long site) const { return bq_at_[site]; }
  bool has_biquadratic() const { return !bq_.empty(); }

  double energy(const SpinConfig& cfg) const;
  // Effective field -dE/dm_i for every site.
  void local_fields(const SpinConfig& cfg, std::vector<Vec3>& out) const;
  Vec3 local_field(const SpinConfig& cfg, long i) const;
  // Energy change if dir[i] is replaced by new_dir, from incident terms only.
  double energy_delta(const SpinConfig& cfg, long i, const Vec3& new_dir) const;

  // Largest absolute coupling constant; sets the temperature scale.
  double coupling_scale() const;

 private:
  Supercell cell_;
  ModelTerms terms_;
  Vec3 field_;
  std::vector<Pair> pairs_;
  std::vector<BqPair> bq_;
  std::vector<std::vector<Axis>> aniso_;
  // Incident pair/bq term indices per site (self pairs appear once).
  std::vector<std::vector<int>> pair_at_;
  std::vector<std::vector<int>> bq_at_;
};

struct MinimizeOptions {
  double step = defaults::minimize_step;
  double tol = defaults::minimize_tol;
  int max_iters = defaults::minimize_max_iters;
};

struct MinimizeResult {
  bool converged = false;
  int iterations = 0;
  double energy = 0.0;
  double grad_norm = 0.0; // max_i |tangential B_i|
};

// Projected gradient descent on the directors with adaptive step control.
// Monotone in energy; stops when the largest tangential field drops below
// tol or after max_iters (converged = false).
MinimizeResult minimize(const Hamiltonian& H, SpinConfig& cfg,
                        const MinimizeOptions& opts = {});

} // namespace spindyn
