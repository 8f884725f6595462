#pragma once

#include <vector>

#include "spindyn/dynamics.hpp"

namespace spindyn {

// Piecewise-linear path through reciprocal space (reciprocal-lattice
// coordinates).  Each segment carries `points_per_segment` points including
// both endpoints; shared junctions are emitted once.
struct QPath {
  std::vector<Vec3> q;            // reciprocal coordinates
  std::vector<double> arclength;  // Cartesian, cumulative
  std::vector<long> vertex_index; // position of each input vertex in q
};
QPath qpath(const Mat3& reciprocal, const std::vector<Vec3>& vertices,
            int points_per_segment);

// The supercell-commensurate wavevectors q = sum_k (m_k / dims_k) b_k,
// m_k = 0..dims_k-1, in lexicographic (m1,m2,m3) order.
std::vector<Vec3> commensurate_grid(const Vec3i& dims);

// Index of the commensurate point nearest to `q_frac` (Cartesian metric,
// distance measured modulo the reciprocal lattice).
long nearest_grid_point(const Mat3& reciprocal, const Vec3i& dims,
                        const Vec3& q_frac);

// Equal-time correlations S^{ab}(q) = < m^a(q) conj(m^b(q)) > / N with
// m^a(q) = sum_i m_i^a exp(-i q . r_i), averaged over members and frames.
struct StaticSF {
  std::vector<Vec3> q_frac;
  std::vector<Vec3> q_cart;
  std::vector<Mat3c> S;
};
StaticSF static_structure_factor(const Supercell& sc,
                                 const std::vector<Trajectory>& ensemble,
                                 const std::vector<Vec3>& q_frac);

enum class Window { rect, hann };

struct DynOptions {
  Window window = Window::rect;
  bool subtract_mean = true;
};

// Windowed time DFT of m(q, t); the normalization makes the rectangular
// frequency integral reproduce the equal-time correlations exactly:
//   S^{ab}(q, w_k) = M^a(q,w_k) conj(M^b(q,w_k)) / (N * dw * F * sum_t w_t^2).
// Frequencies are the DFT grid, reported in ascending order.
struct DynamicSF {
  std::vector<Vec3> q_frac;
  std::vector<Vec3> q_cart;
  std::vector<double> omega; // ascending, negative first
  // S[iq][iw]
  std::vector<std::vector<Mat3c>> S;
  Window window = Window::rect;
  bool mean_subtracted = false;
};
DynamicSF dynamic_structure_factor(const Supercell& sc,
                                   const std::vector<Trajectory>& ensemble,
                                   const std::vector<Vec3>& q_frac,
                                   const DynOptions& opts = {});

// Neutron-weighted scalar: sum_{ab} (delta_ab - qhat_a qhat_b) S^{ab}.
// At q = 0 the unprojected trace is returned and *unprojected set.
double perp_intensity(const Mat3c& S, const Vec3& q_cart,
                      bool* unprojected = nullptr);

} // namespace spindyn
