#pragma once

#include <vector>

#include "spindyn/hamiltonian.hpp"

namespace spindyn {

// A magnetic unit cell: the crystal interactions instantiated on an
// enlarged cell of `dims` crystal cells, together with a stationary
// classical ground state and the local frames it defines.
//
// Frames: e3 = ground direction; (e1, e2) complete a right-handed triad by
// the minimal rotation taking z to e3 (about z x e3).  For e3 = +z the frame
// is (x, y, z); for e3 = -z it is (x, -y, -z).
class MagneticCell {
 public:
  MagneticCell(const Crystal& crystal, const ModelTerms& terms,
               const Vec3i& dims, SpinConfig ground);

  const Hamiltonian& ham() const { return ham_; }
  const SpinConfig& ground() const { return ground_; }
  long nsites() const { return ham_.nsites(); }
  const Vec3& e3(long i) const { return e3_[i]; }
  const Eigen::Vector3cd& u(long i) const { return u_[i]; } // e1 + i e2

  // Bonds instantiated on the magnetic cell with true Cartesian
  // displacements (not wrapped), both ordered directions.
  struct Instance {
    long p, r;   // boson indices
    Vec3 d;      // Cartesian displacement from p to r
    Mat3 J;
  };
  const std::vector<Instance>& instances() const { return instances_; }

 private:
  Hamiltonian ham_;
  SpinConfig ground_;
  std::vector<Vec3> e3_;
  std::vector<Eigen::Vector3cd> u_;
  std::vector<Instance> instances_;
};

// Local frame for a single direction (exposed for tests).
void local_frame(const Vec3& dir, Vec3& e1, Vec3& e2, Vec3& e3);

// Quadratic boson Hamiltonian at Cartesian wavevector q:
//   [[A(q) - C, B(q)], [B(q)^dag, conj(A(-q)) - C]],
// a 2L x 2L Hermitian matrix whose paradiagonalization gives the magnon
// energies directly.
MatXc spinwave_hamiltonian(const MagneticCell& mc, const Vec3& q_cart);

struct ColpaResult {
  VecX omega;  // L mode energies, descending
  MatXc T;     // 2L x 2L, T^dag H T = diag(omega, omega(-q)), T^dag g T = g
};

// Cholesky-based paradiagonalization of a bosonic Hamiltonian.  Semidefinite
// input is regularized by a relative shift; spectra below -tol signal an
// unstable reference state (instability_error).
ColpaResult colpa_diagonalize(const MatXc& H);

struct DispersionOptions {
  bool connect_bands = true; // eigenvector-overlap matching along the path
};

struct Dispersion {
  std::vector<Vec3> q_frac;   // as supplied
  std::vector<Vec3> q_cart;
  std::vector<VecX> omega;    // per q, band-ordered
  std::vector<MatXc> T;       // per q
};

// Band structure along a list of q points given in reciprocal-lattice
// coordinates of the crystal cell.
Dispersion dispersion(const MagneticCell& mc, const std::vector<Vec3>& q_frac,
                      const DispersionOptions& opts = {});

// One-magnon transverse correlations.  For mode m at q:
//   F^a_m = sum_i sqrt(s_i/2) (conj(u_i^a) T[i,m] + u_i^a T[i+L,m]),
//   S^{ab}_m = F^a conj(F^b) / L.
struct ModeIntensities {
  VecX omega;                // L modes
  std::vector<Mat3c> S;      // per mode
};
ModeIntensities lswt_intensities(const MagneticCell& mc, const MatXc& T,
                                 const VecX& omega);

// Gaussian-broadened spectrum on an energy grid; each mode carries its
// integrated weight.  The scalar channel applies the transverse projector
// (1 - qq^T); at q = 0 the unprojected trace is used and flagged.
struct BroadenedSpectrum {
  VecX omega_grid;
  std::vector<Mat3c> S;     // per grid point
  VecX scalar;              // projected trace
  bool unprojected = false; // q = 0
};
BroadenedSpectrum broaden(const ModeIntensities& modes, const Vec3& q_cart,
                          const VecX& omega_grid, double sigma);

} // namespace spindyn
