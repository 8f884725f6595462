#pragma once

#include <vector>

#include "spindyn/defaults.hpp"
#include "spindyn/errors.hpp"
#include "spindyn/types.hpp"

namespace spindyn {

// Wrap fractional coordinates into [0,1).
Vec3 wrap_unit(const Vec3& v);
// Wrap into [-1/2, 1/2).
Vec3 wrap_half(const Vec3& v);

// A crystal: lattice vectors as matrix columns, a site basis in fractional
// coordinates, and per-site spin magnitude and g-factor.
struct Crystal {
  Mat3 lattice;                 // columns a1, a2, a3
  std::vector<Vec3> sites;      // fractional positions in [0,1)
  std::vector<double> spin_s;   // per basis site, > 0
  std::vector<double> g_factor; // per basis site

  int nsites() const { return static_cast<int>(sites.size()); }
  Vec3 cart(const Vec3& frac) const { return lattice * frac; }
  // Columns b1, b2, b3 with a_i . b_j = 2 pi delta_ij.
  Mat3 reciprocal() const;

  // Throws model_error on singular lattice, out-of-range sites, coincident
  // sites, or non-positive spin.
  void validate() const;
};

// Crystallographic operation x -> W x + w in fractional coordinates.
// W must be an integer matrix in the lattice basis (it has to map the
// translation lattice to itself); w is wrapped to [0,1).
struct SymOp {
  Mat3 W;
  Vec3 w;

  static SymOp identity();
  SymOp compose(const SymOp& other) const; // this ∘ other
  bool approx_equal(const SymOp& other, double tol) const;
};

// Pair coupling between basis site i in the home cell and basis site j in
// the cell displaced by `offset` lattice vectors.
struct Bond {
  int i = 0, j = 0;
  Vec3i offset = Vec3i::Zero();

  // Canonical form: i <= j, and for i == j the offset is the lexicographically
  // larger of (offset, -offset).  Returns the canonical bond and whether the
  // endpoints were exchanged.
  Bond canonical(bool* reversed = nullptr) const;
  bool operator==(const Bond& o) const {
    return i == o.i && j == o.j && offset == o.offset;
  }
};

// Throws model_error if the bond joins a site to itself in the same cell or
// indices are out of range.
void validate_bond(const Crystal& c, const Bond& b);

// A symmetry group bound to a crystal.  Construction validates every
// operation (orthogonal Cartesian rotation, site permutation) and closes the
// generator set under composition, up to defaults::group_cap elements.
class Symmetry {
 public:
  static Symmetry generate(const Crystal& c, const std::vector<SymOp>& gens);

  int size() const { return static_cast<int>(ops_.size()); }
  const SymOp& op(int g) const { return ops_[g]; }
  const std::vector<SymOp>& ops() const { return ops_; }
  const Mat3& cart_rotation(int g) const { return rot_cart_[g]; }

  // Image of a basis site: sites[site] -> sites[image.site] + image.shift.
  struct SiteImage {
    int site;
    Vec3i shift;
  };
  const SiteImage& site_image(int g, int site) const {
    return site_maps_[g][site];
  }

  struct BondImage {
    Bond bond;      // canonical
    bool reversed;  // endpoints exchanged during canonicalization
  };
  BondImage map_bond(int g, const Bond& b) const;

 private:
  const Crystal* crystal_ = nullptr;
  std::vector<SymOp> ops_;
  std::vector<Mat3> rot_cart_;
  std::vector<std::vector<SiteImage>> site_maps_;
};

// Orbit of a bond under the group, deduplicated (a bond and its reversal are
// the same bond).  Each entry records one group element realizing it.
struct OrbitEntry {
  Bond bond;
  int op;
  bool reversed;
};
std::vector<OrbitEntry> bond_orbit(const Symmetry& sym, const Bond& ref);

// Orthonormal (Frobenius) basis of the space of 3x3 coupling matrices allowed
// on `ref` by the group: J = R J R^T for bond-preserving elements and
// J = R J^T R^T for bond-reversing ones.  Dimension is between 0 and 9.
std::vector<Mat3> allowed_exchange_basis(const Symmetry& sym, const Bond& ref);

// Same subspace via the averaging projector; exposed for cross-checks.
Eigen::Matrix<double, 9, 9> exchange_projector(const Symmetry& sym,
                                               const Bond& ref);

// Periodic supercell of a crystal.  Site order is cell-major with cells
// enumerated lexicographically by (n1,n2,n3), basis index minor.
struct Supercell {
  Crystal crystal;
  Vec3i dims = Vec3i::Ones();
  int nbasis = 0;
  long ncells = 0;
  long nsites = 0;
  std::vector<Vec3> pos_cart;
  std::vector<double> spin;
  std::vector<double> g;

  long cell_linear(const Vec3i& n) const {
    return (static_cast<long>(n.x()) * dims.y() + n.y()) * dims.z() + n.z();
  }
  long index(const Vec3i& cell, int basis) const {
    return cell_linear(cell) * nbasis + basis;
  }
  int basis_of(long idx) const { return static_cast<int>(idx % nbasis); }
  Vec3i cell_of(long idx) const {
    long c = idx / nbasis;
    Vec3i n;
    n.z() = static_cast<int>(c % dims.z());
    c /= dims.z();
    n.y() = static_cast<int>(c % dims.y());
    n.x() = static_cast<int>(c / dims.y());
    return n;
  }
  // Supercell index of the site reached by following `b` from site `idx`
  // (whose basis must equal b.i), with periodic wrapping.
  long neighbor(long idx, const Bond& b) const;
};

Supercell build_supercell(const Crystal& c, const Vec3i& dims);

} // namespace spindyn
