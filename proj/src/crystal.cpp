#include "spindyn/crystal.hpp"

#include <algorithm>
#include <cmath>

namespace spindyn {

Vec3 wrap_unit(const Vec3& v) {
  Vec3 r;
  for (int k = 0; k < 3; ++k) {
    r[k] = v[k] - std::floor(v[k]);
    if (r[k] >= 1.0) r[k] = 0.0; // guard against -1e-17 -> 1.0
  }
  return r;
}

Vec3 wrap_half(const Vec3& v) {
  Vec3 r;
  for (int k = 0; k < 3; ++k) r[k] = v[k] - std::round(v[k]);
  return r;
}

Mat3 Crystal::reciprocal() const {
  return 2.0 * pi * lattice.inverse().transpose();
}

void Crystal::validate() const {
  if (std::abs(lattice.determinant()) < 1e-12)
    throw model_error("lattice vectors are linearly dependent");
  if (sites.empty()) throw model_error("crystal has no sites");
  if (spin_s.size() != sites.size() || g_factor.size() != sites.size())
    throw model_error("per-site spin/g arrays do not match site count");
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const Vec3& x = sites[i];
    for (int k = 0; k < 3; ++k)
      if (x[k] < 0.0 || x[k] >= 1.0)
        throw model_error("site " + std::to_string(i) +
                          " not in fractional range [0,1)");
    if (spin_s[i] <= 0.0)
      throw model_error("site " + std::to_string(i) +
                        " has non-positive spin magnitude");
  }
  for (std::size_t i = 0; i < sites.size(); ++i)
    for (std::size_t j = i + 1; j < sites.size(); ++j)
      if (wrap_half(sites[i] - sites[j]).lpNorm<Eigen::Infinity>() <
          defaults::position_tol)
        throw model_error("sites " + std::to_string(i) + " and " +
                          std::to_string(j) + " coincide");
}

SymOp SymOp::identity() { return SymOp{Mat3::Identity(), Vec3::Zero()}; }

SymOp SymOp::compose(const SymOp& o) const {
  return SymOp{W * o.W, wrap_unit(W * o.w + w)};
}

bool SymOp::approx_equal(const SymOp& o, double tol) const {
  if ((W - o.W).lpNorm<Eigen::Infinity>() > 0.5) return false;
  return wrap_half(w - o.w).lpNorm<Eigen::Infinity>() < tol;
}

Bond Bond::canonical(bool* reversed) const {
  Bond b = *this;
  bool rev = false;
  auto lexless = [](const Vec3i& a, const Vec3i& c) {
    if (a.x() != c.x()) return a.x() < c.x();
    if (a.y() != c.y()) return a.y() < c.y();
    return a.z() < c.z();
  };
  if (b.j < b.i || (b.i == b.j && lexless(b.offset, -b.offset))) {
    std::swap(b.i, b.j);
    b.offset = -b.offset;
    rev = true;
  }
  if (reversed) *reversed = rev;
  return b;
}

void validate_bond(const Crystal& c, const Bond& b) {
  if (b.i < 0 || b.j < 0 || b.i >= c.nsites() || b.j >= c.nsites())
    throw model_error("bond references a site outside the basis");
  if (b.i == b.j && b.offset == Vec3i::Zero())
    throw model_error("bond joins a site to itself in the same cell");
}

namespace {

Mat3 round_integral(const Mat3& W) {
  Mat3 R;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      double v = std::round(W(r, c));
      if (std::abs(W(r, c) - v) > defaults::position_tol)
        throw model_error(
            "symmetry rotation is not an integer matrix in the lattice basis");
      R(r, c) = v;
    }
  return R;
}

std::vector<Symmetry::SiteImage> map_sites(const Crystal& c, const SymOp& g) {
  std::vector<Symmetry::SiteImage> out(c.sites.size());
  for (int s = 0; s < c.nsites(); ++s) {
    Vec3 y = g.W * c.sites[s] + g.w;
    int found = -1;
    Vec3i shift = Vec3i::Zero();
    for (int t = 0; t < c.nsites(); ++t) {
      Vec3 d = y - c.sites[t];
      Vec3 n(std::round(d.x()), std::round(d.y()), std::round(d.z()));
      if ((d - n).lpNorm<Eigen::Infinity>() < defaults::position_tol) {
        found = t;
        shift = n.cast<int>();
        break;
      }
    }
    if (found < 0)
      throw symmetry_error("symmetry operation does not permute the sites");
    // Spin magnitudes must agree along the orbit.
    if (std::abs(c.spin_s[s] - c.spin_s[found]) > 1e-12 ||
        std::abs(c.g_factor[s] - c.g_factor[found]) > 1e-12)
      throw symmetry_error(
          "symmetry operation maps between sites of different spin or g");
    out[s] = {found, shift};
  }
  return out;
}

} // namespace

Symmetry Symmetry::generate(const Crystal& c, const std::vector<SymOp>& gens) {
  c.validate();
  Symmetry sym;
  sym.crystal_ = &c;

  std::vector<SymOp> elems;
  elems.push_back(SymOp::identity());
  auto contains = [&](const SymOp& g) {
    for (const auto& e : elems)
      if (e.approx_equal(g, defaults::position_tol)) return true;
    return false;
  };

  std::vector<SymOp> clean;
  for (const auto& g : gens) {
    SymOp h{round_integral(g.W), wrap_unit(g.w)};
    clean.push_back(h);
    if (!contains(h)) elems.push_back(h);
  }

  // Close under composition.
  for (std::size_t head = 0; head < elems.size(); ++head) {
    for (const auto& g : clean) {
      SymOp prod = g.compose(elems[head]);
      if (!contains(prod)) {
        elems.push_back(prod);
        if (static_cast<int>(elems.size()) > defaults::group_cap)
          throw symmetry_error(
              "symmetry generators do not close within " +
              std::to_string(defaults::group_cap) + " elements");
      }
    }
  }

  Mat3 A = c.lattice, Ainv = c.lattice.inverse();
  for (const auto& g : elems) {
    Mat3 R = A * g.W * Ainv;
    if ((R.transpose() * R - Mat3::Identity()).lpNorm<Eigen::Infinity>() >
        defaults::orthogonality_tol)
      throw symmetry_error(
          "symmetry rotation is not orthogonal in Cartesian coordinates");
    sym.rot_cart_.push_back(R);
    sym.site_maps_.push_back(map_sites(c, g));
  }
  sym.ops_ = std::move(elems);
  return sym;
}

Symmetry::BondImage Symmetry::map_bond(int g, const Bond& b) const {
  const SymOp& op = ops_[g];
  const SiteImage& mi = site_maps_[g][b.i];
  const SiteImage& mj = site_maps_[g][b.j];
  Vec3 off = op.W * b.offset.cast<double>();
  Vec3i ioff(static_cast<int>(std::llround(off.x())),
             static_cast<int>(std::llround(off.y())),
             static_cast<int>(std::llround(off.z())));
  Bond raw{mi.site, mj.site, mj.shift + ioff - mi.shift};
  bool rev = false;
  Bond canon = raw.canonical(&rev);
  return {canon, rev};
}

std::vector<OrbitEntry> bond_orbit(const Symmetry& sym, const Bond& ref) {
  Bond ref_c = ref.canonical();
  std::vector<OrbitEntry> orbit;
  for (int g = 0; g < sym.size(); ++g) {
    auto img = sym.map_bond(g, ref_c);
    bool known = false;
    for (const auto& e : orbit)
      if (e.bond == img.bond) {
        known = true;
        break;
      }
    if (!known) orbit.push_back({img.bond, g, img.reversed});
  }
  std::sort(orbit.begin(), orbit.end(),
            [](const OrbitEntry& a, const OrbitEntry& b) {
              if (a.bond.i != b.bond.i) return a.bond.i < b.bond.i;
              if (a.bond.j != b.bond.j) return a.bond.j < b.bond.j;
              for (int k = 0; k < 3; ++k)
                if (a.bond.offset[k] != b.bond.offset[k])
                  return a.bond.offset[k] < b.bond.offset[k];
              return false;
            });
  return orbit;
}

namespace {

// vec() is column-major; vec(R J R^T) = (R ⊗ R) vec(J).
Eigen::Matrix<double, 9, 9> kron3(const Mat3& A, const Mat3& B) {
  Eigen::Matrix<double, 9, 9> K;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      K.block<3, 3>(3 * i, 3 * j) = A(i, j) * B;
  return K;
}

Eigen::Matrix<double, 9, 9> transpose_matrix() {
  Eigen::Matrix<double, 9, 9> K = Eigen::Matrix<double, 9, 9>::Zero();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) K(3 * c + r, 3 * r + c) = 1.0;
  return K;
}

} // namespace

Eigen::Matrix<double, 9, 9> exchange_projector(const Symmetry& sym,
                                               const Bond& ref) {
  Bond ref_c = ref.canonical();
  Eigen::Matrix<double, 9, 9> P = Eigen::Matrix<double, 9, 9>::Zero();
  const auto T = transpose_matrix();
  int count = 0;
  for (int g = 0; g < sym.size(); ++g) {
    auto img = sym.map_bond(g, ref_c);
    if (!(img.bond == ref_c)) continue;
    const Mat3& R = sym.cart_rotation(g);
    Eigen::Matrix<double, 9, 9> M = kron3(R, R);
    if (img.reversed) M = M * T;
    P += M;
    ++count;
  }
  P /= count; // identity always stabilizes, count >= 1
  return (P + P.transpose()) / 2.0;
}

std::vector<Mat3> allowed_exchange_basis(const Symmetry& sym, const Bond& ref) {
  auto P = exchange_projector(sym, ref);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 9, 9>> es(P);
  std::vector<Mat3> basis;
  for (int k = 0; k < 9; ++k) {
    if (es.eigenvalues()[k] < 0.5) continue;
    Eigen::Matrix<double, 9, 1> v = es.eigenvectors().col(k);
    // Canonical sign: largest-magnitude component positive.
    int arg = 0;
    for (int m = 1; m < 9; ++m)
      if (std::abs(v[m]) > std::abs(v[arg])) arg = m;
    if (v[arg] < 0) v = -v;
    basis.push_back(Eigen::Map<Mat3>(v.data()));
  }
  return basis;
}

long Supercell::neighbor(long idx, const Bond& b) const {
  Vec3i n = cell_of(idx) + b.offset;
  for (int k = 0; k < 3; ++k) {
    n[k] %= dims[k];
    if (n[k] < 0) n[k] += dims[k];
  }
  return index(n, b.j);
}

Supercell build_supercell(const Crystal& c, const Vec3i& dims) {
  c.validate();
  for (int k = 0; k < 3; ++k)
    if (dims[k] < 1) throw model_error("supercell dimensions must be >= 1");
  long ncells = static_cast<long>(dims.x()) * dims.y() * dims.z();
  long nsites = ncells * c.nsites();
  if (nsites > defaults::max_supercell_sites)
    throw model_error("supercell exceeds the size cap of " +
                      std::to_string(defaults::max_supercell_sites) +
                      " sites");

  Supercell sc;
  sc.crystal = c;
  sc.dims = dims;
  sc.nbasis = c.nsites();
  sc.ncells = ncells;
  sc.nsites = nsites;
  sc.pos_cart.resize(nsites);
  sc.spin.resize(nsites);
  sc.g.resize(nsites);
  for (int n1 = 0; n1 < dims.x(); ++n1)
    for (int n2 = 0; n2 < dims.y(); ++n2)
      for (int n3 = 0; n3 < dims.z(); ++n3) {
        Vec3i n(n1, n2, n3);
        for (int b = 0; b < sc.nbasis; ++b) {
          long idx = sc.index(n, b);
          sc.pos_cart[idx] = c.cart(c.sites[b] + n.cast<double>());
          sc.spin[idx] = c.spin_s[b];
          sc.g[idx] = c.g_factor[b];
        }
      }
  return sc;
}

} // namespace spindyn
