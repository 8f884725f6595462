#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "spindyn/crystal.hpp"
#include "spindyn/rng.hpp"

using namespace spindyn;

namespace {

Crystal cubic(int nsites = 1) {
  Crystal c;
  c.lattice = Mat3::Identity();
  for (int i = 0; i < nsites; ++i) {
    c.sites.push_back(i == 0 ? Vec3(0, 0, 0) : Vec3(0.5, 0.5, 0.5));
    c.spin_s.push_back(1.0);
    c.g_factor.push_back(1.0);
  }
  return c;
}

SymOp make_op(const Mat3& W) {
  SymOp op;
  op.W = W;
  op.w = Vec3::Zero();
  return op;
}

Mat3 rot_z90() {
  Mat3 W;
  W << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  return W;
}

// All 48 signed permutation matrices: the cubic point group.
std::vector<Mat3> signed_permutations() {
  std::vector<Mat3> out;
  int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                     {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (auto& p : perms)
    for (int signs = 0; signs < 8; ++signs) {
      Mat3 W = Mat3::Zero();
      for (int r = 0; r < 3; ++r)
        W(r, p[r]) = (signs >> r & 1) ? -1.0 : 1.0;
      out.push_back(W);
    }
  return out;
}

// vec(J) with column-major stacking; K computes vec(J^T) = K vec(J).
Eigen::Matrix<double, 9, 9> commutation_matrix() {
  Eigen::Matrix<double, 9, 9> K = Eigen::Matrix<double, 9, 9>::Zero();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) K(j + 3 * i, i + 3 * j) = 1.0;
  return K;
}

Eigen::Matrix<double, 9, 9> kron3(const Mat3& A, const Mat3& B) {
  Eigen::Matrix<double, 9, 9> out;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out.block<3, 3>(3 * i, 3 * j) = A(i, j) * B;
  return out;
}

// Independent constraint-stacking oracle: the allowed-coupling dimension for
// a single-site cubic crystal under a point group, from the null space of
// stacked (R (x) R - I) / (R (x) R - K) rows, solved by SVD.
int nullspace_dimension(const std::vector<Mat3>& group, const Vec3& delta) {
  auto K = commutation_matrix();
  std::vector<Eigen::Matrix<double, 9, 9>> rows;
  for (const Mat3& R : group) {
    Vec3 img = R * delta;
    if ((img - delta).norm() < 1e-9)
      rows.push_back(kron3(R, R) - Eigen::Matrix<double, 9, 9>::Identity());
    else if ((img + delta).norm() < 1e-9)
      rows.push_back(kron3(R, R) - K);
  }
  if (rows.empty()) return 9;
  Eigen::MatrixXd M(9 * rows.size(), 9);
  for (std::size_t r = 0; r < rows.size(); ++r)
    M.block<9, 9>(9 * static_cast<long>(r), 0) = rows[r];
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  int dim = 0;
  for (int k = 0; k < 9; ++k)
    if (svd.singularValues()[k] < 1e-9) ++dim;
  return dim;
}

} // namespace

TEST_CASE("reciprocal lattice satisfies a_i . b_j = 2 pi delta_ij") {
  Crystal c = cubic();
  CHECK((c.reciprocal() - 2.0 * pi * Mat3::Identity()).norm() < 1e-14);

  Crystal ortho = cubic();
  ortho.lattice = Vec3(1, 2, 3).asDiagonal();
  Mat3 expect = Vec3(1.0, 0.5, 1.0 / 3.0).asDiagonal();
  CHECK((ortho.reciprocal() - 2.0 * pi * expect).norm() < 1e-14);

  Crystal hex = cubic();
  hex.lattice.col(0) = Vec3(1, 0, 0);
  hex.lattice.col(1) = Vec3(-0.5, std::sqrt(3.0) / 2.0, 0);
  hex.lattice.col(2) = Vec3(0, 0, 1);
  Vec3 b1 = hex.reciprocal().col(0);
  CHECK((b1 - 2.0 * pi * Vec3(1.0, 1.0 / std::sqrt(3.0), 0)).norm() < 1e-12);

  // Duality identity on a generic cell, against a plain inverse.
  Crystal g = cubic();
  g.lattice << 1.1, 0.2, -0.3, 0.0, 0.9, 0.4, 0.1, -0.1, 1.3;
  Mat3 prod = g.lattice.transpose() * g.reciprocal();
  CHECK((prod - 2.0 * pi * Mat3::Identity()).norm() < 1e-12);
}

TEST_CASE("crystal validation rejects malformed input") {
  Crystal c = cubic();
  c.validate(); // fine

  Crystal singular = cubic();
  singular.lattice.col(2) = singular.lattice.col(0);
  CHECK_THROWS_AS(singular.validate(), model_error);

  Crystal out = cubic();
  out.sites[0] = Vec3(1.2, 0, 0);
  CHECK_THROWS_AS(out.validate(), model_error);

  Crystal dup = cubic(2);
  dup.sites[1] = dup.sites[0];
  CHECK_THROWS_AS(dup.validate(), model_error);

  Crystal badspin = cubic();
  badspin.spin_s[0] = 0.0;
  CHECK_THROWS_AS(badspin.validate(), model_error);
}

TEST_CASE("symmetry operations must be integral in the lattice basis") {
  Crystal c = cubic();
  Mat3 shear;
  shear << 1, 0.5, 0, 0, 1, 0, 0, 0, 1;
  CHECK_THROWS_AS(Symmetry::generate(c, {make_op(shear)}), model_error);

  // Integer but non-orthogonal in Cartesian terms: also rejected.
  Mat3 stretchy;
  stretchy << 1, 1, 0, 0, 1, 0, 0, 0, 1;
  CHECK_THROWS_AS(Symmetry::generate(c, {make_op(stretchy)}), symmetry_error);
}

TEST_CASE("group closure from generators") {
  Crystal c = cubic();
  auto c4 = Symmetry::generate(c, {make_op(rot_z90())});
  CHECK(c4.size() == 4);

  Mat3 mirror = Vec3(-1, 1, 1).asDiagonal();
  auto c4v = Symmetry::generate(c, {make_op(rot_z90()), make_op(mirror)});
  CHECK(c4v.size() == 8);

  auto trivial = Symmetry::generate(c, {});
  CHECK(trivial.size() == 1);
}

TEST_CASE("site mapping rejects inconsistent spins across an orbit") {
  Crystal c = cubic(2); // (0,0,0) and (1/2,1/2,1/2)
  // Inversion about (1/4,1/4,1/4) maps the two sites onto each other; give
  // them different spins.
  SymOp inv;
  inv.W = -Mat3::Identity();
  inv.w = Vec3(0.5, 0.5, 0.5); // x -> -x + (1/2,1/2,1/2): site 0 <-> site 1
  c.spin_s[1] = 2.0;
  CHECK_THROWS_AS(Symmetry::generate(c, {inv}), symmetry_error);
  c.spin_s[1] = 1.0;
  auto sym = Symmetry::generate(c, {inv});
  CHECK(sym.size() == 2);
  auto img = sym.site_image(1, 0); // non-identity op maps site 0 -> site 1
  CHECK(img.site == 1);
}

TEST_CASE("bond canonicalization and orbits") {
  Bond ref{0, 0, Vec3i(1, 0, 0)};

  Crystal c = cubic();
  auto id = Symmetry::generate(c, {});
  auto orbit = bond_orbit(id, ref);
  REQUIRE(orbit.size() == 1);
  CHECK(orbit[0].bond == ref);

  auto c4 = Symmetry::generate(c, {make_op(rot_z90())});
  orbit = bond_orbit(c4, ref);
  REQUIRE(orbit.size() == 2);
  bool has_x = false, has_y = false;
  for (auto& e : orbit) {
    if (e.bond == Bond{0, 0, Vec3i(1, 0, 0)}) has_x = true;
    if (e.bond == Bond{0, 0, Vec3i(0, 1, 0)}) has_y = true;
  }
  CHECK(has_x);
  CHECK(has_y);

  orbit = bond_orbit(c4, Bond{0, 0, Vec3i(1, 1, 0)});
  REQUIRE(orbit.size() == 2);
  bool has_pp = false, has_pm = false;
  for (auto& e : orbit) {
    if (e.bond == Bond{0, 0, Vec3i(1, 1, 0)}) has_pp = true;
    if (e.bond == Bond{0, 0, Vec3i(1, -1, 0)}) has_pm = true;
  }
  CHECK(has_pp);
  CHECK(has_pm);
}

TEST_CASE("self-bond with zero offset is invalid") {
  Crystal c = cubic();
  CHECK_THROWS_AS(validate_bond(c, Bond{0, 0, Vec3i(0, 0, 0)}), model_error);
  CHECK_THROWS_AS(validate_bond(c, Bond{0, 1, Vec3i(0, 0, 0)}), model_error);
}

TEST_CASE("allowed exchange basis: identity group is unconstrained") {
  Crystal c = cubic();
  auto id = Symmetry::generate(c, {});
  auto basis = allowed_exchange_basis(id, Bond{0, 0, Vec3i(1, 0, 0)});
  CHECK(basis.size() == 9);
}

TEST_CASE("allowed exchange basis: cubic nearest-neighbor bond") {
  // Full cubic point group: generators 4-fold z, 4-fold x, inversion.
  Mat3 rx;
  rx << 1, 0, 0, 0, 0, -1, 0, 1, 0;
  Crystal c = cubic();
  auto oh = Symmetry::generate(
      c, {make_op(rot_z90()), make_op(rx), make_op(-Mat3::Identity())});
  CHECK(oh.size() == 48);

  Bond ref{0, 0, Vec3i(1, 0, 0)};
  auto basis = allowed_exchange_basis(oh, ref);
  REQUIRE(basis.size() == 2);
  // Span is diag(a, b, b): every basis matrix diagonal with J22 == J33.
  for (const Mat3& J : basis) {
    CHECK((J - Mat3(J.diagonal().asDiagonal())).norm() < 1e-12);
    CHECK(J(1, 1) == doctest::Approx(J(2, 2)).epsilon(1e-12));
  }
  // Brute-force stacked-constraint oracle agrees.
  CHECK(nullspace_dimension(signed_permutations(), Vec3(1, 0, 0)) == 2);
}

TEST_CASE("allowed exchange basis: inversion-only stabilizer gives symmetric J") {
  Crystal c = cubic();
  auto inv = Symmetry::generate(c, {make_op(-Mat3::Identity())});
  // Inversion maps delta -> -delta: bond-reversing; constraint J = J^T.
  Bond ref{0, 0, Vec3i(1, 2, 3)};
  auto basis = allowed_exchange_basis(inv, ref);
  REQUIRE(basis.size() == 6);
  for (const Mat3& J : basis) CHECK((J - J.transpose()).norm() < 1e-12);
  CHECK(nullspace_dimension({-Mat3::Identity()}, Vec3(1, 2, 3)) == 6);
}

TEST_CASE("projector agrees with the null-space oracle on random point groups") {
  auto pool = signed_permutations();
  Rng rng(2024);
  Crystal c = cubic();
  int groups_done = 0;
  for (int trial = 0; groups_done < 100 && trial < 1000; ++trial) {
    // Random generator pair; closure kept only if the group is small.
    Mat3 g1 = pool[rng.below(pool.size())];
    Mat3 g2 = pool[rng.below(pool.size())];
    std::vector<Mat3> group{Mat3::Identity()};
    bool grew = true;
    while (grew) {
      grew = false;
      std::vector<Mat3> next = group;
      for (const Mat3& a : group)
        for (const Mat3* gen : {&g1, &g2}) {
          Mat3 p = a * (*gen);
          bool found = false;
          for (const Mat3& q : next)
            if ((p - q).norm() < 1e-9) {
              found = true;
              break;
            }
          if (!found) {
            next.push_back(p);
            grew = true;
          }
        }
      group = std::move(next);
      if (group.size() > 8) break;
    }
    if (group.size() > 8) continue;
    ++groups_done;

    Vec3i off(1, 0, 0);
    if (trial % 3 == 1) off = Vec3i(1, 1, 0);
    if (trial % 3 == 2) off = Vec3i(1, 2, 0);
    Bond ref{0, 0, off};

    auto sym = Symmetry::generate(c, {make_op(g1), make_op(g2)});
    REQUIRE(sym.size() == static_cast<int>(group.size()));
    auto basis = allowed_exchange_basis(sym, ref);
    int oracle = nullspace_dimension(group, off.cast<double>());
    CHECK(static_cast<int>(basis.size()) == oracle);

    // The averaging projector is idempotent and reproduces the basis.
    auto P = exchange_projector(sym, ref);
    CHECK((P * P - P).norm() < 1e-10);
    for (const Mat3& J : basis) {
      Eigen::Matrix<double, 9, 1> v;
      for (int col = 0; col < 3; ++col)
        for (int row = 0; row < 3; ++row) v[3 * col + row] = J(row, col);
      CHECK((P * v - v).norm() < 1e-10);
    }
  }
  CHECK(groups_done == 100);
}

TEST_CASE("supercell site placement") {
  Crystal c1 = cubic();
  Supercell sc = build_supercell(c1, Vec3i(2, 1, 1));
  REQUIRE(sc.nsites == 2);
  CHECK((sc.pos_cart[0] - Vec3(0, 0, 0)).norm() < 1e-15);
  CHECK((sc.pos_cart[1] - Vec3(1, 0, 0)).norm() < 1e-15);

  Crystal c2 = cubic(2);
  Supercell sc2 = build_supercell(c2, Vec3i(1, 1, 1));
  CHECK(sc2.nsites == 2);

  Supercell sc8 = build_supercell(c1, Vec3i(2, 2, 2));
  REQUIRE(sc8.nsites == 8);
  std::vector<Vec3> expect;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      for (int z = 0; z < 2; ++z) expect.push_back(Vec3(x, y, z));
  for (long i = 0; i < 8; ++i) {
    bool found = false;
    for (auto& e : expect)
      if ((sc8.pos_cart[i] - e).norm() < 1e-15) found = true;
    CHECK(found);
  }
}

TEST_CASE("supercell neighbor wraps periodically") {
  Crystal c = cubic();
  Supercell sc = build_supercell(c, Vec3i(4, 1, 1));
  Bond b{0, 0, Vec3i(1, 0, 0)};
  CHECK(sc.neighbor(0, b) == 1);
  CHECK(sc.neighbor(3, b) == 0);
  Bond back{0, 0, Vec3i(-1, 0, 0)};
  CHECK(sc.neighbor(0, back) == 3);

  Supercell grid = build_supercell(c, Vec3i(3, 3, 1));
  // Site order: cell-major lexicographic in (n1, n2, n3).
  long idx = grid.index(Vec3i(2, 1, 0), 0);
  Bond by{0, 0, Vec3i(0, 2, 0)};
  CHECK(grid.neighbor(idx, by) == grid.index(Vec3i(2, 0, 0), 0));
}
