#include "spindyn/lswt.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <cstdio>

#include "spindyn/parallel.hpp"

namespace spindyn {

void local_frame(const Vec3& dir, Vec3& e1, Vec3& e2, Vec3& e3) {
  e3 = dir.normalized();
  double c = e3.z();
  if (c > 1.0 - 1e-12) {
    e1 = Vec3::UnitX();
    e2 = Vec3::UnitY();
    e3 = Vec3::UnitZ();
    return;
  }
  if (c < -1.0 + 1e-12) {
    e1 = Vec3::UnitX();
    e2 = -Vec3::UnitY();
    e3 = -Vec3::UnitZ();
    return;
  }
  Vec3 axis = Vec3::UnitZ().cross(e3).normalized();
  Eigen::AngleAxisd R(std::acos(c), axis);
  e1 = R * Vec3::UnitX();
  e2 = R * Vec3::UnitY();
}

MagneticCell::MagneticCell(const Crystal& crystal, const ModelTerms& terms,
                           const Vec3i& dims, SpinConfig ground)
    : ham_(crystal, terms, dims), ground_(std::move(ground)) {
  if (!terms.biquad.empty())
    throw model_error(
        "biquadratic couplings have no quadratic boson expansion here; "
        "remove them for spin-wave analysis");
  if (ground_.size() != ham_.nsites())
    throw model_error("ground state size does not match the magnetic cell");
  for (const auto& u : ground_.dir)
    if (std::abs(u.norm() - 1.0) > 1e-9)
      throw model_error("ground state directors must be unit vectors");

  std::vector<Vec3> fields;
  ham_.local_fields(ground_, fields);
  double torque = 0.0;
  for (long i = 0; i < ham_.nsites(); ++i) {
    Vec3 t = fields[i] - fields[i].dot(ground_.dir[i]) * ground_.dir[i];
    torque = std::max(torque, t.norm());
  }
  if (torque > defaults::stationarity_tol)
    throw model_error("reference state is not stationary (max torque " +
                      std::to_string(torque) + ")");

  e3_.resize(ham_.nsites());
  u_.resize(ham_.nsites());
  for (long i = 0; i < ham_.nsites(); ++i) {
    Vec3 e1, e2;
    local_frame(ground_.dir[i], e1, e2, e3_[i]);
    u_[i] = e1.cast<cplx>() + cplx(0, 1) * e2.cast<cplx>();
  }

  const auto& sc = ham_.cell();
  for (long cell = 0; cell < sc.ncells; ++cell)
    for (const auto& t : terms.exchange) {
      long a = cell * sc.nbasis + t.bond.i;
      long b = sc.neighbor(a, t.bond);
      Vec3 d = crystal.cart(crystal.sites[t.bond.j] +
                            t.bond.offset.cast<double>() -
                            crystal.sites[t.bond.i]);
      instances_.push_back({a, b, d, t.J});
      instances_.push_back({b, a, -d, t.J.transpose()});
    }
}

MatXc spinwave_hamiltonian(const MagneticCell& mc, const Vec3& q_cart) {
  const long L = mc.nsites();
  const auto& spin = mc.ham().cell().spin;
  MatXc Ap = MatXc::Zero(L, L); // A(q)
  MatXc Am = MatXc::Zero(L, L); // A(-q)
  MatXc B = MatXc::Zero(L, L);
  VecX C = VecX::Zero(L);

  for (const auto& in : mc.instances()) {
    double kappa = 0.5 * std::sqrt(spin[in.p] * spin[in.r]);
    cplx ph = std::exp(cplx(0, q_cart.dot(in.d)));
    const Eigen::Vector3cd& up = mc.u(in.p);
    const Eigen::Vector3cd& ur = mc.u(in.r);
    cplx hop = (up.transpose() * in.J.cast<cplx>() * ur.conjugate()).value();
    cplx pair = (up.transpose() * in.J.cast<cplx>() * ur).value();
    Ap(in.p, in.r) += kappa * hop * ph;
    Am(in.p, in.r) += kappa * hop * std::conj(ph);
    B(in.p, in.r) += kappa * pair * ph;
    C(in.p) += spin[in.r] * mc.e3(in.p).dot(in.J * mc.e3(in.r));
  }

  const auto& H = mc.ham();
  const Vec3& field = H.field();
  const auto& g = H.cell().g;
  for (long i = 0; i < L; ++i) {
    double s = spin[i];
    for (const auto& ax : H.axes(i)) {
      cplx nu = ax.n.cast<cplx>().dot(mc.u(i)); // n . u  (n real)
      double nu2 = std::norm(nu);
      double ne3 = ax.n.dot(mc.e3(i));
      cplx diag = ax.c2 * s * (nu2 - 2.0 * ne3 * ne3);
      Ap(i, i) += diag;
      Am(i, i) += diag;
      // b^dag b^dag coefficient carries (n.u)^2.
      B(i, i) += ax.c2 * s * nu * nu;
    }
    double zee = g[i] * field.dot(mc.e3(i));
    Ap(i, i) += zee;
    Am(i, i) += zee;
    Ap(i, i) -= C(i);
    Am(i, i) -= C(i);
  }

  MatXc M(2 * L, 2 * L);
  M.topLeftCorner(L, L) = Ap;
  M.topRightCorner(L, L) = B;
  M.bottomLeftCorner(L, L) = B.adjoint();
  M.bottomRightCorner(L, L) = Am.conjugate();
  return 0.5 * (M + M.adjoint()); // scrub round-off asymmetry
}

ColpaResult colpa_diagonalize(const MatXc& H) {
  const long n = H.rows();
  const long L = n / 2;
  if (n != 2 * L || H.cols() != n)
    throw model_error("boson Hamiltonian must be 2L x 2L");

  double scale = H.norm();
  ColpaResult out;
  if (scale < 1e-250) { // identically zero: all modes at zero energy
    out.omega = VecX::Zero(L);
    out.T = MatXc::Identity(n, n);
    return out;
  }

  Eigen::SelfAdjointEigenSolver<MatXc> pre(H);
  double lmin = pre.eigenvalues().minCoeff();
  if (lmin < -defaults::colpa_psd_tol * scale)
    throw instability_error(
        "spin-wave Hamiltonian is not positive semidefinite; the reference "
        "state is not a local energy minimum");

  double eps = defaults::colpa_shift * scale;
  double shift = lmin < eps ? eps - lmin : 0.0;
  MatXc Hs = H;
  if (shift > 0.0) Hs += shift * MatXc::Identity(n, n);
  Eigen::LLT<MatXc> llt(Hs);
  for (int tries = 0; llt.info() != Eigen::Success && tries < 4; ++tries) {
    eps *= 100.0;
    shift = eps - std::min(lmin, 0.0);
    Hs = H + shift * MatXc::Identity(n, n);
    llt.compute(Hs);
  }
  if (llt.info() != Eigen::Success)
    throw instability_error("Cholesky factorization of the boson Hamiltonian "
                            "failed despite a semidefinite spectrum");

  MatXc K = llt.matrixU(); // Hs = K^dag K
  VecX gdiag(n);
  gdiag.head(L).setOnes();
  gdiag.tail(L).setConstant(-1.0);
  MatXc W = K * gdiag.asDiagonal() * K.adjoint();
  Eigen::SelfAdjointEigenSolver<MatXc> es(0.5 * (W + W.adjoint()));
  const VecX& mu = es.eigenvalues(); // ascending
  long npos = 0;
  for (long k = 0; k < n; ++k)
    if (mu[k] > 0) ++npos;
  if (npos != L)
    throw instability_error(
        "paradiagonalization produced an unbalanced spectrum");

  // Columns: positive eigenvalues descending, then negatives by |mu|
  // descending; this ordering realizes T^dag g T = g.
  std::vector<long> order(n);
  for (long k = 0; k < L; ++k) order[k] = n - 1 - k;
  for (long k = 0; k < L; ++k) order[L + k] = k;

  MatXc U(n, n);
  VecX E(n);
  for (long k = 0; k < n; ++k) {
    U.col(k) = es.eigenvectors().col(order[k]);
    E[k] = std::abs(mu[order[k]]);
  }
  MatXc TE = U * E.cwiseSqrt().asDiagonal();
  out.T = K.triangularView<Eigen::Upper>().solve(TE);
  out.omega = E.head(L);
  // A zero mode of H acquires at most sqrt(2 * shift * lambda_max) under the
  // semidefinite shift; snap anything below that resolution floor to zero.
  double floor = std::max(defaults::omega_zero_tol * scale,
                          2.0 * std::sqrt(2.0 * shift * scale));
  for (long k = 0; k < L; ++k)
    if (out.omega[k] < floor) out.omega[k] = 0.0;
  return out;
}

Dispersion dispersion(const MagneticCell& mc, const std::vector<Vec3>& q_frac,
                      const DispersionOptions& opts) {
  const long L = mc.nsites();
  const long nq = static_cast<long>(q_frac.size());
  Mat3 Brec = mc.ham().cell().crystal.reciprocal();

  Dispersion out;
  out.q_frac = q_frac;
  out.q_cart.resize(nq);
  out.omega.resize(nq);
  out.T.resize(nq);
  parallel_for(nq, [&](std::size_t k) {
    out.q_cart[k] = Brec * q_frac[k];
    try {
      auto res = colpa_diagonalize(spinwave_hamiltonian(mc, out.q_cart[k]));
      out.omega[k] = res.omega;
      out.T[k] = std::move(res.T);
    } catch (const instability_error& e) {
      char buf[96];
      std::snprintf(buf, sizeof buf, " at q = (%g, %g, %g)", q_frac[k].x(),
                    q_frac[k].y(), q_frac[k].z());
      throw instability_error(e.what() + std::string(buf));
    }
  });

  if (!opts.connect_bands) return out;

  VecX gdiag(2 * L);
  gdiag.head(L).setOnes();
  gdiag.tail(L).setConstant(-1.0);
  for (long k = 1; k < nq; ++k) {
    MatXc O = out.T[k - 1].leftCols(L).adjoint() * gdiag.asDiagonal() *
              out.T[k].leftCols(L);
    // Greedy assignment by largest overlap magnitude.
    std::vector<long> perm(L, -1);
    std::vector<bool> row_used(L, false), col_used(L, false);
    for (long pass = 0; pass < L; ++pass) {
      long bi = -1, bj = -1;
      double best = -1;
      for (long i = 0; i < L; ++i) {
        if (row_used[i]) continue;
        for (long j = 0; j < L; ++j) {
          if (col_used[j]) continue;
          double v = std::abs(O(i, j));
          if (v > best) {
            best = v;
            bi = i;
            bj = j;
          }
        }
      }
      row_used[bi] = true;
      col_used[bj] = true;
      perm[bi] = bj;
    }
    MatXc Tnew = out.T[k];
    VecX onew = out.omega[k];
    for (long i = 0; i < L; ++i) {
      Tnew.col(i) = out.T[k].col(perm[i]);
      onew[i] = out.omega[k][perm[i]];
    }
    out.T[k].leftCols(L) = Tnew.leftCols(L);
    out.omega[k] = onew;
  }
  return out;
}

ModeIntensities lswt_intensities(const MagneticCell& mc, const MatXc& T,
                                 const VecX& omega) {
  const long L = mc.nsites();
  const auto& spin = mc.ham().cell().spin;
  ModeIntensities out;
  out.omega = omega;
  out.S.resize(L);
  for (long m = 0; m < L; ++m) {
    Eigen::Vector3cd F = Eigen::Vector3cd::Zero();
    for (long i = 0; i < L; ++i) {
      double w = std::sqrt(spin[i] / 2.0);
      for (int a = 0; a < 3; ++a)
        F[a] += w * (std::conj(mc.u(i)[a]) * T(i, m) +
                     mc.u(i)[a] * T(i + L, m));
    }
    Mat3c S;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) S(a, b) = F[a] * std::conj(F[b]);
    out.S[m] = S / static_cast<double>(L);
  }
  return out;
}

BroadenedSpectrum broaden(const ModeIntensities& modes, const Vec3& q_cart,
                          const VecX& omega_grid, double sigma) {
  BroadenedSpectrum out;
  out.omega_grid = omega_grid;
  out.S.assign(omega_grid.size(), Mat3c::Zero());
  out.scalar = VecX::Zero(omega_grid.size());

  Mat3 P = Mat3::Identity();
  if (q_cart.norm() > 1e-12) {
    Vec3 qh = q_cart.normalized();
    P -= qh * qh.transpose();
  } else {
    out.unprojected = true;
  }

  double norm = 1.0 / (sigma * std::sqrt(2.0 * pi));
  for (long k = 0; k < omega_grid.size(); ++k) {
    for (long m = 0; m < modes.omega.size(); ++m) {
      double x = (omega_grid[k] - modes.omega[m]) / sigma;
      double gwt = norm * std::exp(-0.5 * x * x);
      out.S[k] += gwt * modes.S[m];
    }
    cplx tr = 0;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) tr += P(a, b) * out.S[k](a, b);
    out.scalar[k] = std::real(tr);
  }
  return out;
}

} // namespace spindyn
