#include "spindyn/correlate.hpp"

#include <cmath>
#include <fftw3.h>

#include "spindyn/errors.hpp"
#include "spindyn/parallel.hpp"

namespace spindyn {

QPath qpath(const Mat3& reciprocal, const std::vector<Vec3>& vertices,
            int points_per_segment) {
  if (vertices.empty()) throw model_error("empty q path");
  QPath out;
  out.q.push_back(vertices[0]);
  out.arclength.push_back(0.0);
  out.vertex_index.push_back(0);
  if (vertices.size() == 1) return out;
  if (points_per_segment < 2)
    throw model_error("q path needs at least 2 points per segment");

  for (std::size_t seg = 0; seg + 1 < vertices.size(); ++seg) {
    const Vec3& a = vertices[seg];
    const Vec3& b = vertices[seg + 1];
    for (int k = 1; k < points_per_segment; ++k) {
      double t = static_cast<double>(k) / (points_per_segment - 1);
      Vec3 q = a + t * (b - a);
      double ds = (reciprocal * (q - out.q.back())).norm();
      out.q.push_back(q);
      out.arclength.push_back(out.arclength.back() + ds);
    }
    out.vertex_index.push_back(static_cast<long>(out.q.size()) - 1);
  }
  return out;
}

std::vector<Vec3> commensurate_grid(const Vec3i& dims) {
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(dims.x()) * dims.y() * dims.z());
  for (int m1 = 0; m1 < dims.x(); ++m1)
    for (int m2 = 0; m2 < dims.y(); ++m2)
      for (int m3 = 0; m3 < dims.z(); ++m3)
        out.emplace_back(static_cast<double>(m1) / dims.x(),
                         static_cast<double>(m2) / dims.y(),
                         static_cast<double>(m3) / dims.z());
  return out;
}

long nearest_grid_point(const Mat3& reciprocal, const Vec3i& dims,
                        const Vec3& q_frac) {
  auto grid = commensurate_grid(dims);
  long best = 0;
  double bestd = 1e300;
  for (long k = 0; k < static_cast<long>(grid.size()); ++k) {
    Vec3 d = wrap_half(q_frac - grid[k]);
    double dist = (reciprocal * d).norm();
    if (dist < bestd) {
      bestd = dist;
      best = k;
    }
  }
  return best;
}

namespace {

void check_ensemble(const std::vector<Trajectory>& ensemble) {
  if (ensemble.empty()) throw model_error("empty trajectory ensemble");
  const Trajectory& t0 = ensemble[0];
  if (t0.nframes() < 1) throw model_error("trajectory has no frames");
  for (const auto& t : ensemble) {
    if (t.nframes() != t0.nframes() ||
        std::abs(t.frame_dt() - t0.frame_dt()) > 1e-15 ||
        t.frames[0].size() != t0.frames[0].size())
      throw model_error(
          "ensemble members must share frame count, time step, and sites");
  }
}

// m^a(q, t) for one member: size 3 x F.
void fourier_moments(const Supercell& sc, const Trajectory& tr,
                     const Vec3& q_cart, std::vector<Eigen::Vector3cd>& out) {
  const long F = tr.nframes();
  const long n = sc.nsites;
  out.assign(F, Eigen::Vector3cd::Zero());
  std::vector<cplx> phase(n);
  for (long i = 0; i < n; ++i)
    phase[i] = std::exp(cplx(0, -q_cart.dot(sc.pos_cart[i])));
  for (long f = 0; f < F; ++f) {
    Eigen::Vector3cd acc = Eigen::Vector3cd::Zero();
    for (long i = 0; i < n; ++i) {
      Vec3 m = tr.moment(f, i);
      acc += phase[i] * m.cast<cplx>();
    }
    out[f] = acc;
  }
}

} // namespace

StaticSF static_structure_factor(const Supercell& sc,
                                 const std::vector<Trajectory>& ensemble,
                                 const std::vector<Vec3>& q_frac) {
  check_ensemble(ensemble);
  const long nq = static_cast<long>(q_frac.size());
  const double N = static_cast<double>(sc.nsites);
  Mat3 Brec = sc.crystal.reciprocal();

  StaticSF out;
  out.q_frac = q_frac;
  out.q_cart.resize(nq);
  out.S.assign(nq, Mat3c::Zero());

  long total_frames = 0;
  for (const auto& t : ensemble) total_frames += t.nframes();

  parallel_for(nq, [&](std::size_t k) {
    out.q_cart[k] = Brec * q_frac[k];
    Mat3c acc = Mat3c::Zero();
    std::vector<Eigen::Vector3cd> mq;
    for (const auto& tr : ensemble) {
      fourier_moments(sc, tr, out.q_cart[k], mq);
      for (const auto& m : mq) acc += m * m.adjoint() / N;
    }
    out.S[k] = acc / static_cast<double>(total_frames);
  });
  return out;
}

DynamicSF dynamic_structure_factor(const Supercell& sc,
                                   const std::vector<Trajectory>& ensemble,
                                   const std::vector<Vec3>& q_frac,
                                   const DynOptions& opts) {
  check_ensemble(ensemble);
  const long F = ensemble[0].nframes();
  if (F < 2) throw model_error("dynamic correlations need at least 2 frames");
  const long nq = static_cast<long>(q_frac.size());
  const double N = static_cast<double>(sc.nsites);
  const double dtf = ensemble[0].frame_dt();
  const double dw = 2.0 * pi / (F * dtf);
  Mat3 Brec = sc.crystal.reciprocal();

  VecX win(F);
  for (long t = 0; t < F; ++t)
    win[t] = opts.window == Window::rect
                 ? 1.0
                 : 0.5 * (1.0 - std::cos(2.0 * pi * t / F));
  double wpow = win.squaredNorm(); // sum w_t^2; F (rect), 3F/8 (hann)
  const double norm = N * dw * F * wpow;

  DynamicSF out;
  out.window = opts.window;
  out.mean_subtracted = opts.subtract_mean;
  out.q_frac = q_frac;
  out.q_cart.resize(nq);
  // Frequencies ascending: k -> (k <= F/2 ? k : k - F) * dw, then sorted.
  std::vector<long> korder(F);
  out.omega.resize(F);
  {
    std::vector<std::pair<double, long>> tmp(F);
    for (long k = 0; k < F; ++k) {
      double w = (k <= F / 2 ? k : k - F) * dw;
      tmp[k] = {w, k};
    }
    std::sort(tmp.begin(), tmp.end());
    for (long k = 0; k < F; ++k) {
      out.omega[k] = tmp[k].first;
      korder[k] = tmp[k].second;
    }
  }
  out.S.assign(nq, std::vector<Mat3c>(F, Mat3c::Zero()));

  fftw_complex* probe = fftw_alloc_complex(F);
  fftw_plan plan =
      fftw_plan_dft_1d(static_cast<int>(F), probe, probe, FFTW_FORWARD,
                       FFTW_ESTIMATE);

  for (const auto& tr : ensemble) {
    parallel_for(nq, [&](std::size_t iq) {
      Vec3 qc = Brec * q_frac[iq];
      out.q_cart[iq] = qc;
      std::vector<Eigen::Vector3cd> mq;
      fourier_moments(sc, tr, qc, mq);
      if (opts.subtract_mean) {
        Eigen::Vector3cd mean = Eigen::Vector3cd::Zero();
        for (const auto& m : mq) mean += m;
        mean /= static_cast<double>(F);
        for (auto& m : mq) m -= mean;
      }
      fftw_complex* buf = fftw_alloc_complex(F);
      Eigen::Matrix<cplx, 3, Eigen::Dynamic> M(3, F);
      for (int a = 0; a < 3; ++a) {
        for (long t = 0; t < F; ++t) {
          buf[t][0] = win[t] * std::real(mq[t][a]);
          buf[t][1] = win[t] * std::imag(mq[t][a]);
        }
        fftw_execute_dft(plan, buf, buf);
        for (long k = 0; k < F; ++k) M(a, k) = cplx(buf[k][0], buf[k][1]);
      }
      fftw_free(buf);
      for (long k = 0; k < F; ++k) {
        long kd = korder[k];
        Mat3c s;
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b)
            s(a, b) = M(a, kd) * std::conj(M(b, kd)) / norm;
        out.S[iq][k] += s;
      }
    });
  }
  fftw_destroy_plan(plan);
  fftw_free(probe);

  const double nm = static_cast<double>(ensemble.size());
  for (auto& row : out.S)
    for (auto& s : row) s /= nm;
  return out;
}

double perp_intensity(const Mat3c& S, const Vec3& q_cart, bool* unprojected) {
  Mat3 P = Mat3::Identity();
  bool flag = false;
  if (q_cart.norm() > 1e-12) {
    Vec3 qh = q_cart.normalized();
    P -= qh * qh.transpose();
  } else {
    flag = true;
  }
  if (unprojected) *unprojected = flag;
  cplx acc = 0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) acc += P(a, b) * S(a, b);
  return std::real(acc);
}

} // namespace spindyn
