#pragma once

#include <string>
#include <vector>

#include "spindyn/hamiltonian.hpp"

namespace spindyn {

// Declarative model description.  Sections:
//   [crystal]     a1/a2/a3 = x y z (row per lattice vector), site = fx fy fz
//   [symmetry]    op = W11 W12 W13 W21 ... W33 w1 w2 w3   (fractional; "1/2" ok)
//   [spins]       spin = SITE s g   (SITE may be '*')
//   [exchange]    J = i j d1 d2 d3  J11 J12 ... J33   (reference bond, 3x3)
//                 Jcoef = i j d1 d2 d3  c1 c2 ...     (allowed-basis coefficients)
//   [biquadratic] b = i j d1 d2 d3  coef
//   [anisotropy]  axis = SITE nx ny nz c2
//                 matrix = SITE  re im re im ... (N^2 entries, row-major)
//   [field]       B = Bx By Bz
//   [supercell]   dims = d1 d2 d3
//   [mode]        mode = dipole | sun
//
// Exchange references are validated against the symmetry of their bond and
// propagated over the bond orbit; biquadratic scalars propagate unchanged;
// anisotropy axes propagate over site orbits with rotated axes.  Onsite
// matrices apply only in sun mode and are not propagated.
struct ModelFile {
  Crystal crystal;
  std::vector<SymOp> generators;

  struct RefExchange {
    Bond bond;
    Mat3 J;
    bool via_coefs = false;
    std::vector<double> coefs;
  };
  struct RefBiquad {
    Bond bond;
    double coef = 0;
  };
  struct RefAniso {
    int site = 0;
    Vec3 axis = Vec3::UnitZ();
    double c2 = 0;
  };
  std::vector<RefExchange> ref_exchange;
  std::vector<RefBiquad> ref_biquad;
  std::vector<RefAniso> ref_aniso;
  std::vector<MatXc> onsite; // per basis site; empty matrix = none

  Vec3 field = Vec3::Zero();
  Vec3i dims = Vec3i::Ones();
  enum class Mode { dipole, sun };
  Mode mode = Mode::dipole;

  // Derived at parse time: propagated crystal-level terms.
  ModelTerms terms;
};

ModelFile parse_model_file(const std::string& text);
ModelFile load_model_file(const std::string& path);
std::string serialize_model_file(const ModelFile& mf);

// 17-significant-digit representation (shortest round-trip not required;
// fixed width keeps outputs byte-stable).
std::string fmt17(double v);

} // namespace spindyn
