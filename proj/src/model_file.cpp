#include "spindyn/model_file.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace spindyn {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

struct Token {
  std::string text;
  int line, column;
};

struct Line {
  std::string key;
  int line, key_column;
  std::vector<Token> values;
};

// "a/b" fractions are accepted anywhere a number is.
double to_number(const Token& t) {
  const std::string& s = t.text;
  auto bad = [&]() {
    return parse_error("expected a number, got '" + s + "'", t.line, t.column);
  };
  std::size_t slash = s.find('/');
  try {
    std::size_t used = 0;
    if (slash == std::string::npos) {
      double v = std::stod(s, &used);
      if (used != s.size()) throw bad();
      return v;
    }
    double num = std::stod(s.substr(0, slash), &used);
    if (used != slash) throw bad();
    double den = std::stod(s.substr(slash + 1), &used);
    if (used != s.size() - slash - 1 || den == 0.0) throw bad();
    return num / den;
  } catch (const parse_error&) {
    throw;
  } catch (const std::exception&) {
    throw bad();
  }
}

long to_int(const Token& t) {
  double v = to_number(t);
  long n = std::lround(v);
  if (std::abs(v - n) > 1e-9)
    throw parse_error("expected an integer, got '" + t.text + "'", t.line,
                      t.column);
  return n;
}

struct Section {
  std::string name;
  int line;
  std::vector<Line> lines;
};

std::vector<Section> tokenize(const std::string& text) {
  std::vector<Section> sections;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::size_t hash = raw.find('#');
    if (hash != std::string::npos) raw = raw.substr(0, hash);
    // locate first non-space
    std::size_t b = raw.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    if (raw[b] == '[') {
      std::size_t e = raw.find(']', b);
      if (e == std::string::npos)
        throw parse_error("unterminated section header", lineno,
                          static_cast<int>(b) + 1);
      std::string name = raw.substr(b + 1, e - b - 1);
      std::size_t tail = raw.find_first_not_of(" \t\r", e + 1);
      if (tail != std::string::npos)
        throw parse_error("unexpected text after section header", lineno,
                          static_cast<int>(tail) + 1);
      sections.push_back({name, lineno, {}});
      continue;
    }
    std::size_t eq = raw.find('=');
    if (eq == std::string::npos)
      throw parse_error("expected 'key = values'", lineno,
                        static_cast<int>(b) + 1);
    std::string key = raw.substr(b, eq - b);
    std::size_t ke = key.find_last_not_of(" \t");
    key = key.substr(0, ke + 1);
    if (sections.empty())
      throw parse_error("entry outside of any section", lineno,
                        static_cast<int>(b) + 1);
    Line ln{key, lineno, static_cast<int>(b) + 1, {}};
    std::size_t pos = eq + 1;
    while (pos < raw.size()) {
      std::size_t s = raw.find_first_not_of(" \t\r", pos);
      if (s == std::string::npos) break;
      std::size_t e = raw.find_first_of(" \t\r", s);
      if (e == std::string::npos) e = raw.size();
      ln.values.push_back(
          {raw.substr(s, e - s), lineno, static_cast<int>(s) + 1});
      pos = e;
    }
    sections.back().lines.push_back(std::move(ln));
  }
  return sections;
}

void need_count(const Line& ln, std::size_t n) {
  if (ln.values.size() != n)
    throw parse_error("'" + ln.key + "' expects " + std::to_string(n) +
                          " values, got " + std::to_string(ln.values.size()),
                      ln.line, ln.key_column);
}

Bond read_bond(const Line& ln) {
  Bond b;
  b.i = static_cast<int>(to_int(ln.values[0]));
  b.j = static_cast<int>(to_int(ln.values[1]));
  b.offset = Vec3i(static_cast<int>(to_int(ln.values[2])),
                   static_cast<int>(to_int(ln.values[3])),
                   static_cast<int>(to_int(ln.values[4])));
  return b;
}

std::string op_description(const SymOp& g) {
  std::ostringstream os;
  os << "W=[";
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      os << g.W(r, c) << ((r == 2 && c == 2) ? "]" : " ");
  os << " w=[" << g.w.x() << " " << g.w.y() << " " << g.w.z() << "]";
  return os.str();
}

} // namespace

ModelFile parse_model_file(const std::string& text) {
  ModelFile mf;
  auto sections = tokenize(text);

  // --- raw collection ---------------------------------------------------
  std::vector<Vec3> a(3, Vec3::Zero());
  bool have_a[3] = {false, false, false};
  std::vector<Vec3> sites;
  struct SpinLine {
    long site;
    bool all;
    double s, g;
    int line, col;
  };
  std::vector<SpinLine> spin_lines;
  struct MatrixLine {
    long site;
    std::vector<double> entries;
    int line, col;
  };
  std::vector<MatrixLine> matrix_lines;

  for (const auto& sec : sections) {
    if (sec.name == "crystal") {
      for (const auto& ln : sec.lines) {
        if (ln.key == "a1" || ln.key == "a2" || ln.key == "a3") {
          need_count(ln, 3);
          int k = ln.key[1] - '1';
          a[k] = Vec3(to_number(ln.values[0]), to_number(ln.values[1]),
                      to_number(ln.values[2]));
          have_a[k] = true;
        } else if (ln.key == "site") {
          need_count(ln, 3);
          sites.emplace_back(to_number(ln.values[0]), to_number(ln.values[1]),
                             to_number(ln.values[2]));
        } else {
          throw parse_error("unknown key '" + ln.key + "' in [crystal]",
                            ln.line, ln.key_column);
        }
      }
    } else if (sec.name == "symmetry") {
      for (const auto& ln : sec.lines) {
        if (ln.key != "op")
          throw parse_error("unknown key '" + ln.key + "' in [symmetry]",
                            ln.line, ln.key_column);
        need_count(ln, 12);
        SymOp g;
        for (int r = 0; r < 3; ++r)
          for (int c = 0; c < 3; ++c)
            g.W(r, c) = to_number(ln.values[3 * r + c]);
        g.w = Vec3(to_number(ln.values[9]), to_number(ln.values[10]),
                   to_number(ln.values[11]));
        mf.generators.push_back(g);
      }
    } else if (sec.name == "spins") {
      for (const auto& ln : sec.lines) {
        if (ln.key != "spin")
          throw parse_error("unknown key '" + ln.key + "' in [spins]", ln.line,
                            ln.key_column);
        need_count(ln, 3);
        SpinLine sl{};
        sl.all = ln.values[0].text == "*";
        sl.site = sl.all ? -1 : to_int(ln.values[0]);
        sl.s = to_number(ln.values[1]);
        sl.g = to_number(ln.values[2]);
        sl.line = ln.line;
        sl.col = ln.key_column;
        spin_lines.push_back(sl);
      }
    } else if (sec.name == "exchange") {
      for (const auto& ln : sec.lines) {
        if (ln.key == "J") {
          need_count(ln, 14);
          ModelFile::RefExchange r;
          r.bond = read_bond(ln);
          for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
              r.J(i, j) = to_number(ln.values[5 + 3 * i + j]);
          mf.ref_exchange.push_back(r);
        } else if (ln.key == "Jcoef") {
          if (ln.values.size() < 6)
            throw parse_error("'Jcoef' expects a bond and coefficients",
                              ln.line, ln.key_column);
          ModelFile::RefExchange r;
          r.bond = read_bond(ln);
          r.via_coefs = true;
          for (std::size_t k = 5; k < ln.values.size(); ++k)
            r.coefs.push_back(to_number(ln.values[k]));
          mf.ref_exchange.push_back(r);
        } else {
          throw parse_error("unknown key '" + ln.key + "' in [exchange]",
                            ln.line, ln.key_column);
        }
      }
    } else if (sec.name == "biquadratic") {
      for (const auto& ln : sec.lines) {
        if (ln.key != "b")
          throw parse_error("unknown key '" + ln.key + "' in [biquadratic]",
                            ln.line, ln.key_column);
        need_count(ln, 6);
        mf.ref_biquad.push_back({read_bond(ln), to_number(ln.values[5])});
      }
    } else if (sec.name == "anisotropy") {
      for (const auto& ln : sec.lines) {
        if (ln.key == "axis") {
          need_count(ln, 5);
          ModelFile::RefAniso ra;
          ra.site = static_cast<int>(to_int(ln.values[0]));
          ra.axis = Vec3(to_number(ln.values[1]), to_number(ln.values[2]),
                         to_number(ln.values[3]));
          ra.c2 = to_number(ln.values[4]);
          mf.ref_aniso.push_back(ra);
        } else if (ln.key == "matrix") {
          if (ln.values.size() < 3)
            throw parse_error("'matrix' expects a site and entries", ln.line,
                              ln.key_column);
          MatrixLine m;
          m.site = to_int(ln.values[0]);
          for (std::size_t k = 1; k < ln.values.size(); ++k)
            m.entries.push_back(to_number(ln.values[k]));
          m.line = ln.line;
          m.col = ln.key_column;
          matrix_lines.push_back(std::move(m));
        } else {
          throw parse_error("unknown key '" + ln.key + "' in [anisotropy]",
                            ln.line, ln.key_column);
        }
      }
    } else if (sec.name == "field") {
      for (const auto& ln : sec.lines) {
        if (ln.key != "B")
          throw parse_error("unknown key '" + ln.key + "' in [field]", ln.line,
                            ln.key_column);
        need_count(ln, 3);
        mf.field = Vec3(to_number(ln.values[0]), to_number(ln.values[1]),
                        to_number(ln.values[2]));
      }
    } else if (sec.name == "supercell") {
      for (const auto& ln : sec.lines) {
        if (ln.key != "dims")
          throw parse_error("unknown key '" + ln.key + "' in [supercell]",
                            ln.line, ln.key_column);
        need_count(ln, 3);
        mf.dims = Vec3i(static_cast<int>(to_int(ln.values[0])),
                        static_cast<int>(to_int(ln.values[1])),
                        static_cast<int>(to_int(ln.values[2])));
      }
    } else if (sec.name == "mode") {
      for (const auto& ln : sec.lines) {
        if (ln.key != "mode")
          throw parse_error("unknown key '" + ln.key + "' in [mode]", ln.line,
                            ln.key_column);
        need_count(ln, 1);
        const std::string& v = ln.values[0].text;
        if (v == "dipole")
          mf.mode = ModelFile::Mode::dipole;
        else if (v == "sun")
          mf.mode = ModelFile::Mode::sun;
        else
          throw parse_error("mode must be 'dipole' or 'sun'",
                            ln.values[0].line, ln.values[0].column);
      }
    } else {
      throw parse_error("unknown section [" + sec.name + "]", sec.line, 1);
    }
  }

  // --- assembly ----------------------------------------------------------
  if (!(have_a[0] && have_a[1] && have_a[2]))
    throw model_error("[crystal] must define a1, a2, a3");
  if (sites.empty()) throw model_error("[crystal] must define at least one site");
  mf.crystal.lattice.col(0) = a[0];
  mf.crystal.lattice.col(1) = a[1];
  mf.crystal.lattice.col(2) = a[2];
  mf.crystal.sites = sites;
  mf.crystal.spin_s.assign(sites.size(), 1.0);
  mf.crystal.g_factor.assign(sites.size(), 1.0);
  for (const auto& sl : spin_lines) {
    if (sl.all) {
      for (std::size_t k = 0; k < sites.size(); ++k) {
        mf.crystal.spin_s[k] = sl.s;
        mf.crystal.g_factor[k] = sl.g;
      }
    } else {
      if (sl.site < 0 || sl.site >= static_cast<long>(sites.size()))
        throw parse_error("spin entry references a site outside the basis",
                          sl.line, sl.col);
      mf.crystal.spin_s[sl.site] = sl.s;
      mf.crystal.g_factor[sl.site] = sl.g;
    }
  }
  mf.crystal.validate();

  Symmetry sym = Symmetry::generate(mf.crystal, mf.generators);

  mf.onsite.assign(sites.size(), MatXc());
  for (const auto& m : matrix_lines) {
    if (m.site < 0 || m.site >= static_cast<long>(sites.size()))
      throw parse_error("matrix entry references a site outside the basis",
                        m.line, m.col);
    int N = static_cast<int>(std::lround(2 * mf.crystal.spin_s[m.site] + 1));
    if (static_cast<int>(m.entries.size()) != 2 * N * N)
      throw parse_error("onsite matrix needs " + std::to_string(2 * N * N) +
                            " entries (re im pairs, " + std::to_string(N) +
                            "x" + std::to_string(N) + " row-major)",
                        m.line, m.col);
    MatXc M(N, N);
    for (int r = 0; r < N; ++r)
      for (int c = 0; c < N; ++c) {
        int k = 2 * (N * r + c);
        M(r, c) = cplx(m.entries[k], m.entries[k + 1]);
      }
    if ((M - M.adjoint()).lpNorm<Eigen::Infinity>() > 1e-10)
      throw parse_error("onsite matrix is not Hermitian", m.line, m.col);
    if (mf.onsite[m.site].size() != 0)
      mf.onsite[m.site] += M;
    else
      mf.onsite[m.site] = M;
  }

  // Exchange: validate against bond symmetry, then propagate over orbits.
  mf.terms = ModelTerms{};
  mf.terms.field = mf.field;
  std::vector<Bond> covered;
  for (const auto& ref : mf.ref_exchange) {
    validate_bond(mf.crystal, ref.bond);
    Bond b = ref.bond.canonical();
    Mat3 J = ref.J;
    auto basis = allowed_exchange_basis(sym, b);
    if (ref.via_coefs) {
      if (ref.coefs.size() != basis.size())
        throw model_error(
            "bond allows " + std::to_string(basis.size()) +
            " independent coupling components, got " +
            std::to_string(ref.coefs.size()) + " coefficients");
      J = Mat3::Zero();
      for (std::size_t k = 0; k < basis.size(); ++k) J += ref.coefs[k] * basis[k];
    } else {
      double scale = std::max(1.0, J.lpNorm<Eigen::Infinity>());
      for (int g = 0; g < sym.size(); ++g) {
        auto img = sym.map_bond(g, b);
        if (!(img.bond == b)) continue;
        const Mat3& R = sym.cart_rotation(g);
        Mat3 Jt = img.reversed ? Mat3(R * J.transpose() * R.transpose())
                               : Mat3(R * J * R.transpose());
        if ((Jt - J).lpNorm<Eigen::Infinity>() >
            defaults::coupling_sym_tol * scale)
          throw symmetry_error(
              "exchange matrix on bond (" + std::to_string(b.i) + "," +
              std::to_string(b.j) + ") violates symmetry operation #" +
              std::to_string(g) + ": " + op_description(sym.op(g)));
      }
    }
    for (const auto& e : bond_orbit(sym, b)) {
      for (const auto& c : covered)
        if (c == e.bond)
          throw model_error("bond (" + std::to_string(e.bond.i) + "," +
                            std::to_string(e.bond.j) +
                            ") is covered by more than one exchange entry");
      covered.push_back(e.bond);
      const Mat3& R = sym.cart_rotation(e.op);
      Mat3 Jb = e.reversed ? Mat3(R * J.transpose() * R.transpose())
                           : Mat3(R * J * R.transpose());
      mf.terms.exchange.push_back({e.bond, Jb});
    }
  }

  std::vector<Bond> bq_covered;
  for (const auto& ref : mf.ref_biquad) {
    validate_bond(mf.crystal, ref.bond);
    for (const auto& e : bond_orbit(sym, ref.bond.canonical())) {
      for (const auto& c : bq_covered)
        if (c == e.bond)
          throw model_error("biquadratic bond covered twice");
      bq_covered.push_back(e.bond);
      mf.terms.biquad.push_back({e.bond, ref.coef});
    }
  }

  for (const auto& ref : mf.ref_aniso) {
    if (ref.site < 0 || ref.site >= mf.crystal.nsites())
      throw model_error("anisotropy references a site outside the basis");
    std::vector<AnisoTerm> images;
    for (int g = 0; g < sym.size(); ++g) {
      int site = sym.site_image(g, ref.site).site;
      Vec3 ax = (sym.cart_rotation(g) * ref.axis).normalized();
      bool dup = false;
      for (const auto& im : images)
        if (im.site == site &&
            (std::abs(std::abs(im.axis.dot(ax)) - 1.0) < 1e-10))
          dup = true;
      if (!dup) images.push_back({site, ax, ref.c2});
    }
    for (const auto& im : images) mf.terms.aniso.push_back(im);
  }

  return mf;
}

ModelFile load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw model_error("cannot open model file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_model_file(ss.str());
}

std::string serialize_model_file(const ModelFile& mf) {
  std::ostringstream os;
  os << "[crystal]\n";
  for (int k = 0; k < 3; ++k) {
    os << "a" << k + 1 << " =";
    for (int r = 0; r < 3; ++r) os << " " << fmt17(mf.crystal.lattice(r, k));
    os << "\n";
  }
  for (const auto& s : mf.crystal.sites)
    os << "site = " << fmt17(s.x()) << " " << fmt17(s.y()) << " "
       << fmt17(s.z()) << "\n";

  if (!mf.generators.empty()) {
    os << "\n[symmetry]\n";
    for (const auto& g : mf.generators) {
      os << "op =";
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) os << " " << fmt17(g.W(r, c));
      for (int k = 0; k < 3; ++k) os << " " << fmt17(g.w[k]);
      os << "\n";
    }
  }

  os << "\n[spins]\n";
  for (int k = 0; k < mf.crystal.nsites(); ++k)
    os << "spin = " << k << " " << fmt17(mf.crystal.spin_s[k]) << " "
       << fmt17(mf.crystal.g_factor[k]) << "\n";

  if (!mf.ref_exchange.empty()) {
    os << "\n[exchange]\n";
    for (const auto& r : mf.ref_exchange) {
      if (r.via_coefs) {
        os << "Jcoef = " << r.bond.i << " " << r.bond.j << " "
           << r.bond.offset.x() << " " << r.bond.offset.y() << " "
           << r.bond.offset.z();
        for (double c : r.coefs) os << " " << fmt17(c);
      } else {
        os << "J = " << r.bond.i << " " << r.bond.j << " " << r.bond.offset.x()
           << " " << r.bond.offset.y() << " " << r.bond.offset.z();
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) os << " " << fmt17(r.J(i, j));
      }
      os << "\n";
    }
  }

  if (!mf.ref_biquad.empty()) {
    os << "\n[biquadratic]\n";
    for (const auto& r : mf.ref_biquad)
      os << "b = " << r.bond.i << " " << r.bond.j << " " << r.bond.offset.x()
         << " " << r.bond.offset.y() << " " << r.bond.offset.z() << " "
         << fmt17(r.coef) << "\n";
  }

  bool any_matrix = false;
  for (const auto& m : mf.onsite)
    if (m.size() != 0) any_matrix = true;
  if (!mf.ref_aniso.empty() || any_matrix) {
    os << "\n[anisotropy]\n";
    for (const auto& r : mf.ref_aniso)
      os << "axis = " << r.site << " " << fmt17(r.axis.x()) << " "
         << fmt17(r.axis.y()) << " " << fmt17(r.axis.z()) << " "
         << fmt17(r.c2) << "\n";
    for (std::size_t s = 0; s < mf.onsite.size(); ++s) {
      const MatXc& M = mf.onsite[s];
      if (M.size() == 0) continue;
      os << "matrix = " << s;
      for (long r = 0; r < M.rows(); ++r)
        for (long c = 0; c < M.cols(); ++c)
          os << " " << fmt17(std::real(M(r, c))) << " "
             << fmt17(std::imag(M(r, c)));
      os << "\n";
    }
  }

  os << "\n[field]\nB = " << fmt17(mf.field.x()) << " " << fmt17(mf.field.y())
     << " " << fmt17(mf.field.z()) << "\n";
  os << "\n[supercell]\ndims = " << mf.dims.x() << " " << mf.dims.y() << " "
     << mf.dims.z() << "\n";
  os << "\n[mode]\nmode = "
     << (mf.mode == ModelFile::Mode::dipole ? "dipole" : "sun") << "\n";
  return os.str();
}

} // namespace spindyn
