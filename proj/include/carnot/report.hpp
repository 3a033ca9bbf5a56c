#pragma once

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <string>

#include "carnot/limits.hpp"
#include "carnot/nilpotent.hpp"
#include "carnot/pansu.hpp"

namespace carnot {

/// Decimal text with 12 significant digits; "nan", "inf", "-inf" for non-finite values.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) v = 0.0;  // drops the sign of -0
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string fmt(const Vec& v, const char* sep = ", ") {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) out += (i ? sep : "") + fmt(v[i]);
  return out;
}

inline const char* csv_header() {
  return "check_id,frame,base,eps,measured,reference,error,fitted_order,tolerance,pass";
}

/// One line per row of every check; NaN fields are left empty.
inline void write_csv(std::ostream& os, const SuiteReport& r) {
  auto field = [](double v) { return std::isnan(v) ? std::string() : fmt(v); };
  os << csv_header() << '\n';
  const std::string base = fmt(r.base, " ");
  for (const auto& c : r.checks) {
    const auto emit = [&](const CheckRow& row) {
      os << c.id << ',' << r.frame << ',' << base << ',' << field(row.eps) << ',' << field(row.measured) << ','
         << field(row.reference) << ',' << field(row.error) << ',' << field(row.fitted_order) << ','
         << fmt(c.tolerance) << ',' << (c.pass ? "true" : "false") << '\n';
    };
    if (c.rows.empty()) emit(CheckRow{});
    for (const auto& row : c.rows) emit(row);
  }
}

inline void write_text(std::ostream& os, const SuiteReport& r) {
  int passed = 0;
  for (const auto& c : r.checks) passed += c.pass ? 1 : 0;
  os << "frame: " << r.frame << '\n' << "base: " << fmt(r.base) << '\n';
  os << "verdict: " << (r.all_pass() ? "PASS" : "FAIL") << " (" << passed << "/" << r.checks.size()
     << " checks passed)\n";
  for (const auto& c : r.checks) {
    os << "\ncheck " << c.id << ": " << (c.pass ? "PASS" : "FAIL");
    if (!c.status.empty()) os << " [" << c.status << "]";
    os << '\n' << "  description: " << c.description << '\n' << "  tolerance: " << fmt(c.tolerance) << '\n';
    if (!c.note.empty()) os << "  note: " << c.note << '\n';
    if (!c.rows.empty()) {
      os << "  rows (eps, measured, reference, error, fitted_order):\n";
      for (const auto& row : c.rows)
        os << "    " << fmt(row.eps) << "  " << fmt(row.measured) << "  " << fmt(row.reference) << "  "
           << fmt(row.error) << "  " << fmt(row.fitted_order) << '\n';
    }
  }
}

/// Nonzero c_ijk with i < j, degrees and layer dimensions.
inline void write_algebra(std::ostream& os, const GradedAlgebra& alg) {
  os << "dim: " << alg.dim() << '\n' << "depth: " << alg.depth() << '\n' << "degrees:";
  for (int d : alg.degrees()) os << ' ' << d;
  os << '\n' << "layer_dims:";
  for (int m = 1; m <= alg.depth(); ++m) {
    int c = 0;
    for (int d : alg.degrees()) c += d <= m ? 1 : 0;
    os << ' ' << c;
  }
  os << '\n' << "abelian: " << (alg.is_abelian() ? "true" : "false") << '\n';
  os << "jacobi_residual: " << fmt(alg.jacobi_residual()) << '\n' << "constants:\n";
  for (int i = 0; i < alg.dim(); ++i)
    for (int j = i + 1; j < alg.dim(); ++j)
      for (int k = 0; k < alg.dim(); ++k)
        if (alg(i, j, k) != 0.0)
          os << "  c[" << i + 1 << "," << j + 1 << "," << k + 1 << "] = " << fmt(alg(i, j, k)) << "  (deg "
             << alg.degree(i) << " + " << alg.degree(j) << " = " << alg.degree(k) << ")\n";
}

/// Matrix rows with the target degree of each row and the source degree of each column.
inline void write_hom(std::ostream& os, const HomogeneousHom& L) {
  os << "matrix (" << L.matrix.rows() << " x " << L.matrix.cols() << "), column degrees:";
  for (int d : L.source.degrees()) os << ' ' << d;
  os << '\n';
  for (Eigen::Index j = 0; j < L.matrix.rows(); ++j) {
    os << "  deg " << L.target.degree(static_cast<int>(j)) << " |";
    for (Eigen::Index i = 0; i < L.matrix.cols(); ++i) {
      const bool in_block = L.target.degree(static_cast<int>(j)) == L.source.degree(static_cast<int>(i));
      os << ' ' << (in_block ? fmt(L.matrix(j, i)) : std::string("."));
    }
    os << '\n';
  }
}

}  // namespace carnot
