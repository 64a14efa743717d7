#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "pairtomo/errors.hpp"
#include "pairtomo/fitting.hpp"
#include "pairtomo/qstate.hpp"
#include "pairtomo/tomography.hpp"
#include "pairtomo/version.hpp"

namespace pairtomo::io {

using Json = nlohmann::ordered_json;

/// Raised for unreadable files and unparsable content.
class ParseError : public InputError {
 public:
  using InputError::InputError;
};

// ---------------------------------------------------------------------------
// Deterministic JSON text: insertion-ordered keys, doubles at 17 significant
// digits, two-space indentation.

inline std::string format_double(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline void dump(const Json& j, std::string& out, int indent) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += inner + Json(it.key()).dump() + ": ";
        dump(it.value(), out, indent + 1);
      }
      out += "\n" + pad + "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      const bool flat = std::all_of(j.begin(), j.end(), [](const Json& e) { return e.is_primitive(); });
      if (flat) {
        out += "[";
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) out += ", ";
          dump(j[i], out, indent + 1);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += inner;
        dump(j[i], out, indent + 1);
      }
      out += "\n" + pad + "]";
      return;
    }
    case Json::value_t::number_float:
      out += format_double(j.get<double>());
      return;
    default:
      out += j.dump();
  }
}

}  // namespace detail

inline std::string to_text(const Json& j) {
  std::string out;
  detail::dump(j, out, 0);
  out += "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Files

/// Reads a whole file; "-" reads standard input.
inline std::string read_text(const std::string& path) {
  if (path == "-") return {std::istreambuf_iterator<char>(std::cin), {}};
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), {}};
}

/// Writes through a temporary file and a rename; "-" writes standard output.
inline void write_text_atomic(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text << std::flush;
    return;
  }
  const std::filesystem::path target(path);
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot write '" + tmp.string() + "'");
    out << text;
    if (!out.flush()) throw ParseError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw ParseError("cannot move output into place at '" + path + "': " + ec.message());
  }
}

inline Json parse_json(const std::string& text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(origin + ": malformed JSON: " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Density matrix JSON

inline Json report_to_json(const ValidationReport& r) {
  return Json{{"physical", r.physical},
              {"hermiticity_defect", r.hermiticity_defect},
              {"trace", r.trace},
              {"min_eigenvalue", r.min_eigenvalue},
              {"defects", r.defects}};
}

inline Json tolerances_to_json(const Tolerances& t) {
  return Json{{"hermiticity", t.hermiticity}, {"trace", t.trace},
              {"min_eigenvalue", t.min_eigenvalue}, {"norm", t.norm},
              {"phase_cut", t.phase_cut}, {"sqrt_clamp", t.sqrt_clamp}};
}

inline Json matrix_to_json(const Mat4c& m) {
  Json re = Json::array(), im = Json::array();
  for (int i = 0; i < 4; ++i) {
    Json rr = Json::array(), ri = Json::array();
    for (int j = 0; j < 4; ++j) {
      rr.push_back(m(i, j).real());
      ri.push_back(m(i, j).imag());
    }
    re.push_back(rr);
    im.push_back(ri);
  }
  return Json{{"re", re}, {"im", im}};
}

inline Json density_matrix_to_json(const TwoQubitDensityMatrix& rho) {
  Json j = matrix_to_json(rho.matrix());
  j["basis"] = kBasisLabels;
  Json meta = rho.metadata().is_object() ? rho.metadata() : Json::object();
  meta["validation"] = report_to_json(rho.report());
  meta["version"] = kVersion;
  j["meta"] = meta;
  return j;
}

inline Mat4c json_to_matrix(const Json& j, const std::string& origin) {
  Mat4c m;
  for (const char* part : {"re", "im"}) {
    if (!j.contains(part)) throw ParseError(origin + ": missing field '" + part + "'");
    const Json& a = j.at(part);
    if (!a.is_array() || a.size() != 4)
      throw ParseError(origin + ": field '" + part + "' must be a 4x4 array");
    for (std::size_t r = 0; r < 4; ++r) {
      if (!a[r].is_array() || a[r].size() != 4)
        throw ParseError(origin + ": field '" + part + "' row " + std::to_string(r) + " must have 4 entries");
      for (std::size_t c = 0; c < 4; ++c) {
        if (!a[r][c].is_number())
          throw ParseError(origin + ": field '" + part + "[" + std::to_string(r) + "][" +
                           std::to_string(c) + "]' is not a number");
        const double v = a[r][c].get<double>();
        auto& e = m(static_cast<int>(r), static_cast<int>(c));
        e = std::string(part) == "re" ? Complex(v, e.imag()) : Complex(e.real(), v);
      }
    }
  }
  return m;
}

/// Reads a density matrix file as a raw matrix; validation uses `tol`.
inline TwoQubitDensityMatrix read_density_matrix(const std::string& path, const Tolerances& tol = {}) {
  const Json j = parse_json(read_text(path), path);
  if (!j.is_object()) throw ParseError(path + ": expected a JSON object");
  Mat4c m = Mat4c::Zero();
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = Complex(0.0, 0.0);
  m = json_to_matrix(j, path);
  if (j.contains("basis")) {
    const Json& b = j.at("basis");
    if (!b.is_array() || b.size() != 4)
      throw ParseError(path + ": field 'basis' must list 4 labels");
    for (std::size_t i = 0; i < 4; ++i)
      if (!b[i].is_string() || b[i].get<std::string>() != kBasisLabels[i])
        throw ParseError(path + ": field 'basis' must be [\"HH\",\"HV\",\"VH\",\"VV\"]");
  }
  Json meta = j.contains("meta") ? j.at("meta") : Json::object();
  return TwoQubitDensityMatrix::raw(m, tol, meta);
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

struct CsvRow {
  std::size_t line;
  std::vector<std::string> cells;
};

/// Parses a CSV body with the exact header `expected`. Blank lines and lines
/// starting with '#' are skipped.
inline std::vector<CsvRow> read_csv(const std::string& text, const std::string& origin,
                                    const std::vector<std::string>& expected) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  std::vector<CsvRow> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto cells = split(t);
    if (!header) {
      if (cells != expected) {
        std::string want;
        for (const auto& e : expected) want += (want.empty() ? "" : ",") + e;
        throw ParseError(origin + ": line " + std::to_string(lineno) + ": expected header '" + want + "'");
      }
      header = true;
      continue;
    }
    if (cells.size() != expected.size())
      throw ParseError(origin + ": line " + std::to_string(lineno) + ": expected " +
                       std::to_string(expected.size()) + " fields, got " + std::to_string(cells.size()));
    rows.push_back({lineno, std::move(cells)});
  }
  if (!header) throw ParseError(origin + ": empty CSV (no header)");
  return rows;
}

inline double parse_number(const std::string& s, const std::string& origin, std::size_t line,
                           const std::string& field) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size() || !std::isfinite(v))
    throw ParseError(origin + ": line " + std::to_string(line) + ": field '" + field +
                     "' is not a finite number: '" + s + "'");
  return v;
}

inline Polarization parse_polarization(const std::string& s, const std::string& origin,
                                       std::size_t line, const std::string& field) {
  if (s.size() == 1)
    if (auto p = polarization_from_char(s[0])) return *p;
  throw ParseError(origin + ": line " + std::to_string(line) + ": field '" + field +
                   "' must be one of H,V,D,A,R,L, got '" + s + "'");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Tomography measurements

inline TomographySet parse_measurements(const std::string& text, const std::string& origin) {
  std::vector<MeasurementRecord> recs;
  const std::string t = detail::trim(text);
  if (!t.empty() && t.front() == '[') {
    const Json j = parse_json(text, origin);
    for (std::size_t i = 0; i < j.size(); ++i) {
      const Json& e = j[i];
      const std::string where = origin + ": entry " + std::to_string(i);
      for (const char* f : {"basis_xx", "basis_x", "strength", "kind"})
        if (!e.contains(f)) throw ParseError(where + ": missing field '" + f + "'");
      if (!e["basis_xx"].is_string() || !e["basis_x"].is_string() || !e["kind"].is_string() ||
          !e["strength"].is_number())
        throw ParseError(where + ": wrong field types");
      MeasurementRecord r;
      r.basis = {detail::parse_polarization(e["basis_xx"].get<std::string>(), origin, i, "basis_xx"),
                 detail::parse_polarization(e["basis_x"].get<std::string>(), origin, i, "basis_x")};
      r.strength = e["strength"].get<double>();
      const auto kind = strength_kind_from_string(e["kind"].get<std::string>());
      if (!kind) throw ParseError(where + ": field 'kind' must be g2 or counts");
      r.kind = *kind;
      recs.push_back(r);
    }
  } else {
    for (const auto& row : detail::read_csv(text, origin, {"basis_xx", "basis_x", "strength", "kind"})) {
      MeasurementRecord r;
      r.basis = {detail::parse_polarization(row.cells[0], origin, row.line, "basis_xx"),
                 detail::parse_polarization(row.cells[1], origin, row.line, "basis_x")};
      r.strength = detail::parse_number(row.cells[2], origin, row.line, "strength");
      const auto kind = strength_kind_from_string(row.cells[3]);
      if (!kind)
        throw ParseError(origin + ": line " + std::to_string(row.line) + ": field 'kind' must be g2 or counts");
      r.kind = *kind;
      recs.push_back(r);
    }
  }
  try {
    return TomographySet(recs);
  } catch (const InputError& e) {
    throw ParseError(origin + ": " + e.what());
  }
}

inline TomographySet read_measurements(const std::string& path) {
  return parse_measurements(read_text(path), path);
}

inline std::string measurements_to_csv(const TomographySet& set, const std::vector<std::string>& comments = {}) {
  std::string out;
  for (const auto& c : comments) out += "# " + c + "\n";
  out += "basis_xx,basis_x,strength,kind\n";
  for (const auto& r : set.records()) {
    out += to_char(r.basis.xx);
    out += ',';
    out += to_char(r.basis.x);
    out += ',' + format_double(r.strength) + ',' + to_string(r.kind) + '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fit inputs

inline PowerSeries read_power_series(const std::string& path) {
  const auto rows = detail::read_csv(read_text(path), path, {"power", "ix", "ixx"});
  std::vector<PowerPoint> pts;
  for (const auto& row : rows)
    pts.push_back({detail::parse_number(row.cells[0], path, row.line, "power"),
                   detail::parse_number(row.cells[1], path, row.line, "ix"),
                   detail::parse_number(row.cells[2], path, row.line, "ixx")});
  try {
    return PowerSeries(std::move(pts));
  } catch (const InputError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline MagnetoSeries read_magneto_series(const std::string& path) {
  const auto rows = detail::read_csv(read_text(path), path, {"field", "e_upper", "e_lower"});
  std::vector<MagnetoPoint> pts;
  for (const auto& row : rows) {
    MagnetoPoint p;
    p.field = detail::parse_number(row.cells[0], path, row.line, "field");
    p.energy_upper = detail::parse_number(row.cells[1], path, row.line, "e_upper");
    if (!row.cells[2].empty()) p.energy_lower = detail::parse_number(row.cells[2], path, row.line, "e_lower");
    pts.push_back(p);
  }
  try {
    return MagnetoSeries(std::move(pts));
  } catch (const InputError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace pairtomo::io
