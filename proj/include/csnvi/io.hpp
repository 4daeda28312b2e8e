#pragma once

// CSV tables, parameter files and number formatting for the command-line tool.

#include "csnvi/family.hpp"
#include "csnvi/metrics.hpp"

#include "json.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace csnvi {

/// Bad or missing input data (exit code 3 in the tool).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration or arguments (exit code 2 in the tool).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest text that reads back to the same double, never more than 17
/// significant digits, '.' decimal regardless of locale.
inline std::string format_double(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s, const std::string& where) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw DataError(where + ": not a number: '" + std::string(s) + "'");
  return v;
}

struct CsvTable {
  std::vector<std::string> header;
  Matrix data;  // rows x header.size()

  Index cols() const { return static_cast<Index>(header.size()); }
  Index rows() const { return data.rows(); }

  std::optional<Index> find(const std::string& name) const {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return static_cast<Index>(j);
    return std::nullopt;
  }

  Vector column(const std::string& name) const {
    const auto j = find(name);
    if (!j) throw DataError("missing column '" + name + "'");
    return data.col(*j);
  }

  /// Columns whose names start with `prefix` followed only by digits, in file order.
  Matrix prefixed(const std::string& prefix) const {
    std::vector<Index> idx;
    for (std::size_t j = 0; j < header.size(); ++j) {
      const std::string& h = header[j];
      if (h.size() > prefix.size() && h.compare(0, prefix.size(), prefix) == 0 &&
          h.find_first_not_of("0123456789", prefix.size()) == std::string::npos)
        idx.push_back(static_cast<Index>(j));
    }
    Matrix out(rows(), static_cast<Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Index>(k)) = data.col(idx[k]);
    return out;
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::string trim(std::string s) {
  const auto a = s.find_first_not_of(" \t\r\"");
  const auto b = s.find_last_not_of(" \t\r\"");
  return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

/// Numeric CSV with a header row. Blank lines are skipped.
inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw DataError("'" + path.string() + "' is empty (a header row is required)");
  for (auto& h : split_csv_line(line)) t.header.push_back(trim(h));
  std::vector<std::vector<double>> rows;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (cells.size() != t.header.size())
      throw DataError(where + ": expected " + std::to_string(t.header.size()) + " fields, found " +
                      std::to_string(cells.size()));
    std::vector<double> r;
    for (const auto& c : cells) r.push_back(parse_double(c, where));
    rows.push_back(std::move(r));
  }
  t.data.resize(static_cast<Index>(rows.size()), t.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (Index j = 0; j < t.cols(); ++j) t.data(static_cast<Index>(i), j) = rows[i][j];
  return t;
}

inline void write_csv(std::ostream& out, const std::vector<std::string>& header, const Matrix& data) {
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << '\n';
  for (Index i = 0; i < data.rows(); ++i) {
    for (Index j = 0; j < data.cols(); ++j) out << (j ? "," : "") << format_double(data(i, j));
    out << '\n';
  }
}

inline void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header, const Matrix& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  write_csv(out, header, data);
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
}

inline std::vector<std::string> theta_header(Index d) {
  std::vector<std::string> h;
  for (Index j = 1; j <= d; ++j) h.push_back("theta" + std::to_string(j));
  return h;
}

/// DensityGrid from a two-column (x, density) CSV.
inline DensityGrid read_grid(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  if (t.cols() != 2) throw DataError("'" + path.string() + "': a density grid needs exactly two columns");
  DensityGrid g{t.data.col(0), t.data.col(1)};
  try {
    g.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError("'" + path.string() + "': " + e.what());
  }
  return g;
}

using Json = nlohmann::ordered_json;

inline Json to_json(const Vector& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Json to_json(const Matrix& m) {
  Json a = Json::array();
  for (Index i = 0; i < m.rows(); ++i) a.push_back(to_json(Vector(m.row(i).transpose())));
  return a;
}

inline Vector vector_from_json(const Json& j, const std::string& what) {
  if (!j.is_array()) throw DataError(what + ": expected an array");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw DataError(what + ": expected numbers");
    v(static_cast<Index>(i)) = j[i].get<double>();
  }
  return v;
}

inline Matrix matrix_from_json(const Json& j, Index d, const std::string& what) {
  if (!j.is_array() || static_cast<Index>(j.size()) != d) throw DataError(what + ": expected " + std::to_string(d) + " rows");
  Matrix m(d, d);
  for (Index i = 0; i < d; ++i) {
    const Vector r = vector_from_json(j[static_cast<std::size_t>(i)], what);
    if (r.size() != d) throw DataError(what + ": expected " + std::to_string(d) + " columns");
    m.row(i) = r.transpose();
  }
  return m;
}

inline Json block_to_json(const SkewParams& p) {
  Json b;
  b["mu"] = to_json(p.mu);
  b["factor"] = std::string(to_string(p.factor.kind()));
  b["L"] = to_json(p.factor.l());
  if (p.factor.kind() == FactorKind::lu) b["U"] = to_json(p.factor.u());
  b["parametrization"] = std::string(to_string(p.skew.kind));
  b["skew"] = to_json(p.skew.value);
  b["lambda"] = to_json(to_lambda(p.skew));
  return b;
}

inline SkewParams block_from_json(const Json& b) {
  try {
    const Vector mu = vector_from_json(b.at("mu"), "mu");
    const Index d = mu.size();
    const FactorKind fk = factor_kind_from_string(b.at("factor").get<std::string>());
    const Matrix l = matrix_from_json(b.at("L"), d, "L");
    FactorForm ff = fk == FactorKind::lu ? FactorForm::lu(l, matrix_from_json(b.at("U"), d, "U")) : FactorForm::cholesky(l);
    SkewParam sk{skew_kind_from_string(b.at("parametrization").get<std::string>()), vector_from_json(b.at("skew"), "skew")};
    if (sk.size() != d) throw DataError("skew: expected " + std::to_string(d) + " entries");
    if (sk.kind == SkewKind::alpha_cubed) check_alpha_cubed(sk.value);
    return {mu, std::move(ff), std::move(sk)};
  } catch (const DataError&) {
    throw;
  } catch (const std::exception& e) {
    throw DataError(std::string("parameter block: ") + e.what());
  }
}

inline Json family_to_json(const Family& f) {
  Json j;
  j["dimension"] = f.dim();
  Json blocks = Json::array();
  for (const auto& b : f.blocks) blocks.push_back(block_to_json(b));
  j["blocks"] = std::move(blocks);
  return j;
}

inline Family family_from_json(const Json& j) {
  if (!j.contains("blocks") || !j["blocks"].is_array() || j["blocks"].empty())
    throw DataError("parameter file has no 'blocks' array");
  Family f;
  for (const auto& b : j["blocks"]) f.blocks.push_back(block_from_json(b));
  return f;
}

inline Family read_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("'" + path.string() + "': " + e.what());
  }
  return family_from_json(j);
}

inline void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

}  // namespace csnvi
