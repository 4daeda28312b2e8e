#pragma once

// Run configuration for the command-line tool: an INI document read with
// boost::property_tree, and the model it describes.

#include "csnvi/io.hpp"
#include "csnvi/models/glm.hpp"
#include "csnvi/models/glmm.hpp"
#include "csnvi/models/normal.hpp"
#include "csnvi/models/weibull.hpp"
#include "csnvi/models/zinb.hpp"
#include "csnvi/optimizer.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <map>
#include <memory>
#include <set>

namespace csnvi {

enum class VariationalFamily { gaussian, csn_cholesky, csn_lu };

inline std::string_view to_string(VariationalFamily f) {
  switch (f) {
    case VariationalFamily::gaussian: return "gaussian";
    case VariationalFamily::csn_cholesky: return "csn-cholesky";
    case VariationalFamily::csn_lu: return "csn-lu";
  }
  return "?";
}

inline VariationalFamily variational_family_from_string(std::string_view s) {
  if (s == "gaussian") return VariationalFamily::gaussian;
  if (s == "csn-cholesky" || s == "csnc") return VariationalFamily::csn_cholesky;
  if (s == "csn-lu" || s == "csnlu") return VariationalFamily::csn_lu;
  throw ConfigError("unknown variational family '" + std::string(s) + "' (gaussian, csn-cholesky, csn-lu)");
}

inline const std::vector<std::string>& model_names() {
  static const std::vector<std::string> names{"normal-sample", "normal-variance", "poisson", "logistic",
                                              "zinb",          "weibull",         "glmm-logit", "glmm-log"};
  return names;
}

struct ModelSpec {
  std::string name = "normal-sample";
  std::filesystem::path data;  // empty: synthetic data
  std::uint64_t synthetic_seed = 1;
  Index synthetic_n = 0;       // 0: the model's default size
  bool intercept = true;       // prepend a ones column to the x design
  bool z_intercept = true;     // same for the z design
  NormalPriors normal;
  double sigma0_sq = 100.0;    // GLM-type prior variance
  double sigma_beta = 10.0;
  double sigma_zeta = 10.0;
};

struct RunConfig {
  ModelSpec model;
  VariationalFamily family = VariationalFamily::csn_cholesky;
  bool warm_start = true;      // CSN fits start from a Gaussian fit
  OptimizerConfig opt;
  std::filesystem::path out = "csnvi-out";
  std::filesystem::path source;  // config file, if any

  std::uint64_t seed() const { return opt.seed; }
};

namespace detail {

inline bool parse_bool(const std::string& s, const std::string& key) {
  if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
  if (s == "false" || s == "no" || s == "off" || s == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + s + "'");
}

inline double parse_real(const std::string& s, const std::string& key) {
  try {
    return parse_double(s, key);
  } catch (const DataError&) {
    throw ConfigError(key + ": expected a number, got '" + s + "'");
  }
}

inline long parse_long(const std::string& s, const std::string& key) {
  const double v = parse_real(s, key);
  if (v != std::floor(v) || std::abs(v) > 9e15) throw ConfigError(key + ": expected an integer, got '" + s + "'");
  return static_cast<long>(v);
}

inline Vector parse_list(const std::string& s, const std::string& key) {
  std::vector<double> v;
  for (const auto& cell : split_csv_line(s)) v.push_back(parse_real(cell, key));
  if (v.empty()) throw ConfigError(key + ": empty list");
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

}  // namespace detail

/// Apply one `section.key = value` setting. Unknown keys are rejected so
/// that typos do not silently fall back to defaults.
inline void apply_setting(RunConfig& c, const std::string& section, const std::string& key, const std::string& value) {
  using namespace detail;
  const std::string k = section + "." + key;
  OptimizerConfig& o = c.opt;
  try {
    if (section == "model") {
      if (key == "name") {
        if (std::find(model_names().begin(), model_names().end(), value) == model_names().end())
          throw ConfigError(k + ": unknown model '" + value + "'");
        c.model.name = value;
      } else if (key == "data") c.model.data = value;
      else if (key == "synthetic_seed") c.model.synthetic_seed = static_cast<std::uint64_t>(parse_long(value, k));
      else if (key == "synthetic_n") c.model.synthetic_n = parse_long(value, k);
      else if (key == "intercept") c.model.intercept = parse_bool(value, k);
      else if (key == "z_intercept") c.model.z_intercept = parse_bool(value, k);
      else if (key == "a0") c.model.normal.a0 = parse_real(value, k);
      else if (key == "b0") c.model.normal.b0 = parse_real(value, k);
      else if (key == "sigma0_sq") c.model.sigma0_sq = c.model.normal.sigma0_sq = parse_real(value, k);
      else if (key == "sigma_beta") c.model.sigma_beta = parse_real(value, k);
      else if (key == "sigma_zeta") c.model.sigma_zeta = parse_real(value, k);
      else throw ConfigError("unknown setting " + k);
    } else if (section == "variational") {
      if (key == "family") c.family = variational_family_from_string(value);
      else if (key == "parametrization") o.parametrization = skew_kind_from_string(value);
      else if (key == "skew_init") o.skew_init = parse_list(value, k);
      else if (key == "warm_start") c.warm_start = parse_bool(value, k);
      else throw ConfigError("unknown setting " + k);
    } else if (section == "optimizer") {
      if (key == "mode") o.mode = step_mode_from_string(value);
      else if (key == "step") o.step = parse_real(value, k);
      else if (key == "beta1") o.beta1 = parse_real(value, k);
      else if (key == "beta2") o.beta2 = parse_real(value, k);
      else if (key == "eps") o.eps = parse_real(value, k);
      else if (key == "iterations") o.iterations = parse_long(value, k);
      else if (key == "window") o.trace_window = parse_long(value, k);
      else if (key == "mc_samples") o.mc_samples_per_step = static_cast<int>(parse_long(value, k));
      else if (key == "plateau_stop") o.plateau_stop = parse_bool(value, k);
      else if (key == "plateau_tol") o.plateau_tol = parse_real(value, k);
      else if (key == "plateau_windows") o.plateau_windows = static_cast<int>(parse_long(value, k));
      else throw ConfigError("unknown setting " + k);
    } else if (section == "run") {
      if (key == "seed") o.seed = static_cast<std::uint64_t>(parse_long(value, k));
      else if (key == "out") c.out = value;
      else throw ConfigError("unknown setting " + k);
    } else {
      throw ConfigError("unknown section [" + section + "]");
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(k + ": " + e.what());
  }
}

inline void finalize(RunConfig& c) {
  if (c.family == VariationalFamily::csn_lu) c.opt.factor = FactorKind::lu;
  else c.opt.factor = FactorKind::cholesky;
  if (c.model.synthetic_n < 0) throw ConfigError("model.synthetic_n must be non-negative");
  try {
    c.opt.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

/// Read an INI config. Relative data paths resolve against the config's directory.
inline RunConfig load_config(const std::filesystem::path& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(e.what());
  }
  RunConfig c;
  c.source = path;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("setting '" + section + "' is outside any section");
    for (const auto& [key, value] : body) apply_setting(c, section, key, value.get_value<std::string>());
  }
  if (!c.model.data.empty() && c.model.data.is_relative()) c.model.data = path.parent_path() / c.model.data;
  finalize(c);
  return c;
}

/// Everything needed to echo and re-run the configuration.
inline Json config_to_json(const RunConfig& c) {
  const OptimizerConfig& o = c.opt;
  Json j;
  j["model"] = {{"name", c.model.name},
                {"data", c.model.data.string()},
                {"synthetic_seed", c.model.synthetic_seed},
                {"synthetic_n", c.model.synthetic_n},
                {"intercept", c.model.intercept},
                {"z_intercept", c.model.z_intercept},
                {"a0", c.model.normal.a0},
                {"b0", c.model.normal.b0},
                {"sigma0_sq", c.model.name.rfind("normal", 0) == 0 ? c.model.normal.sigma0_sq : c.model.sigma0_sq},
                {"sigma_beta", c.model.sigma_beta},
                {"sigma_zeta", c.model.sigma_zeta}};
  j["variational"] = {{"family", std::string(to_string(c.family))},
                      {"parametrization", std::string(to_string(o.parametrization))},
                      {"skew_init", to_json(o.skew_init)},
                      {"warm_start", c.warm_start}};
  j["optimizer"] = {{"mode", std::string(to_string(o.mode))},
                    {"step", o.step},
                    {"beta1", o.beta1},
                    {"beta2", o.beta2},
                    {"eps", o.eps},
                    {"iterations", o.iterations},
                    {"window", o.trace_window},
                    {"mc_samples", o.mc_samples_per_step},
                    {"plateau_stop", o.plateau_stop},
                    {"plateau_tol", o.plateau_tol},
                    {"plateau_windows", o.plateau_windows}};
  j["run"] = {{"seed", o.seed}, {"out", c.out.string()}};
  return j;
}

/// The same settings as an INI document that load_config reads back.
inline std::string config_to_ini(const RunConfig& c) {
  const Json j = config_to_json(c);
  std::ostringstream out;
  for (const auto& [section, body] : j.items()) {
    out << "[" << section << "]\n";
    for (const auto& [key, v] : body.items()) {
      if (section == "model" && key == "data" && v.get<std::string>().empty()) continue;
      out << key << " = ";
      if (v.is_string()) out << v.get<std::string>();
      else if (v.is_boolean()) out << (v.get<bool>() ? "true" : "false");
      else if (v.is_array()) {
        for (std::size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << format_double(v[i].get<double>());
      } else if (v.is_number_float()) out << format_double(v.get<double>());
      else out << v.dump();
      out << "\n";
    }
    out << "\n";
  }
  return out.str();
}

struct BuiltModel {
  std::unique_ptr<TargetModel> model;
  std::vector<Index> block_sizes;  // one dense block unless mean-field
  std::string data_source;
};

namespace detail {

inline Matrix with_intercept(const Matrix& m, Index rows, bool intercept) {
  if (!intercept) return m;
  Matrix out(rows, m.cols() + 1);
  out.col(0).setOnes();
  out.rightCols(m.cols()) = m;
  return out;
}

/// Relabel subject ids to 0, 1, ... in order of first appearance.
inline std::vector<Index> relabel_groups(const Vector& g) {
  std::map<double, Index> seen;
  std::vector<Index> out;
  for (Index i = 0; i < g.size(); ++i) {
    auto it = seen.find(g(i));
    if (it == seen.end()) it = seen.emplace(g(i), static_cast<Index>(seen.size())).first;
    out.push_back(it->second);
  }
  return out;
}

inline Dataset dataset_from_csv(const ModelSpec& s) {
  const CsvTable t = read_csv(s.data);
  const std::string& m = s.name;
  Dataset d;
  const Index n = t.rows();
  if (n == 0) throw DataError("'" + s.data.string() + "' has no data rows");
  if (m != "weibull") d.y = t.column("y");
  if (m == "normal-sample" || m == "normal-variance") return d;
  d.x = with_intercept(t.prefixed("x"), n, s.intercept);
  if (d.x.cols() == 0) throw DataError("'" + s.data.string() + "': no x1, x2, ... columns and intercept disabled");
  if (m == "poisson" && t.find("exposure")) d.offset = t.column("exposure");
  if (m == "logistic" && t.find("trials")) d.n_trials = t.column("trials");
  if (m == "zinb" || m == "weibull" || m.rfind("glmm", 0) == 0) {
    d.z = with_intercept(t.prefixed("z"), n, s.z_intercept);
    if (d.z.cols() == 0) throw DataError("'" + s.data.string() + "': no z1, z2, ... columns and z_intercept disabled");
  }
  if (m == "weibull") {
    d.time = t.column("time");
    d.event = t.column("event");
  }
  if (m.rfind("glmm", 0) == 0) d.group = relabel_groups(t.column("group"));
  return d;
}

inline Dataset synthetic_dataset(const ModelSpec& s) {
  const std::uint64_t seed = s.synthetic_seed;
  const auto n_or = [&](Index fallback) { return s.synthetic_n > 0 ? s.synthetic_n : fallback; };
  const auto vec = [](std::initializer_list<double> v) {
    Vector out(static_cast<Index>(v.size()));
    Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
  };
  const std::string& m = s.name;
  if (m == "normal-sample") return synthetic::normal_sample(seed, n_or(6));
  if (m == "normal-variance") return synthetic::normal_variance(seed, n_or(6));
  if (m == "poisson") return synthetic::poisson(seed, n_or(100), vec({0.5, -0.3}));
  if (m == "logistic") return synthetic::logistic(seed, n_or(100), vec({0.3, -1.0}));
  if (m == "zinb") return synthetic::zinb(seed, n_or(200), vec({1.0, 0.5}), vec({-1.0, 0.5}), 0.5);
  if (m == "weibull") return synthetic::weibull(seed, n_or(100), vec({-0.5, 0.3}), vec({0.2, 0.0}));
  if (m == "glmm-log") return synthetic::poisson_glmm(seed, n_or(100));
  throw ConfigError("model '" + m + "' has no synthetic generator; set model.data");
}

}  // namespace detail

/// Build the target model named in the config from its CSV or synthetic data.
inline BuiltModel build_model(const ModelSpec& s) {
  const bool from_file = !s.data.empty();
  Dataset d = from_file ? detail::dataset_from_csv(s) : detail::synthetic_dataset(s);
  BuiltModel b;
  b.data_source = from_file ? s.data.string() : "synthetic:" + s.name + ":" + std::to_string(s.synthetic_seed);
  const std::string& m = s.name;
  try {
    if (m == "normal-sample") b.model = std::make_unique<NormalSampleModel>(d.y, s.normal);
    else if (m == "normal-variance") b.model = std::make_unique<NormalVarianceModel>(d.y, s.normal);
    else if (m == "poisson") b.model = std::make_unique<PoissonGlmModel>(d, s.sigma0_sq);
    else if (m == "logistic") b.model = std::make_unique<LogisticModel>(d, s.sigma0_sq);
    else if (m == "zinb") b.model = std::make_unique<ZinbModel>(d, s.sigma0_sq);
    else if (m == "weibull") b.model = std::make_unique<WeibullModel>(d, s.sigma0_sq);
    else if (m == "glmm-logit" || m == "glmm-log") {
      auto g = std::make_unique<GlmmModel>(d, m == "glmm-logit" ? GlmmLink::logit : GlmmLink::log, s.sigma_beta,
                                           s.sigma_zeta);
      b.block_sizes = meanfield_structure(g->subjects(), g->random_dim(), g->global_dim()).block_sizes();
      b.model = std::move(g);
    } else {
      throw ConfigError("unknown model '" + m + "'");
    }
  } catch (const std::invalid_argument& e) {
    throw DataError(b.data_source + ": " + e.what());
  }
  if (b.block_sizes.empty()) b.block_sizes = {b.model->dim()};
  return b;
}

}  // namespace csnvi
