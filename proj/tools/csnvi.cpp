// csnvi: fit, sample, tabulate and compare closed-skew-normal variational
// approximations from the command line.

#include "csnvi/check.hpp"
#include "csnvi/config.hpp"
#include "csnvi/io.hpp"
#include "csnvi/metrics.hpp"
#include "csnvi/optimizer.hpp"

#include "CLI11.hpp"

#include <boost/version.hpp>

#include <chrono>
#include <cstdlib>
#include <iostream>

namespace fs = std::filesystem;
using namespace csnvi;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;
constexpr const char* kVersion = "0.1.0";

int threads_from_env() {
  const char* s = std::getenv("CSNVI_THREADS");
  if (!s || !*s) return 1;
  char* end = nullptr;
  const long v = std::strtol(s, &end, 10);
  if (*end != '\0' || v < 1 || v > 1024) throw ConfigError("CSNVI_THREADS must be a positive integer, got '" + std::string(s) + "'");
  return static_cast<int>(v);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

Json versions() {
  return {{"csnvi", kVersion},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"boost", std::to_string(BOOST_VERSION / 100000) + "." + std::to_string(BOOST_VERSION / 100 % 1000) + "." +
                        std::to_string(BOOST_VERSION % 100)},
          {"compiler", __VERSION__}};
}

struct FitArgs {
  std::string config;
  std::vector<std::string> set;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool quick = false;
};

RunConfig resolve_config(const FitArgs& a) {
  RunConfig c;
  if (!a.config.empty()) {
    if (!fs::exists(a.config)) throw ConfigError("config file '" + a.config + "' does not exist");
    c = load_config(a.config);
  }
  for (const std::string& s : a.set) {
    const auto eq = s.find('='), dot = s.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq)
      throw ConfigError("--set expects section.key=value, got '" + s + "'");
    apply_setting(c, trim(s.substr(0, dot)), trim(s.substr(dot + 1, eq - dot - 1)), trim(s.substr(eq + 1)));
  }
  if (a.seed) c.opt.seed = *a.seed;
  if (!a.out.empty()) c.out = a.out;
  if (a.quick) {
    c.opt.iterations = std::min<long>(c.opt.iterations, 5000);
    c.opt.trace_window = std::min<long>(c.opt.trace_window, 500);
  }
  c.opt.threads = threads_from_env();
  finalize(c);
  return c;
}

Json trace_summary(const FitResult& r) {
  return {{"final_elbo", r.final_elbo},
          {"final_std_error", r.final_std_error},
          {"iterations", r.iterations},
          {"windows", r.trace.size()},
          {"plateaued", r.converged}};
}

int cmd_fit(const FitArgs& a, const std::vector<std::string>& argv) {
  const RunConfig c = resolve_config(a);
  const BuiltModel bm = build_model(c.model);
  ensure_dir(c.out);
  const auto t0 = std::chrono::steady_clock::now();

  std::optional<FitResult> warm;
  FitResult res;
  if (c.family == VariationalFamily::gaussian) {
    res = fit_gaussian(*bm.model, c.opt, std::nullopt, bm.block_sizes);
  } else {
    if (c.warm_start) {
      OptimizerConfig g = c.opt;
      g.factor = FactorKind::cholesky;
      warm = fit_gaussian(*bm.model, g, std::nullopt, bm.block_sizes);
    }
    res = fit_csn(*bm.model, c.opt, warm, bm.block_sizes);
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  Json params = family_to_json(res.family);
  params["model"] = bm.model->name();
  params["family"] = std::string(to_string(c.family));
  write_json(c.out / "params.json", params);

  // The time column counts iterations rather than seconds so that reruns are
  // byte-identical; wall-clock times go to meta.json.
  Matrix tr(static_cast<Index>(res.trace.size()), 5);
  Json wall_times = Json::array();
  for (std::size_t i = 0; i < res.trace.size(); ++i) {
    const TraceRecord& r = res.trace[i];
    tr.row(static_cast<Index>(i)) << static_cast<double>(r.window_index), r.mean_elbo, static_cast<double>(r.iteration),
        r.skew.norm(), r.std_error;
    wall_times.push_back(r.wall_time);
  }
  write_csv(c.out / "trace.csv", {"window", "elbo", "time", "skew_norm", "std_error"}, tr);

  Json meta;
  meta["command"] = argv;
  meta["config"] = config_to_json(c);
  meta["config_ini"] = config_to_ini(c);
  meta["data_source"] = bm.data_source;
  meta["dimension"] = bm.model->dim();
  meta["blocks"] = bm.block_sizes.size();
  meta["threads"] = c.opt.threads;
  meta["versions"] = versions();
  meta["result"] = trace_summary(res);
  if (warm) meta["gaussian_warm_start"] = trace_summary(*warm);
  meta["wall_seconds"] = wall;
  meta["window_wall_seconds"] = std::move(wall_times);
  write_json(c.out / "meta.json", meta);

  std::cout << bm.model->name() << " / " << to_string(c.family) << ": ELBO " << format_double(res.final_elbo)
            << " (SE " << format_double(res.final_std_error) << ") after " << res.iterations << " iterations\n"
            << "wrote " << (c.out / "params.json").string() << ", trace.csv, meta.json\n";
  return 0;
}

int cmd_sample(const std::string& params, long n, std::uint64_t seed, const fs::path& out) {
  if (n < 0) throw ConfigError("--n must be non-negative");
  const Family f = read_params(params);
  ensure_dir(out);
  RngStream rng(seed);
  const Matrix x = n > 0 ? FamilyDensity(f).sample(rng, n) : Matrix(0, f.dim());
  write_csv(out / "samples.csv", theta_header(f.dim()), x);
  std::cout << "wrote " << n << " draws to " << (out / "samples.csv").string() << "\n";
  return 0;
}

int cmd_density(const std::string& params, long coordinate, std::optional<double> lo, std::optional<double> hi,
                long points, const fs::path& out) {
  const Family f = read_params(params);
  if (coordinate < 1 || coordinate > f.dim())
    throw ConfigError("--coordinate must be in 1.." + std::to_string(f.dim()) + ", got " + std::to_string(coordinate));
  if (points < 2) throw ConfigError("--points must be at least 2");
  // Locate the block holding the coordinate; the marginal only involves that block.
  Index i = coordinate - 1, b = 0;
  while (i >= f.blocks[b].dim()) i -= f.blocks[b++].dim();
  const Csn q(f.blocks[b]);
  if (q.dim() > kExactMarginalMaxDim)
    throw ConfigError("the exact marginal needs a " + std::to_string(q.dim()) + "-variate normal cdf (limit " +
                      std::to_string(kExactMarginalMaxDim) + "); use `csnvi sample` and a kernel density estimate instead");
  const double sd = std::sqrt(q.covariance()(i, i));
  const double a = lo.value_or(q.mu()(i) - 8 * sd), z = hi.value_or(q.mu()(i) + 8 * sd);
  if (!(z > a)) throw ConfigError("--hi must exceed --lo");
  const DensityGrid g = DensityGrid::tabulate(a, z, points, [&](double x) { return std::exp(q.marginal_log_density(i, x)); });
  ensure_dir(out);
  Matrix m(points, 2);
  m << g.x, g.values;
  write_csv(out / "density.csv", {"x", "density"}, m);
  g.check_mass(std::cerr);
  std::cout << "wrote " << (out / "density.csv").string() << " (mass " << format_double(g.integral()) << ")\n";
  return 0;
}

int cmd_metrics(const std::string& a, const std::string& b, const std::string& ga, const std::string& gb,
                std::optional<double> bw, const fs::path& out) {
  Json j;
  if (!a.empty() || !b.empty()) {
    if (a.empty() || b.empty()) throw ConfigError("--a and --b must be given together");
    const CsvTable ta = read_csv(a), tb = read_csv(b);
    if (ta.cols() != tb.cols())
      throw DataError("sample files have different column counts (" + std::to_string(ta.cols()) + " and " +
                      std::to_string(tb.cols()) + ")");
    if (ta.rows() != tb.rows())
      throw DataError("sample files have different row counts (" + std::to_string(ta.rows()) + " and " +
                      std::to_string(tb.rows()) + ")");
    if (ta.rows() < 2) throw DataError("the MMD needs at least two rows per sample file");
    const MmdResult r = mmd_mstar(ta.data, tb.data, bw);
    j = {{"mmd", r.mmd}, {"m_star", r.m_star}, {"bandwidth", r.bandwidth}, {"std_error", r.std_error}};
  } else if (!ga.empty() && !gb.empty()) {
    const IaeResult r = iae_accuracy(read_grid(ga), read_grid(gb));
    j = {{"iae", r.iae}, {"accuracy_percent", r.accuracy_percent}};
  } else {
    throw ConfigError("give either --a/--b sample files or --grid-a/--grid-b density grids");
  }
  ensure_dir(out);
  write_json(out / "metrics.json", j);
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_check(bool quick, std::uint64_t seed, const std::string& fault) {
  CheckOptions o;
  o.quick = quick;
  o.seed = seed;
  if (fault == "natural-sign") {
    o.natural_cholesky = [](const ParamGradient& g, const SkewParams& p) {
      ParamGradient n = natural_grad_cholesky(g, p);
      n.d_skew = -n.d_skew;
      return n;
    };
  } else if (!fault.empty()) {
    throw ConfigError("unknown fault '" + fault + "'");
  }
  return print_check_table(std::cout, run_checks(o)) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variational inference with closed-skew-normal approximations"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "fit a variational approximation; writes params.json, trace.csv, meta.json");
  f->add_option("--config", fit.config, "INI run configuration");
  f->add_option("--set", fit.set, "override a setting, e.g. --set optimizer.step=0.01");
  f->add_option("--seed", fit.seed, "optimizer seed (overrides run.seed)");
  f->add_option("--out", fit.out, "output directory (overrides run.out)");
  f->add_flag("--quick", fit.quick, "cap the run at 5000 iterations");

  std::string params;
  long n = 1000, coordinate = 1, points = 1024;
  std::uint64_t seed = 1;
  std::string out = ".";
  auto* s = app.add_subcommand("sample", "draw from a fitted approximation into samples.csv");
  s->add_option("--params", params, "params.json from fit")->required();
  s->add_option("--n", n, "number of draws");
  s->add_option("--seed", seed, "random seed");
  s->add_option("--out", out, "output directory");

  std::optional<double> lo, hi;
  auto* d = app.add_subcommand("density", "tabulate one exact marginal density into density.csv");
  d->add_option("--params", params, "params.json from fit")->required();
  d->add_option("--coordinate", coordinate, "1-based coordinate");
  d->add_option("--lo", lo, "grid start (default mean - 8 sd)");
  d->add_option("--hi", hi, "grid end (default mean + 8 sd)");
  d->add_option("--points", points, "grid size");
  d->add_option("--out", out, "output directory");

  std::string a, b, ga, gb;
  std::optional<double> bandwidth;
  auto* m = app.add_subcommand("metrics", "MMD and M* between sample sets, or IAE between density grids");
  m->add_option("--a", a, "first sample CSV");
  m->add_option("--b", b, "second sample CSV");
  m->add_option("--grid-a", ga, "approximate density grid CSV (x,density)");
  m->add_option("--grid-b", gb, "reference density grid CSV (x,density)");
  m->add_option("--bandwidth", bandwidth, "RBF bandwidth (default: median heuristic)");
  m->add_option("--out", out, "output directory");

  bool quick = false;
  std::string fault;
  auto* c = app.add_subcommand("check", "run the built-in verification battery");
  c->add_flag("--quick", quick, "restrict to d <= 2 and smaller Monte Carlo sizes");
  c->add_option("--seed", seed, "random seed");
  c->add_option("--inject-fault", fault, "deliberately break a routine (natural-sign)")->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*f) return cmd_fit(fit, std::vector<std::string>(argv, argv + argc));
    if (*s) return cmd_sample(params, n, seed, out);
    if (*d) return cmd_density(params, coordinate, lo, hi, points, out);
    if (*m) return cmd_metrics(a, b, ga, gb, bandwidth, out);
    if (*c) return cmd_check(quick, seed, fault);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalAbort& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
