#pragma once

#include "benchmarks.hpp"
#include "models.hpp"
#include "parallel.hpp"
#include "sensest.hpp"
#include "subsim.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace gradsens {

inline constexpr const char* version = "0.1.0";

// ---------------------------------------------------------------------------
// Output helpers
// ---------------------------------------------------------------------------

//! Shortest round-trippable text for a double (17 significant digits).
inline std::string format_number(double v)
{
  if (std::isnan(v))
    return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct CsvTable
{
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<double> values, std::vector<std::string> extra = {})
  {
    std::vector<std::string> row;
    for (double v : values)
      row.push_back(format_number(v));
    row.insert(row.end(), extra.begin(), extra.end());
    rows.push_back(std::move(row));
  }

  std::string str() const
  {
    std::ostringstream os;
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i)
        os << (i ? "," : "") << cells[i];
      os << '\n';
    };
    line(header);
    for (const auto& r : rows)
      line(r);
    return os.str();
  }
};

//! Writes through a temporary file and renames it into place.
inline void write_atomic(const std::filesystem::path& path, const std::string& text)
{
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os)
      throw Error("cannot write " + tmp);
    os << text;
    if (!os)
      throw Error("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

//! Parses a CSV written by CsvTable (no quoting).
inline CsvTable read_csv(const std::filesystem::path& path)
{
  std::ifstream is(path);
  if (!is)
    throw Error("cannot read " + path.string());
  CsvTable t;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ','))
      cells.push_back(cell);
    return cells;
  };
  if (std::getline(is, line))
    t.header = split(line);
  while (std::getline(is, line))
    if (!line.empty())
      t.rows.push_back(split(line));
  return t;
}

// ---------------------------------------------------------------------------
// Options
// ---------------------------------------------------------------------------

struct RunOptions
{
  std::string model = "normal";
  int levels = 3;
  double p0 = 0.1;
  std::size_t samples = 1000;
  std::uint64_t seed = 0;
  std::string kernel = "gaussian";
  std::string width = "scott";
  std::filesystem::path out = "out";
  std::vector<std::string> params; // empty = all
  std::map<std::string, double> overrides;

  // repeat
  std::size_t runs = 200;
  std::vector<std::uint64_t> seeds; // explicit per-run seeds (optional)
  std::size_t grid_points = 300;

  // benchmark
  std::size_t benchmark_samples = 1000000;
  double step = 0.01;
};

inline SsConfig ss_config(const RunOptions& o)
{
  SsConfig c;
  c.levels = o.levels;
  c.p0 = o.p0;
  c.samples = o.samples;
  c.seed = o.seed;
  c.workers = worker_count();
  c.validate();
  return c;
}

inline KernelSpec kernel_of(const RunOptions& o)
{
  if (o.kernel != "gaussian")
    throw ConfigError("unsupported kernel '" + o.kernel + "'");
  return KernelSpec::parse(o.width);
}

inline nlohmann::ordered_json config_json(const RunOptions& o, const ModelSpec& spec)
{
  nlohmann::ordered_json j;
  j["model"] = o.model;
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  for (const auto& p : spec.params())
    params[p.name] = p.value;
  j["params"] = params;
  std::vector<std::string> names;
  for (const auto& p : spec.interest_params())
    names.push_back(p.name);
  j["sensitivity_params"] = names;
  j["m"] = o.levels;
  j["p0"] = o.p0;
  j["n"] = o.samples;
  j["seed"] = o.seed;
  j["kernel"] = o.kernel;
  j["width"] = o.width;
  j["out"] = o.out.string();
  return j;
}

// ---------------------------------------------------------------------------
// Single run
// ---------------------------------------------------------------------------

struct RunOutput
{
  SsResult ss;
  SensitivityCurve curve;
};

inline RunOutput single_run(const ModelSpec& spec,
                            const SsConfig& cfg,
                            const KernelSpec& kernel)
{
  RunOutput out{ run_subset_simulation(spec, cfg), {} };
  const auto& grid = out.ss.ccdf.y;
  const auto params = spec.interest_params();
  out.curve = normalize_curve(sensitivity_subsim(out.ss.bins, kernel, grid),
                              out.ss.ccdf.f, params);
  return out;
}

inline void write_run_files(const RunOptions& o,
                            const ModelSpec& spec,
                            const RunOutput& r,
                            double wall_seconds)
{
  std::filesystem::create_directories(o.out);

  auto manifest = nlohmann::ordered_json::object();
  manifest["command"] = "run";
  manifest["config"] = config_json(o, spec);
  manifest["code_version"] = version;
  manifest["wall_time_s"] = wall_seconds;
  manifest["evaluations"] = r.ss.evaluations;
  manifest["thresholds"] = r.ss.bins.thresholds;
  manifest["kernel_widths"] = r.curve.widths;
  manifest["threshold_ties"] = r.ss.bins.ties;
  manifest["degenerate_thresholds"] = r.ss.degenerate;
  write_atomic(o.out / "manifest.json", manifest.dump(2) + "\n");

  CsvTable ccdf{ { "y(response)", "F(-)" }, {} };
  for (std::size_t k = 0; k < r.ss.ccdf.y.size(); ++k)
    ccdf.add({ r.ss.ccdf.y[k], r.ss.ccdf.f[k] });
  write_atomic(o.out / "ccdf.csv", ccdf.str());

  for (std::size_t j = 0; j < r.curve.params.size(); ++j) {
    const auto& pc = r.curve.params[j];
    CsvTable sens{ { "y(response)", "F(-)", "dF_dalpha(1/param)",
                     "alpha_dF_dalpha(-)", "frac_sensitivity(-)" },
                   {} };
    for (std::size_t k = 0; k < r.curve.y.size(); ++k)
      sens.add({ r.curve.y[k], r.curve.ccdf[k], pc.raw[k], pc.scaled[k],
                 pc.fractional[k] });
    write_atomic(o.out / ("sensitivity_" + pc.name + ".csv"), sens.str());

    CsvTable scatter{ { "bin(-)", "y(response)", "dY_dalpha(response/param)",
                        "alpha_dY_dalpha(response)" },
                      {} };
    for (std::size_t b = 0; b < r.ss.bins.bins.size(); ++b)
      for (const auto& rec : r.ss.bins.bins[b].records)
        scatter.add({ static_cast<double>(b), rec.y, rec.g[j], pc.alpha * rec.g[j] });
    write_atomic(o.out / ("scatter_" + pc.name + ".csv"), scatter.str());
  }
}

inline void cmd_run(const RunOptions& o)
{
  const auto t0 = std::chrono::steady_clock::now();
  const ModelSpec spec = make_model_spec(o.model, o.params, o.overrides);
  const SsConfig cfg = ss_config(o);
  const KernelSpec kernel = kernel_of(o);
  const RunOutput r = single_run(spec, cfg, kernel);
  const double wall =
    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_run_files(o, spec, r, wall);
}

// ---------------------------------------------------------------------------
// Repeated runs
// ---------------------------------------------------------------------------

//! CCDF of one run at y by linear interpolation of log F between generated
//! values. Below the smallest sample F = 1; above the largest it is NaN.
inline double interpolate_ccdf(const CcdfCurve& c, double y)
{
  if (c.y.empty() || y > c.y.back())
    return std::numeric_limits<double>::quiet_NaN();
  if (y < c.y.front())
    return 1.0;
  // last index with value <= y, and first with value > y
  const auto hi = static_cast<std::size_t>(
    std::upper_bound(c.y.begin(), c.y.end(), y) - c.y.begin());
  const std::size_t lo = hi - 1;
  if (hi == c.y.size() || c.y[lo] == y)
    return c.f[lo];
  const double t = (y - c.y[lo]) / (c.y[hi] - c.y[lo]);
  return std::exp((1.0 - t) * std::log(c.f[lo]) + t * std::log(c.f[hi]));
}

//! `points` rank quantiles of the sorted sample values, duplicates dropped.
inline std::vector<double> quantile_grid(std::span<const double> sorted,
                                         std::size_t points)
{
  std::vector<double> g;
  if (sorted.empty() || points == 0)
    return g;
  if (points == 1 || sorted.size() == 1)
    return { sorted.front() };
  for (std::size_t k = 0; k < points; ++k) {
    const double pos = static_cast<double>(k) *
                       static_cast<double>(sorted.size() - 1) /
                       static_cast<double>(points - 1);
    const double v = sorted[static_cast<std::size_t>(std::llround(pos))];
    if (g.empty() || v > g.back())
      g.push_back(v);
  }
  return g;
}

struct Band
{
  std::vector<double> mean, sd;
  std::vector<std::size_t> count;
};

struct RepeatSummary
{
  std::vector<double> grid;
  std::vector<std::uint64_t> seeds;
  Band ccdf;
  std::vector<std::string> names;
  std::vector<double> alphas;
  std::vector<Band> raw, scaled, fractional;
  std::size_t evaluations = 0;
  std::size_t degenerate_runs = 0;
};

namespace detail {

//! Mean and sample standard deviation over runs, skipping NaN entries.
inline Band reduce(const std::vector<std::vector<double>>& per_run, std::size_t n)
{
  Band b;
  b.mean.assign(n, std::numeric_limits<double>::quiet_NaN());
  b.sd.assign(n, std::numeric_limits<double>::quiet_NaN());
  b.count.assign(n, 0);
  for (std::size_t t = 0; t < n; ++t) {
    double s = 0.0;
    std::size_t c = 0;
    for (const auto& run : per_run)
      if (std::isfinite(run[t])) {
        s += run[t];
        ++c;
      }
    b.count[t] = c;
    if (c == 0)
      continue;
    const double mean = s / static_cast<double>(c);
    double ss = 0.0;
    for (const auto& run : per_run)
      if (std::isfinite(run[t]))
        ss += (run[t] - mean) * (run[t] - mean);
    b.mean[t] = mean;
    b.sd[t] = c > 1 ? std::sqrt(ss / static_cast<double>(c - 1)) : 0.0;
  }
  return b;
}

} // namespace detail

inline std::vector<std::uint64_t> repeat_seeds(const RunOptions& o)
{
  std::vector<std::uint64_t> seeds = o.seeds;
  if (seeds.empty())
    for (std::size_t r = 0; r < o.runs; ++r)
      seeds.push_back(o.seed + r);
  if (seeds.size() < 2)
    throw ConfigError("repeat needs at least 2 runs");
  std::vector<std::uint64_t> sorted = seeds;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ConfigError("repeat: run seeds must differ");
  return seeds;
}

//! R independent runs aggregated on a fixed grid of response values. Every
//! run evaluates its kernel estimator directly on the grid and its CCDF by
//! log-linear interpolation.
inline RepeatSummary repeat_runs(const ModelSpec& spec,
                                 const SsConfig& cfg,
                                 const KernelSpec& kernel,
                                 const std::vector<std::uint64_t>& seeds,
                                 std::vector<double> grid)
{
  RepeatSummary s;
  s.seeds = seeds;
  s.grid = std::move(grid);
  const auto params = spec.interest_params();
  for (const auto& p : params) {
    s.names.push_back(p.name);
    s.alphas.push_back(p.value);
  }
  const std::size_t np = params.size();
  const std::size_t runs = seeds.size();

  struct PerRun
  {
    std::vector<double> f;
    std::vector<std::vector<double>> raw, scaled, frac;
    std::size_t evaluations = 0;
    bool degenerate = false;
  };
  std::vector<PerRun> results(runs);

  auto one = [&](std::size_t r, const std::vector<double>& grid) {
    SsConfig c = cfg;
    c.seed = seeds[r];
    c.workers = 1;
    const SsResult ss = run_subset_simulation(spec, c);
    PerRun& out = results[r];
    out.evaluations = ss.evaluations;
    out.degenerate = ss.degenerate;
    for (double y : grid)
      out.f.push_back(interpolate_ccdf(ss.ccdf, y));
    const auto curve =
      normalize_curve(sensitivity_subsim(ss.bins, kernel, grid), out.f, params);
    for (const auto& pc : curve.params) {
      out.raw.push_back(pc.raw);
      out.scaled.push_back(pc.scaled);
      out.frac.push_back(pc.fractional);
    }
  };

  parallel_for(runs, [&](std::size_t r) { one(r, s.grid); });

  const std::size_t n = s.grid.size();
  std::vector<std::vector<double>> fs;
  for (const auto& r : results) {
    fs.push_back(r.f);
    s.evaluations += r.evaluations;
    s.degenerate_runs += r.degenerate ? 1 : 0;
  }
  s.ccdf = detail::reduce(fs, n);
  for (std::size_t j = 0; j < np; ++j) {
    std::vector<std::vector<double>> a, b, c;
    for (const auto& r : results) {
      a.push_back(r.raw[j]);
      b.push_back(r.scaled[j]);
      c.push_back(r.frac[j]);
    }
    s.raw.push_back(detail::reduce(a, n));
    s.scaled.push_back(detail::reduce(b, n));
    s.fractional.push_back(detail::reduce(c, n));
  }
  return s;
}

//! Grid from the rank quantiles of the first run's samples.
inline RepeatSummary repeat_runs(const ModelSpec& spec,
                                 const SsConfig& cfg,
                                 const KernelSpec& kernel,
                                 const std::vector<std::uint64_t>& seeds,
                                 std::size_t grid_points)
{
  SsConfig c = cfg;
  c.seed = seeds.at(0);
  const SsResult first = run_subset_simulation(spec, c);
  return repeat_runs(spec, cfg, kernel, seeds, quantile_grid(first.ccdf.y, grid_points));
}

inline void write_repeat_files(const RunOptions& o,
                               const ModelSpec& spec,
                               const RepeatSummary& s,
                               double wall_seconds)
{
  std::filesystem::create_directories(o.out);
  auto manifest = nlohmann::ordered_json::object();
  manifest["command"] = "repeat";
  manifest["config"] = config_json(o, spec);
  manifest["config"]["runs"] = s.seeds.size();
  manifest["config"]["grid_points"] = o.grid_points;
  manifest["seeds"] = s.seeds;
  manifest["code_version"] = version;
  manifest["wall_time_s"] = wall_seconds;
  manifest["evaluations"] = s.evaluations;
  manifest["degenerate_runs"] = s.degenerate_runs;
  write_atomic(o.out / "manifest.json", manifest.dump(2) + "\n");

  CsvTable ccdf{ { "y(response)", "F_mean(-)", "F_sd(-)", "F_lo(-)", "F_hi(-)",
                   "runs(-)" },
                 {} };
  for (std::size_t t = 0; t < s.grid.size(); ++t)
    ccdf.add({ s.grid[t], s.ccdf.mean[t], s.ccdf.sd[t],
               s.ccdf.mean[t] - s.ccdf.sd[t], s.ccdf.mean[t] + s.ccdf.sd[t],
               static_cast<double>(s.ccdf.count[t]) });
  write_atomic(o.out / "repeat_ccdf.csv", ccdf.str());

  for (std::size_t j = 0; j < s.names.size(); ++j) {
    CsvTable t{ { "y(response)", "F_mean(-)", "dF_dalpha_mean(1/param)",
                  "dF_dalpha_sd(1/param)", "alpha_dF_dalpha_mean(-)",
                  "alpha_dF_dalpha_sd(-)", "frac_mean(-)", "frac_sd(-)",
                  "runs(-)" },
                {} };
    for (std::size_t k = 0; k < s.grid.size(); ++k)
      t.add({ s.grid[k], s.ccdf.mean[k], s.raw[j].mean[k], s.raw[j].sd[k],
              s.scaled[j].mean[k], s.scaled[j].sd[k], s.fractional[j].mean[k],
              s.fractional[j].sd[k], static_cast<double>(s.fractional[j].count[k]) });
    write_atomic(o.out / ("repeat_sensitivity_" + s.names[j] + ".csv"), t.str());
  }
}

inline void cmd_repeat(const RunOptions& o)
{
  const auto t0 = std::chrono::steady_clock::now();
  const ModelSpec spec = make_model_spec(o.model, o.params, o.overrides);
  const SsConfig cfg = ss_config(o);
  const KernelSpec kernel = kernel_of(o);
  const auto seeds = repeat_seeds(o);
  if (o.grid_points < 2)
    throw ConfigError("repeat needs at least 2 grid points");
  const RepeatSummary s = repeat_runs(spec, cfg, kernel, seeds, o.grid_points);
  const double wall =
    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_repeat_files(o, spec, s, wall);
}

// ---------------------------------------------------------------------------
// Benchmarks
// ---------------------------------------------------------------------------

//! Log-spaced exceedance levels from 0.5 down to f_min.
inline std::vector<double> probability_levels(double f_min, std::size_t points)
{
  std::vector<double> f;
  const double hi = std::log(0.5);
  const double lo = std::log(f_min);
  for (std::size_t k = 0; k < points; ++k)
    f.push_back(std::exp(hi + (lo - hi) * static_cast<double>(k) /
                                static_cast<double>(std::max<std::size_t>(points - 1, 1))));
  return f;
}

//! y with ccdf(y) = f by bisection on a non-increasing function.
template<class Ccdf>
double invert_ccdf(Ccdf&& ccdf, double f, double lo, double hi)
{
  while (ccdf(hi) > f)
    hi += 2.0 * (hi - lo);
  while (ccdf(lo) < f)
    lo -= 2.0 * (hi - lo);
  for (int it = 0; it < 200 && hi - lo > 1e-14 * std::abs(hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (ccdf(mid) > f ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline BenchmarkResult benchmark_for(const ModelSpec& spec,
                                     const std::string& param,
                                     std::size_t n_samples,
                                     double rel_step,
                                     std::uint64_t seed,
                                     std::size_t grid_points)
{
  const std::size_t j = spec.index_of(param);
  const auto v = spec.values();
  auto select = [&](BenchmarkResult all) {
    BenchmarkResult r = all;
    r.names = { all.names[j] };
    r.alphas = { all.alphas[j] };
    r.df_ref = { all.df_ref[j] };
    r.samples = n_samples;
    r.fd_step = rel_step;
    return r;
  };

  if (spec.name() == "normal") {
    std::vector<double> grid;
    for (double f : probability_levels(1e-5, grid_points))
      grid.push_back(v[0] + v[1] * std_normal_ccdf_inv(f));
    return select(analytic_normal(grid, v[0], v[1], v[2]));
  }
  if (spec.name() == "buckling") {
    const auto& m = dynamic_cast<const models::BucklingModel&>(spec.model());
    BucklingBenchmarkParams p;
    p.stories = m.config().stories;
    p.stiffness = m.config().stiffness;
    p.height = m.config().height;
    p.load_cov = m.config().load_cov;
    p.lambda0 = m.lambda0();
    p.w = v[0];
    p.k2 = v[1];
    auto f = [&](double y) {
      return analytic_buckling(std::span<const double>(&y, 1), p).f_ref[0];
    };
    std::vector<double> grid;
    for (double level : probability_levels(1e-5, grid_points))
      grid.push_back(invert_ccdf(f, level, 0.5, 1.5));
    return select(analytic_buckling(grid, p));
  }

  // No closed form: CRN central differences on a grid from nominal quantiles.
  std::vector<double> pilot;
  {
    const std::size_t n = std::min<std::size_t>(n_samples, 100000);
    RngStream rng(seed ^ 0x9e3779b97f4a7c15ULL, 0);
    for (std::size_t k = 0; k < n; ++k)
      pilot.push_back(spec.response(rng.normal_vector(spec.input_dim())));
    std::sort(pilot.begin(), pilot.end());
  }
  const double f_min = std::max(100.0 / static_cast<double>(n_samples),
                                10.0 / static_cast<double>(pilot.size()));
  std::vector<double> grid;
  for (double level : probability_levels(f_min, grid_points)) {
    const auto idx = static_cast<std::size_t>(
      std::floor((1.0 - level) * static_cast<double>(pilot.size() - 1)));
    if (grid.empty() || pilot[idx] > grid.back())
      grid.push_back(pilot[idx]);
  }
  return crn_central_difference(spec, j, n_samples, rel_step, seed, grid);
}

inline void cmd_benchmark(const RunOptions& o)
{
  const auto t0 = std::chrono::steady_clock::now();
  const ModelSpec spec = make_model_spec(o.model, {}, o.overrides);
  if (!(o.step > 0.0))
    throw ConfigError("--step must be positive");
  if (o.benchmark_samples < 1000)
    throw ConfigError("--samples must be at least 1000");
  std::vector<std::string> params = o.params;
  if (params.empty())
    for (const auto& p : spec.params())
      params.push_back(p.name);

  std::filesystem::create_directories(o.out);
  std::vector<BenchmarkResult> results;
  for (const auto& name : params)
    results.push_back(benchmark_for(spec, name, o.benchmark_samples, o.step,
                                    o.seed, o.grid_points));

  auto manifest = nlohmann::ordered_json::object();
  manifest["command"] = "benchmark";
  manifest["config"] = config_json(o, spec);
  manifest["config"]["sensitivity_params"] = params;
  manifest["config"]["samples"] = o.benchmark_samples;
  manifest["config"]["step"] = o.step;
  manifest["config"]["grid_points"] = o.grid_points;
  manifest["code_version"] = version;
  auto prov = nlohmann::ordered_json::object();
  for (const auto& r : results)
    prov[r.names[0]] = r.provenance;
  manifest["provenance"] = prov;
  manifest["wall_time_s"] =
    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_atomic(o.out / "manifest.json", manifest.dump(2) + "\n");

  for (const auto& r : results) {
    CsvTable t{ { "y(response)", "F_ref(-)", "dF_dalpha(1/param)",
                  "alpha_dF_dalpha(-)", "frac_sensitivity(-)", "provenance" },
                {} };
    for (std::size_t k = 0; k < r.y.size(); ++k) {
      const double scaled = r.alphas[0] * r.df_ref[0][k];
      const double frac = r.f_ref[k] > 0.0
                            ? scaled / r.f_ref[k]
                            : std::numeric_limits<double>::quiet_NaN();
      t.add({ r.y[k], r.f_ref[k], r.df_ref[0][k], scaled, frac }, { r.provenance });
    }
    write_atomic(o.out / ("benchmark_" + r.names[0] + ".csv"), t.str());
  }
}

} // namespace gradsens
