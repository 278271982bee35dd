#pragma once

#include "model.hpp"
#include "numkit.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace gradsens {

enum class CorrelationRule
{
  normal_optimal, // a_i = 0.5 (1 + u_i / v_i)
  fixed           // a_i = SsConfig::fixed_correlation at every level
};

struct SsConfig
{
  int levels = 3;          // m
  double p0 = 0.1;         // level probability
  std::size_t samples = 1000; // N per level
  std::uint64_t seed = 0;
  CorrelationRule rule = CorrelationRule::normal_optimal;
  double fixed_correlation = 0.8;
  unsigned workers = 1; // threads for the chains of one level

  //! Number of seeds (= chains) per level, p0 N.
  std::size_t chains() const
  {
    return static_cast<std::size_t>(std::llround(p0 * static_cast<double>(samples)));
  }
  std::size_t chain_length() const { return samples / chains(); }

  void validate() const
  {
    if (levels < 1)
      throw ConfigError("subset simulation needs at least one level");
    if (!(p0 > 0.0 && p0 <= 0.5))
      throw ConfigError("level probability p0 must lie in (0, 0.5]");
    if (samples < 2)
      throw ConfigError("need at least 2 samples per level");
    const double nc = p0 * static_cast<double>(samples);
    if (std::abs(nc - std::round(nc)) > 1e-9 || chains() < 1)
      throw ConfigError("p0 * N must be a positive integer");
    if (samples % chains() != 0)
      throw ConfigError("N must be a multiple of p0 * N");
    if (rule == CorrelationRule::fixed &&
        !(fixed_correlation > 0.0 && fixed_correlation <= 1.0))
      throw ConfigError("fixed MCMC correlation must lie in (0, 1]");
  }
};

struct CorrelationParam
{
  double a; // correlation with the current state
  double s; // sqrt(1 - a^2)
};

//! Conditional-sampling correlation for level i >= 1:
//! a_i = 0.5 (1 + u_i / v_i), u_i = ccdf^-1(p0^i), v_i = ccdf^-1(p0^(i+1)).
inline CorrelationParam correlation_param(int level, double p0)
{
  if (level < 1)
    throw ConfigError("correlation_param: level must be >= 1");
  const double u = std_normal_ccdf_inv(std::pow(p0, level));
  const double v = std_normal_ccdf_inv(std::pow(p0, level + 1));
  const double a = 0.5 * (1.0 + u / v);
  return { a, std::sqrt(std::max(0.0, 1.0 - a * a)) };
}

//! One conditional-sampling step with an explicit innovation z: the
//! candidate a x + s z replaces `current` when its response reaches
//! `threshold`, otherwise `current` is repeated.
inline SampleRecord mcmc_step(const ModelSpec& spec,
                              const SampleRecord& current,
                              double threshold,
                              CorrelationParam corr,
                              const Vector& z)
{
  const Vector cand = corr.a * current.x + corr.s * z;
  const double y = spec.response(cand);
  if (!std::isfinite(y))
    throw ModelError(spec.name() + ": non-finite response in MCMC step");
  if (y >= threshold)
    return evaluate(spec, cand);
  return current;
}

inline SampleRecord mcmc_step(const ModelSpec& spec,
                              const SampleRecord& current,
                              double threshold,
                              CorrelationParam corr,
                              RngStream& rng)
{
  return mcmc_step(spec, current, threshold, corr,
                   rng.normal_vector(spec.input_dim()));
}

struct Bin
{
  std::vector<SampleRecord> records;
  double probability = 0.0; // P_i
  int level = 0;
};

//! Threshold bins B_0..B_{m-1}: B_i = {y_i <= Y < y_{i+1}} holds the
//! (1 - p0) N level-i samples that were not promoted to seeds, and the last
//! bin holds all N samples of the final level.
struct BinPartition
{
  double p0 = 0.1;
  std::vector<double> thresholds; // y_1 < ... < y_{m-1}
  std::vector<Bin> bins;
  //! Non-promoted samples whose response equals the next threshold.
  std::vector<std::size_t> ties;

  std::size_t total_records() const
  {
    std::size_t n = 0;
    for (const auto& b : bins)
      n += b.records.size();
    return n;
  }
};

//! Subset-simulation CCDF estimate at y. For y in [y_i, y_{i+1}) this is
//! p0^i times the fraction of level-i samples at or above y.
inline double ccdf_at(const BinPartition& bp, double y)
{
  const auto& th = bp.thresholds;
  const auto level = static_cast<std::size_t>(
    std::upper_bound(th.begin(), th.end(), y) - th.begin());
  double f = 0.0;
  for (std::size_t i = level; i < bp.bins.size(); ++i) {
    const auto& bin = bp.bins[i];
    if (i == level) {
      std::size_t above = 0;
      for (const auto& r : bin.records)
        above += r.y >= y ? 1 : 0;
      f += bin.probability * (static_cast<double>(above) /
                              static_cast<double>(bin.records.size()));
    } else {
      f += bin.probability;
    }
  }
  return f;
}

struct CcdfCurve
{
  std::vector<double> y; // ascending
  std::vector<double> f; // non-increasing
};

struct SsResult
{
  SsConfig config;
  BinPartition bins;
  CcdfCurve ccdf;
  std::vector<std::vector<SampleRecord>> levels;
  std::size_t evaluations = 0;
  //! More than 1% of a level's seeds tie with the threshold.
  bool degenerate = false;
};

namespace detail {

//! Indices of `recs` sorted by descending response, stable in index.
inline std::vector<std::size_t> descending_order(const std::vector<SampleRecord>& recs)
{
  std::vector<std::size_t> idx(recs.size());
  std::iota(idx.begin(), idx.end(), std::size_t{ 0 });
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return recs[a].y > recs[b].y;
  });
  return idx;
}

inline std::uint64_t chain_stream(int level, std::size_t chain)
{
  return (static_cast<std::uint64_t>(level) << 32) |
         static_cast<std::uint64_t>(chain);
}

//! CCDF at every generated response value, computed level by level from
//! sorted level samples.
inline CcdfCurve assemble_ccdf(const BinPartition& bp,
                               const std::vector<std::vector<SampleRecord>>& levels)
{
  const std::size_t m = levels.size();
  std::vector<std::vector<double>> sorted(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (const auto& r : levels[i])
      sorted[i].push_back(r.y);
    std::sort(sorted[i].begin(), sorted[i].end());
  }

  CcdfCurve c;
  for (const auto& lv : levels)
    for (const auto& r : lv)
      c.y.push_back(r.y);
  std::sort(c.y.begin(), c.y.end());
  c.f.reserve(c.y.size());
  const auto& th = bp.thresholds;
  for (double y : c.y) {
    const auto i = static_cast<std::size_t>(
      std::upper_bound(th.begin(), th.end(), y) - th.begin());
    const auto& s = sorted[i];
    const auto above = static_cast<double>(
      s.end() - std::lower_bound(s.begin(), s.end(), y));
    c.f.push_back(std::pow(bp.p0, static_cast<double>(i)) * above /
                  static_cast<double>(s.size()));
  }
  return c;
}

} // namespace detail

//! Subset simulation with conditional-sampling MCMC.
//!
//! Level 0 is direct Monte Carlo (stream 0). At each later level i the
//! p0 N highest samples of level i-1 seed one chain each; chain c runs
//! 1/p0 steps on stream (i << 32 | c). Threshold b_i is the (p0 N)-th
//! largest response of level i-1. Every generated record carries its
//! gradient, so the run costs exactly m N model evaluations.
inline SsResult run_subset_simulation(const ModelSpec& spec, const SsConfig& cfg)
{
  cfg.validate();
  const std::size_t n = cfg.samples;
  const std::size_t nc = cfg.chains();
  const std::size_t len = cfg.chain_length();
  const Eigen::Index dim = spec.input_dim();

  SsResult out;
  out.config = cfg;
  out.bins.p0 = cfg.p0;

  std::vector<SampleRecord> current;
  current.reserve(n);
  {
    RngStream rng(cfg.seed, 0);
    for (std::size_t k = 0; k < n; ++k)
      current.push_back(evaluate(spec, rng.normal_vector(dim)));
    out.evaluations += n;
  }

  for (int level = 0; level < cfg.levels; ++level) {
    out.levels.push_back(current);
    const bool last = level + 1 == cfg.levels;
    if (last) {
      Bin bin;
      bin.level = level;
      bin.probability = std::pow(cfg.p0, level);
      bin.records = std::move(current);
      out.bins.bins.push_back(std::move(bin));
      break;
    }

    const auto order = detail::descending_order(current);
    const double threshold = current[order[nc - 1]].y;
    std::vector<SampleRecord> seeds;
    seeds.reserve(nc);
    std::vector<bool> promoted(n, false);
    for (std::size_t k = 0; k < nc; ++k) {
      promoted[order[k]] = true;
      seeds.push_back(current[order[k]]);
    }

    Bin bin;
    bin.level = level;
    bin.probability = std::pow(cfg.p0, level) * (1.0 - cfg.p0);
    std::size_t ties = 0;
    for (std::size_t k = 0; k < n; ++k) {
      if (promoted[k])
        continue;
      ties += current[k].y == threshold ? 1 : 0;
      bin.records.push_back(std::move(current[k]));
    }
    out.bins.bins.push_back(std::move(bin));
    out.bins.thresholds.push_back(threshold);
    out.bins.ties.push_back(ties);
    if (static_cast<double>(ties) > 0.01 * static_cast<double>(nc))
      out.degenerate = true;

    const int next = level + 1;
    const CorrelationParam corr =
      cfg.rule == CorrelationRule::normal_optimal
        ? correlation_param(next, cfg.p0)
        : CorrelationParam{ cfg.fixed_correlation,
                            std::sqrt(1.0 - cfg.fixed_correlation *
                                              cfg.fixed_correlation) };

    std::vector<SampleRecord> samples(n);
    parallel_for(
      nc,
      [&](std::size_t c) {
        RngStream rng(cfg.seed, detail::chain_stream(next, c));
        const SampleRecord* state = &seeds[c];
        for (std::size_t step = 0; step < len; ++step) {
          SampleRecord& slot = samples[c * len + step];
          slot = mcmc_step(spec, *state, threshold, corr, rng);
          state = &slot;
        }
      },
      cfg.workers);
    out.evaluations += n;
    current = std::move(samples);
  }

  out.ccdf = detail::assemble_ccdf(out.bins, out.levels);
  return out;
}

} // namespace gradsens
