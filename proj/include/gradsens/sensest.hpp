#pragma once

#include "errors.hpp"
#include "model.hpp"
#include "subsim.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace gradsens {

//! Gaussian smoothing kernel with either Scott's rule or a fixed width.
struct KernelSpec
{
  enum class Width
  {
    scott,
    fixed
  };

  Width width = Width::scott;
  double fixed_width = 0.0;

  static KernelSpec scott() { return {}; }
  static KernelSpec fixed(double w)
  {
    if (!(w > 0.0))
      throw ConfigError("kernel width must be positive");
    return { Width::fixed, w };
  }

  //! Parses "scott" or "fixed:<w>".
  static KernelSpec parse(const std::string& text)
  {
    if (text == "scott")
      return scott();
    const std::string prefix = "fixed:";
    if (text.rfind(prefix, 0) == 0) {
      try {
        std::size_t used = 0;
        const std::string num = text.substr(prefix.size());
        const double w = std::stod(num, &used);
        if (used == num.size())
          return fixed(w);
      } catch (const std::logic_error&) {
      }
    }
    throw ConfigError("invalid kernel width '" + text +
                      "' (expected scott or fixed:<w>)");
  }

  std::string str() const
  {
    return width == Width::scott ? "scott"
                                 : "fixed:" + std::to_string(fixed_width);
  }
};

//! Standard normal density used as the smoothing kernel.
inline double gaussian_kernel(double t)
{
  return std::exp(-0.5 * t * t) * (0.5 * std::numbers::inv_sqrtpi *
                                   std::numbers::sqrt2);
}

//! Scott's rule w = sigma (4 / (3 n))^(1/5).
inline double scott_width(double sigma, std::size_t n)
{
  if (!(sigma > 0.0))
    throw NumericError("degenerate response: standard deviation is not positive");
  if (n < 2)
    throw ConfigError("scott_width needs at least 2 samples");
  return sigma * std::pow(4.0 / (3.0 * static_cast<double>(n)), 0.2);
}

struct ResponseMoments
{
  double mean;
  double variance;
};

struct ParamCurve
{
  std::string name;
  double alpha = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> raw;        // dF/dalpha
  std::vector<double> scaled;     // alpha dF/dalpha
  std::vector<double> fractional; // (alpha / F) dF/dalpha
};

struct SensitivityCurve
{
  std::vector<double> y;
  std::vector<double> ccdf; // companion F estimate (filled by normalize_curve)
  std::vector<ParamCurve> params;
  std::vector<double> widths; // kernel width per bin
};

namespace detail {

//! Samples of one threshold bin laid out for the kernel sums.
struct WeightedGroup
{
  std::span<const SampleRecord> records;
  double probability;
};

inline std::vector<WeightedGroup> groups_of(const BinPartition& bp)
{
  std::vector<WeightedGroup> g;
  for (const auto& b : bp.bins) {
    if (b.records.empty())
      throw ConfigError("threshold bin is empty");
    g.push_back({ b.records, b.probability });
  }
  return g;
}

inline ResponseMoments moments_of(std::span<const WeightedGroup> groups)
{
  double m1 = 0.0;
  double m2 = 0.0;
  for (const auto& g : groups) {
    double s1 = 0.0;
    double s2 = 0.0;
    for (const auto& r : g.records) {
      s1 += r.y;
      s2 += r.y * r.y;
    }
    const auto n = static_cast<double>(g.records.size());
    m1 += g.probability * (s1 / n);
    m2 += g.probability * (s2 / n);
  }
  const double var = m2 - m1 * m1;
  if (var < 0.0 && var > -1e-12 * m2)
    throw NumericError("degenerate response: variance is zero up to roundoff");
  if (var < 0.0)
    throw NumericError("negative response variance");
  return { m1, var };
}

inline SensitivityCurve kernel_estimate(std::span<const WeightedGroup> groups,
                                        const KernelSpec& kernel,
                                        std::span<const double> grid)
{
  if (groups.empty())
    throw ConfigError("no samples for sensitivity estimation");
  const std::size_t np = groups.front().records.front().g.size();

  SensitivityCurve out;
  out.y.assign(grid.begin(), grid.end());
  out.params.resize(np);
  for (auto& p : out.params)
    p.raw.assign(grid.size(), 0.0);

  double sigma = 0.0;
  if (kernel.width == KernelSpec::Width::scott)
    sigma = std::sqrt(moments_of(groups).variance);

  // Per-group contiguous copies of Y and G.
  struct Packed
  {
    std::vector<double> y;
    std::vector<double> g; // record-major, np per record
    double weight;         // P_i / N_i
    double inv_w;
  };
  std::vector<Packed> packed;
  for (const auto& grp : groups) {
    Packed p;
    const std::size_t n = grp.records.size();
    const double w = kernel.width == KernelSpec::Width::scott
                       ? scott_width(sigma, n)
                       : kernel.fixed_width;
    out.widths.push_back(w);
    p.inv_w = 1.0 / w;
    p.weight = grp.probability / static_cast<double>(n);
    p.y.reserve(n);
    p.g.reserve(n * np);
    for (const auto& r : grp.records) {
      if (r.g.size() != np)
        throw ConfigError("records disagree on the number of parameters");
      p.y.push_back(r.y);
      p.g.insert(p.g.end(), r.g.begin(), r.g.end());
    }
    packed.push_back(std::move(p));
  }

  std::vector<double> acc(np);
  for (std::size_t t = 0; t < grid.size(); ++t) {
    const double y = grid[t];
    for (const auto& p : packed) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t k = 0; k < p.y.size(); ++k) {
        const double kv = gaussian_kernel((p.y[k] - y) * p.inv_w);
        const double* g = &p.g[k * np];
        for (std::size_t j = 0; j < np; ++j)
          acc[j] += g[j] * kv;
      }
      for (std::size_t j = 0; j < np; ++j)
        out.params[j].raw[t] += p.weight * (acc[j] * p.inv_w);
    }
  }
  return out;
}

} // namespace detail

//! E[Y] and Var[Y] from the bins by total probability,
//! E[Y^r] = sum_i P_i N_i^-1 sum_k Y_ik^r.
inline ResponseMoments response_moments(const BinPartition& bp)
{
  const auto groups = detail::groups_of(bp);
  return detail::moments_of(groups);
}

//! Kernel-smoothed dF/dalpha from direct Monte Carlo samples:
//! N^-1 sum_k G_k w^-1 K((Y_k - y) / w).
inline SensitivityCurve sensitivity_direct_mc(std::span<const SampleRecord> samples,
                                              const KernelSpec& kernel,
                                              std::span<const double> grid)
{
  if (samples.size() < 2)
    throw ConfigError("direct Monte Carlo estimator needs at least 2 samples");
  const detail::WeightedGroup g{ samples, 1.0 };
  return detail::kernel_estimate({ &g, 1 }, kernel, grid);
}

//! Subset-simulation estimator: sum over bins of
//! P_i N_i^-1 sum_k G_ik w_i^-1 K((Y_ik - y) / w_i), with Scott widths from
//! the bin size and the total-probability standard deviation of Y.
inline SensitivityCurve sensitivity_subsim(const BinPartition& bp,
                                           const KernelSpec& kernel,
                                           std::span<const double> grid)
{
  const auto groups = detail::groups_of(bp);
  return detail::kernel_estimate(groups, kernel, grid);
}

//! Fills alpha dF/dalpha and (alpha / F) dF/dalpha. Entries where F is not
//! positive get NaN in the fractional column.
inline SensitivityCurve normalize_curve(SensitivityCurve curve,
                                        std::span<const double> ccdf,
                                        std::span<const Parameter> params)
{
  if (ccdf.size() != curve.y.size())
    throw ConfigError("normalize_curve: CCDF and grid sizes differ");
  if (params.size() != curve.params.size())
    throw ConfigError("normalize_curve: parameter count mismatch");
  curve.ccdf.assign(ccdf.begin(), ccdf.end());
  for (std::size_t j = 0; j < params.size(); ++j) {
    auto& pc = curve.params[j];
    pc.name = params[j].name;
    pc.alpha = params[j].value;
    pc.scaled.resize(pc.raw.size());
    pc.fractional.resize(pc.raw.size());
    for (std::size_t t = 0; t < pc.raw.size(); ++t) {
      pc.scaled[t] = pc.alpha * pc.raw[t];
      pc.fractional[t] = ccdf[t] > 0.0
                           ? pc.scaled[t] / ccdf[t]
                           : std::numeric_limits<double>::quiet_NaN();
    }
  }
  return curve;
}

} // namespace gradsens
