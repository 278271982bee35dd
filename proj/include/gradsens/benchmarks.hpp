#pragma once

#include "errors.hpp"
#include "model.hpp"
#include "numkit.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace gradsens {

struct BenchmarkResult
{
  std::string provenance; // "analytic" or "crn_fd"
  std::vector<double> y;
  std::vector<double> f_ref;
  std::vector<std::string> names;
  std::vector<double> alphas;
  std::vector<std::vector<double>> df_ref; // one curve per parameter
  std::size_t samples = 0;
  double fd_step = 0.0;
};

//! Exact results for Y ~ N(a1, a2^2): F = Phi(-z), z = (y - a1) / a2,
//! dF/da1 = phi(z) / a2, dF/da2 = z phi(z) / a2, dF/da3 = 0.
inline BenchmarkResult analytic_normal(std::span<const double> grid,
                                       double a1,
                                       double a2,
                                       double a3)
{
  if (!(a2 * a2 > a3 * a3) || !(a2 > 0.0))
    throw ConfigError("analytic_normal requires alpha2 > |alpha3|");
  BenchmarkResult r;
  r.provenance = "analytic";
  r.names = { "alpha1", "alpha2", "alpha3" };
  r.alphas = { a1, a2, a3 };
  r.df_ref.assign(3, {});
  for (double y : grid) {
    const double z = (y - a1) / a2;
    const double pdf = std_normal_pdf(z);
    r.y.push_back(y);
    r.f_ref.push_back(std_normal_ccdf(z));
    r.df_ref[0].push_back(pdf / a2);
    r.df_ref[1].push_back(z * pdf / a2);
    r.df_ref[2].push_back(0.0);
  }
  return r;
}

struct BucklingBenchmarkParams
{
  int stories = 5;
  double stiffness = 250.0; // k of every story but the second
  double height = 3500.0;
  double lambda0 = 8750.0;
  double load_cov = 0.1;
  double w = 100.0;  // alpha1
  double k2 = 250.0; // alpha2
};

//! Closed-form shear-building results:
//!   P(Y < y) = Phi(x1)^(n-1) Phi(x2),
//!   x1 = [ln(k H y / (w lambda0)) - a] / b,
//!   x2 = [ln(k2 H y / (w lambda0)) - a] / b,
//! returned as F = P(Y >= y) and dF/dalpha = -dP(Y < y)/dalpha.
inline BenchmarkResult analytic_buckling(std::span<const double> grid,
                                         const BucklingBenchmarkParams& p)
{
  if (!(p.w > 0.0 && p.k2 > 0.0))
    throw ConfigError("analytic_buckling requires positive parameters");
  const double v = 1.0 + p.load_cov * p.load_cov;
  const double a = -std::log(std::sqrt(v));
  const double b = std::sqrt(std::log(v));
  const double n1 = p.stories - 1;

  BenchmarkResult r;
  r.provenance = "analytic";
  r.names = { "w", "k2" };
  r.alphas = { p.w, p.k2 };
  r.df_ref.assign(2, {});
  for (double y : grid) {
    r.y.push_back(y);
    if (!(y > 0.0)) {
      r.f_ref.push_back(1.0);
      r.df_ref[0].push_back(0.0);
      r.df_ref[1].push_back(0.0);
      continue;
    }
    const double x1 =
      (std::log(p.stiffness * p.height * y / (p.w * p.lambda0)) - a) / b;
    const double x2 = (std::log(p.k2 * p.height * y / (p.w * p.lambda0)) - a) / b;
    const double c1 = std_normal_cdf(x1);
    const double c2 = std_normal_cdf(x2);
    // phi/Phi * P(Y<y) written as products to stay finite when Phi -> 0
    const double h1 = std_normal_pdf(x1) * std::pow(c1, n1 - 1.0) * c2;
    const double h2 = std_normal_pdf(x2) * std::pow(c1, n1);
    const double dbelow_dw = -(n1 * h1 + h2) / (b * p.w);
    const double dbelow_dk2 = h2 / (b * p.k2);
    // 1 - P(Y<y) loses precision as P -> 1; use the complement directly.
    const double above = -std::expm1(n1 * std::log(c1) + std::log(c2));
    r.f_ref.push_back(above);
    r.df_ref[0].push_back(-dbelow_dw);
    r.df_ref[1].push_back(-dbelow_dk2);
  }
  return r;
}

//! Empirical exceedance fraction #{v >= y} / n of sorted values.
inline double empirical_ccdf(std::span<const double> sorted, double y)
{
  const auto above = sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), y);
  return static_cast<double>(above) / static_cast<double>(sorted.size());
}

//! Central difference of direct Monte Carlo CCDFs in parameter `param`
//! (index into spec.params()):
//!   [F(alpha (1+h)) - F(alpha (1-h))] / (2 alpha h).
//! With `common_numbers` the perturbed runs share the same inputs; otherwise
//! each side draws its own inputs (used to show the variance penalty).
inline BenchmarkResult crn_central_difference(const ModelSpec& spec,
                                              std::size_t param,
                                              std::size_t n_samples,
                                              double rel_step,
                                              std::uint64_t seed,
                                              std::span<const double> grid,
                                              bool common_numbers = true)
{
  if (!(rel_step > 0.0))
    throw ConfigError("crn_central_difference: step must be positive");
  if (param >= spec.params().size())
    throw ConfigError("crn_central_difference: parameter index out of range");
  if (n_samples < 1)
    throw ConfigError("crn_central_difference: need samples");

  const auto& model = spec.model();
  const std::vector<double> base(spec.values().begin(), spec.values().end());
  const double alpha = base[param];
  const double step = alpha != 0.0 ? alpha * rel_step : rel_step;
  std::vector<double> up = base;
  std::vector<double> down = base;
  up[param] = alpha + step;
  down[param] = alpha - step;

  std::vector<double> y0(n_samples), yp(n_samples), ym(n_samples);
  constexpr std::size_t block = 4096;
  const std::size_t blocks = (n_samples + block - 1) / block;
  const Eigen::Index dim = spec.input_dim();
  parallel_for(blocks, [&](std::size_t b) {
    // stream 2b drives the nominal/CRN inputs, 2b+1 the independent side
    RngStream rng(seed, 2 * b);
    RngStream alt(seed, 2 * b + 1);
    const std::size_t lo = b * block;
    const std::size_t hi = std::min(n_samples, lo + block);
    for (std::size_t k = lo; k < hi; ++k) {
      const Vector x = rng.normal_vector(dim);
      y0[k] = model.response(x, base);
      yp[k] = model.response(x, up);
      ym[k] = common_numbers ? model.response(x, down)
                             : model.response(alt.normal_vector(dim), down);
    }
  });
  std::sort(y0.begin(), y0.end());
  std::sort(yp.begin(), yp.end());
  std::sort(ym.begin(), ym.end());

  BenchmarkResult r;
  r.provenance = "crn_fd";
  r.samples = n_samples;
  r.fd_step = rel_step;
  r.names = { spec.params()[param].name };
  r.alphas = { alpha };
  r.df_ref.assign(1, {});
  for (double y : grid) {
    r.y.push_back(y);
    r.f_ref.push_back(empirical_ccdf(y0, y));
    r.df_ref[0].push_back((empirical_ccdf(yp, y) - empirical_ccdf(ym, y)) /
                          (2.0 * step));
  }
  return r;
}

} // namespace gradsens
