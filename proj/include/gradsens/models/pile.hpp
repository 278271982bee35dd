#pragma once

#include "../model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace gradsens::models {

//! Constants of the pile serviceability problem (kN, m, rad).
struct PileConfig
{
  double diameter = 0.9;   // B (alpha1)
  double mean_phi = 0.5585; // mu (alpha2), 32 degrees
  double depth = 8.0;      // D
  double cov_phi = 0.17;
  double corr_length = 4.0;
  double layer = 0.1;   // d
  int layers = 120;     // soil column of 12 m
  double f50 = 800.0;   // design load
  double y_allow = 0.025; // allowable displacement, 25 mm
  double gamma_soil = 20.0;
  double gamma_water = 9.81;
  double gamma_concrete = 24.0;
  double k_ratio = 1.0; // (K/K0)_n
  double k0 = 1.0;
  double a = 4.0;
  double b = 0.4;
  double zeta_gs = 0.6;
  double zeta_gd = 1.0;
  double zeta_gr = 1.0;
  double zeta_qr = 1.0;
};

//! Serviceability of a bored pile in sand with a lognormal friction-angle
//! field: phi'(z_i) = mu exp(u + s (L X)_i), L L^T = R, R_ij =
//! exp(-2 |z_i - z_j| / lambda). Response Y = F50 / Q_sls.
//!
//! No analytic gradient; sensitivities come from central differences.
class PileModel : public ResponseModel
{
public:
  struct Breakdown
  {
    double phi_bar;
    double n_q;
    double n_gamma;
    double q_side;
    double q_tip;
    double weight;
    double q_sls;
    double y;
  };

  explicit PileModel(PileConfig cfg = {})
    : cfg_(cfg)
  {
    if (!(cfg_.diameter > 0 && cfg_.mean_phi > 0 && cfg_.depth > 0 &&
          cfg_.cov_phi > 0 && cfg_.corr_length > 0 && cfg_.layer > 0 &&
          cfg_.layers > 0 && cfg_.f50 > 0))
      throw ConfigError("pile model properties must be positive");
    const double v = 1.0 + cfg_.cov_phi * cfg_.cov_phi;
    log_mean_ = -std::log(std::sqrt(v));
    log_sd_ = std::sqrt(std::log(v));

    const int n = cfg_.layers;
    depth_.resize(n);
    for (int i = 0; i < n; ++i)
      depth_[i] = (i + 0.5) * cfg_.layer;
    chol_ = cholesky_lower(correlation());
    side_layers_ = static_cast<int>(std::floor(cfg_.depth / cfg_.layer + 1e-9));
    if (side_layers_ > n)
      throw ConfigError("pile: soil column shallower than the pile");
  }

  std::string name() const override { return "pile"; }
  Eigen::Index input_dim() const override { return cfg_.layers; }
  std::vector<Parameter> parameters() const override
  {
    return { { "B", cfg_.diameter }, { "mu", cfg_.mean_phi } };
  }
  const PileConfig& config() const { return cfg_; }
  const std::vector<double>& layer_depths() const { return depth_; }
  const Matrix& cholesky_factor() const { return chol_; }
  double log_mean() const { return log_mean_; }
  double log_sd() const { return log_sd_; }

  SymMatrix correlation() const
  {
    const int n = cfg_.layers;
    Matrix r(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        r(i, j) =
          std::exp(-2.0 / cfg_.corr_length * std::abs(depth_[i] - depth_[j]));
    return SymMatrix(std::move(r));
  }

  //! ln(phi'_i / mu) for every layer.
  Vector log_field(const Vector& x) const
  {
    Vector f = chol_.triangularView<Eigen::Lower>() * x;
    return (log_sd_ * f).array() + log_mean_;
  }

  double response(const Vector& x, std::span<const double> p) const override
  {
    return terms(log_field(x), p[0], p[1]).y;
  }

  Breakdown breakdown(const Vector& x, std::span<const double> p) const
  {
    return terms(log_field(x), p[0], p[1]);
  }

  //! Node weights of the tip-zone integral of phi' over [D - min(8B, D),
  //! D + 3.5B]. Between layer midpoints the field is a Catmull-Rom cubic
  //! (C1 in depth), above the first midpoint it is held constant. The
  //! weights sum to the zone length.
  std::vector<double> tip_weights(double diameter) const
  {
    const double lo = cfg_.depth - std::min(8.0 * diameter, cfg_.depth);
    const double hi = cfg_.depth + 3.5 * diameter;
    const int n = cfg_.layers;
    const double d = cfg_.layer;
    if (n < 3 || hi > depth_[n - 1])
      throw ModelError("pile: tip influence zone extends below the soil column");
    std::vector<double> w(n, 0.0);
    w[0] += std::max(0.0, std::min(depth_[0], hi) - lo);

    // Tangent (per unit t) at node i as weights on node values.
    auto add_tangent = [&](int i, double c) {
      if (i == 0) {
        w[1] += c;
        w[0] -= c;
      } else if (i == n - 1) {
        w[n - 1] += c;
        w[n - 2] -= c;
      } else {
        w[i + 1] += 0.5 * c;
        w[i - 1] -= 0.5 * c;
      }
    };
    // Antiderivatives of the cubic Hermite basis on t in [0, 1].
    auto h00 = [](double t) { return t * t * t * t / 2 - t * t * t + t; };
    auto h10 = [](double t) { return t * t * t * t / 4 - 2 * t * t * t / 3 + t * t / 2; };
    auto h01 = [](double t) { return -t * t * t * t / 2 + t * t * t; };
    auto h11 = [](double t) { return t * t * t * t / 4 - t * t * t / 3; };

    for (int i = 0; i + 1 < n; ++i) {
      const double s = std::max(depth_[i], lo);
      const double e = std::min(depth_[i + 1], hi);
      if (!(e > s))
        continue;
      const double t0 = (s - depth_[i]) / d;
      const double t1 = (e - depth_[i]) / d;
      w[i] += d * (h00(t1) - h00(t0));
      w[i + 1] += d * (h01(t1) - h01(t0));
      add_tangent(i, d * (h10(t1) - h10(t0)));
      add_tangent(i + 1, d * (h11(t1) - h11(t0)));
    }
    return w;
  }

private:
  Breakdown terms(const Vector& lnf, double diameter, double mu) const
  {
    if (!(diameter > 0.0 && mu > 0.0))
      throw ModelError("pile: B and mu must be positive");
    const double pi = std::numbers::pi;
    const double buoyant = cfg_.gamma_soil - cfg_.gamma_water;

    double side = 0.0;
    for (int i = 0; i < side_layers_; ++i)
      side += buoyant * depth_[i] * std::tan(mu * std::exp(lnf(i)));

    const std::vector<double> w = tip_weights(diameter);
    double wsum = 0.0;
    double acc = 0.0;
    for (int i = 0; i < cfg_.layers; ++i) {
      if (w[i] == 0.0)
        continue;
      acc += w[i] * mu * std::exp(lnf(i));
      wsum += w[i];
    }
    if (!(wsum > 0.0))
      throw ModelError("pile: tip influence zone outside the soil column");

    Breakdown out{};
    out.phi_bar = acc / wsum;
    const double t = std::tan(out.phi_bar);
    const double tq = std::tan(pi / 4.0 + out.phi_bar / 2.0);
    out.n_q = tq * tq * std::exp(pi * t);
    out.n_gamma = 2.0 * (out.n_q + 1.0) * t;
    const double zeta_qs = 1.0 + t;
    const double one_minus_sin = 1.0 - std::sin(out.phi_bar);
    const double zeta_qd = 1.0 + 2.0 * t * one_minus_sin * one_minus_sin *
                                   std::atan(cfg_.depth / diameter);

    const double area = 0.25 * pi * diameter * diameter;
    out.q_side = pi * diameter * cfg_.layer * cfg_.k_ratio * cfg_.k0 * side;
    out.q_tip = area * (0.5 * diameter * buoyant * out.n_gamma * cfg_.zeta_gs *
                          cfg_.zeta_gd * cfg_.zeta_gr +
                        cfg_.depth * buoyant * out.n_q * zeta_qs * zeta_qd *
                          cfg_.zeta_qr);
    out.weight =
      area * cfg_.depth * (cfg_.gamma_concrete - cfg_.gamma_water);
    out.q_sls = 0.625 * cfg_.a * std::pow(cfg_.y_allow / diameter, cfg_.b) *
                (out.q_side + out.q_tip - out.weight);
    if (!(out.q_sls > 0.0))
      throw ModelError("pile: non-positive serviceability resistance");
    out.y = cfg_.f50 / out.q_sls;
    return out;
  }

  PileConfig cfg_;
  double log_mean_ = 0.0;
  double log_sd_ = 0.0;
  std::vector<double> depth_;
  Matrix chol_;
  int side_layers_ = 0;
};

} // namespace gradsens::models
