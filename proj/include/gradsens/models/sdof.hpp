#pragma once

#include "../model.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <numbers>
#include <vector>

namespace gradsens::models {

struct SdofConfig
{
  double omega = 2.0 * std::numbers::pi; // rad/s
  double zeta = 0.01;
  double psd = 0.86; // two-sided white-noise PSD, N^2/(rad/s)
  double dt = 0.05;  // s
  int steps = 400;   // T / dt
};

//! Linear oscillator u'' + 2 zeta omega u' + omega^2 u = W(t) from rest,
//! driven by discrete white noise W_j = sqrt(2 pi S / dt) X_j held constant
//! over each step. Response Y = max_{0<=j<n} |u(j dt)|.
//!
//! The sensitivities u_zeta = du/dzeta and u_omega = du/domega obey the same
//! operator with right-hand sides -2 omega u' and -2 zeta u' - 2 omega u.
//! All six states are propagated with the exact zero-order-hold transition
//! of the augmented system.
class SdofModel : public ResponseModel
{
public:
  using Mat6 = Eigen::Matrix<double, 6, 6>;
  using Vec6 = Eigen::Matrix<double, 6, 1>;

  struct Discretization
  {
    Mat6 phi;
    Vec6 gamma;
  };

  struct History
  {
    std::vector<double> u, u_zeta, u_omega;
  };

  explicit SdofModel(SdofConfig cfg = {})
    : cfg_(cfg)
  {
    if (!(cfg_.omega > 0.0))
      throw ConfigError("sdof: omega must be positive");
    if (!(cfg_.zeta > 0.0 && cfg_.zeta < 1.0))
      throw ConfigError("sdof: zeta must lie in (0, 1)");
    if (!(cfg_.dt > 0.0 && cfg_.psd > 0.0) || cfg_.steps < 1)
      throw ConfigError("sdof: dt, psd and steps must be positive");
    nominal_ = discretize(cfg_.zeta, cfg_.omega, cfg_.dt);
    force_scale_ = std::sqrt(2.0 * std::numbers::pi * cfg_.psd / cfg_.dt);
  }

  std::string name() const override { return "sdof"; }
  Eigen::Index input_dim() const override { return cfg_.steps; }
  std::vector<Parameter> parameters() const override
  {
    return { { "zeta", cfg_.zeta }, { "omega", cfg_.omega } };
  }
  const SdofConfig& config() const { return cfg_; }
  double force_scale() const { return force_scale_; }

  static Discretization discretize(double zeta, double omega, double dt)
  {
    Eigen::Matrix<double, 7, 7> m = Eigen::Matrix<double, 7, 7>::Zero();
    const double w2 = omega * omega;
    const double c = 2.0 * zeta * omega;
    // u, u'
    m(0, 1) = 1.0;
    m(1, 0) = -w2;
    m(1, 1) = -c;
    // u_zeta, u_zeta'
    m(2, 3) = 1.0;
    m(3, 2) = -w2;
    m(3, 3) = -c;
    m(3, 1) = -2.0 * omega;
    // u_omega, u_omega'
    m(4, 5) = 1.0;
    m(5, 4) = -w2;
    m(5, 5) = -c;
    m(5, 1) = -2.0 * zeta;
    m(5, 0) = -2.0 * omega;
    // input
    m(1, 6) = 1.0;

    const Eigen::Matrix<double, 7, 7> e = (m * dt).exp();
    return { e.topLeftCorner<6, 6>(), e.topRightCorner<6, 1>() };
  }

  double response(const Vector& x, std::span<const double> p) const override
  {
    const Discretization d = transition(p);
    double peak = 0.0;
    double u = 0.0;
    double v = 0.0;
    for (int j = 0; j + 1 < cfg_.steps; ++j) {
      const double w = force_scale_ * x(j);
      const double un = d.phi(0, 0) * u + d.phi(0, 1) * v + d.gamma(0) * w;
      const double vn = d.phi(1, 0) * u + d.phi(1, 1) * v + d.gamma(1) * w;
      u = un;
      v = vn;
      if (std::abs(u) > peak)
        peak = std::abs(u);
    }
    return peak;
  }

  bool has_analytic_gradient() const override { return true; }

  double response_with_gradient(const Vector& x,
                                std::span<const double> p,
                                std::span<double> grad) const override
  {
    const Discretization d = transition(p);
    double peak = 0.0;
    double chi = 1.0;
    double gz = 0.0;
    double gw = 0.0;
    double u = 0.0;
    double v = 0.0;
    Eigen::Matrix<double, 4, 1> sens = Eigen::Matrix<double, 4, 1>::Zero();
    const Eigen::Matrix<double, 4, 4> phi_ss = d.phi.bottomRightCorner<4, 4>();
    const Eigen::Matrix<double, 4, 2> phi_su = d.phi.bottomLeftCorner<4, 2>();
    const Eigen::Matrix<double, 4, 1> gam_s = d.gamma.tail<4>();
    for (int j = 0; j + 1 < cfg_.steps; ++j) {
      const double w = force_scale_ * x(j);
      sens = phi_ss * sens + phi_su * Eigen::Vector2d(u, v) + gam_s * w;
      const double un = d.phi(0, 0) * u + d.phi(0, 1) * v + d.gamma(0) * w;
      const double vn = d.phi(1, 0) * u + d.phi(1, 1) * v + d.gamma(1) * w;
      u = un;
      v = vn;
      if (std::abs(u) > peak) {
        peak = std::abs(u);
        chi = u > 0.0 ? 1.0 : -1.0;
        gz = sens(0);
        gw = sens(2);
      }
    }
    grad[0] = chi * gz;
    grad[1] = chi * gw;
    return peak;
  }

  //! Full time histories u(j dt), u_zeta(j dt), u_omega(j dt) for j < n.
  History simulate(const Vector& x, std::span<const double> p) const
  {
    const Discretization d = transition(p);
    History h;
    Vec6 s = Vec6::Zero();
    for (int j = 0; j < cfg_.steps; ++j) {
      h.u.push_back(s(0));
      h.u_zeta.push_back(s(2));
      h.u_omega.push_back(s(4));
      if (j + 1 < cfg_.steps)
        s = d.phi * s + d.gamma * (force_scale_ * x(j));
    }
    return h;
  }

private:
  Discretization transition(std::span<const double> p) const
  {
    if (!(p[0] > 0.0 && p[0] < 1.0 && p[1] > 0.0))
      throw ModelError("sdof: parameters out of range");
    if (p[0] == cfg_.zeta && p[1] == cfg_.omega)
      return nominal_;
    return discretize(p[0], p[1], cfg_.dt);
  }

  SdofConfig cfg_;
  Discretization nominal_;
  double force_scale_ = 0.0;
};

} // namespace gradsens::models
