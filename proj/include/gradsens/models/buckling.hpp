#pragma once

#include "../model.hpp"

#include <cmath>
#include <vector>

namespace gradsens::models {

//! Tridiagonal shear-building pattern: story s (0-based, story 0 at the
//! base) adds `v[s]` to entry (s,s) and, for s >= 1, to (s-1,s-1) with
//! -v[s] on the (s-1,s) coupling.
inline Matrix shear_pattern(std::span<const double> v)
{
  const auto n = static_cast<Eigen::Index>(v.size());
  Matrix m = Matrix::Zero(n, n);
  for (Eigen::Index s = 0; s < n; ++s) {
    m(s, s) += v[s];
    if (s >= 1) {
      m(s - 1, s - 1) += v[s];
      m(s - 1, s) -= v[s];
      m(s, s - 1) -= v[s];
    }
  }
  return m;
}

struct BucklingConfig
{
  int stories = 5;
  double stiffness = 250.0; // kN/mm, every story except the second
  double height = 3500.0;   // mm
  double load_mean = 100.0; // kN (alpha1)
  double stiffness2 = 250.0; // kN/mm (alpha2)
  double load_cov = 0.1;
};

//! Global buckling of a shear building under lognormal floor loads
//! W_i = w exp(a + b X_i). Response Y = lambda0 / lambda, lambda the
//! smallest eigenvalue of K u = lambda Kg u.
//!
//! lambda0 is lambda with every W_i at its mean w (evaluated at the
//! construction parameters) and is held fixed when parameters vary.
class BucklingModel : public ResponseModel
{
public:
  explicit BucklingModel(BucklingConfig cfg = {})
    : cfg_(cfg)
  {
    if (cfg_.stories < 2)
      throw ConfigError("buckling model needs at least 2 stories");
    if (!(cfg_.stiffness > 0 && cfg_.height > 0 && cfg_.load_mean > 0 &&
          cfg_.stiffness2 > 0 && cfg_.load_cov > 0))
      throw ConfigError("buckling model properties must be positive");
    const double v = 1.0 + cfg_.load_cov * cfg_.load_cov;
    a_ = -std::log(std::sqrt(v));
    b_ = std::sqrt(std::log(v));

    std::vector<double> ks = story_stiffness(cfg_.stiffness2);
    std::vector<double> kg(cfg_.stories, cfg_.load_mean / cfg_.height);
    lambda0_ = smallest_gen_eigenpair(SymMatrix(shear_pattern(ks)),
                                      SymMatrix(shear_pattern(kg)))
                 .value;
  }

  std::string name() const override { return "buckling"; }
  Eigen::Index input_dim() const override { return cfg_.stories; }
  std::vector<Parameter> parameters() const override
  {
    return { { "w", cfg_.load_mean }, { "k2", cfg_.stiffness2 } };
  }

  const BucklingConfig& config() const { return cfg_; }
  double lambda0() const { return lambda0_; }
  double log_mean() const { return a_; }
  double log_sd() const { return b_; }

  double response(const Vector& x, std::span<const double> p) const override
  {
    const System sys = assemble(x, p);
    return lambda0_ / smallest_gen_eigenpair(sys.k, sys.kg).value;
  }

  bool has_analytic_gradient() const override { return true; }

  double response_with_gradient(const Vector& x,
                                std::span<const double> p,
                                std::span<double> grad) const override
  {
    const System sys = assemble(x, p);
    const EigenPair pair = smallest_gen_eigenpair(sys.k, sys.kg);
    const EigenDerivativeSolver deriv(sys.k, sys.kg, pair);
    const auto n = static_cast<Eigen::Index>(cfg_.stories);
    const Matrix zero = Matrix::Zero(n, n);

    // dKg/dw: story values exp(a + b x_i) / H
    std::vector<double> dkg(cfg_.stories);
    for (int s = 0; s < cfg_.stories; ++s)
      dkg[s] = std::exp(a_ + b_ * x(s)) / cfg_.height;
    // dK/dk2: unit second story
    std::vector<double> dk(cfg_.stories, 0.0);
    dk[1] = 1.0;

    const double lam = pair.value;
    const double scale = -lambda0_ / (lam * lam);
    grad[0] = scale * deriv.solve(zero, shear_pattern(dkg));
    grad[1] = scale * deriv.solve(shear_pattern(dk), zero);
    return lambda0_ / lam;
  }

  //! Closed form lambda0 max_i { W_i / (k_i H) } valid for the shear building.
  double closed_form_response(const Vector& x, std::span<const double> p) const
  {
    const std::vector<double> ks = story_stiffness(p[1]);
    double worst = -1.0;
    for (int s = 0; s < cfg_.stories; ++s)
      worst = std::max(worst,
                       p[0] * std::exp(a_ + b_ * x(s)) / (ks[s] * cfg_.height));
    return lambda0_ * worst;
  }

private:
  struct System
  {
    SymMatrix k;
    SymMatrix kg;
  };

  std::vector<double> story_stiffness(double k2) const
  {
    std::vector<double> ks(cfg_.stories, cfg_.stiffness);
    ks[1] = k2;
    return ks;
  }

  System assemble(const Vector& x, std::span<const double> p) const
  {
    if (!(p[0] > 0.0 && p[1] > 0.0))
      throw ModelError("buckling: parameters must be positive");
    std::vector<double> kg(cfg_.stories);
    for (int s = 0; s < cfg_.stories; ++s)
      kg[s] = p[0] * std::exp(a_ + b_ * x(s)) / cfg_.height;
    return { SymMatrix(shear_pattern(story_stiffness(p[1]))),
             SymMatrix(shear_pattern(kg)) };
  }

  BucklingConfig cfg_;
  double a_ = 0.0;
  double b_ = 0.0;
  double lambda0_ = 0.0;
};

} // namespace gradsens::models
