#pragma once

#include "../model.hpp"

#include <cmath>

namespace gradsens::models {

//! Y = a1 + sqrt(a2^2 - a3^2) X1 + a3 X2 with X1, X2 iid N(0,1), so that
//! Y ~ N(a1, a2^2) regardless of a3.
class NormalModel : public ResponseModel
{
public:
  NormalModel(double alpha1 = 1.0, double alpha2 = 1.0, double alpha3 = 0.5)
    : alpha_{ alpha1, alpha2, alpha3 }
  {
    if (!valid(alpha_))
      throw ConfigError("normal model requires alpha2^2 > alpha3^2");
  }

  std::string name() const override { return "normal"; }
  Eigen::Index input_dim() const override { return 2; }
  std::vector<Parameter> parameters() const override
  {
    return { { "alpha1", alpha_[0] },
             { "alpha2", alpha_[1] },
             { "alpha3", alpha_[2] } };
  }

  double response(const Vector& x, std::span<const double> p) const override
  {
    check(p);
    return p[0] + std::sqrt(p[1] * p[1] - p[2] * p[2]) * x(0) + p[2] * x(1);
  }

  bool has_analytic_gradient() const override { return true; }

  double response_with_gradient(const Vector& x,
                                std::span<const double> p,
                                std::span<double> grad) const override
  {
    check(p);
    const double c = std::sqrt(p[1] * p[1] - p[2] * p[2]);
    grad[0] = 1.0;
    grad[1] = p[1] / c * x(0);
    grad[2] = -p[2] / c * x(0) + x(1);
    return p[0] + c * x(0) + p[2] * x(1);
  }

private:
  static bool valid(std::span<const double> p)
  {
    return p[1] * p[1] > p[2] * p[2];
  }

  static void check(std::span<const double> p)
  {
    if (!valid(p))
      throw ModelError("normal: alpha2^2 > alpha3^2 violated");
  }

  std::array<double, 3> alpha_;
};

} // namespace gradsens::models
