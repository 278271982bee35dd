#pragma once

#include "errors.hpp"
#include "numkit.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace gradsens {

struct Parameter
{
  std::string name;
  double value;
};

//! One input draw with its response and the response gradient with respect
//! to every sensitivity parameter of interest.
struct SampleRecord
{
  Vector x;
  double y = 0.0;
  std::vector<double> g;
};

//! Contract implemented by every response model Y = f(x, alpha).
//!
//! Implementations are immutable after construction and must be safe to call
//! concurrently.
class ResponseModel
{
public:
  virtual ~ResponseModel() = default;

  virtual std::string name() const = 0;
  virtual Eigen::Index input_dim() const = 0;
  //! Parameter names and the values the model was built with.
  virtual std::vector<Parameter> parameters() const = 0;

  //! Y = f(x, params); `params` is ordered like parameters().
  virtual double response(const Vector& x,
                          std::span<const double> params) const = 0;

  virtual bool has_analytic_gradient() const { return false; }

  //! Y and dY/d(param_j) for every parameter. `grad` has one slot per
  //! parameter. Only called when has_analytic_gradient() is true.
  virtual double response_with_gradient(const Vector& x,
                                        std::span<const double> params,
                                        std::span<double> grad) const
  {
    (void)x;
    (void)params;
    (void)grad;
    throw ModelError(name() + ": no analytic gradient");
  }
};

//! A response model bound to parameter values and the subset of parameters
//! whose sensitivities are requested.
class ModelSpec
{
public:
  //! Relative step used when a model has no analytic gradient.
  static constexpr double default_fd_step = 1e-3;

  ModelSpec(std::shared_ptr<const ResponseModel> model,
            std::vector<std::size_t> of_interest = {},
            double fd_rel_step = default_fd_step)
    : model_(std::move(model))
    , fd_rel_step_(fd_rel_step)
  {
    if (!model_)
      throw ConfigError("ModelSpec: null model");
    params_ = model_->parameters();
    std::set<std::string> names;
    for (const auto& p : params_)
      if (!names.insert(p.name).second)
        throw ConfigError("ModelSpec: duplicate parameter name " + p.name);
    if (of_interest.empty())
      for (std::size_t j = 0; j < params_.size(); ++j)
        of_interest.push_back(j);
    for (auto j : of_interest)
      if (j >= params_.size())
        throw ConfigError("ModelSpec: parameter index out of range");
    of_interest_ = std::move(of_interest);
    values_.reserve(params_.size());
    for (const auto& p : params_)
      values_.push_back(p.value);
    if (!(fd_rel_step_ > 0.0))
      throw ConfigError("ModelSpec: finite-difference step must be positive");
  }

  const ResponseModel& model() const { return *model_; }
  std::shared_ptr<const ResponseModel> model_ptr() const { return model_; }
  std::string name() const { return model_->name(); }
  Eigen::Index input_dim() const { return model_->input_dim(); }
  const std::vector<Parameter>& params() const { return params_; }
  std::span<const double> values() const { return values_; }
  const std::vector<std::size_t>& of_interest() const { return of_interest_; }
  double fd_rel_step() const { return fd_rel_step_; }

  //! Parameters of interest, in gradient order.
  std::vector<Parameter> interest_params() const
  {
    std::vector<Parameter> out;
    for (auto j : of_interest_)
      out.push_back(params_[j]);
    return out;
  }

  std::size_t index_of(const std::string& name) const
  {
    for (std::size_t j = 0; j < params_.size(); ++j)
      if (params_[j].name == name)
        return j;
    throw ConfigError("model " + model_->name() + " has no parameter '" +
                      name + "'");
  }

  double response(const Vector& x) const
  {
    check_dim(x);
    try {
      return model_->response(x, values_);
    } catch (const NumericError& e) {
      throw ModelError(model_->name() + ": " + e.what());
    }
  }

  void check_dim(const Vector& x) const
  {
    if (x.size() != model_->input_dim())
      throw ConfigError("input dimension mismatch for model " + model_->name());
  }

private:
  std::shared_ptr<const ResponseModel> model_;
  std::vector<Parameter> params_;
  std::vector<double> values_;
  std::vector<std::size_t> of_interest_;
  double fd_rel_step_;
};

namespace detail {

inline void check_record(const ModelSpec& spec, const SampleRecord& r)
{
  if (!std::isfinite(r.y))
    throw ModelError(spec.name() + ": non-finite response");
  for (double g : r.g)
    if (!std::isfinite(g))
      throw ModelError(spec.name() + ": non-finite response gradient");
}

} // namespace detail

//! Central finite-difference gradient in each parameter of interest:
//! g_j = [f(alpha_j (1 + h)) - f(alpha_j (1 - h))] / (2 alpha_j h).
//! A parameter equal to zero uses the absolute step h instead.
inline SampleRecord evaluate_fd_gradient(const ModelSpec& spec,
                                         const Vector& x,
                                         double rel_step)
try {
  if (!(rel_step > 0.0))
    throw ConfigError("evaluate_fd_gradient: rel_step must be positive");
  spec.check_dim(x);

  SampleRecord rec;
  rec.x = x;
  rec.y = spec.model().response(x, spec.values());
  std::vector<double> p(spec.values().begin(), spec.values().end());
  for (auto j : spec.of_interest()) {
    const double a = p[j];
    const double step = a != 0.0 ? a * rel_step : rel_step;
    p[j] = a + step;
    const double up = spec.model().response(x, p);
    p[j] = a - step;
    const double down = spec.model().response(x, p);
    p[j] = a;
    rec.g.push_back((up - down) / (2.0 * step));
  }
  detail::check_record(spec, rec);
  return rec;
} catch (const NumericError& e) {
  throw ModelError(spec.name() + ": " + e.what());
}

//! Response and gradient for every parameter of interest at the same x.
inline SampleRecord evaluate(const ModelSpec& spec, const Vector& x)
try {
  spec.check_dim(x);
  const auto& m = spec.model();
  if (!m.has_analytic_gradient())
    return evaluate_fd_gradient(spec, x, spec.fd_rel_step());

  std::vector<double> grad(spec.params().size(), 0.0);
  SampleRecord rec;
  rec.x = x;
  rec.y = m.response_with_gradient(x, spec.values(), grad);
  rec.g.reserve(spec.of_interest().size());
  for (auto j : spec.of_interest())
    rec.g.push_back(grad[j]);
  detail::check_record(spec, rec);
  return rec;
} catch (const NumericError& e) {
  throw ModelError(spec.name() + ": " + e.what());
}

} // namespace gradsens
