#pragma once

#include "models/buckling.hpp"
#include "models/normal.hpp"
#include "models/pile.hpp"
#include "models/sdof.hpp"

#include <map>
#include <memory>
#include <string>

namespace gradsens {

inline const std::vector<std::string>& model_names()
{
  static const std::vector<std::string> names{ "normal", "buckling", "sdof",
                                               "pile" };
  return names;
}

//! Builds a named example model. `overrides` maps parameter names to values
//! that replace the nominal ones.
inline std::shared_ptr<const ResponseModel> make_model(
  const std::string& name,
  const std::map<std::string, double>& overrides = {})
{
  auto take = [&](const std::string& key, double fallback) {
    auto it = overrides.find(key);
    return it == overrides.end() ? fallback : it->second;
  };
  std::shared_ptr<const ResponseModel> model;
  if (name == "normal") {
    model = std::make_shared<models::NormalModel>(
      take("alpha1", 1.0), take("alpha2", 1.0), take("alpha3", 0.5));
  } else if (name == "buckling") {
    models::BucklingConfig cfg;
    cfg.load_mean = take("w", cfg.load_mean);
    cfg.stiffness2 = take("k2", cfg.stiffness2);
    model = std::make_shared<models::BucklingModel>(cfg);
  } else if (name == "sdof") {
    models::SdofConfig cfg;
    cfg.zeta = take("zeta", cfg.zeta);
    cfg.omega = take("omega", cfg.omega);
    model = std::make_shared<models::SdofModel>(cfg);
  } else if (name == "pile") {
    models::PileConfig cfg;
    cfg.diameter = take("B", cfg.diameter);
    cfg.mean_phi = take("mu", cfg.mean_phi);
    model = std::make_shared<models::PileModel>(cfg);
  } else {
    throw ConfigError("unknown model '" + name + "'");
  }
  for (const auto& [key, value] : overrides) {
    bool known = false;
    for (const auto& p : model->parameters())
      known = known || p.name == key;
    if (!known)
      throw ConfigError("model " + name + " has no parameter '" + key + "'");
  }
  return model;
}

//! ModelSpec for a named model with the given parameters of interest
//! (empty = all).
inline ModelSpec make_model_spec(const std::string& name,
                                 const std::vector<std::string>& of_interest = {},
                                 const std::map<std::string, double>& overrides = {})
{
  auto model = make_model(name, overrides);
  std::vector<std::size_t> idx;
  const auto params = model->parameters();
  for (const auto& want : of_interest) {
    auto it = std::find_if(params.begin(), params.end(),
                           [&](const Parameter& p) { return p.name == want; });
    if (it == params.end())
      throw ConfigError("model " + name + " has no parameter '" + want + "'");
    idx.push_back(static_cast<std::size_t>(it - params.begin()));
  }
  return ModelSpec(std::move(model), std::move(idx));
}

} // namespace gradsens
