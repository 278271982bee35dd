// One subset simulation run on the normal-response model, printing the
// failure probability and the fractional sensitivities at a few thresholds.

#include <gradsens/app.hpp>

#include <cstdio>

int main()
{
  using namespace gradsens;

  const ModelSpec spec = make_model_spec("normal");
  SsConfig cfg;
  cfg.seed = 42;

  const std::vector<double> thresholds{ 2.0, 3.0, 3.5, 4.0 };
  const SsResult ss = run_subset_simulation(spec, cfg);
  std::vector<double> f;
  for (double y : thresholds)
    f.push_back(interpolate_ccdf(ss.ccdf, y));
  const auto curve = normalize_curve(
    sensitivity_subsim(ss.bins, KernelSpec::scott(), thresholds), f, spec.interest_params());

  std::printf("%8s %12s", "y", "F");
  for (const auto& p : curve.params)
    std::printf(" %12s", p.name.c_str());
  std::printf("\n");
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    std::printf("%8.3f %12.4e", thresholds[k], f[k]);
    for (const auto& p : curve.params)
      std::printf(" %12.4f", p.fractional[k]);
    std::printf("\n");
  }
  std::printf("%zu model evaluations\n", ss.evaluations);
}
