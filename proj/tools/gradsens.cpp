#include <gradsens/app.hpp>

#include <CLI11.hpp>

#include <iostream>

namespace {

void add_common(CLI::App& cmd, gradsens::RunOptions& o, std::vector<std::string>& sets)
{
  cmd.add_option("--model", o.model, "normal, buckling, sdof or pile")
    ->check(CLI::IsMember(gradsens::model_names()));
  cmd.add_option("--seed", o.seed, "base seed");
  cmd.add_option("--out", o.out, "output directory");
  cmd.add_option("--param", o.params, "sensitivity parameter (repeatable)");
  cmd.add_option("--set", sets, "parameter override name=value (repeatable)");
}

void add_ss(CLI::App& cmd, gradsens::RunOptions& o)
{
  cmd.add_option("--m", o.levels, "number of levels");
  cmd.add_option("--p0", o.p0, "level probability");
  cmd.add_option("--n", o.samples, "samples per level");
  cmd.add_option("--kernel", o.kernel, "smoothing kernel")
    ->check(CLI::IsMember({ "gaussian" }));
  cmd.add_option("--width", o.width, "scott or fixed:<w>");
}

std::map<std::string, double> parse_sets(const std::vector<std::string>& sets)
{
  std::map<std::string, double> out;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0)
      throw gradsens::ConfigError("--set expects name=value, got '" + s + "'");
    std::size_t used = 0;
    const std::string num = s.substr(eq + 1);
    double v = 0.0;
    try {
      v = std::stod(num, &used);
    } catch (const std::logic_error&) {
      used = 0;
    }
    if (num.empty() || used != num.size())
      throw gradsens::ConfigError("--set: bad number in '" + s + "'");
    out[s.substr(0, eq)] = v;
  }
  return out;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{ "Failure probability and parameter sensitivity from one subset simulation run" };
  app.set_version_flag("--version", gradsens::version);
  app.require_subcommand(1);

  gradsens::RunOptions o;
  std::vector<std::string> sets;

  auto* run = app.add_subcommand("run", "single subset simulation run");
  add_common(*run, o, sets);
  add_ss(*run, o);

  auto* repeat = app.add_subcommand("repeat", "statistics over independent runs");
  add_common(*repeat, o, sets);
  add_ss(*repeat, o);
  repeat->add_option("--runs", o.runs, "number of runs");
  repeat->add_option("--seeds", o.seeds, "explicit run seeds (overrides --runs)");
  repeat->add_option("--grid-points", o.grid_points, "aggregation grid size");

  auto* bench = app.add_subcommand("benchmark", "reference sensitivities");
  add_common(*bench, o, sets);
  bench->add_option("--samples", o.benchmark_samples, "Monte Carlo samples");
  bench->add_option("--step", o.step, "relative finite-difference step");
  bench->add_option("--grid-points", o.grid_points, "number of output thresholds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    o.overrides = parse_sets(sets);
    if (run->parsed())
      gradsens::cmd_run(o);
    else if (repeat->parsed())
      gradsens::cmd_repeat(o);
    else
      gradsens::cmd_benchmark(o);
  } catch (const gradsens::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const gradsens::ModelError& e) {
    std::cerr << "model error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
