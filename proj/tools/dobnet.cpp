// Command-line front end: train / eval / compare / gen-dist.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "dobnet/harness/commands.hpp"

namespace {

using namespace dobnet;
namespace fs = std::filesystem;

harness::Config config_from(const std::string& path) {
  return path.empty() ? harness::Config{} : harness::load_config(path);
}

std::string joined(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Disturbance-rejection control: training, evaluation and comparison"};
  app.require_subcommand(0, 1);
  bool dump = false;
  app.add_flag("--dump-defaults", dump, "Print every configuration key with its default and exit");

  std::string config_path;

  // train
  auto* train = app.add_subcommand("train", "Train a learned controller with A2C");
  std::string arch, scenario = "large";
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> steps;
  bool quiet = false;
  train->add_option("--config", config_path, "INI configuration file");
  train->add_option("--arch", arch, "Architecture: " + joined(policy::learned_arch_ids()))->required();
  train->add_option("--scenario", scenario, "Disturbance scenario: " + joined(harness::scenario_ids()));
  train->add_option("--out", out, "Output directory")->required();
  train->add_option("--seed", seed, "Overrides train.seed");
  train->add_option("--steps", steps, "Overrides train.total_env_steps");
  train->add_flag("--quiet", quiet, "Suppress progress output");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint or a classical controller");
  std::string checkpoint, method, replay;
  std::optional<int> episodes;
  std::optional<std::uint64_t> eval_seed;
  eval->add_option("--config", config_path, "INI configuration file");
  auto* ck_opt = eval->add_option("--checkpoint", checkpoint, "Trained checkpoint file");
  eval->add_option("--method", method, "Classical method: " + joined(harness::classical_method_ids()))
      ->excludes(ck_opt);
  auto* sc_opt = eval->add_option("--scenario", scenario, "Disturbance scenario: " + joined(harness::scenario_ids()));
  eval->add_option("--replay", replay, "Recorded disturbance CSV (t,fx,fy,fz)")->excludes(sc_opt);
  eval->add_option("--episodes", episodes, "Overrides eval.episodes");
  eval->add_option("--seed", eval_seed, "Overrides eval.seed");
  eval->add_option("--out", out, "Output directory")->required();

  // compare
  auto* compare = app.add_subcommand("compare", "Distance statistics across evaluation runs");
  std::vector<std::string> runs;
  compare->add_option("--runs", runs, "Evaluation output directories")->required();
  compare->add_option("--out", out, "Report path prefix; writes <out>.csv and <out>.txt")->required();

  // gen-dist
  auto* gen = app.add_subcommand("gen-dist", "Write one sampled disturbance realization as CSV");
  std::uint64_t gen_seed = 0;
  double duration = 0.0;
  gen->add_option("--config", config_path, "INI configuration file");
  gen->add_option("--scenario", scenario, "Disturbance scenario: " + joined(harness::scenario_ids()));
  gen->add_option("--seed", gen_seed, "Sampling seed");
  gen->add_option("--duration", duration, "Seconds to tabulate (default: one episode)");
  gen->add_option("--out", out, "Output CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (dump) {
      std::cout << harness::dump_defaults();
      return 0;
    }
    if (*train) {
      harness::TrainOptions o;
      o.config = config_from(config_path);
      if (seed) o.config.train.seed = *seed;
      if (steps) o.config.train.total_env_steps = *steps;
      o.arch = arch;
      o.scenario = scenario;
      o.out = out;
      o.quiet = quiet;
      const auto r = harness::run_train(o);
      std::cout << "wrote " << r.checkpoint_path.string() << " and " << r.curve_path.string() << " ("
                << r.result.env_steps << " env steps, " << r.result.episodes << " episodes)\n";
    } else if (*eval) {
      harness::EvalOptions o;
      o.config = config_from(config_path);
      if (!checkpoint.empty()) o.checkpoint = fs::path(checkpoint);
      o.method = method;
      o.scenario = scenario;
      if (!replay.empty()) o.replay = fs::path(replay);
      o.episodes = episodes.value_or(o.config.eval.episodes);
      o.seed = eval_seed.value_or(o.config.eval.seed);
      o.out = out;
      const auto recs = harness::run_eval(o);
      std::cout << "wrote " << recs.size() << " episode records to " << out << '\n';
    } else if (*compare) {
      std::vector<fs::path> dirs(runs.begin(), runs.end());
      const auto r = harness::run_compare(dirs, out);
      harness::write_report_text(std::cout, r.rows);
    } else if (*gen) {
      harness::GenDistOptions o;
      o.config = config_from(config_path);
      o.scenario = scenario;
      o.seed = gen_seed;
      o.out = out;
      o.duration = duration;
      const auto s = harness::run_gen_dist(o);
      std::cout << "wrote " << s.size() << " samples to " << out << '\n';
    } else {
      std::cout << app.help();
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
