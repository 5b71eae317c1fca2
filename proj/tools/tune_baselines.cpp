// Grid search over the classical controllers' gains. Prints a ranked table;
// the shipped defaults are not modified.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "dobnet/harness/commands.hpp"

namespace {

using namespace dobnet;

struct Trial {
  std::string method;
  double kp, kd, extra;  // extra: observer gain (dobc) or ki (rise)
  double reward = 0.0;
  double radius = 0.0;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sweep DOBC / RISE-like gains on a disturbance scenario"};
  std::string config_path, scenario = "small";
  int episodes = 20;
  std::uint64_t seed = 500;
  int top = 10;
  app.add_option("--config", config_path, "INI configuration file");
  app.add_option("--scenario", scenario, "none, small or large");
  app.add_option("--episodes", episodes, "Episodes per gain setting");
  app.add_option("--seed", seed, "Evaluation seed");
  app.add_option("--top", top, "Rows to print per method");
  CLI11_PARSE(app, argc, argv);

  try {
    const harness::Config base = config_path.empty() ? harness::Config{} : harness::load_config(config_path);
    const auto source = harness::ScenarioSource::simulated(base, scenario);
    const std::vector<double> kps = {20, 40, 80, 120, 160};
    const std::vector<double> kds = {30, 60, 90, 120};
    std::vector<Trial> trials;

    auto run = [&](const std::string& method, const harness::Config& cfg, Trial t) {
      const auto recs = harness::evaluate(harness::classical_method(method), source, episodes, seed, cfg);
      const auto s = harness::distance_stats(recs);
      t.reward = s.mean_episode_reward;
      t.radius = s.converged_radius;
      trials.push_back(t);
    };

    for (double kp : kps) {
      for (double kd : kds) {
        for (double c : {1.0, 2.0, 5.0, 10.0}) {
          harness::Config cfg = base;
          cfg.gains.kp.setConstant(kp);
          cfg.gains.kd.setConstant(kd);
          cfg.observer_gain = c;
          run("dobc", cfg, {"dobc", kp, kd, c});
        }
        for (double ki : {0.0, 10.0, 20.0, 40.0}) {
          harness::Config cfg = base;
          cfg.gains.kp.setConstant(kp);
          cfg.gains.kd.setConstant(kd);
          cfg.gains.ki.setConstant(ki);
          run("rise", cfg, {"rise", kp, kd, ki});
        }
      }
    }

    std::sort(trials.begin(), trials.end(), [](const Trial& a, const Trial& b) { return a.reward > b.reward; });
    for (const std::string method : {"dobc", "rise"}) {
      std::printf("%s (%s, %d episodes)\n%8s %8s %8s %12s %10s\n", method.c_str(), scenario.c_str(), episodes, "kp",
                  "kd", method == "dobc" ? "c" : "ki", "reward", "radius");
      int shown = 0;
      for (const auto& t : trials) {
        if (t.method != method || shown++ >= top) continue;
        std::printf("%8.1f %8.1f %8.1f %12.2f %10.4f\n", t.kp, t.kd, t.extra, t.reward, t.radius);
      }
      std::printf("\n");
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
