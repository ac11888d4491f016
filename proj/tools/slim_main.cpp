#include <cstdio>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "slim/bench.hpp"
#include "slim/svg.hpp"

namespace {

using namespace slim;

std::vector<std::string> world_targets(const World& world) {
  std::vector<std::string> targets;
  for (const auto& o : world.objects) {
    if (o.is_target) targets.push_back(o.cls);
  }
  return targets;
}

int cmd_run(const std::string& config_path, const std::string& method_name,
            const std::string& target, int trials_override, int64_t seed_override,
            const std::string& out_path, const std::string& svg_dir) {
  TrialConfig cfg = TrialConfig::load(config_path);
  if (trials_override > 0) cfg.trials = trials_override;
  if (seed_override >= 0) cfg.master_seed = static_cast<uint64_t>(seed_override);
  const MethodSpec method = MethodSpec::from_name(method_name);

  std::vector<TrialResult> results;
  for (int trial = 0; trial < cfg.trials; ++trial) {
    uint64_t th = 0;
    for (char c : target) th = th * 131 + static_cast<unsigned char>(c);
    const uint64_t seed = derive_seed(cfg.master_seed, th, static_cast<uint64_t>(trial));

    if (!svg_dir.empty()) {
      TrialTrace trace;
      results.push_back(run_trial(cfg, method, target, seed, &trace));
      std::filesystem::create_directories(svg_dir);
      const std::string stem =
          svg_dir + "/" + method.name + "_" + target + "_t" + std::to_string(trial);
      for (std::size_t f = 0; f < trace.belief_frames.size(); ++f) {
        const std::vector<ViewPose> seen(trace.view_poses.begin(),
                                         trace.view_poses.begin() + std::min(f + 1, trace.view_poses.size()));
        emit_svg_snapshot(trace.world, trace.belief_frames[f], trace.robot_trail, seen,
                          stem + "_step" + std::to_string(f) + ".svg");
        export_belief_csv(trace.belief_frames[f], trace.world.objects,
                          stem + "_step" + std::to_string(f) + ".csv");
      }
    } else {
      results.push_back(run_trial(cfg, method, target, seed));
    }
    const auto& r = results.back();
    std::printf("%s %s seed=%llu: %s views=%d time=%.1fs path=%.2fm\n", r.method.c_str(),
                r.target.c_str(), static_cast<unsigned long long>(r.seed),
                r.success ? "success" : ("FAIL(" + r.failure_reason + ")").c_str(), r.views,
                r.time_s, r.path_m);
  }
  emit_csv(results, out_path);
  std::printf("wrote %s\n", out_path.c_str());
  return 0;
}

int cmd_bench(const std::string& config_path, bool all, std::vector<std::string> methods_arg,
              int trials_override, int64_t seed_override, int threads,
              const std::string& out_path) {
  TrialConfig cfg = TrialConfig::load(config_path);
  if (trials_override > 0) cfg.trials = trials_override;
  if (seed_override >= 0) cfg.master_seed = static_cast<uint64_t>(seed_override);
  if (threads > 0) cfg.threads = threads;

  std::vector<MethodSpec> methods;
  if (all || methods_arg.empty()) {
    methods = MethodSpec::all();
  } else {
    for (const auto& name : methods_arg) methods.push_back(MethodSpec::from_name(name));
  }

  const World world = load_world(cfg.world_path, 0);
  const auto targets = world_targets(world);
  if (targets.empty()) {
    std::fprintf(stderr, "world has no target objects\n");
    return 1;
  }

  const auto results = run_benchmark(cfg, methods, targets);
  emit_csv(results, out_path);

  std::printf("%-18s %-16s %8s %9s %9s %8s\n", "method", "target", "views", "time_s", "path_m",
              "success");
  for (const auto& s : summarize(results)) {
    std::printf("%-18s %-16s %8.2f %9.1f %9.2f %8.2f\n", s.method.c_str(), s.target.c_str(),
                s.mean_views, s.mean_time_s, s.mean_path_m, s.success_rate);
  }
  std::printf("wrote %s\n", out_path.c_str());
  return 0;
}

int cmd_relations(const std::string& config_path) {
  TrialConfig cfg = TrialConfig::load(config_path);
  const World world = load_world(cfg.world_path, 0);
  const CommonsenseTable table = CommonsenseTable::load(cfg.commonsense_path);
  std::vector<std::string> classes;
  for (const auto& o : world.objects) classes.push_back(o.cls);
  const auto graph = build_factor_graph(classes, table);
  const auto relations = run_belief_propagation(graph);
  std::printf("belief propagation: %s after %d iteration(s)%s\n",
              relations.converged ? "converged" : "max iterations reached", relations.iterations,
              relations.exact ? " (exact clique-tree pass)" : "");
  for (const auto& line : format_relation_table(world, relations)) {
    std::printf("%s\n", line.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SLiM active object search benchmark"};
  app.require_subcommand(1);

  std::string config_path, out_path = "results.csv", svg_dir, method_name, target;
  std::vector<std::string> methods_arg;
  int trials = -1, threads = 0;
  int64_t seed = -1;
  bool all = false;

  auto* run = app.add_subcommand("run", "Run one method against one target");
  run->add_option("--config", config_path, "benchmark config JSON")->required();
  run->add_option("--method", method_name, "method name")->required();
  run->add_option("--target", target, "target object class")->required();
  run->add_option("--trials", trials, "trial count override");
  run->add_option("--seed", seed, "master seed override");
  run->add_option("--out", out_path, "results CSV path");
  run->add_option("--svg-dir", svg_dir, "emit per-step SVG/CSV frames into this directory");

  auto* bench = app.add_subcommand("bench", "Run the full method/target matrix");
  bench->add_option("--config", config_path, "benchmark config JSON")->required();
  bench->add_flag("--all", all, "all five methods (default when --method is omitted)");
  bench->add_option("--method", methods_arg, "subset of methods to run");
  bench->add_option("--trials", trials, "trial count override");
  bench->add_option("--seed", seed, "master seed override");
  bench->add_option("--threads", threads, "worker thread count");
  bench->add_option("--out", out_path, "results CSV path");

  auto* rel = app.add_subcommand("relations", "Print inferred relation beliefs");
  rel->add_option("--config", config_path, "benchmark config JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, method_name, target, trials, seed, out_path, svg_dir);
    if (bench->parsed()) return cmd_bench(config_path, all, methods_arg, trials, seed, threads, out_path);
    if (rel->parsed()) return cmd_relations(config_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
