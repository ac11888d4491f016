#pragma once

#include <string>
#include <vector>

#include "slim/belief.hpp"
#include "slim/simworld.hpp"
#include "slim/strategy.hpp"

namespace slim {

enum class PriorMode { None, NoisyKnown };

/// One benchmark method: context usage, landmark prior handling and the
/// view utility.
struct MethodSpec {
  std::string name;
  bool use_context = true;
  PriorMode prior = PriorMode::None;
  bool landmarks_static = false;
  UtilityMode utility = UtilityMode::DS;

  static MethodSpec from_name(const std::string& name);
  static std::vector<MethodSpec> all();
};

struct TrialConfig {
  std::string world_path;
  std::string commonsense_path;
  uint64_t master_seed = 1;
  int trials = 6;
  double timeout_s = 300.0;
  double prior_noise_m = 1.0;   // offset of the noisy known prior
  double prior_sigma_m = 0.3;   // spread of prior particles around the offset point
  int particles = 100;
  double dwell_s = 1.0;
  double success_mass = 0.6;    // target mass within the gate on a true positive
  int threads = 0;              // 0 = hardware concurrency

  /// Read a JSON config; relative world/commonsense paths resolve against
  /// the config file directory.
  static TrialConfig load(const std::string& path);
};

struct TrialResult {
  std::string method;
  std::string target;
  uint64_t seed = 0;
  int views = 0;
  double time_s = 0.0;
  double path_m = 0.0;
  bool success = false;

  // not part of the CSV: diagnostics and instrumentation
  std::string failure_reason;
  long long context_pair_evals = 0;
  long long landmark_weight_updates = 0;
  int select_calls = 0;
};

/// Optional per-step capture for rendering.
struct TrialTrace {
  World world;
  std::vector<Vec2> robot_trail;
  std::vector<ViewPose> view_poses;
  std::vector<BeliefState> belief_frames;
};

TrialResult run_trial(const TrialConfig& config, const MethodSpec& method,
                      const std::string& target_class, uint64_t seed,
                      TrialTrace* trace = nullptr);

/// All (method, target, trial) cells, trials in parallel, results in a
/// deterministic order. Trial seeds depend only on (master seed, target,
/// trial index) so methods face identical worlds.
std::vector<TrialResult> run_benchmark(const TrialConfig& config,
                                       const std::vector<MethodSpec>& methods,
                                       const std::vector<std::string>& targets);

struct SummaryRow {
  std::string method;
  std::string target;
  double mean_views = 0.0;
  double mean_time_s = 0.0;
  double mean_path_m = 0.0;
  double success_rate = 0.0;
  int trials = 0;
};

std::vector<SummaryRow> summarize(const std::vector<TrialResult>& results);

/// `method,target,seed,views,time_s,path_m,success` rows sorted by
/// (method, target, seed), then one `seed=MEAN` summary row per cell.
void emit_csv(const std::vector<TrialResult>& results, const std::string& path);

/// Parse back the per-trial rows of an emitted CSV (summary rows skipped).
std::vector<TrialResult> parse_csv(const std::string& path);

/// Relation beliefs over the world's object classes, for reporting.
std::vector<std::string> format_relation_table(const World& world, const BpResult& relations);

}  // namespace slim
