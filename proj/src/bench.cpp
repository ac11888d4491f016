#include "slim/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace slim {

MethodSpec MethodSpec::from_name(const std::string& name) {
  for (auto& m : all()) {
    if (m.name == name) return m;
  }
  throw std::invalid_argument("unknown method: " + name);
}

std::vector<MethodSpec> MethodSpec::all() {
  return {
      {"UDS", /*use_context=*/false, PriorMode::None, /*landmarks_static=*/false, UtilityMode::DS},
      {"IDS-Known-Static", true, PriorMode::NoisyKnown, true, UtilityMode::DS},
      {"IDS-Known-Dynamic", true, PriorMode::NoisyKnown, false, UtilityMode::DS},
      {"IDS-Unknown", true, PriorMode::None, false, UtilityMode::DS},
      {"IHS-Unknown", true, PriorMode::None, false, UtilityMode::HS},
  };
}

TrialConfig TrialConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": JSON parse error: " + e.what());
  }
  TrialConfig cfg;
  const auto dir = std::filesystem::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp.string() : (dir / fp).string();
  };
  cfg.world_path = resolve(j.at("world").get<std::string>());
  cfg.commonsense_path = resolve(j.at("commonsense").get<std::string>());
  cfg.master_seed = j.value("seed", cfg.master_seed);
  cfg.trials = j.value("trials", cfg.trials);
  cfg.timeout_s = j.value("timeout_s", cfg.timeout_s);
  cfg.prior_noise_m = j.value("prior_noise_m", cfg.prior_noise_m);
  cfg.prior_sigma_m = j.value("prior_sigma_m", cfg.prior_sigma_m);
  cfg.particles = j.value("particles", cfg.particles);
  cfg.dwell_s = j.value("dwell_s", cfg.dwell_s);
  cfg.success_mass = j.value("success_mass", cfg.success_mass);
  cfg.threads = j.value("threads", cfg.threads);
  if (cfg.trials < 1) throw std::runtime_error("trials must be >= 1");
  if (!(cfg.timeout_s > 0.0)) throw std::runtime_error("timeout must be positive");
  return cfg;
}

namespace {

World trial_world(const TrialConfig& config, const std::string& target_class, uint64_t seed,
                  int* target_index) {
  World base = load_world(config.world_path, derive_seed(seed, 0x9a5e));
  World w;
  w.map = std::move(base.map);
  w.detector = base.detector;
  w.start_position = base.start_position;
  w.start_heading = base.start_heading;
  bool found = false;
  for (auto& obj : base.objects) {
    if (obj.is_target && obj.cls != target_class) continue;
    if (obj.is_target) {
      *target_index = static_cast<int>(w.objects.size());
      found = true;
    }
    w.objects.push_back(std::move(obj));
  }
  if (!found) throw std::runtime_error("target class not in world: " + target_class);
  return w;
}

}  // namespace

TrialResult run_trial(const TrialConfig& config, const MethodSpec& method,
                      const std::string& target_class, uint64_t seed, TrialTrace* trace) {
  TrialResult result;
  result.method = method.name;
  result.target = target_class;
  result.seed = seed;

  int target_index = -1;
  const World world = trial_world(config, target_class, seed, &target_index);

  const CommonsenseTable table = CommonsenseTable::load(config.commonsense_path);
  std::vector<std::string> classes;
  for (const auto& o : world.objects) classes.push_back(o.cls);
  BpResult relations;
  if (classes.size() >= 2) {
    relations = run_belief_propagation(build_factor_graph(classes, table));
  }

  PotentialParams params;
  params.use_context = method.use_context;
  const SlimFilter filter(world, relations, params);

  Rng rng(derive_seed(seed, 0x7411));

  // target uniform; landmarks per prior mode
  BeliefState state;
  state.neighbors = filter.neighbors();
  state.weight_updates.assign(world.objects.size(), 0);
  for (std::size_t i = 0; i < world.objects.size(); ++i) {
    const int id = static_cast<int>(i);
    if (id == target_index || method.prior == PriorMode::None) {
      state.sets.push_back(filter.uniform_set(id, config.particles, rng));
      continue;
    }
    // noisy known prior: ground truth displaced by a fixed offset in a
    // seeded random direction
    std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
    Vec2 center = world.objects[i].truth;
    for (int attempt = 0; attempt < 32; ++attempt) {
      const double a = angle(rng);
      const Vec2 cand = world.objects[i].truth + Vec2{std::cos(a), std::sin(a)} * config.prior_noise_m;
      if (world.map.grid.free_at(cand)) {
        center = cand;
        break;
      }
    }
    state.sets.push_back(filter.gaussian_set(id, config.particles, center, config.prior_sigma_m, rng));
  }

  std::vector<int> update_mask;
  if (method.landmarks_static) {
    update_mask.push_back(target_index);
  } else {
    for (std::size_t i = 0; i < world.objects.size(); ++i) update_mask.push_back(static_cast<int>(i));
  }

  UtilityParams uparams;
  GmmOptions gmm_opts;

  RobotState robot{world.start_position, world.start_heading, 0.0, 0.0};
  if (trace) {
    trace->world = world;
    trace->robot_trail.push_back(robot.position);
  }

  // one belief update + convergence check; returns true when the trial ends
  auto ingest = [&](const Observation& z) {
    filter.step(state, z, rng, &update_mask);
    if (trace) trace->belief_frames.push_back(state);
    const auto& det = z.detections[target_index];
    if (det && det->true_positive &&
        state.sets[target_index].mass_within(det->position, filter.params().gate_m) >=
            config.success_mass) {
      result.success = true;
      result.time_s = robot.elapsed_s;
      return true;
    }
    if (robot.elapsed_s >= config.timeout_s) {
      result.time_s = config.timeout_s;
      result.failure_reason = "timeout";
      return true;
    }
    return false;
  };

  constexpr double kTurnRate = 1.7;   // rad/s
  constexpr double kObsSpacing = 1.0; // meters between en-route detector sweeps

  std::optional<Observation> obs;
  bool dead_end_retry = false;
  bool done = false;
  while (!done) {
    if (obs && ingest(*obs)) break;
    if (robot.elapsed_s >= config.timeout_s) {
      result.time_s = config.timeout_s;
      result.failure_reason = "timeout";
      break;
    }

    SelectedView sel;
    try {
      sel = select_next_view(state, filter, target_index, robot, world, method.utility, uparams,
                             gmm_opts);
      result.select_calls += 1;
    } catch (const NoFeasibleView&) {
      if (!dead_end_retry) {
        // scatter a fresh uniform batch into the target belief and retry
        dead_end_retry = true;
        auto scatter = filter.uniform_set(target_index, config.particles, rng);
        auto& set = state.sets[target_index];
        for (int k = 0; k < config.particles / 2; ++k) {
          set.particles[k].position = scatter.particles[k].position;
          set.particles[k].weight = 1.0 / config.particles;
        }
        set.normalize();
        continue;
      }
      result.time_s = std::min(robot.elapsed_s, config.timeout_s);
      result.failure_reason = "planner dead end";
      break;
    }
    dead_end_retry = false;
    result.views += 1;
    if (trace) trace->view_poses.push_back(sel.pose);

    // drive the leg, running the detector roughly once per meter; the
    // camera faces along the direction of travel
    const auto& grid = world.map.grid;
    const bool same_cell = grid.cell_x(robot.position.x) == grid.cell_x(sel.pose.position.x) &&
                           grid.cell_y(robot.position.y) == grid.cell_y(sel.pose.position.y);
    double since_obs = 0.0;
    if (!same_cell) {
      const auto waypoints = astar_path(grid, robot.position, sel.pose.position);
      const double leg_dist = astar_distance(grid, robot.position, sel.pose.position);
      for (std::size_t k = 1; k < waypoints.size() && !done; ++k) {
        const Vec2 seg = waypoints[k] - waypoints[k - 1];
        const double len = seg.norm();
        if (len < 1e-12) continue;
        const double dir = std::atan2(seg.y, seg.x);
        robot.elapsed_s += std::abs(angle_diff(dir, robot.heading)) / kTurnRate + len;
        robot.heading = dir;
        robot.position = waypoints[k];
        if (trace) trace->robot_trail.push_back(waypoints[k]);
        since_obs += len;
        if (since_obs >= kObsSpacing) {
          since_obs = 0.0;
          const Observation passing = simulate_detections(world, robot, rng);
          done = ingest(passing);
        }
      }
      robot.path_m += leg_dist;
      if (done) break;
    }
    robot.elapsed_s += std::abs(angle_diff(sel.pose.yaw, robot.heading)) / kTurnRate;
    robot.position = sel.pose.position;
    robot.heading = sel.pose.yaw;
    robot.elapsed_s += config.dwell_s;
    if (trace) trace->robot_trail.push_back(robot.position);

    obs = simulate_detections(world, robot, rng);
  }

  result.path_m = robot.path_m;
  if (result.success) result.time_s = std::min(result.time_s, config.timeout_s);
  result.context_pair_evals = state.context_pair_evals;
  for (std::size_t i = 0; i < state.weight_updates.size(); ++i) {
    if (static_cast<int>(i) != target_index) result.landmark_weight_updates += state.weight_updates[i];
  }
  return result;
}

std::vector<TrialResult> run_benchmark(const TrialConfig& config,
                                       const std::vector<MethodSpec>& methods,
                                       const std::vector<std::string>& targets) {
  struct Cell {
    const MethodSpec* method;
    std::string target;
    uint64_t seed;
  };
  std::vector<Cell> cells;
  for (const auto& method : methods) {
    for (std::size_t t = 0; t < targets.size(); ++t) {
      for (int trial = 0; trial < config.trials; ++trial) {
        // seed shared across methods so every method faces the same worlds
        uint64_t th = 0;
        for (char c : targets[t]) th = th * 131 + static_cast<unsigned char>(c);
        cells.push_back({&method, targets[t],
                         derive_seed(config.master_seed, th, static_cast<uint64_t>(trial))});
      }
    }
  }

  std::vector<TrialResult> results(cells.size());
  unsigned n_threads = config.threads > 0 ? static_cast<unsigned>(config.threads)
                                          : std::thread::hardware_concurrency();
  if (n_threads == 0) n_threads = 4;
  n_threads = std::min<unsigned>(n_threads, cells.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t k = next.fetch_add(1);
      if (k >= cells.size()) return;
      results[k] = run_trial(config, *cells[k].method, cells[k].target, cells[k].seed);
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return results;
}

std::vector<SummaryRow> summarize(const std::vector<TrialResult>& results) {
  std::map<std::pair<std::string, std::string>, SummaryRow> rows;
  for (const auto& r : results) {
    auto& row = rows[{r.method, r.target}];
    row.method = r.method;
    row.target = r.target;
    row.mean_views += r.views;
    row.mean_time_s += r.time_s;
    row.mean_path_m += r.path_m;
    row.success_rate += r.success ? 1.0 : 0.0;
    row.trials += 1;
  }
  std::vector<SummaryRow> out;
  for (auto& [key, row] : rows) {
    row.mean_views /= row.trials;
    row.mean_time_s /= row.trials;
    row.mean_path_m /= row.trials;
    row.success_rate /= row.trials;
    out.push_back(row);
  }
  return out;
}

void emit_csv(const std::vector<TrialResult>& results, const std::string& path) {
  std::vector<TrialResult> sorted = results;
  std::sort(sorted.begin(), sorted.end(), [](const TrialResult& a, const TrialResult& b) {
    if (a.method != b.method) return a.method < b.method;
    if (a.target != b.target) return a.target < b.target;
    return a.seed < b.seed;
  });

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write results: " + path);
  out << "method,target,seed,views,time_s,path_m,success\n";
  char buf[256];
  for (const auto& r : sorted) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%llu,%d,%.3f,%.3f,%d\n", r.method.c_str(),
                  r.target.c_str(), static_cast<unsigned long long>(r.seed), r.views, r.time_s,
                  r.path_m, r.success ? 1 : 0);
    out << buf;
  }
  for (const auto& s : summarize(sorted)) {
    std::snprintf(buf, sizeof(buf), "%s,%s,MEAN,%.4f,%.4f,%.4f,%.4f\n", s.method.c_str(),
                  s.target.c_str(), s.mean_views, s.mean_time_s, s.mean_path_m, s.success_rate);
    out << buf;
  }
}

std::vector<TrialResult> parse_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read results: " + path);
  std::vector<TrialResult> out;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 7) throw std::runtime_error("bad CSV row: " + line);
    if (fields[2] == "MEAN") continue;
    TrialResult r;
    r.method = fields[0];
    r.target = fields[1];
    r.seed = std::stoull(fields[2]);
    r.views = std::stoi(fields[3]);
    r.time_s = std::stod(fields[4]);
    r.path_m = std::stod(fields[5]);
    r.success = fields[6] == "1";
    out.push_back(r);
  }
  return out;
}

std::vector<std::string> format_relation_table(const World& world, const BpResult& relations) {
  std::vector<std::string> lines;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-16s %-16s %8s %8s %8s %8s %8s %8s", "object_i", "object_j",
                "In", "On", "Contain", "Support", "Prox", "Disjoint");
  lines.emplace_back(buf);
  for (std::size_t i = 0; i < world.objects.size(); ++i) {
    for (std::size_t j = i + 1; j < world.objects.size(); ++j) {
      const auto b = relations.belief(static_cast<int>(i), static_cast<int>(j));
      std::snprintf(buf, sizeof(buf), "%-16s %-16s %8.3f %8.3f %8.3f %8.3f %8.3f %8.3f",
                    world.objects[i].cls.c_str(), world.objects[j].cls.c_str(),
                    b.prob(Relation::In), b.prob(Relation::On), b.prob(Relation::Contain),
                    b.prob(Relation::Support), b.prob(Relation::Proximity),
                    b.prob(Relation::Disjoint));
      lines.emplace_back(buf);
    }
  }
  return lines;
}

}  // namespace slim
