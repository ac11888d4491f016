#include "slim/simworld.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <queue>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace slim {

const char* to_string(SizeClass s) {
  switch (s) {
    case SizeClass::Large: return "large";
    case SizeClass::Mid: return "mid";
    case SizeClass::Small: return "small";
  }
  return "?";
}

std::optional<SizeClass> size_class_from_string(std::string_view s) {
  if (s == "large") return SizeClass::Large;
  if (s == "mid") return SizeClass::Mid;
  if (s == "small") return SizeClass::Small;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// OccupancyGrid

OccupancyGrid OccupancyGrid::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open grid file: " + path);
  std::string header;
  if (!std::getline(in, header)) throw std::runtime_error(path + ": empty grid file");
  std::istringstream hs(header);
  std::string key;
  double res = 0.0;
  hs >> key >> res;
  if (key != "resolution" || !(res > 0.0)) {
    throw std::runtime_error(path + ": first line must be 'resolution <m>'");
  }
  std::vector<std::string> rows;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (line.empty()) continue;
    rows.push_back(line);
  }
  if (rows.empty()) throw std::runtime_error(path + ": grid has no rows");
  const std::size_t w = rows[0].size();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != w) {
      throw std::runtime_error(path + ": row " + std::to_string(r + 2) + " has inconsistent width");
    }
    for (char c : rows[r]) {
      if (c != '#' && c != '.') {
        throw std::runtime_error(path + ": grid cells must be '#' or '.'");
      }
    }
  }
  OccupancyGrid g = make(static_cast<int>(w), static_cast<int>(rows.size()), res);
  // file row 0 is the top of the map
  for (int cy = 0; cy < g.height_; ++cy) {
    const std::string& row = rows[g.height_ - 1 - cy];
    for (int cx = 0; cx < g.width_; ++cx) g.set_occupied(cx, cy, row[cx] == '#');
  }
  return g;
}

OccupancyGrid OccupancyGrid::make(int width, int height, double resolution) {
  OccupancyGrid g;
  g.width_ = width;
  g.height_ = height;
  g.resolution_ = resolution;
  g.cells_.assign(static_cast<std::size_t>(width) * height, 0);
  return g;
}

bool OccupancyGrid::free_at(const Vec2& p) const {
  const int cx = cell_x(p.x);
  const int cy = cell_y(p.y);
  return in_bounds(cx, cy) && !occupied(cx, cy);
}

bool OccupancyGrid::line_of_sight(const Vec2& a, const Vec2& b) const {
  // Amanatides-Woo traversal over the cells the segment passes through.
  int cx = cell_x(a.x), cy = cell_y(a.y);
  const int gx = cell_x(b.x), gy = cell_y(b.y);
  if (!in_bounds(cx, cy) || !in_bounds(gx, gy)) return false;

  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const int step_x = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
  const int step_y = dy > 0 ? 1 : (dy < 0 ? -1 : 0);

  const double inf = std::numeric_limits<double>::infinity();
  double t_max_x = inf, t_max_y = inf, t_delta_x = inf, t_delta_y = inf;
  if (step_x != 0) {
    const double edge = (cx + (step_x > 0 ? 1 : 0)) * resolution_;
    t_max_x = (edge - a.x) / dx;
    t_delta_x = resolution_ / std::abs(dx);
  }
  if (step_y != 0) {
    const double edge = (cy + (step_y > 0 ? 1 : 0)) * resolution_;
    t_max_y = (edge - a.y) / dy;
    t_delta_y = resolution_ / std::abs(dy);
  }

  while (true) {
    if (occupied(cx, cy)) return false;
    if (cx == gx && cy == gy) return true;
    // segment fully consumed (corner ties can step around the goal cell)
    if (t_max_x > 1.0 && t_max_y > 1.0) return true;
    if (t_max_x < t_max_y) {
      cx += step_x;
      t_max_x += t_delta_x;
    } else {
      cy += step_y;
      t_max_y += t_delta_y;
    }
    if (!in_bounds(cx, cy)) return false;
  }
}

double OccupancyGrid::clearance(const Vec2& p, double cap) const {
  const int reach = static_cast<int>(std::ceil(cap / resolution_)) + 1;
  const int cx = cell_x(p.x), cy = cell_y(p.y);
  double best = cap;
  for (int oy = -reach; oy <= reach; ++oy) {
    for (int ox = -reach; ox <= reach; ++ox) {
      const int ux = cx + ox, uy = cy + oy;
      if (!in_bounds(ux, uy)) continue;
      if (!occupied(ux, uy)) continue;
      best = std::min(best, distance(p, cell_center(ux, uy)));
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Rooms

bool Room::contains(const Vec2& p) const {
  bool inside = false;
  const std::size_t n = polygon.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = polygon[i];
    const Vec2& b = polygon[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
      if (p.x < x) inside = !inside;
    }
  }
  return inside;
}

// ---------------------------------------------------------------------------
// World loading

World load_world(const std::string& config_path, uint64_t placement_seed) {
  std::ifstream in(config_path);
  if (!in) throw std::runtime_error("cannot open world config: " + config_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error(config_path + ": JSON parse error: " + e.what());
  }

  World world;
  const auto dir = std::filesystem::path(config_path).parent_path();
  const std::string grid_ref = j.at("grid").get<std::string>();
  world.map.grid = OccupancyGrid::load((dir / grid_ref).string());

  for (const auto& room : j.at("rooms")) {
    Room r;
    r.name = room.at("name").get<std::string>();
    r.type = room.value("type", r.name);
    for (const auto& v : room.at("polygon")) {
      r.polygon.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
    }
    if (r.polygon.size() < 3) throw std::runtime_error("room polygon needs >= 3 vertices");
    world.map.rooms.push_back(std::move(r));
  }

  if (j.contains("detector")) {
    const auto& d = j["detector"];
    if (d.contains("fov_deg")) world.detector.fov_rad = d["fov_deg"].get<double>() * M_PI / 180.0;
    world.detector.range_large = d.value("range_large", world.detector.range_large);
    world.detector.range_mid = d.value("range_mid", world.detector.range_mid);
    world.detector.range_small = d.value("range_small", world.detector.range_small);
    world.detector.p_tp = d.value("p_tp", world.detector.p_tp);
    world.detector.p_fn = d.value("p_fn", world.detector.p_fn);
    world.detector.p_fp = d.value("p_fp", world.detector.p_fp);
    world.detector.p_tn = d.value("p_tn", world.detector.p_tn);
    world.detector.noise_sigma_m = d.value("noise_sigma", world.detector.noise_sigma_m);
    world.detector.seed = d.value("seed", world.detector.seed);
    for (double p : {world.detector.p_tp, world.detector.p_fn, world.detector.p_fp,
                     world.detector.p_tn}) {
      if (!(p >= 0.0 && p <= 1.0)) throw std::runtime_error("detector probability out of [0,1]");
    }
  }

  const auto& start = j.at("start");
  world.start_position = {start.at("x").get<double>(), start.at("y").get<double>()};
  world.start_heading = start.value("heading", 0.0);
  if (!world.map.grid.free_at(world.start_position)) {
    throw std::runtime_error("start position is not in free space");
  }

  int index = 0;
  for (const auto& o : j.at("objects")) {
    SimObject obj;
    obj.cls = o.at("class").get<std::string>();
    const auto size = size_class_from_string(o.at("size").get<std::string>());
    if (!size) {
      throw std::runtime_error("unknown size-class '" + o.at("size").get<std::string>() +
                               "' for object " + obj.cls);
    }
    obj.size = *size;
    obj.footprint_m = o.value("footprint", 0.2);
    obj.is_target = o.value("target", false);
    for (const auto& c : o.at("candidates")) {
      obj.candidates.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
    }
    if (obj.candidates.empty()) {
      throw std::runtime_error("object " + obj.cls + " has an empty candidate list");
    }
    for (const auto& c : obj.candidates) {
      if (!world.map.grid.free_at(c)) {
        throw std::runtime_error("object " + obj.cls + " candidate placement in occupied cell");
      }
    }
    Rng rng(derive_seed(placement_seed, static_cast<uint64_t>(index), 0xb0b));
    std::uniform_int_distribution<std::size_t> pick(0, obj.candidates.size() - 1);
    obj.truth = obj.candidates[pick(rng)];
    world.objects.push_back(std::move(obj));
    ++index;
  }
  return world;
}

// ---------------------------------------------------------------------------
// Detector

bool visible(const WorldMap& map, const ViewPose& camera, double fov_rad, const Vec2& obj_pos,
             double range_m) {
  const Vec2 delta = obj_pos - camera.position;
  const double d = delta.norm();
  if (d > range_m) return false;
  if (d > 1e-9) {
    const double bearing = std::atan2(delta.y, delta.x);
    if (std::abs(angle_diff(bearing, camera.yaw)) > fov_rad / 2.0) return false;
  }
  return map.grid.line_of_sight(camera.position, obj_pos);
}

Observation simulate_detections(const World& world, const RobotState& robot, Rng& rng) {
  Observation obs;
  obs.camera = {robot.position, robot.heading};
  obs.detections.resize(world.objects.size());

  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, world.detector.noise_sigma_m);

  for (std::size_t i = 0; i < world.objects.size(); ++i) {
    const auto& obj = world.objects[i];
    const double range = world.detector.range_for(obj.size);
    if (visible(world.map, obs.camera, world.detector.fov_rad, obj.truth, range)) {
      if (uni(rng) < world.detector.p_tp) {
        Detection det;
        det.position = obj.truth + Vec2{noise(rng), noise(rng)};
        det.true_positive = true;
        obs.detections[i] = det;
      }
    } else if (uni(rng) < world.detector.p_fp) {
      // spurious detection somewhere in the effective region
      for (int attempt = 0; attempt < 50; ++attempt) {
        const double r = range * std::sqrt(uni(rng));
        const double theta = robot.heading + (uni(rng) - 0.5) * world.detector.fov_rad;
        const Vec2 p = robot.position + Vec2{r * std::cos(theta), r * std::sin(theta)};
        if (!world.map.grid.free_at(p)) continue;
        if (!world.map.grid.line_of_sight(robot.position, p)) continue;
        obs.detections[i] = Detection{p, false};
        break;
      }
    }
  }
  return obs;
}

// ---------------------------------------------------------------------------
// Path planning: 8-connected grid, exact step-count costs so that A* and a
// plain Dijkstra return bit-identical distances.

namespace {

struct StepCost {
  int64_t card = 0;
  int64_t diag = 0;
};

// a.card + a.diag*sqrt(2) < b.card + b.diag*sqrt(2), exactly.
bool cost_less(const StepCost& a, const StepCost& b) {
  const int64_t dc = a.card - b.card;
  const int64_t dd = a.diag - b.diag;
  if (dd == 0) return dc < 0;
  if (dd > 0) return dc < 0 && dc * dc > 2 * dd * dd;
  return dc <= 0 || dc * dc < 2 * dd * dd;
}

double steps_to_meters(int64_t card, int64_t diag, double res) {
  return (static_cast<double>(card) + static_cast<double>(diag) * M_SQRT2) * res;
}

struct SearchResult {
  bool reached = false;
  StepCost cost;
  std::vector<int> parent;  // cell index -> predecessor
};

constexpr int kDx[8] = {1, -1, 0, 0, 1, 1, -1, -1};
constexpr int kDy[8] = {0, 0, 1, -1, 1, -1, 1, -1};

SearchResult grid_search(const OccupancyGrid& grid, int sx, int sy, int gx, int gy,
                         bool use_heuristic) {
  const int w = grid.width(), h = grid.height();
  const int n = w * h;
  std::vector<int64_t> g_card(n, -1), g_diag(n, -1);
  std::vector<int> parent(n, -1);
  std::vector<char> done(n, 0);

  auto heuristic = [&](int cx, int cy) -> StepCost {
    if (!use_heuristic) return {0, 0};
    const int64_t dx = std::abs(cx - gx);
    const int64_t dy = std::abs(cy - gy);
    return {std::max(dx, dy) - std::min(dx, dy), std::min(dx, dy)};
  };

  struct QItem {
    StepCost f;
    int cell;
  };
  auto cmp = [](const QItem& a, const QItem& b) { return cost_less(b.f, a.f); };
  std::priority_queue<QItem, std::vector<QItem>, decltype(cmp)> open(cmp);

  const int start = sy * w + sx;
  g_card[start] = 0;
  g_diag[start] = 0;
  open.push({heuristic(sx, sy), start});

  SearchResult result;
  while (!open.empty()) {
    const auto [f, cell] = open.top();
    open.pop();
    if (done[cell]) continue;
    done[cell] = 1;
    const int cx = cell % w, cy = cell / w;
    if (cx == gx && cy == gy) break;
    for (int k = 0; k < 8; ++k) {
      const int nx = cx + kDx[k], ny = cy + kDy[k];
      if (!grid.in_bounds(nx, ny) || grid.occupied(nx, ny)) continue;
      const bool diagonal = kDx[k] != 0 && kDy[k] != 0;
      if (diagonal && (grid.occupied(cx + kDx[k], cy) || grid.occupied(cx, cy + kDy[k]))) {
        continue;  // no cutting corners
      }
      const int ncell = ny * w + nx;
      StepCost cand{g_card[cell] + (diagonal ? 0 : 1), g_diag[cell] + (diagonal ? 1 : 0)};
      if (g_card[ncell] >= 0 && !cost_less(cand, {g_card[ncell], g_diag[ncell]})) continue;
      g_card[ncell] = cand.card;
      g_diag[ncell] = cand.diag;
      parent[ncell] = cell;
      const StepCost hn = heuristic(nx, ny);
      open.push({{cand.card + hn.card, cand.diag + hn.diag}, ncell});
    }
  }

  const int goal = gy * w + gx;
  result.parent = std::move(parent);
  if (g_card[goal] >= 0 && done[goal]) {
    result.reached = true;
    result.cost = {g_card[goal], g_diag[goal]};
  }
  return result;
}

void check_endpoints(const OccupancyGrid& grid, const Vec2& from, const Vec2& to) {
  if (!grid.free_at(from)) throw std::runtime_error("path start is not in free space");
  if (!grid.free_at(to)) throw std::runtime_error("path goal is not in free space");
}

}  // namespace

Vec2 project_to_free(const OccupancyGrid& grid, const Vec2& p, double max_radius_m) {
  if (grid.free_at(p)) return p;
  const double res = grid.resolution();
  const int cx = std::clamp(grid.cell_x(p.x), 0, grid.width() - 1);
  const int cy = std::clamp(grid.cell_y(p.y), 0, grid.height() - 1);
  const int reach = static_cast<int>(std::ceil(max_radius_m / res));
  double best_d = std::numeric_limits<double>::infinity();
  Vec2 best = p;
  for (int ring = 1; ring <= reach; ++ring) {
    for (int oy = -ring; oy <= ring; ++oy) {
      for (int ox = -ring; ox <= ring; ++ox) {
        if (std::max(std::abs(ox), std::abs(oy)) != ring) continue;
        const int ux = cx + ox, uy = cy + oy;
        if (!grid.in_bounds(ux, uy) || grid.occupied(ux, uy)) continue;
        const double d = distance(p, grid.cell_center(ux, uy));
        if (d < best_d) {
          best_d = d;
          best = grid.cell_center(ux, uy);
        }
      }
    }
    if (best_d < ring * res) break;  // nothing on a later ring can be closer
  }
  return best;
}

double astar_distance(const OccupancyGrid& grid, const Vec2& from, const Vec2& to) {
  check_endpoints(grid, from, to);
  const int sx = grid.cell_x(from.x), sy = grid.cell_y(from.y);
  const int gx = grid.cell_x(to.x), gy = grid.cell_y(to.y);
  const auto res = grid_search(grid, sx, sy, gx, gy, /*use_heuristic=*/true);
  if (!res.reached) throw std::runtime_error("goal unreachable");
  return steps_to_meters(res.cost.card, res.cost.diag, grid.resolution());
}

std::vector<Vec2> astar_path(const OccupancyGrid& grid, const Vec2& from, const Vec2& to) {
  check_endpoints(grid, from, to);
  const int w = grid.width();
  const int sx = grid.cell_x(from.x), sy = grid.cell_y(from.y);
  const int gx = grid.cell_x(to.x), gy = grid.cell_y(to.y);
  const auto res = grid_search(grid, sx, sy, gx, gy, /*use_heuristic=*/true);
  if (!res.reached) throw std::runtime_error("goal unreachable");
  std::vector<Vec2> path;
  int cell = gy * w + gx;
  const int start = sy * w + sx;
  while (cell >= 0) {
    path.push_back(grid.cell_center(cell % w, cell / w));
    if (cell == start) break;
    cell = res.parent[cell];
  }
  std::reverse(path.begin(), path.end());
  return path;
}

MoveResult advance_robot(const WorldMap& map, const RobotState& from, const ViewPose& to,
                         double dwell_s) {
  constexpr double kMaxSpeed = 1.0;    // m/s
  constexpr double kMaxTurn = 1.7;     // rad/s

  MoveResult out;
  out.state = from;

  const bool same_cell = map.grid.cell_x(from.position.x) == map.grid.cell_x(to.position.x) &&
                         map.grid.cell_y(from.position.y) == map.grid.cell_y(to.position.y);
  double dist = 0.0;
  std::vector<Vec2> waypoints;
  if (!same_cell) {
    dist = astar_distance(map.grid, from.position, to.position);
    waypoints = astar_path(map.grid, from.position, to.position);
  }

  out.path.push_back(from.position);
  for (const auto& p : waypoints) out.path.push_back(p);
  out.path.push_back(to.position);

  double turn = 0.0;
  double prev_dir = from.heading;
  for (std::size_t k = 1; k < out.path.size(); ++k) {
    const Vec2 d = out.path[k] - out.path[k - 1];
    if (d.norm() < 1e-9) continue;
    const double dir = std::atan2(d.y, d.x);
    turn += std::abs(angle_diff(dir, prev_dir));
    prev_dir = dir;
  }
  turn += std::abs(angle_diff(to.yaw, prev_dir));

  out.turn_s = turn / kMaxTurn;
  out.travel_s = dist / kMaxSpeed;
  out.state.position = to.position;
  out.state.heading = to.yaw;
  out.state.elapsed_s += out.turn_s + out.travel_s + dwell_s;
  out.state.path_m += dist;
  return out;
}

// ---------------------------------------------------------------------------
// DistanceField

DistanceField::DistanceField(const OccupancyGrid& grid, const Vec2& source) : grid_(grid) {
  const int w = grid.width(), h = grid.height();
  card_.assign(static_cast<std::size_t>(w) * h, -1);
  diag_.assign(static_cast<std::size_t>(w) * h, -1);
  if (!grid.free_at(source)) return;

  struct QItem {
    StepCost f;
    int cell;
  };
  auto cmp = [](const QItem& a, const QItem& b) { return cost_less(b.f, a.f); };
  std::priority_queue<QItem, std::vector<QItem>, decltype(cmp)> open(cmp);
  std::vector<char> done(static_cast<std::size_t>(w) * h, 0);

  const int start = grid.cell_y(source.y) * w + grid.cell_x(source.x);
  card_[start] = 0;
  diag_[start] = 0;
  open.push({{0, 0}, start});
  while (!open.empty()) {
    const auto [f, cell] = open.top();
    open.pop();
    if (done[cell]) continue;
    done[cell] = 1;
    const int cx = cell % w, cy = cell / w;
    for (int k = 0; k < 8; ++k) {
      const int nx = cx + kDx[k], ny = cy + kDy[k];
      if (!grid.in_bounds(nx, ny) || grid.occupied(nx, ny)) continue;
      const bool diagonal = kDx[k] != 0 && kDy[k] != 0;
      if (diagonal && (grid.occupied(cx + kDx[k], cy) || grid.occupied(cx, cy + kDy[k]))) continue;
      const int ncell = ny * w + nx;
      StepCost cand{card_[cell] + (diagonal ? 0 : 1), diag_[cell] + (diagonal ? 1 : 0)};
      if (card_[ncell] >= 0 && !cost_less(cand, {card_[ncell], diag_[ncell]})) continue;
      card_[ncell] = cand.card;
      diag_[ncell] = cand.diag;
      open.push({cand, ncell});
    }
  }
}

std::optional<double> DistanceField::to(const Vec2& p) const {
  if (!grid_.free_at(p)) return std::nullopt;
  const int cell = grid_.cell_y(p.y) * grid_.width() + grid_.cell_x(p.x);
  if (card_[cell] < 0) return std::nullopt;
  return steps_to_meters(card_[cell], diag_[cell], grid_.resolution());
}

}  // namespace slim
