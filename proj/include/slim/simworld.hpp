#pragma once

#include <optional>
#include <string>
#include <vector>

#include "slim/geometry.hpp"

namespace slim {

enum class SizeClass { Large, Mid, Small };

const char* to_string(SizeClass s);
std::optional<SizeClass> size_class_from_string(std::string_view s);

/// Camera pose candidate: planar position plus yaw.
struct ViewPose {
  Vec2 position;
  double yaw = 0.0;
  Vec2 dir() const { return {std::cos(yaw), std::sin(yaw)}; }
};

/// Occupancy grid loaded from an ASCII map ('#' occupied, '.' free), row 0
/// of the file being the top of the map. Cell (0,0) sits at world (0,0).
class OccupancyGrid {
 public:
  static OccupancyGrid load(const std::string& path);
  static OccupancyGrid make(int width, int height, double resolution);

  int width() const { return width_; }
  int height() const { return height_; }
  double resolution() const { return resolution_; }
  double width_m() const { return width_ * resolution_; }
  double height_m() const { return height_ * resolution_; }

  bool in_bounds(int cx, int cy) const { return cx >= 0 && cx < width_ && cy >= 0 && cy < height_; }
  bool occupied(int cx, int cy) const { return cells_[cy * width_ + cx] != 0; }
  void set_occupied(int cx, int cy, bool v) { cells_[cy * width_ + cx] = v ? 1 : 0; }

  int cell_x(double x) const { return static_cast<int>(std::floor(x / resolution_)); }
  int cell_y(double y) const { return static_cast<int>(std::floor(y / resolution_)); }
  Vec2 cell_center(int cx, int cy) const {
    return {(cx + 0.5) * resolution_, (cy + 0.5) * resolution_};
  }

  bool free_at(const Vec2& p) const;

  /// True when the straight segment a-b crosses no occupied cell.
  bool line_of_sight(const Vec2& a, const Vec2& b) const;

  /// Distance from p to the nearest occupied cell center, capped at `cap`.
  double clearance(const Vec2& p, double cap) const;

 private:
  int width_ = 0;
  int height_ = 0;
  double resolution_ = 0.1;
  std::vector<uint8_t> cells_;
};

struct Room {
  std::string name;
  std::string type;
  std::vector<Vec2> polygon;
  bool contains(const Vec2& p) const;
};

struct WorldMap {
  OccupancyGrid grid;
  std::vector<Room> rooms;
  double width_m() const { return grid.width_m(); }
  double height_m() const { return grid.height_m(); }
};

struct SimObject {
  std::string cls;
  SizeClass size = SizeClass::Small;
  double footprint_m = 0.2;
  bool is_target = false;
  std::vector<Vec2> candidates;  // possible placements, one picked per trial
  Vec2 truth;                    // sampled ground-truth position
};

struct DetectorModel {
  double fov_rad = 70.0 * M_PI / 180.0;
  double range_large = 5.0;
  double range_mid = 4.0;
  double range_small = 2.5;
  double p_tp = 0.9;
  double p_fn = 0.1;
  double p_fp = 0.01;
  double p_tn = 0.99;
  double noise_sigma_m = 0.1;
  uint64_t seed = 0;

  double range_for(SizeClass s) const {
    switch (s) {
      case SizeClass::Large: return range_large;
      case SizeClass::Mid: return range_mid;
      case SizeClass::Small: return range_small;
    }
    return range_small;
  }
};

struct RobotState {
  Vec2 position;
  double heading = 0.0;
  double elapsed_s = 0.0;
  double path_m = 0.0;
};

struct Detection {
  Vec2 position;
  bool true_positive = false;
};

/// One detection slot per object of interest, in object order.
struct Observation {
  ViewPose camera;
  std::vector<std::optional<Detection>> detections;
};

struct World {
  WorldMap map;
  std::vector<SimObject> objects;
  DetectorModel detector;
  Vec2 start_position;
  double start_heading = 0.0;
};

/// Load and validate a world config (JSON) and sample each object's
/// ground-truth placement from its candidate list with the given seed.
World load_world(const std::string& config_path, uint64_t placement_seed);

/// Range + field-of-view + line-of-sight visibility test for a point
/// object seen from a camera pose.
bool visible(const WorldMap& map, const ViewPose& camera, double fov_rad, const Vec2& obj_pos,
             double range_m);

/// Simulate one detector sweep over all objects from the robot's pose.
/// Visible objects are detected with p_tp (position = truth + noise);
/// invisible ones yield a spurious detection with p_fp placed uniformly in
/// the camera's effective region for that object class.
Observation simulate_detections(const World& world, const RobotState& robot, Rng& rng);

struct MoveResult {
  RobotState state;
  std::vector<Vec2> path;  // polyline incl. start and goal positions
  double travel_s = 0.0;
  double turn_s = 0.0;
};

/// Drive the robot along the A* path to the goal view pose. Time advances
/// by turn time (1.7 rad/s), travel time (1 m/s) and the sensing dwell.
/// Throws if the goal is unreachable.
MoveResult advance_robot(const WorldMap& map, const RobotState& from, const ViewPose& to,
                         double dwell_s);

/// Nearest free position to p (cell-center granularity) within the given
/// search radius; p itself when already free, p unchanged when nothing free
/// is found.
Vec2 project_to_free(const OccupancyGrid& grid, const Vec2& p, double max_radius_m = 3.0);

/// 8-connected shortest-path distance in meters (diagonals cost sqrt(2) *
/// resolution). Throws if either endpoint is occupied or no path exists.
double astar_distance(const OccupancyGrid& grid, const Vec2& from, const Vec2& to);

/// A* path as cell-center waypoints (first = start cell, last = goal cell).
std::vector<Vec2> astar_path(const OccupancyGrid& grid, const Vec2& from, const Vec2& to);

/// Shortest-path distances from one source to everywhere, for scoring many
/// candidates against one robot position. Values match astar_distance.
class DistanceField {
 public:
  DistanceField(const OccupancyGrid& grid, const Vec2& source);
  /// Distance in meters, or nullopt when unreachable/occupied.
  std::optional<double> to(const Vec2& p) const;

 private:
  const OccupancyGrid& grid_;
  std::vector<int64_t> card_, diag_;  // step counts, -1 = unreached
};

}  // namespace slim
