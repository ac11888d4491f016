#pragma once

#include <string>
#include <vector>

#include "slim/belief.hpp"
#include "slim/simworld.hpp"

namespace slim {

/// Render a belief/world snapshot: occupancy grid, room outlines, particles
/// colored per object, fitted GMM ellipses, the robot trail and visited
/// view poses as oriented wedges. World (x, y) maps to SVG
/// (kSvgScale * x, kSvgScale * (height_m - y)).
constexpr double kSvgScale = 60.0;

void emit_svg_snapshot(const World& world, const BeliefState& belief,
                       const std::vector<Vec2>& robot_trail,
                       const std::vector<ViewPose>& view_poses, const std::string& path);

}  // namespace slim
