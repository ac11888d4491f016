#pragma once

#include <stdexcept>
#include <vector>

#include "slim/belief.hpp"
#include "slim/geometry.hpp"
#include "slim/simworld.hpp"

namespace slim {

struct GmmComponent {
  Vec2 mean;
  Mat2 cov;
  double weight = 0.0;
};

struct GaussianMixture {
  std::vector<GmmComponent> components;  // sorted by weight, heaviest first
};

struct GmmOptions {
  int k_max = 5;
  int restarts = 5;
  int max_iters = 100;
  double tol = 1e-6;
  double cov_reg = 1e-4;
  uint64_t seed = 0x51e9d;
};

/// Weighted EM fit with the component count chosen by BIC over k = 1..k_max.
/// Deterministic for fixed options. Requires >= 2 particles.
GaussianMixture fit_gmm(const ParticleSet& set, const GmmOptions& opts = {});

struct UtilityParams {
  double alpha = 0.1;       // navigation trade-off
  double beta = 0.4;        // landmark bonus
  double sigma = 0.5;       // arctan plateau rate
  double clearance_m = 0.25;
  // The navigation term is singular at zero distance; distances below this
  // clamp are treated as this value so that sub-meter candidates cannot
  // drown out the component weights.
  double min_nav_m = 1.0;
};

struct NoFeasibleView : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Candidate camera poses on a circle around a Gaussian component mean,
/// facing the mean, filtered by range, clearance and line of sight. Falls
/// back to smaller radii when the full circle is infeasible; throws
/// NoFeasibleView when nothing survives.
std::vector<ViewPose> generate_view_poses(const GmmComponent& component, const WorldMap& map,
                                          const DetectorModel& det, SizeClass target_size,
                                          const UtilityParams& params);

/// Direct-search utility: component weight plus a navigation term that
/// rewards nearby views and plateaus with distance.
double utility_ds(double omega, double d_nav_m, const UtilityParams& params);

struct LandmarkView {
  const GaussianMixture* gmm = nullptr;
  double co_occur = 0.0;  // 1 - B(R_target,j = Disjoint)
  SizeClass size = SizeClass::Mid;
};

/// Hybrid-search utility: direct-search value plus the best single landmark
/// bonus among components visible from this pose (max, not sum).
double utility_hs(const WorldMap& map, const ViewPose& pose, double omega, double d_nav_m,
                  const std::vector<LandmarkView>& landmarks, const DetectorModel& det,
                  const UtilityParams& params);

enum class UtilityMode { DS, HS };

struct SelectedView {
  ViewPose pose;
  double utility = 0.0;
  double d_nav_m = 0.0;
  int component = 0;
};

/// Fit the target GMM, generate candidates per component, score them with
/// the requested utility (navigation distances from one shortest-path sweep)
/// and return the argmax; ties prefer smaller navigation distance, then
/// generation order.
SelectedView select_next_view(const BeliefState& state, const SlimFilter& filter, int target_index,
                              const RobotState& robot, const World& world, UtilityMode mode,
                              const UtilityParams& params, const GmmOptions& gmm_opts = {});

}  // namespace slim
