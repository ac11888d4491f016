#pragma once

#include <optional>
#include <string>
#include <vector>

#include "slim/geometry.hpp"
#include "slim/relations.hpp"
#include "slim/simworld.hpp"

namespace slim {

struct Particle {
  Vec2 position;
  double weight = 0.0;
};

struct ParticleSet {
  int object_id = 0;
  std::vector<Particle> particles;

  /// Normalize weights in place; returns false (and leaves weights uniform)
  /// when the total mass is zero.
  bool normalize();
  double ess() const;
  double mass_within(const Vec2& center, double radius) const;
};

struct PotentialParams {
  double sigma_landmark_m = 0.03;  // per-step motion scale, near-static
  double sigma_target_m = 0.05;
  double gate_m = 0.5;             // detection association gate
  double disjoint_threshold = 0.2;
  double reinvig_fraction = 0.1;
  double ess_trigger = 0.5;        // reinvigorate when ESS < trigger * M
  bool use_context = true;
};

/// exp(-d^T Sigma^-1 d); 1 at zero displacement. Throws on a singular
/// covariance.
double prediction_potential(const Vec2& prev, const Vec2& next, const Mat2& sigma);

/// Eq.-style four-case detector likelihood for one particle: gate test
/// against a detection when present, effective-region membership otherwise.
double measurement_potential(const WorldMap& map, const Vec2& particle, const ViewPose& camera,
                             const std::optional<Vec2>& detection, const DetectorModel& det,
                             SizeClass size, double gate_m);

/// Single-relation context kernel for positions p_i, p_j under relation r.
/// Containment relations are footprint-indicator tests, Proximity is a
/// Gaussian in the distance with scale fp_i + fp_j, Disjoint is the clamped
/// complement of the rest.
double context_potential_single(const Vec2& p_i, const Vec2& p_j, Relation r, double fp_i,
                                double fp_j);

/// Belief-weighted mixture over relations and neighbor particles:
/// sum_r sum_l B(r) * alpha_l * phi_r(p_i, p_j^l). Increments *pair_evals
/// by the number of neighbor particles when given.
double context_potential_mixture(const Vec2& p_i, const ParticleSet& neighbor,
                                 const RelationBelief& belief, double fp_i, double fp_j,
                                 long long* pair_evals = nullptr);

struct BeliefState {
  std::vector<ParticleSet> sets;               // one per object
  std::vector<std::vector<int>> neighbors;     // Gamma(i)
  long long context_pair_evals = 0;            // (particle, neighbor particle) kernel count
  std::vector<long long> weight_updates;       // measurement/context passes per object
};

/// Recursive per-object particle filter over the joint location belief,
/// with relation-parameterized context coupling between objects.
class SlimFilter {
 public:
  SlimFilter(const World& world, const BpResult& relations, PotentialParams params);

  const PotentialParams& params() const { return params_; }
  const std::vector<std::vector<int>>& neighbors() const { return neighbors_; }

  BeliefState make_state(int particles_per_object, Rng& rng) const;
  ParticleSet uniform_set(int object_id, int count, Rng& rng) const;
  ParticleSet gaussian_set(int object_id, int count, const Vec2& center, double sigma,
                           Rng& rng) const;

  /// One filter step: systematic resampling when the effective sample size
  /// has dropped below the trigger (weights carry over multiplicatively
  /// otherwise), motion sampling, measurement x context weighting against
  /// the previous step's neighbor sets, weight normalization, then
  /// reinvigoration. `update_only`, when given, limits the update to those
  /// object indices (used for frozen landmark modes); other sets are left
  /// untouched but still serve as context neighbors.
  void step(BeliefState& state, const Observation& z, Rng& rng,
            const std::vector<int>* update_only = nullptr) const;

  /// Replace the lowest-weight fraction of particles when the effective
  /// sample size drops below the trigger: half uniform over room cells,
  /// half around a weight-sampled particle of a random neighbor. Replaced
  /// particles enter at weight 1/M; weights are renormalized after.
  void reinvigorate(ParticleSet& set, const std::vector<ParticleSet>& prev_sets, int self,
                    Rng& rng) const;

  RelationBelief pair_belief(int i, int j) const { return relations_->belief(i, j); }

 private:
  Vec2 sample_free_room_cell(Rng& rng) const;
  double motion_sigma(int object_id) const;

  const World* world_;
  const BpResult* relations_;
  PotentialParams params_;
  std::vector<std::vector<int>> neighbors_;
  std::vector<std::pair<int, int>> free_cells_;
  std::vector<std::pair<int, int>> room_cells_;
};

/// Per-step belief snapshot: `object,x,y,weight` rows.
void export_belief_csv(const BeliefState& state, const std::vector<SimObject>& objects,
                       const std::string& path);

}  // namespace slim
