#include "slim/belief.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace slim {

bool ParticleSet::normalize() {
  double total = 0.0;
  for (const auto& p : particles) total += p.weight;
  if (!(total > 0.0) || !std::isfinite(total)) {
    const double u = 1.0 / static_cast<double>(particles.size());
    for (auto& p : particles) p.weight = u;
    return false;
  }
  for (auto& p : particles) p.weight /= total;
  return true;
}

double ParticleSet::ess() const {
  double sum_sq = 0.0;
  for (const auto& p : particles) sum_sq += p.weight * p.weight;
  if (sum_sq <= 0.0) return 0.0;
  return 1.0 / sum_sq;
}

double ParticleSet::mass_within(const Vec2& center, double radius) const {
  double mass = 0.0;
  for (const auto& p : particles) {
    if (distance(p.position, center) <= radius) mass += p.weight;
  }
  return mass;
}

double prediction_potential(const Vec2& prev, const Vec2& next, const Mat2& sigma) {
  if (!(sigma.det() > 0.0)) throw std::invalid_argument("prediction covariance is singular");
  const Vec2 d = next - prev;
  return std::exp(-sigma.inverse().quad(d));
}

double measurement_potential(const WorldMap& map, const Vec2& particle, const ViewPose& camera,
                             const std::optional<Vec2>& detection, const DetectorModel& det,
                             SizeClass size, double gate_m) {
  if (detection) {
    return distance(particle, *detection) <= gate_m ? det.p_tp : det.p_fp;
  }
  const bool in_region = visible(map, camera, det.fov_rad, particle, det.range_for(size));
  return in_region ? det.p_fn : det.p_tn;
}

double context_potential_single(const Vec2& p_i, const Vec2& p_j, Relation r, double fp_i,
                                double fp_j) {
  const double d = distance(p_i, p_j);
  auto single = [&](Relation rel) -> double {
    switch (rel) {
      case Relation::In:
      case Relation::On:
        return d < fp_j ? 1.0 : 0.0;
      case Relation::Contain:
      case Relation::Support:
        return d < fp_i ? 1.0 : 0.0;
      case Relation::Proximity: {
        const double s = fp_i + fp_j;
        return std::exp(-d * d / (2.0 * s * s));
      }
      case Relation::Disjoint:
        return 0.0;  // handled below
    }
    return 0.0;
  };
  if (r != Relation::Disjoint) return single(r);
  double rest = 0.0;
  for (Relation other : kAllRelations) {
    if (other != Relation::Disjoint) rest += single(other);
  }
  return std::clamp(1.0 - rest, 0.0, 1.0);
}

double context_potential_mixture(const Vec2& p_i, const ParticleSet& neighbor,
                                 const RelationBelief& belief, double fp_i, double fp_j,
                                 long long* pair_evals) {
  double value = 0.0;
  for (const auto& q : neighbor.particles) {
    double mix = 0.0;
    for (Relation r : kAllRelations) {
      const double b = belief.prob(r);
      if (b <= 0.0) continue;
      mix += b * context_potential_single(p_i, q.position, r, fp_i, fp_j);
    }
    value += q.weight * mix;
  }
  if (pair_evals) *pair_evals += static_cast<long long>(neighbor.particles.size());
  return value;
}

// ---------------------------------------------------------------------------
// SlimFilter

SlimFilter::SlimFilter(const World& world, const BpResult& relations, PotentialParams params)
    : world_(&world), relations_(&relations), params_(std::move(params)) {
  const int n = static_cast<int>(world.objects.size());
  neighbors_.assign(n, {});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double co = 1.0 - relations.belief(i, j).prob(Relation::Disjoint);
      if (co > params_.disjoint_threshold) neighbors_[i].push_back(j);
    }
  }
  const auto& grid = world.map.grid;
  for (int cy = 0; cy < grid.height(); ++cy) {
    for (int cx = 0; cx < grid.width(); ++cx) {
      if (grid.occupied(cx, cy)) continue;
      free_cells_.emplace_back(cx, cy);
      const Vec2 c = grid.cell_center(cx, cy);
      for (const auto& room : world.map.rooms) {
        if (room.contains(c)) {
          room_cells_.emplace_back(cx, cy);
          break;
        }
      }
    }
  }
  if (free_cells_.empty()) throw std::runtime_error("world has no free cells");
  if (room_cells_.empty()) room_cells_ = free_cells_;
}

double SlimFilter::motion_sigma(int object_id) const {
  return world_->objects[object_id].is_target ? params_.sigma_target_m : params_.sigma_landmark_m;
}

Vec2 SlimFilter::sample_free_room_cell(Rng& rng) const {
  std::uniform_int_distribution<std::size_t> pick(0, room_cells_.size() - 1);
  std::uniform_real_distribution<double> jitter(0.0, 1.0);
  const auto [cx, cy] = room_cells_[pick(rng)];
  const double res = world_->map.grid.resolution();
  return {(cx + jitter(rng)) * res, (cy + jitter(rng)) * res};
}

ParticleSet SlimFilter::uniform_set(int object_id, int count, Rng& rng) const {
  ParticleSet set;
  set.object_id = object_id;
  set.particles.resize(count);
  std::uniform_int_distribution<std::size_t> pick(0, free_cells_.size() - 1);
  std::uniform_real_distribution<double> jitter(0.0, 1.0);
  const double res = world_->map.grid.resolution();
  for (auto& p : set.particles) {
    const auto [cx, cy] = free_cells_[pick(rng)];
    p.position = {(cx + jitter(rng)) * res, (cy + jitter(rng)) * res};
    p.weight = 1.0 / count;
  }
  return set;
}

ParticleSet SlimFilter::gaussian_set(int object_id, int count, const Vec2& center, double sigma,
                                     Rng& rng) const {
  ParticleSet set;
  set.object_id = object_id;
  set.particles.resize(count);
  std::normal_distribution<double> noise(0.0, sigma);
  for (auto& p : set.particles) {
    Vec2 pos = center;
    for (int attempt = 0; attempt < 64; ++attempt) {
      const Vec2 cand = center + Vec2{noise(rng), noise(rng)};
      if (world_->map.grid.free_at(cand)) {
        pos = cand;
        break;
      }
    }
    if (!world_->map.grid.free_at(pos)) pos = sample_free_room_cell(rng);
    p.position = pos;
    p.weight = 1.0 / count;
  }
  return set;
}

BeliefState SlimFilter::make_state(int particles_per_object, Rng& rng) const {
  BeliefState state;
  const int n = static_cast<int>(world_->objects.size());
  state.sets.reserve(n);
  for (int i = 0; i < n; ++i) state.sets.push_back(uniform_set(i, particles_per_object, rng));
  state.neighbors = neighbors_;
  state.weight_updates.assign(n, 0);
  return state;
}

namespace {

std::vector<Particle> systematic_resample(const std::vector<Particle>& in, Rng& rng) {
  const int m = static_cast<int>(in.size());
  std::uniform_real_distribution<double> uni(0.0, 1.0 / m);
  const double start = uni(rng);
  std::vector<Particle> out;
  out.reserve(m);
  double cum = in[0].weight;
  int idx = 0;
  for (int k = 0; k < m; ++k) {
    const double u = start + static_cast<double>(k) / m;
    while (cum < u && idx + 1 < m) {
      ++idx;
      cum += in[idx].weight;
    }
    Particle p = in[idx];
    p.weight = 1.0 / m;
    out.push_back(p);
  }
  return out;
}

}  // namespace

void SlimFilter::step(BeliefState& state, const Observation& z, Rng& rng,
                      const std::vector<int>* update_only) const {
  const int n = static_cast<int>(state.sets.size());
  const std::vector<ParticleSet> snapshot = state.sets;  // t-1 neighbor sets

  std::vector<int> order;
  if (update_only) {
    order = *update_only;
  } else {
    order.resize(n);
    std::iota(order.begin(), order.end(), 0);
  }

  // one sub-stream per object, so the update order cannot matter
  const uint64_t step_base = rng();

  for (int i : order) {
    Rng obj_rng(derive_seed(step_base, static_cast<uint64_t>(i)));
    auto& set = state.sets[i];
    const auto& obj = world_->objects[i];
    const int m = static_cast<int>(set.particles.size());

    // adaptive resampling: resampling every step converts each step's
    // weight ratios into offspring counts, which compounds and can
    // extinguish an observed mode while it is out of view; carrying the
    // weights keeps that evidence recoverable
    std::vector<double> carried(m, 1.0);
    if (snapshot[i].ess() < params_.ess_trigger * m) {
      set.particles = systematic_resample(snapshot[i].particles, obj_rng);
    } else {
      set.particles = snapshot[i].particles;
      for (int k = 0; k < m; ++k) carried[k] = set.particles[k].weight;
    }

    // motion from the prediction potential: Gaussian with covariance
    // sigma^2/2 per axis, kept in free space
    const double sig = motion_sigma(i);
    if (sig > 0.0) {
      std::normal_distribution<double> noise(0.0, sig / std::sqrt(2.0));
      for (auto& p : set.particles) {
        for (int attempt = 0; attempt < 10; ++attempt) {
          const Vec2 cand = p.position + Vec2{noise(obj_rng), noise(obj_rng)};
          if (world_->map.grid.free_at(cand)) {
            p.position = cand;
            break;
          }
        }
      }
    }

    const std::optional<Vec2> detection =
        z.detections[i] ? std::optional<Vec2>(z.detections[i]->position) : std::nullopt;
    for (int k = 0; k < m; ++k) {
      auto& p = set.particles[k];
      double w = measurement_potential(world_->map, p.position, z.camera, detection,
                                       world_->detector, obj.size, params_.gate_m);
      if (params_.use_context) {
        for (int j : state.neighbors[i]) {
          w *= context_potential_mixture(p.position, snapshot[j], relations_->belief(i, j),
                                         obj.footprint_m, world_->objects[j].footprint_m,
                                         &state.context_pair_evals);
        }
      }
      p.weight = carried[k] * w;
    }
    set.normalize();
    state.weight_updates[i] += 1;

    if (set.ess() < params_.ess_trigger * m) reinvigorate(set, snapshot, i, obj_rng);
  }
}

void SlimFilter::reinvigorate(ParticleSet& set, const std::vector<ParticleSet>& prev_sets,
                              int self, Rng& rng) const {
  const int m = static_cast<int>(set.particles.size());
  const int replace = static_cast<int>(std::lround(params_.reinvig_fraction * m));
  if (replace <= 0) return;
  if (set.ess() >= params_.ess_trigger * m) return;

  // indices of the lowest-weight particles
  std::vector<int> idx(m);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return set.particles[a].weight < set.particles[b].weight;
  });

  const auto& neigh = neighbors_[self];
  const double fp_self = world_->objects[self].footprint_m;
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  for (int k = 0; k < replace; ++k) {
    auto& p = set.particles[idx[k]];
    const bool from_rooms = neigh.empty() || k < (replace + 1) / 2;
    if (from_rooms) {
      p.position = sample_free_room_cell(rng);
    } else {
      std::uniform_int_distribution<std::size_t> pick_n(0, neigh.size() - 1);
      const int j = neigh[pick_n(rng)];
      const auto& src = prev_sets[j];
      // weight-sampled neighbor particle
      double u = uni(rng);
      Vec2 anchor = src.particles.back().position;
      for (const auto& q : src.particles) {
        if (u <= q.weight) {
          anchor = q.position;
          break;
        }
        u -= q.weight;
      }
      const double sigma = fp_self + world_->objects[j].footprint_m;
      std::normal_distribution<double> noise(0.0, sigma);
      Vec2 pos = anchor;
      for (int attempt = 0; attempt < 64; ++attempt) {
        const Vec2 cand = anchor + Vec2{noise(rng), noise(rng)};
        if (world_->map.grid.free_at(cand)) {
          pos = cand;
          break;
        }
      }
      if (!world_->map.grid.free_at(pos)) pos = sample_free_room_cell(rng);
      p.position = pos;
    }
    p.weight = 1.0 / m;
  }
  set.normalize();
}

void export_belief_csv(const BeliefState& state, const std::vector<SimObject>& objects,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write belief snapshot: " + path);
  out << "object,x,y,weight\n";
  char buf[128];
  for (std::size_t i = 0; i < state.sets.size(); ++i) {
    const std::string& name = objects[i].cls;
    for (const auto& p : state.sets[i].particles) {
      std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.9f\n", name.c_str(), p.position.x,
                    p.position.y, p.weight);
      out << buf;
    }
  }
}

}  // namespace slim
