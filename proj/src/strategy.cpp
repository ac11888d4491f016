#include "slim/strategy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace slim {

namespace {

double gauss2_pdf(const Vec2& x, const Vec2& mean, const Mat2& cov) {
  const double det = cov.det();
  if (!(det > 0.0)) return 0.0;
  const Vec2 d = x - mean;
  const double q = cov.inverse().quad(d);
  return std::exp(-0.5 * q) / (2.0 * M_PI * std::sqrt(det));
}

struct EmFit {
  std::vector<GmmComponent> components;
  double loglik = -std::numeric_limits<double>::infinity();
};

EmFit run_em(const std::vector<Particle>& pts, int k, const GmmOptions& opts, Rng& rng) {
  const int m = static_cast<int>(pts.size());

  // weighted mean/covariance of the whole set, for initialization
  Vec2 mean{};
  for (const auto& p : pts) mean = mean + p.position * p.weight;
  Mat2 cov{};
  for (const auto& p : pts) {
    const Vec2 d = p.position - mean;
    cov.xx += p.weight * d.x * d.x;
    cov.xy += p.weight * d.x * d.y;
    cov.yy += p.weight * d.y * d.y;
  }
  cov.xx += opts.cov_reg;
  cov.yy += opts.cov_reg;

  EmFit fit;
  fit.components.resize(k);
  // k-means++-like seeding on weighted particles
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  auto weighted_pick = [&](const std::vector<double>& w) {
    double total = std::accumulate(w.begin(), w.end(), 0.0);
    if (total <= 0.0) return static_cast<int>(rng() % m);
    double u = uni(rng) * total;
    for (int i = 0; i < m; ++i) {
      if (u <= w[i]) return i;
      u -= w[i];
    }
    return m - 1;
  };
  std::vector<double> seed_w(m);
  for (int i = 0; i < m; ++i) seed_w[i] = pts[i].weight;
  std::vector<Vec2> centers;
  centers.push_back(pts[weighted_pick(seed_w)].position);
  while (static_cast<int>(centers.size()) < k) {
    for (int i = 0; i < m; ++i) {
      double d2 = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) d2 = std::min(d2, (pts[i].position - c).norm2());
      seed_w[i] = pts[i].weight * d2;
    }
    centers.push_back(pts[weighted_pick(seed_w)].position);
  }
  for (int c = 0; c < k; ++c) {
    fit.components[c].mean = centers[c];
    fit.components[c].cov = cov;
    fit.components[c].weight = 1.0 / k;
  }

  std::vector<double> resp(static_cast<std::size_t>(m) * k);
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < opts.max_iters; ++iter) {
    // E step
    double ll = 0.0;
    for (int i = 0; i < m; ++i) {
      double denom = 0.0;
      for (int c = 0; c < k; ++c) {
        const auto& comp = fit.components[c];
        const double v = comp.weight * gauss2_pdf(pts[i].position, comp.mean, comp.cov);
        resp[i * k + c] = v;
        denom += v;
      }
      if (denom > 0.0) {
        for (int c = 0; c < k; ++c) resp[i * k + c] /= denom;
        ll += pts[i].weight * std::log(denom);
      } else {
        for (int c = 0; c < k; ++c) resp[i * k + c] = 1.0 / k;
        ll += pts[i].weight * std::log(std::numeric_limits<double>::min());
      }
    }
    // M step, with particle weights as fractional counts
    for (int c = 0; c < k; ++c) {
      double nc = 0.0;
      Vec2 mu{};
      for (int i = 0; i < m; ++i) {
        const double r = pts[i].weight * resp[i * k + c];
        nc += r;
        mu = mu + pts[i].position * r;
      }
      auto& comp = fit.components[c];
      if (nc <= 1e-12) {
        comp.weight = 0.0;
        comp.cov = Mat2::isotropic(opts.cov_reg);
        continue;
      }
      mu = mu * (1.0 / nc);
      Mat2 sg{};
      for (int i = 0; i < m; ++i) {
        const double r = pts[i].weight * resp[i * k + c];
        const Vec2 d = pts[i].position - mu;
        sg.xx += r * d.x * d.x;
        sg.xy += r * d.x * d.y;
        sg.yy += r * d.y * d.y;
      }
      sg.xx = sg.xx / nc + opts.cov_reg;
      sg.xy = sg.xy / nc;
      sg.yy = sg.yy / nc + opts.cov_reg;
      comp.weight = nc;
      comp.mean = mu;
      comp.cov = sg;
    }
    fit.loglik = ll;
    if (std::abs(ll - prev_ll) < opts.tol) break;
    prev_ll = ll;
  }
  return fit;
}

}  // namespace

GaussianMixture fit_gmm(const ParticleSet& set, const GmmOptions& opts) {
  const int m = static_cast<int>(set.particles.size());
  if (m < 2) throw std::invalid_argument("fit_gmm needs at least 2 particles");

  double best_bic = std::numeric_limits<double>::infinity();
  EmFit best;
  for (int k = 1; k <= opts.k_max && k <= m; ++k) {
    EmFit kbest;
    for (int restart = 0; restart < opts.restarts; ++restart) {
      Rng rng(derive_seed(opts.seed, static_cast<uint64_t>(k), static_cast<uint64_t>(restart)));
      EmFit fit = run_em(set.particles, k, opts, rng);
      if (fit.loglik > kbest.loglik) kbest = std::move(fit);
    }
    const double params_count = 6.0 * k - 1.0;
    const double bic = -2.0 * (m * kbest.loglik) + params_count * std::log(static_cast<double>(m));
    if (bic < best_bic) {
      best_bic = bic;
      best = std::move(kbest);
    }
  }

  GaussianMixture gmm;
  for (const auto& c : best.components) {
    if (c.weight > 1e-9) gmm.components.push_back(c);
  }
  double total = 0.0;
  for (const auto& c : gmm.components) total += c.weight;
  for (auto& c : gmm.components) c.weight /= total;
  std::stable_sort(gmm.components.begin(), gmm.components.end(),
                   [](const GmmComponent& a, const GmmComponent& b) {
                     if (a.weight != b.weight) return a.weight > b.weight;
                     if (a.mean.x != b.mean.x) return a.mean.x < b.mean.x;
                     return a.mean.y < b.mean.y;
                   });
  return gmm;
}

std::vector<ViewPose> generate_view_poses(const GmmComponent& component, const WorldMap& map,
                                          const DetectorModel& det, SizeClass target_size,
                                          const UtilityParams& params) {
  constexpr int kSamples = 16;
  const double range = det.range_for(target_size);
  for (double factor : {0.8, 0.6, 0.4}) {
    std::vector<ViewPose> kept;
    const double radius = factor * range;
    for (int s = 0; s < kSamples; ++s) {
      const double angle = 2.0 * M_PI * s / kSamples;
      ViewPose pose;
      pose.position = component.mean + Vec2{radius * std::cos(angle), radius * std::sin(angle)};
      const Vec2 to_mean = component.mean - pose.position;
      pose.yaw = std::atan2(to_mean.y, to_mean.x);
      if (!map.grid.free_at(pose.position)) continue;
      if (map.grid.clearance(pose.position, params.clearance_m + 1.0) <= params.clearance_m)
        continue;
      if (!visible(map, pose, det.fov_rad, component.mean, range)) continue;
      kept.push_back(pose);
    }
    if (!kept.empty()) return kept;
  }
  throw NoFeasibleView("no feasible view pose for component");
}

double utility_ds(double omega, double d_nav_m, const UtilityParams& params) {
  const double d = std::max(d_nav_m, params.min_nav_m);
  return omega + params.alpha / std::atan(params.sigma * d);
}

double utility_hs(const WorldMap& map, const ViewPose& pose, double omega, double d_nav_m,
                  const std::vector<LandmarkView>& landmarks, const DetectorModel& det,
                  const UtilityParams& params) {
  double bonus = 0.0;
  for (const auto& lm : landmarks) {
    if (!lm.gmm) continue;
    const double range = det.range_for(lm.size);
    for (const auto& comp : lm.gmm->components) {
      if (!visible(map, pose, det.fov_rad, comp.mean, range)) continue;
      bonus = std::max(bonus, lm.co_occur * comp.weight);
    }
  }
  return utility_ds(omega, d_nav_m, params) + params.beta * bonus;
}

SelectedView select_next_view(const BeliefState& state, const SlimFilter& filter, int target_index,
                              const RobotState& robot, const World& world, UtilityMode mode,
                              const UtilityParams& params, const GmmOptions& gmm_opts) {
  const GaussianMixture target_gmm = fit_gmm(state.sets[target_index], gmm_opts);

  std::vector<GaussianMixture> landmark_gmms;
  std::vector<LandmarkView> landmarks;
  if (mode == UtilityMode::HS) {
    landmark_gmms.reserve(state.sets.size());
    for (std::size_t j = 0; j < state.sets.size(); ++j) {
      if (static_cast<int>(j) == target_index) continue;
      GaussianMixture gmm = fit_gmm(state.sets[j], gmm_opts);
      for (auto& comp : gmm.components) {
        comp.mean = project_to_free(world.map.grid, comp.mean);
      }
      landmark_gmms.push_back(std::move(gmm));
      LandmarkView lv;
      lv.gmm = &landmark_gmms.back();
      lv.co_occur =
          1.0 - filter.pair_belief(target_index, static_cast<int>(j)).prob(Relation::Disjoint);
      lv.size = world.objects[j].size;
      landmarks.push_back(lv);
    }
  }

  const DistanceField field(world.map.grid, robot.position);

  bool found = false;
  SelectedView best;
  int comp_index = 0;
  for (const auto& comp : target_gmm.components) {
    // a component straddling a wall can put its mean in occupied space;
    // aim the candidate circle at the nearest reachable face of the mass
    GmmComponent aimed = comp;
    aimed.mean = project_to_free(world.map.grid, comp.mean);
    std::vector<ViewPose> candidates;
    try {
      candidates = generate_view_poses(aimed, world.map, world.detector,
                                       world.objects[target_index].size, params);
    } catch (const NoFeasibleView&) {
      ++comp_index;
      continue;  // unreachable component, skip it
    }
    for (const auto& pose : candidates) {
      const auto d_nav = field.to(pose.position);
      if (!d_nav) continue;
      const double u = (mode == UtilityMode::DS)
                           ? utility_ds(comp.weight, *d_nav, params)
                           : utility_hs(world.map, pose, comp.weight, *d_nav, landmarks,
                                        world.detector, params);
      const bool better = !found || u > best.utility ||
                          (u == best.utility && *d_nav < best.d_nav_m);
      if (better) {
        best.pose = pose;
        best.utility = u;
        best.d_nav_m = *d_nav;
        best.component = comp_index;
        found = true;
      }
    }
    ++comp_index;
  }
  if (!found) throw NoFeasibleView("no feasible view pose for any component");
  return best;
}

}  // namespace slim
