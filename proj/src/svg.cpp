#include "slim/svg.hpp"

#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "slim/strategy.hpp"

namespace slim {

namespace {

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

struct Mapper {
  double height_m;
  double sx(double x) const { return kSvgScale * x; }
  double sy(double y) const { return kSvgScale * (height_m - y); }
};

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

}  // namespace

void emit_svg_snapshot(const World& world, const BeliefState& belief,
                       const std::vector<Vec2>& robot_trail,
                       const std::vector<ViewPose>& view_poses, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write SVG: " + path);

  const auto& grid = world.map.grid;
  const Mapper m{grid.height_m()};
  const double w_px = kSvgScale * grid.width_m();
  const double h_px = kSvgScale * grid.height_m();

  out << fmt("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
             "viewBox=\"0 0 %.0f %.0f\">\n",
             w_px, h_px, w_px, h_px);
  out << fmt("<!-- world-to-svg affine: px = %.0f * x_m ; py = %.0f * (%.3f - y_m) -->\n",
             kSvgScale, kSvgScale, grid.height_m());
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // occupied cells, merged into horizontal runs
  out << "<g fill=\"#444444\">\n";
  const double res = grid.resolution();
  for (int cy = 0; cy < grid.height(); ++cy) {
    int run_start = -1;
    for (int cx = 0; cx <= grid.width(); ++cx) {
      const bool occ = cx < grid.width() && grid.occupied(cx, cy);
      if (occ && run_start < 0) run_start = cx;
      if (!occ && run_start >= 0) {
        out << fmt("<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\"/>\n",
                   m.sx(run_start * res), m.sy((cy + 1) * res), kSvgScale * (cx - run_start) * res,
                   kSvgScale * res);
        run_start = -1;
      }
    }
  }
  out << "</g>\n";

  // room outlines
  for (const auto& room : world.map.rooms) {
    std::string pts;
    for (const auto& v : room.polygon) pts += fmt("%.1f,%.1f ", m.sx(v.x), m.sy(v.y));
    out << fmt("<polygon points=\"%s\" fill=\"none\" stroke=\"#999999\" stroke-width=\"1\" "
               "stroke-dasharray=\"6,4\"/>\n",
               pts.c_str());
    const Vec2& v0 = room.polygon[0];
    out << fmt("<text x=\"%.1f\" y=\"%.1f\" font-size=\"12\" fill=\"#999999\">%s</text>\n",
               m.sx(v0.x) + 6, m.sy(v0.y) + 16, room.name.c_str());
  }

  // particles, then GMM ellipses per object
  for (std::size_t i = 0; i < belief.sets.size(); ++i) {
    const char* color = kPalette[i % (sizeof(kPalette) / sizeof(kPalette[0]))];
    out << fmt("<g fill=\"%s\" fill-opacity=\"0.5\" data-object=\"%s\">\n", color,
               world.objects[i].cls.c_str());
    for (const auto& p : belief.sets[i].particles) {
      out << fmt("<circle cx=\"%.2f\" cy=\"%.2f\" r=\"2\"/>\n", m.sx(p.position.x),
                 m.sy(p.position.y));
    }
    out << "</g>\n";

    if (belief.sets[i].particles.size() >= 2) {
      const GaussianMixture gmm = fit_gmm(belief.sets[i]);
      for (const auto& comp : gmm.components) {
        // principal axes of the 2x2 covariance
        const double tr = comp.cov.xx + comp.cov.yy;
        const double det = comp.cov.det();
        const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
        const double l1 = tr / 2.0 + disc, l2 = tr / 2.0 - disc;
        const double angle = 0.5 * std::atan2(2.0 * comp.cov.xy, comp.cov.xx - comp.cov.yy);
        out << fmt("<ellipse cx=\"%.2f\" cy=\"%.2f\" rx=\"%.2f\" ry=\"%.2f\" "
                   "transform=\"rotate(%.2f %.2f %.2f)\" fill=\"none\" stroke=\"%s\" "
                   "stroke-width=\"1.5\"/>\n",
                   m.sx(comp.mean.x), m.sy(comp.mean.y),
                   kSvgScale * 2.0 * std::sqrt(std::max(l1, 1e-8)),
                   kSvgScale * 2.0 * std::sqrt(std::max(l2, 1e-8)), -angle * 180.0 / M_PI,
                   m.sx(comp.mean.x), m.sy(comp.mean.y), color);
      }
    }

    // ground-truth marker
    const Vec2& t = world.objects[i].truth;
    out << fmt("<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" fill=\"%s\">x %s</text>\n",
               m.sx(t.x) - 4, m.sy(t.y) + 4, color, world.objects[i].cls.c_str());
  }

  // robot trail
  if (robot_trail.size() >= 2) {
    std::string pts;
    for (const auto& p : robot_trail) pts += fmt("%.1f,%.1f ", m.sx(p.x), m.sy(p.y));
    out << fmt("<polyline points=\"%s\" fill=\"none\" stroke=\"#0033cc\" stroke-width=\"2\"/>\n",
               pts.c_str());
  }

  // view poses as FOV wedges
  const double half_fov = world.detector.fov_rad / 2.0;
  for (const auto& v : view_poses) {
    const double r = 0.6;  // wedge length in meters, drawing only
    const Vec2 a = v.position + Vec2{r * std::cos(v.yaw - half_fov), r * std::sin(v.yaw - half_fov)};
    const Vec2 b = v.position + Vec2{r * std::cos(v.yaw + half_fov), r * std::sin(v.yaw + half_fov)};
    out << fmt("<path d=\"M %.1f %.1f L %.1f %.1f L %.1f %.1f Z\" fill=\"#ff9900\" "
               "fill-opacity=\"0.35\" stroke=\"#cc6600\" stroke-width=\"1\"/>\n",
               m.sx(v.position.x), m.sy(v.position.y), m.sx(a.x), m.sy(a.y), m.sx(b.x), m.sy(b.y));
  }

  out << "</svg>\n";
}

}  // namespace slim
