#include "apexgame/svg.hpp"

#include <algorithm>
#include <fstream>

#include "apexgame/errors.hpp"

namespace apexgame {

namespace {

struct Bounds {
  double x_lo = 1e300, x_hi = -1e300, y_lo = 1e300, y_hi = -1e300;
  void add(const Eigen::Vector2d& p) {
    x_lo = std::min(x_lo, p.x());
    x_hi = std::max(x_hi, p.x());
    y_lo = std::min(y_lo, p.y());
    y_hi = std::max(y_hi, p.y());
  }
};

void emit_polyline(std::ofstream& out, const std::vector<Eigen::Vector2d>& pts,
                   const Bounds& b, const std::string& color, double width, bool dashed) {
  if (pts.size() < 2) return;
  out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << width
      << "\"";
  if (dashed) out << " stroke-dasharray=\"2,2\"";
  out << " points=\"";
  for (const auto& p : pts) {
    out << p.x() << "," << (b.y_hi - p.y() + b.y_lo) << " ";  // flip y for screen space
  }
  out << "\"/>\n";
}

}  // namespace

void write_track_svg(const std::string& path, const Track& track,
                     const std::vector<SvgSeries>& overlays,
                     const std::string& meta_comment) {
  std::vector<Eigen::Vector2d> left, right, center;
  for (std::size_t i = 0; i < track.size(); ++i) {
    const auto& s = track.samples()[i];
    const double psi = track.tangent_angle()[i];
    const Eigen::Vector2d n{-std::sin(psi), std::cos(psi)};
    const Eigen::Vector2d p{s.x, s.y};
    center.push_back(p);
    left.push_back(p + 0.5 * s.w * n);
    right.push_back(p - 0.5 * s.w * n);
  }

  Bounds b;
  for (const auto& p : left) b.add(p);
  for (const auto& p : right) b.add(p);
  for (const auto& series : overlays) {
    for (const auto& p : series.points) b.add(p);
  }
  const double margin = 2.0;
  b.x_lo -= margin;
  b.x_hi += margin;
  b.y_lo -= margin;
  b.y_hi += margin;

  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open " + path + " for writing");
  out.precision(8);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" << b.x_lo << " " << b.y_lo
      << " " << (b.x_hi - b.x_lo) << " " << (b.y_hi - b.y_lo) << "\">\n";
  if (!meta_comment.empty()) out << "<!-- " << meta_comment << " -->\n";
  out << "<rect x=\"" << b.x_lo << "\" y=\"" << b.y_lo << "\" width=\"" << (b.x_hi - b.x_lo)
      << "\" height=\"" << (b.y_hi - b.y_lo) << "\" fill=\"white\"/>\n";
  emit_polyline(out, left, b, "#404040", 0.3, false);
  emit_polyline(out, right, b, "#404040", 0.3, false);
  emit_polyline(out, center, b, "#b0b0b0", 0.2, true);
  for (const auto& series : overlays) {
    emit_polyline(out, series.points, b, series.color, series.width, series.dashed);
  }
  out << "</svg>\n";
}

}  // namespace apexgame
