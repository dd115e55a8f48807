#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "apexgame/track.hpp"

namespace apexgame {

struct SvgSeries {
  std::vector<Eigen::Vector2d> points;
  std::string color = "#1f77b4";
  double width = 0.5;
  bool dashed = false;
};

// Static SVG plot: track boundaries and centerline plus overlay polylines
// (trajectories, racelines). Dependency-free; meta_comment lands in an XML
// comment at the top of the file.
void write_track_svg(const std::string& path, const Track& track,
                     const std::vector<SvgSeries>& overlays,
                     const std::string& meta_comment);

}  // namespace apexgame
