#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace apexgame {

struct TrackSample {
  double x = 0.0;  // m
  double y = 0.0;  // m
  double w = 0.0;  // track width at this sample, m
};

// Discretized centerline with arc length, signed curvature and a continuous
// Frenet chart. Closed tracks store the closing sample (last == first
// geometrically) so segment lookups never special-case the seam; longitudinal
// coordinates wrap modulo the total length.
//
// Conventions: arc length s increases along the sample order; lateral offsets
// are positive to the LEFT of the direction of travel; curvature is positive
// when the path turns left. With these signs the Frenet scale factor
// (1 - kappa * p_y) vanishes exactly at the center of curvature.
class Track {
 public:
  const std::vector<TrackSample>& samples() const { return samples_; }
  const std::vector<double>& arc_length() const { return s_; }
  const std::vector<double>& curvature() const { return kappa_; }
  const std::vector<double>& tangent_angle() const { return psi_; }
  bool closed() const { return closed_; }
  double total_length() const { return s_.back(); }
  double w_max() const { return w_max_; }
  std::size_t size() const { return samples_.size(); }

  // Longitudinal coordinate wrapped into [0, L) for closed tracks; identity
  // for open tracks.
  double wrap_s(double p_x) const;

  // Curvature at arc length p_x, linearly interpolated between samples.
  double kappa_at(double p_x) const;

  // Width at arc length p_x, linearly interpolated.
  double width_at(double p_x) const;

  // Normal direction (unit, left-positive) of the chart at arc length p_x.
  Eigen::Vector2d normal_at(double p_x) const;

  // Chart map: centerline point at p_x offset by p_y along the interpolated
  // normal. Throws OutOfRange for open tracks when p_x is outside [0, L].
  Eigen::Vector2d frenet_to_global(double p_x, double p_y) const;

  // Inverse chart map. Throws OutsideFrenetDomain when the projection is
  // ambiguous (point beyond the local curvature radius of every candidate
  // segment).
  std::pair<double, double> global_to_frenet(double x, double y) const;

  friend Track build_track(const std::vector<TrackSample>& samples, bool closed);

 private:
  // Finds the segment index i with s[i] <= p_x <= s[i+1] (p_x pre-wrapped).
  std::size_t segment_of(double p_x) const;

  std::vector<TrackSample> samples_;
  std::vector<double> s_;      // cumulative chord length per sample
  std::vector<double> kappa_;  // signed three-point curvature per sample
  std::vector<double> psi_;    // tangent angle per sample (chart)
  bool closed_ = false;
  double w_max_ = 0.0;
};

// Validates the samples and computes arc length (cumulative chord length),
// curvature (three-point finite difference, periodic wrap when closed) and
// w_max (minimum width over samples). For closed tracks the input may either
// repeat the first sample at the end or not; the stored track always does.
Track build_track(const std::vector<TrackSample>& samples, bool closed);

}  // namespace apexgame
