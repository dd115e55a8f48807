#pragma once

#include <vector>

#include "apexgame/track.hpp"

namespace apexgame {

// Optimized path, sample-aligned with its source track: sample j of the
// raceline is centerline sample j offset by eta[j] along the chart normal.
// s is the raceline's own cumulative arc length; v_x/a_x are filled by a
// velocity profile (zero until then).
struct RaceLine {
  std::vector<double> x, y, s, v_x, a_x, psi, kappa, eta;
  bool closed = false;
  std::size_t size() const { return x.size(); }
};

struct VelocityProfileConfig {
  double mu_min = 0.6;
  double mu_max = 1.0;
  int n_profiles = 5;
  double g = 9.81;        // m/s^2
  double v_cap = 25.0;    // m/s
  double a_long_max = 8.0;  // m/s^2, accel and braking limit
  double w_veh = 2.0;     // m
};

// Per-sample speeds/accelerations for one friction value.
struct SpeedProfile {
  double mu = 0.0;
  std::vector<double> v, a;
};

// Minimum-curvature path: minimizes the summed squared three-point curvature
// of the offset path over lateral offsets eta bounded by
// |eta_i| <= w_i/2 - w_veh/2. Solved as a bound-constrained quadratic
// minimization of the linearized curvature with one re-linearization pass;
// heading and curvature are recomputed from the final path. No velocities.
RaceLine compute_raceline(const Track& track, double w_veh);

// Friction-limited speeds: lateral cap sqrt(mu*g/|kappa|) clipped at v_cap,
// then forward (acceleration) and backward (braking) passes limited by
// a_long_max, iterated to a fixed point with wraparound on closed tracks.
SpeedProfile velocity_profile(const RaceLine& raceline, const VelocityProfileConfig& cfg,
                              double mu);

// Library of velocity profiles at evenly spaced friction values; lookup
// interpolates speeds per sample.
class ProfileLibrary {
 public:
  ProfileLibrary() = default;
  ProfileLibrary(const RaceLine& raceline, const VelocityProfileConfig& cfg);

  SpeedProfile lookup(double mu) const;
  const std::vector<SpeedProfile>& profiles() const { return profiles_; }
  double mu_min() const { return mu_min_; }
  double mu_max() const { return mu_max_; }

 private:
  std::vector<SpeedProfile> profiles_;
  std::vector<double> ds_;  // sample spacing, for re-deriving accelerations
  bool closed_ = false;
  double mu_min_ = 0.0, mu_max_ = 0.0;
};

// Copy of the raceline with v_x/a_x taken from the profile.
RaceLine with_profile(RaceLine raceline, const SpeedProfile& profile);

}  // namespace apexgame
