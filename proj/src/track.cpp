#include "apexgame/track.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "apexgame/errors.hpp"
#include "apexgame/util.hpp"

namespace apexgame {

namespace {

constexpr double kDuplicateTol = 1e-9;

Eigen::Vector2d point_of(const TrackSample& s) { return {s.x, s.y}; }

// Signed curvature of the circle through three points (positive = left turn).
double menger_curvature(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                        const Eigen::Vector2d& c) {
  const Eigen::Vector2d ab = b - a;
  const Eigen::Vector2d bc = c - b;
  const Eigen::Vector2d ac = c - a;
  const double denom = ab.norm() * bc.norm() * ac.norm();
  if (denom < 1e-30) return 0.0;
  const double cross = ab.x() * bc.y() - ab.y() * bc.x();
  return 2.0 * cross / denom;
}

}  // namespace

Track build_track(const std::vector<TrackSample>& input, bool closed) {
  std::vector<TrackSample> pts = input;
  if (closed && pts.size() >= 2) {
    const Eigen::Vector2d first = point_of(pts.front());
    const Eigen::Vector2d last = point_of(pts.back());
    if ((first - last).norm() > kDuplicateTol) {
      pts.push_back(pts.front());  // store the closing sample explicitly
    } else {
      pts.back() = pts.front();
    }
  }

  const std::size_t n = pts.size();
  const std::size_t n_eff = closed ? n - 1 : n;  // distinct vertices
  if (n_eff < 3) {
    throw TooFewSamples("track needs at least 3 distinct samples, got " +
                        std::to_string(n_eff));
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (!(pts[i].w > 0.0) || !std::isfinite(pts[i].x) || !std::isfinite(pts[i].y)) {
      throw DegenerateGeometry("sample " + std::to_string(i) +
                               " violates w > 0 / finite coordinates");
    }
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if ((point_of(pts[i + 1]) - point_of(pts[i])).norm() < kDuplicateTol) {
      throw DegenerateGeometry("duplicate consecutive samples at index " +
                               std::to_string(i));
    }
  }

  Track t;
  t.samples_ = std::move(pts);
  t.closed_ = closed;

  t.s_.resize(n);
  t.s_[0] = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    t.s_[i] = t.s_[i - 1] +
              (point_of(t.samples_[i]) - point_of(t.samples_[i - 1])).norm();
  }

  // Curvature by three-point finite difference; periodic wrap when closed,
  // clamped at the endpoints otherwise.
  t.kappa_.assign(n, 0.0);
  for (std::size_t i = 0; i < n_eff; ++i) {
    std::size_t prev, next;
    if (closed) {
      prev = (i + n_eff - 1) % n_eff;
      next = (i + 1) % n_eff;
    } else {
      if (i == 0 || i + 1 == n_eff) continue;
      prev = i - 1;
      next = i + 1;
    }
    t.kappa_[i] = menger_curvature(point_of(t.samples_[prev]), point_of(t.samples_[i]),
                                   point_of(t.samples_[next]));
  }
  if (closed) {
    t.kappa_[n - 1] = t.kappa_[0];
  } else {
    t.kappa_[0] = t.kappa_[1];
    t.kappa_[n - 1] = t.kappa_[n - 2];
  }

  // Chart tangent angles: central difference direction at each vertex.
  t.psi_.assign(n, 0.0);
  for (std::size_t i = 0; i < n_eff; ++i) {
    Eigen::Vector2d dir;
    if (closed) {
      const std::size_t prev = (i + n_eff - 1) % n_eff;
      const std::size_t next = (i + 1) % n_eff;
      dir = point_of(t.samples_[next]) - point_of(t.samples_[prev]);
    } else if (i == 0) {
      dir = point_of(t.samples_[1]) - point_of(t.samples_[0]);
    } else if (i + 1 == n_eff) {
      dir = point_of(t.samples_[n_eff - 1]) - point_of(t.samples_[n_eff - 2]);
    } else {
      dir = point_of(t.samples_[i + 1]) - point_of(t.samples_[i - 1]);
    }
    t.psi_[i] = std::atan2(dir.y(), dir.x());
  }
  if (closed) t.psi_[n - 1] = t.psi_[0];

  t.w_max_ = std::numeric_limits<double>::infinity();
  for (const auto& s : t.samples_) t.w_max_ = std::min(t.w_max_, s.w);

  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(t.kappa_[i]) * t.samples_[i].w * 0.5 >= 1.0) {
      throw DegenerateGeometry(
          "sample " + std::to_string(i) +
          " violates |kappa * w / 2| < 1 (Frenet map not invertible in-track)");
    }
  }
  return t;
}

double Track::wrap_s(double p_x) const {
  if (!closed_) return p_x;
  const double len = total_length();
  double r = std::fmod(p_x, len);
  if (r < 0.0) r += len;
  return r;
}

std::size_t Track::segment_of(double p_x) const {
  const auto it = std::upper_bound(s_.begin(), s_.end(), p_x);
  const std::ptrdiff_t idx = std::distance(s_.begin(), it) - 1;
  return static_cast<std::size_t>(
      std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(s_.size()) - 2));
}

double Track::kappa_at(double p_x) const {
  double s = wrap_s(p_x);
  if (!closed_) s = std::clamp(s, 0.0, total_length());
  const std::size_t i = segment_of(s);
  const double ds = s_[i + 1] - s_[i];
  const double u = ds > 0.0 ? (s - s_[i]) / ds : 0.0;
  return (1.0 - u) * kappa_[i] + u * kappa_[i + 1];
}

double Track::width_at(double p_x) const {
  double s = wrap_s(p_x);
  if (!closed_) s = std::clamp(s, 0.0, total_length());
  const std::size_t i = segment_of(s);
  const double ds = s_[i + 1] - s_[i];
  const double u = ds > 0.0 ? (s - s_[i]) / ds : 0.0;
  return (1.0 - u) * samples_[i].w + u * samples_[i + 1].w;
}

Eigen::Vector2d Track::normal_at(double p_x) const {
  double s = wrap_s(p_x);
  if (!closed_) s = std::clamp(s, 0.0, total_length());
  const std::size_t i = segment_of(s);
  const double ds = s_[i + 1] - s_[i];
  const double u = ds > 0.0 ? (s - s_[i]) / ds : 0.0;
  const double theta = psi_[i] + u * wrap_angle(psi_[i + 1] - psi_[i]);
  return {-std::sin(theta), std::cos(theta)};
}

Eigen::Vector2d Track::frenet_to_global(double p_x, double p_y) const {
  if (!closed_) {
    const double slack = 1e-9 * std::max(1.0, total_length());
    if (p_x < -slack || p_x > total_length() + slack) {
      throw OutOfRange("p_x = " + std::to_string(p_x) +
                       " outside open track [0, " + std::to_string(total_length()) + "]");
    }
    p_x = std::clamp(p_x, 0.0, total_length());
  } else {
    p_x = wrap_s(p_x);
  }
  const std::size_t i = segment_of(p_x);
  const double ds = s_[i + 1] - s_[i];
  const double u = ds > 0.0 ? (p_x - s_[i]) / ds : 0.0;
  const Eigen::Vector2d base =
      (1.0 - u) * point_of(samples_[i]) + u * point_of(samples_[i + 1]);
  const double theta = psi_[i] + u * wrap_angle(psi_[i + 1] - psi_[i]);
  return base + p_y * Eigen::Vector2d{-std::sin(theta), std::cos(theta)};
}

std::pair<double, double> Track::global_to_frenet(double x, double y) const {
  const Eigen::Vector2d q{x, y};
  const std::size_t n_seg = samples_.size() - 1;

  // Coarse pass: plain point-to-segment distances to shortlist candidates.
  double best_coarse = std::numeric_limits<double>::infinity();
  double max_seg_len = 0.0;
  std::vector<double> coarse(n_seg);
  for (std::size_t i = 0; i < n_seg; ++i) {
    const Eigen::Vector2d a = point_of(samples_[i]);
    const Eigen::Vector2d d = point_of(samples_[i + 1]) - a;
    const double len2 = d.squaredNorm();
    const double u = len2 > 0.0 ? std::clamp((q - a).dot(d) / len2, 0.0, 1.0) : 0.0;
    coarse[i] = (q - (a + u * d)).norm();
    best_coarse = std::min(best_coarse, coarse[i]);
    max_seg_len = std::max(max_seg_len, std::sqrt(len2));
  }
  const double cutoff = best_coarse + max_seg_len + 1e-9;

  // Refined pass: solve for the chart foot point, i.e. the u in [0,1] where
  // (q - base(u)) is orthogonal to the interpolated tangent.
  bool found = false;
  bool saw_beyond_radius = false;
  double best_abs_py = std::numeric_limits<double>::infinity();
  double best_px = 0.0, best_py = 0.0;
  for (std::size_t i = 0; i < n_seg; ++i) {
    if (coarse[i] > cutoff) continue;
    const Eigen::Vector2d a = point_of(samples_[i]);
    const Eigen::Vector2d d = point_of(samples_[i + 1]) - a;
    const double dpsi = wrap_angle(psi_[i + 1] - psi_[i]);
    const auto g = [&](double u) {
      const double theta = psi_[i] + u * dpsi;
      const Eigen::Vector2d tau{std::cos(theta), std::sin(theta)};
      return (q - a - u * d).dot(tau);
    };
    double lo = 0.0, hi = 1.0;
    double glo = g(lo), ghi = g(hi);
    if (glo == 0.0) {
      hi = lo;
    } else if (ghi == 0.0) {
      lo = hi;
    } else if (glo * ghi > 0.0) {
      continue;  // orthogonal foot not on this segment
    }
    // Bisection with a Newton polish; g is monotone within the chart domain.
    for (int it = 0; it < 60 && hi - lo > 1e-15; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double gm = g(mid);
      if (gm == 0.0) {
        lo = hi = mid;
      } else if (gm * glo > 0.0) {
        lo = mid;
        glo = gm;
      } else {
        hi = mid;
      }
    }
    const double u = 0.5 * (lo + hi);
    const double theta = psi_[i] + u * dpsi;
    const Eigen::Vector2d nrm{-std::sin(theta), std::cos(theta)};
    const double p_y = (q - a - u * d).dot(nrm);
    const double seg_len = s_[i + 1] - s_[i];
    // Reject projections at (or within 0.1% of) the local curvature radius,
    // where the chart collapses and the foot point is ambiguous.
    if (seg_len > 0.0 && std::abs(p_y * dpsi / seg_len) >= 1.0 - 1e-3) {
      saw_beyond_radius = true;
      continue;
    }
    if (std::abs(p_y) < best_abs_py) {
      best_abs_py = std::abs(p_y);
      best_px = s_[i] + u * seg_len;
      best_py = p_y;
      found = true;
    }
  }
  if (!found) {
    throw OutsideFrenetDomain(
        saw_beyond_radius
            ? "projection beyond local curvature radius"
            : "no orthogonal projection onto the centerline found");
  }
  return {best_px, best_py};
}

}  // namespace apexgame
