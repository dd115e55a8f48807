#include "apexgame/raceline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Sparse>

#include "apexgame/errors.hpp"
#include "apexgame/util.hpp"

namespace apexgame {

namespace {

double menger(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
              const Eigen::Vector2d& c) {
  const Eigen::Vector2d ab = b - a;
  const Eigen::Vector2d bc = c - b;
  const Eigen::Vector2d ac = c - a;
  const double denom = ab.norm() * bc.norm() * ac.norm();
  if (denom < 1e-30) return 0.0;
  return 2.0 * (ab.x() * bc.y() - ab.y() * bc.x()) / denom;
}

struct OffsetPathProblem {
  std::vector<Eigen::Vector2d> base;    // effective vertices
  std::vector<Eigen::Vector2d> normal;  // chart normal per vertex
  bool closed = false;

  std::size_t size() const { return base.size(); }

  Eigen::Vector2d point(const Eigen::VectorXd& eta, std::size_t i) const {
    return base[i] + eta[static_cast<Eigen::Index>(i)] * normal[i];
  }

  // Curvature rows: interior vertices for open paths, all vertices (wrapped)
  // for closed ones.
  std::vector<std::size_t> rows() const {
    std::vector<std::size_t> r;
    const std::size_t n = size();
    if (closed) {
      for (std::size_t i = 0; i < n; ++i) r.push_back(i);
    } else {
      for (std::size_t i = 1; i + 1 < n; ++i) r.push_back(i);
    }
    return r;
  }

  double curvature_row(const Eigen::VectorXd& eta, std::size_t i) const {
    const std::size_t n = size();
    const std::size_t prev = closed ? (i + n - 1) % n : i - 1;
    const std::size_t next = closed ? (i + 1) % n : i + 1;
    return menger(point(eta, prev), point(eta, i), point(eta, next));
  }

  double cost(const Eigen::VectorXd& eta) const {
    double c = 0.0;
    for (const std::size_t i : rows()) {
      const double k = curvature_row(eta, i);
      c += k * k;
    }
    return c;
  }
};

// Bound-constrained least squares min ||r0 + J (eta - eta0)||^2 over the box
// [lo, hi]. Active-set Newton: variables pinned at a bound with an outward
// gradient are frozen and the reduced normal equations are solved with a
// sparse factorization. The tiny Tikhonov term keeps the system definite when
// J has a nullspace (straight sections).
Eigen::VectorXd solve_box_lsq(const Eigen::SparseMatrix<double>& jac,
                              const Eigen::VectorXd& r0, const Eigen::VectorXd& eta0,
                              const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  const Eigen::Index n = eta0.size();
  const double reg = 1e-9;
  Eigen::SparseMatrix<double> hess = 2.0 * (jac.transpose() * jac).pruned();
  for (Eigen::Index i = 0; i < n; ++i) hess.coeffRef(i, i) += 2.0 * reg;
  hess.makeCompressed();

  Eigen::VectorXd eta = eta0.cwiseMax(lo).cwiseMin(hi);
  const double bound_tol = 1e-12;
  const double grad_tol = 1e-10 * std::max(1.0, r0.norm());

  for (int it = 0; it < 100; ++it) {
    const Eigen::VectorXd grad =
        2.0 * (jac.transpose() * (r0 + jac * (eta - eta0))) + 2.0 * reg * (eta - eta0);

    std::vector<Eigen::Index> free;
    free.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool at_lo = eta[i] <= lo[i] + bound_tol && grad[i] > 0.0;
      const bool at_hi = eta[i] >= hi[i] - bound_tol && grad[i] < 0.0;
      if (!at_lo && !at_hi) free.push_back(i);
    }
    if (free.empty()) break;

    Eigen::VectorXd g_f(static_cast<Eigen::Index>(free.size()));
    for (std::size_t k = 0; k < free.size(); ++k) {
      g_f[static_cast<Eigen::Index>(k)] = grad[free[k]];
    }
    if (g_f.lpNorm<Eigen::Infinity>() < grad_tol) break;

    // Reduced Hessian on the free set.
    std::vector<Eigen::Index> pos(static_cast<std::size_t>(n), -1);
    for (std::size_t k = 0; k < free.size(); ++k) pos[static_cast<std::size_t>(free[k])] = static_cast<Eigen::Index>(k);
    std::vector<Eigen::Triplet<double>> trips;
    for (Eigen::Index col = 0; col < hess.outerSize(); ++col) {
      if (pos[static_cast<std::size_t>(col)] < 0) continue;
      for (Eigen::SparseMatrix<double>::InnerIterator itH(hess, col); itH; ++itH) {
        const Eigen::Index row = itH.row();
        if (pos[static_cast<std::size_t>(row)] < 0) continue;
        trips.emplace_back(static_cast<int>(pos[static_cast<std::size_t>(row)]),
                           static_cast<int>(pos[static_cast<std::size_t>(col)]), itH.value());
      }
    }
    Eigen::SparseMatrix<double> h_ff(static_cast<int>(free.size()), static_cast<int>(free.size()));
    h_ff.setFromTriplets(trips.begin(), trips.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(h_ff);
    if (solver.info() != Eigen::Success) break;
    const Eigen::VectorXd d_f = solver.solve(-g_f);

    // Ratio test: longest step keeping free variables inside the box.
    double alpha = 1.0;
    for (std::size_t k = 0; k < free.size(); ++k) {
      const Eigen::Index i = free[k];
      const double d = d_f[static_cast<Eigen::Index>(k)];
      if (d > 0.0) alpha = std::min(alpha, (hi[i] - eta[i]) / d);
      else if (d < 0.0) alpha = std::min(alpha, (lo[i] - eta[i]) / d);
    }
    alpha = std::max(alpha, 0.0);
    double moved = 0.0;
    for (std::size_t k = 0; k < free.size(); ++k) {
      const Eigen::Index i = free[k];
      eta[i] = std::clamp(eta[i] + alpha * d_f[static_cast<Eigen::Index>(k)], lo[i], hi[i]);
      moved = std::max(moved, std::abs(alpha * d_f[static_cast<Eigen::Index>(k)]));
    }
    if (moved < 1e-14 || (alpha == 1.0 && g_f.lpNorm<Eigen::Infinity>() < grad_tol)) break;
  }
  return eta;
}

}  // namespace

RaceLine compute_raceline(const Track& track, double w_veh) {
  const std::size_t n = track.size();
  const std::size_t n_eff = track.closed() ? n - 1 : n;

  OffsetPathProblem prob;
  prob.closed = track.closed();
  prob.base.resize(n_eff);
  prob.normal.resize(n_eff);
  Eigen::VectorXd lo(n_eff), hi(n_eff);
  for (std::size_t i = 0; i < n_eff; ++i) {
    const auto& smp = track.samples()[i];
    prob.base[i] = {smp.x, smp.y};
    const double psi = track.tangent_angle()[i];
    prob.normal[i] = {-std::sin(psi), std::cos(psi)};
    const double bound = 0.5 * (smp.w - w_veh);
    if (!(bound > 0.0)) {
      throw TrackTooNarrow("sample " + std::to_string(i) + ": width " +
                           std::to_string(smp.w) + " <= vehicle width " +
                           std::to_string(w_veh));
    }
    lo[static_cast<Eigen::Index>(i)] = -bound;
    hi[static_cast<Eigen::Index>(i)] = bound;
  }

  const std::vector<std::size_t> rows = prob.rows();
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_eff));
  double cost = prob.cost(eta);

  // Linearize, solve the box QP, backtrack on the true cost; one
  // re-linearization pass.
  for (int pass = 0; pass < 2; ++pass) {
    Eigen::VectorXd r0(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      r0[static_cast<Eigen::Index>(r)] = prob.curvature_row(eta, rows[r]);
    }
    std::vector<Eigen::Triplet<double>> trips;
    const double h = 1e-6;
    Eigen::VectorXd pert = eta;
    for (std::size_t j = 0; j < n_eff; ++j) {
      // eta_j only affects the curvature rows centered within one vertex.
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const std::size_t i = rows[r];
        const std::size_t dist =
            prob.closed ? std::min((i + n_eff - j) % n_eff, (j + n_eff - i) % n_eff)
                        : (i > j ? i - j : j - i);
        if (dist > 1) continue;
        pert[static_cast<Eigen::Index>(j)] = eta[static_cast<Eigen::Index>(j)] + h;
        const double kp = prob.curvature_row(pert, i);
        pert[static_cast<Eigen::Index>(j)] = eta[static_cast<Eigen::Index>(j)] - h;
        const double km = prob.curvature_row(pert, i);
        pert[static_cast<Eigen::Index>(j)] = eta[static_cast<Eigen::Index>(j)];
        trips.emplace_back(static_cast<int>(r), static_cast<int>(j), (kp - km) / (2.0 * h));
      }
    }
    Eigen::SparseMatrix<double> jac(static_cast<int>(rows.size()), static_cast<int>(n_eff));
    jac.setFromTriplets(trips.begin(), trips.end());

    const Eigen::VectorXd candidate = solve_box_lsq(jac, r0, eta, lo, hi);
    double t = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 12; ++bt) {
      const Eigen::VectorXd trial = eta + t * (candidate - eta);
      const double c = prob.cost(trial);
      if (c <= cost) {
        eta = trial;
        cost = c;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
  }

  RaceLine rl;
  rl.closed = track.closed();
  rl.x.resize(n);
  rl.y.resize(n);
  rl.s.resize(n);
  rl.psi.resize(n);
  rl.kappa.resize(n);
  rl.eta.resize(n);
  rl.v_x.assign(n, 0.0);
  rl.a_x.assign(n, 0.0);

  const auto eta_of = [&](std::size_t i) {
    return eta[static_cast<Eigen::Index>(i % n_eff)];
  };
  std::vector<Eigen::Vector2d> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t e = i % n_eff;
    pts[i] = prob.base[e] + eta_of(i) * prob.normal[e];
    rl.x[i] = pts[i].x();
    rl.y[i] = pts[i].y();
    rl.eta[i] = eta_of(i);
  }
  rl.s[0] = 0.0;
  for (std::size_t i = 1; i < n; ++i) rl.s[i] = rl.s[i - 1] + (pts[i] - pts[i - 1]).norm();

  for (std::size_t i = 0; i < n_eff; ++i) {
    Eigen::Vector2d dir;
    std::size_t prev, next;
    if (rl.closed) {
      prev = (i + n_eff - 1) % n_eff;
      next = (i + 1) % n_eff;
      dir = pts[next] - pts[prev];
    } else if (i == 0) {
      prev = 0;
      next = 1;
      dir = pts[1] - pts[0];
    } else if (i + 1 == n_eff) {
      prev = n_eff - 2;
      next = n_eff - 1;
      dir = pts[n_eff - 1] - pts[n_eff - 2];
    } else {
      prev = i - 1;
      next = i + 1;
      dir = pts[next] - pts[prev];
    }
    rl.psi[i] = std::atan2(dir.y(), dir.x());
    if (rl.closed || (i > 0 && i + 1 < n_eff)) {
      rl.kappa[i] = menger(pts[prev], pts[i], pts[next]);
    }
  }
  if (!rl.closed) {
    rl.kappa[0] = rl.kappa[1];
    rl.kappa[n - 1] = rl.kappa[n - 2];
  } else {
    rl.psi[n - 1] = rl.psi[0];
    rl.kappa[n - 1] = rl.kappa[0];
  }
  return rl;
}

SpeedProfile velocity_profile(const RaceLine& raceline, const VelocityProfileConfig& cfg,
                              double mu) {
  if (!(mu >= cfg.mu_min && mu <= cfg.mu_max)) {
    throw FrictionOutOfRange("mu = " + std::to_string(mu) + " outside [" +
                             std::to_string(cfg.mu_min) + ", " +
                             std::to_string(cfg.mu_max) + "]");
  }
  const std::size_t n = raceline.size();
  const std::size_t n_eff = raceline.closed ? n - 1 : n;

  SpeedProfile prof;
  prof.mu = mu;
  prof.v.resize(n);
  prof.a.assign(n, 0.0);

  for (std::size_t i = 0; i < n; ++i) {
    const double k = std::abs(raceline.kappa[i]);
    prof.v[i] = k < 1e-12 ? cfg.v_cap : std::min(cfg.v_cap, std::sqrt(mu * cfg.g / k));
  }

  const auto ds = [&](std::size_t seg) { return raceline.s[seg + 1] - raceline.s[seg]; };

  // Forward pass limits acceleration, backward pass limits braking; iterate
  // to a fixed point (closed tracks need the wraparound to settle).
  for (int sweep = 0; sweep < 200; ++sweep) {
    double change = 0.0;
    if (raceline.closed) {
      for (std::size_t seg = 0; seg < n_eff; ++seg) {
        const std::size_t i = seg % n_eff, j = (seg + 1) % n_eff;
        const double cap = std::sqrt(prof.v[i] * prof.v[i] + 2.0 * cfg.a_long_max * ds(seg));
        if (prof.v[j] > cap) {
          change = std::max(change, prof.v[j] - cap);
          prof.v[j] = cap;
        }
      }
      for (std::size_t seg = n_eff; seg-- > 0;) {
        const std::size_t i = seg % n_eff, j = (seg + 1) % n_eff;
        const double cap = std::sqrt(prof.v[j] * prof.v[j] + 2.0 * cfg.a_long_max * ds(seg));
        if (prof.v[i] > cap) {
          change = std::max(change, prof.v[i] - cap);
          prof.v[i] = cap;
        }
      }
    } else {
      for (std::size_t seg = 0; seg + 1 < n; ++seg) {
        const double cap =
            std::sqrt(prof.v[seg] * prof.v[seg] + 2.0 * cfg.a_long_max * ds(seg));
        if (prof.v[seg + 1] > cap) {
          change = std::max(change, prof.v[seg + 1] - cap);
          prof.v[seg + 1] = cap;
        }
      }
      for (std::size_t seg = n - 1; seg-- > 0;) {
        const double cap =
            std::sqrt(prof.v[seg + 1] * prof.v[seg + 1] + 2.0 * cfg.a_long_max * ds(seg));
        if (prof.v[seg] > cap) {
          change = std::max(change, prof.v[seg] - cap);
          prof.v[seg] = cap;
        }
      }
    }
    if (change < 1e-13) break;
  }
  if (raceline.closed) prof.v[n - 1] = prof.v[0];

  for (std::size_t seg = 0; seg + 1 < n; ++seg) {
    const double d = ds(seg);
    if (d > 0.0) {
      prof.a[seg] = (prof.v[seg + 1] * prof.v[seg + 1] - prof.v[seg] * prof.v[seg]) / (2.0 * d);
    }
  }
  prof.a[n - 1] = raceline.closed ? prof.a[0] : prof.a[n - 2];
  return prof;
}

ProfileLibrary::ProfileLibrary(const RaceLine& raceline, const VelocityProfileConfig& cfg) {
  if (cfg.n_profiles < 1) {
    throw ValidationError("n_profiles must be >= 1");
  }
  mu_min_ = cfg.mu_min;
  mu_max_ = cfg.mu_max;
  closed_ = raceline.closed;
  ds_.resize(raceline.size() > 0 ? raceline.size() - 1 : 0);
  for (std::size_t i = 0; i + 1 < raceline.size(); ++i) {
    ds_[i] = raceline.s[i + 1] - raceline.s[i];
  }
  profiles_.reserve(static_cast<std::size_t>(cfg.n_profiles));
  for (int j = 0; j < cfg.n_profiles; ++j) {
    const double mu =
        cfg.n_profiles == 1
            ? cfg.mu_min
            : cfg.mu_min + (cfg.mu_max - cfg.mu_min) * j / (cfg.n_profiles - 1);
    profiles_.push_back(velocity_profile(raceline, cfg, mu));
  }
}

SpeedProfile ProfileLibrary::lookup(double mu) const {
  if (!(mu >= mu_min_ - 1e-12 && mu <= mu_max_ + 1e-12)) {
    throw FrictionOutOfRange("mu = " + std::to_string(mu) + " outside [" +
                             std::to_string(mu_min_) + ", " + std::to_string(mu_max_) + "]");
  }
  if (profiles_.size() == 1) return profiles_.front();
  mu = std::clamp(mu, mu_min_, mu_max_);

  std::size_t j = 0;
  while (j + 2 < profiles_.size() && mu > profiles_[j + 1].mu) ++j;
  const SpeedProfile& a = profiles_[j];
  const SpeedProfile& b = profiles_[j + 1];
  if (mu == a.mu) return a;
  if (mu == b.mu) return b;

  const double t = (mu - a.mu) / (b.mu - a.mu);
  SpeedProfile out;
  out.mu = mu;
  const std::size_t n = a.v.size();
  out.v.resize(n);
  out.a.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) out.v[i] = (1.0 - t) * a.v[i] + t * b.v[i];
  for (std::size_t seg = 0; seg + 1 < n; ++seg) {
    if (ds_[seg] > 0.0) {
      out.a[seg] = (out.v[seg + 1] * out.v[seg + 1] - out.v[seg] * out.v[seg]) / (2.0 * ds_[seg]);
    }
  }
  if (n > 0) out.a[n - 1] = closed_ ? out.a[0] : out.a[n - 2];
  return out;
}

RaceLine with_profile(RaceLine raceline, const SpeedProfile& profile) {
  if (profile.v.size() != raceline.size()) {
    throw DimensionMismatch("profile has " + std::to_string(profile.v.size()) +
                            " samples, raceline has " + std::to_string(raceline.size()));
  }
  raceline.v_x = profile.v;
  raceline.a_x = profile.a;
  return raceline;
}

}  // namespace apexgame
