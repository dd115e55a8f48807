#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "apexgame/equilibrium.hpp"
#include "apexgame/errors.hpp"
#include "apexgame/game.hpp"
#include "apexgame/io.hpp"
#include "apexgame/learning.hpp"
#include "apexgame/mlp.hpp"
#include "apexgame/svg.hpp"

namespace py = pybind11;
using namespace apexgame;

namespace {

// RaceContext holds raw pointers; this owner keeps the referenced objects
// alive for python callers.
struct SimContext {
  Track track;
  RaceLine raceline;
  VehicleParams vehicle;
  RaceContext ctx;

  SimContext(Track t, RaceLine rl, VehicleParams vp, MpcConfig mpc, GameConfig game)
      : track(std::move(t)), raceline(std::move(rl)), vehicle(vp) {
    ctx.track = &track;
    ctx.raceline = &raceline;
    ctx.vehicle = &vehicle;
    ctx.mpc = mpc;
    ctx.mpc.w_max = track.w_max();
    ctx.game = std::move(game);
  }
};

}  // namespace

PYBIND11_MODULE(apexgame, m) {
  m.doc() = "multi-car racing as a dynamic game: simulator, MPC policies, "
            "potential-function equilibrium search";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ComputeError>(m, "ComputeError", PyExc_RuntimeError);

  // ---- track ----
  py::class_<TrackSample>(m, "TrackSample")
      .def(py::init<double, double, double>(), py::arg("x"), py::arg("y"), py::arg("w"))
      .def_readwrite("x", &TrackSample::x)
      .def_readwrite("y", &TrackSample::y)
      .def_readwrite("w", &TrackSample::w);

  py::class_<Track>(m, "Track")
      .def_property_readonly("closed", &Track::closed)
      .def_property_readonly("total_length", &Track::total_length)
      .def_property_readonly("w_max", &Track::w_max)
      .def("__len__", &Track::size)
      .def("arc_length", [](const Track& t) { return t.arc_length(); })
      .def("curvature", [](const Track& t) { return t.curvature(); })
      .def("kappa_at", &Track::kappa_at, py::arg("p_x"))
      .def("wrap_s", &Track::wrap_s, py::arg("p_x"))
      .def("frenet_to_global",
           [](const Track& t, double px, double py_) {
             const Eigen::Vector2d g = t.frenet_to_global(px, py_);
             return std::pair<double, double>{g.x(), g.y()};
           },
           py::arg("p_x"), py::arg("p_y"))
      .def("global_to_frenet", &Track::global_to_frenet, py::arg("x"), py::arg("y"));

  m.def("build_track",
        [](const std::vector<std::tuple<double, double, double>>& pts, bool closed) {
          std::vector<TrackSample> samples;
          samples.reserve(pts.size());
          for (const auto& [x, y, w] : pts) samples.push_back({x, y, w});
          return build_track(samples, closed);
        },
        py::arg("samples"), py::arg("closed") = false,
        "Build a track from (x, y, w) samples.");
  m.def("load_track_csv", &load_track_csv, py::arg("path"), py::arg("closed"));

  // ---- raceline ----
  py::class_<RaceLine>(m, "RaceLine")
      .def_readonly("x", &RaceLine::x)
      .def_readonly("y", &RaceLine::y)
      .def_readonly("s", &RaceLine::s)
      .def_readonly("v_x", &RaceLine::v_x)
      .def_readonly("a_x", &RaceLine::a_x)
      .def_readonly("psi", &RaceLine::psi)
      .def_readonly("kappa", &RaceLine::kappa)
      .def_readonly("eta", &RaceLine::eta)
      .def_readonly("closed", &RaceLine::closed)
      .def("__len__", &RaceLine::size);

  py::class_<VelocityProfileConfig>(m, "VelocityProfileConfig")
      .def(py::init<>())
      .def_readwrite("mu_min", &VelocityProfileConfig::mu_min)
      .def_readwrite("mu_max", &VelocityProfileConfig::mu_max)
      .def_readwrite("n_profiles", &VelocityProfileConfig::n_profiles)
      .def_readwrite("g", &VelocityProfileConfig::g)
      .def_readwrite("v_cap", &VelocityProfileConfig::v_cap)
      .def_readwrite("a_long_max", &VelocityProfileConfig::a_long_max)
      .def_readwrite("w_veh", &VelocityProfileConfig::w_veh);

  py::class_<SpeedProfile>(m, "SpeedProfile")
      .def_readonly("mu", &SpeedProfile::mu)
      .def_readonly("v", &SpeedProfile::v)
      .def_readonly("a", &SpeedProfile::a);

  py::class_<ProfileLibrary>(m, "ProfileLibrary")
      .def(py::init<const RaceLine&, const VelocityProfileConfig&>(), py::arg("raceline"),
           py::arg("config"))
      .def("lookup", &ProfileLibrary::lookup, py::arg("mu"))
      .def_property_readonly("profiles", &ProfileLibrary::profiles);

  m.def("compute_raceline", &compute_raceline, py::arg("track"), py::arg("w_veh"));
  m.def("velocity_profile", &velocity_profile, py::arg("raceline"), py::arg("config"),
        py::arg("mu"));
  m.def("with_profile", &with_profile, py::arg("raceline"), py::arg("profile"));

  // ---- dynamics ----
  py::class_<CarState>(m, "CarState")
      .def(py::init<>())
      .def(py::init<double, double, double, double, double, double>(), py::arg("p_x"),
           py::arg("p_y"), py::arg("phi"), py::arg("v_tilde_x"), py::arg("v_tilde_y"),
           py::arg("omega"))
      .def_readwrite("p_x", &CarState::p_x)
      .def_readwrite("p_y", &CarState::p_y)
      .def_readwrite("phi", &CarState::phi)
      .def_readwrite("v_tilde_x", &CarState::v_tilde_x)
      .def_readwrite("v_tilde_y", &CarState::v_tilde_y)
      .def_readwrite("omega", &CarState::omega)
      .def("__repr__", [](const CarState& c) {
        return "CarState(p_x=" + std::to_string(c.p_x) + ", p_y=" + std::to_string(c.p_y) +
               ", v_tilde_x=" + std::to_string(c.v_tilde_x) + ")";
      });

  py::class_<ControlInput>(m, "ControlInput")
      .def(py::init<>())
      .def(py::init<double, double>(), py::arg("d"), py::arg("delta"))
      .def_readwrite("d", &ControlInput::d)
      .def_readwrite("delta", &ControlInput::delta);

  py::class_<VehicleParams>(m, "VehicleParams")
      .def(py::init<>())
      .def_readwrite("m", &VehicleParams::m)
      .def_readwrite("I_z", &VehicleParams::I_z)
      .def_readwrite("l_f", &VehicleParams::l_f)
      .def_readwrite("l_r", &VehicleParams::l_r)
      .def_readwrite("C1", &VehicleParams::C1)
      .def_readwrite("C2", &VehicleParams::C2)
      .def_readwrite("C3", &VehicleParams::C3)
      .def_readwrite("C4", &VehicleParams::C4)
      .def_readwrite("B_f", &VehicleParams::B_f)
      .def_readwrite("C_f", &VehicleParams::C_f)
      .def_readwrite("D_f", &VehicleParams::D_f)
      .def_readwrite("B_r", &VehicleParams::B_r)
      .def_readwrite("C_r", &VehicleParams::C_r)
      .def_readwrite("D_r", &VehicleParams::D_r)
      .def_readwrite("d_min", &VehicleParams::d_min)
      .def_readwrite("d_max", &VehicleParams::d_max)
      .def_readwrite("delta_min", &VehicleParams::delta_min)
      .def_readwrite("delta_max", &VehicleParams::delta_max)
      .def_readwrite("delta_rate_min", &VehicleParams::delta_rate_min)
      .def_readwrite("delta_rate_max", &VehicleParams::delta_rate_max);

  py::class_<InteractionConfig>(m, "InteractionConfig")
      .def(py::init<>())
      .def_readwrite("unsafe_dist", &InteractionConfig::unsafe_dist)
      .def_readwrite("w_max", &InteractionConfig::w_max);

  m.def("step", &step, py::arg("state"), py::arg("u"), py::arg("params"), py::arg("kappa"),
        py::arg("dt"), "One explicit-Euler step of the bicycle model.");
  m.def("apply_interaction_rules", &apply_interaction_rules, py::arg("states"),
        py::arg("config"), py::arg("track"));
  m.def("frenet_vx", &frenet_vx, py::arg("state"), py::arg("kappa"));

  // ---- policy ----
  py::class_<PolicyParams>(m, "PolicyParams")
      .def(py::init<>())
      .def(py::init([](double q, double zeta, double s1, double s2, double s3) {
             return PolicyParams{q, zeta, s1, s2, s3};
           }),
           py::arg("q"), py::arg("zeta"), py::arg("s1"), py::arg("s2"), py::arg("s3"))
      .def_readwrite("q", &PolicyParams::q)
      .def_readwrite("zeta", &PolicyParams::zeta)
      .def_readwrite("s1", &PolicyParams::s1)
      .def_readwrite("s2", &PolicyParams::s2)
      .def_readwrite("s3", &PolicyParams::s3)
      .def("__repr__", [](const PolicyParams& p) {
        return "PolicyParams(q=" + std::to_string(p.q) + ", zeta=" + std::to_string(p.zeta) +
               ", s1=" + std::to_string(p.s1) + ", s2=" + std::to_string(p.s2) +
               ", s3=" + std::to_string(p.s3) + ")";
      });

  py::class_<ThetaBox>(m, "ThetaBox")
      .def(py::init<>())
      .def_readwrite("lo", &ThetaBox::lo)
      .def_readwrite("hi", &ThetaBox::hi)
      .def("clamp", &ThetaBox::clamp)
      .def("contains", &ThetaBox::contains, py::arg("theta"), py::arg("tol") = 1e-12);

  py::class_<MpcConfig>(m, "MpcConfig")
      .def(py::init<>())
      .def_readwrite("K", &MpcConfig::K)
      .def_readwrite("dt", &MpcConfig::dt)
      .def_readwrite("p_x_min", &MpcConfig::p_x_min)
      .def_readwrite("p_y_min", &MpcConfig::p_y_min)
      .def_readwrite("w_max", &MpcConfig::w_max)
      .def_readwrite("penalty_weight", &MpcConfig::penalty_weight)
      .def_readwrite("max_iters", &MpcConfig::max_iters)
      .def_readwrite("tol", &MpcConfig::tol)
      .def_readwrite("blocking_sign_flip", &MpcConfig::blocking_sign_flip);

  py::class_<ReferenceTrajectory>(m, "ReferenceTrajectory")
      .def_readonly("p_x", &ReferenceTrajectory::p_x)
      .def_readonly("p_y", &ReferenceTrajectory::p_y);

  py::class_<MpcSolution>(m, "MpcSolution")
      .def_readonly("u0", &MpcSolution::u0)
      .def_readonly("controls", &MpcSolution::controls)
      .def_readonly("planned", &MpcSolution::planned)
      .def_readonly("objective", &MpcSolution::objective)
      .def_readonly("constraint_residual", &MpcSolution::constraint_residual)
      .def_readonly("iterations", &MpcSolution::iterations);

  m.def("reference_trajectory", &reference_trajectory, py::arg("track"), py::arg("raceline"),
        py::arg("joint"), py::arg("ego"), py::arg("theta"), py::arg("config"));
  m.def("mpc_solve",
        [](const Track& track, const CarState& state, const ReferenceTrajectory& ref,
           const std::vector<OpponentPrediction>& opp, double q, const VehicleParams& vp,
           const MpcConfig& cfg) { return mpc_solve(track, state, ref, opp, q, vp, cfg); },
        py::arg("track"), py::arg("state"), py::arg("ref"),
        py::arg("opponents") = std::vector<OpponentPrediction>{}, py::arg("q") = 4.0,
        py::arg("params") = VehicleParams{}, py::arg("config") = MpcConfig{});

  py::class_<OpponentPrediction>(m, "OpponentPrediction")
      .def_readonly("present", &OpponentPrediction::present)
      .def_readonly("p_y", &OpponentPrediction::p_y)
      .def_readonly("v_x", &OpponentPrediction::v_x)
      .def_readonly("p_x", &OpponentPrediction::p_x);
  m.def("predict_opponent", &predict_opponent, py::arg("state"), py::arg("track"),
        py::arg("K"), py::arg("dt"));

  // ---- game ----
  py::class_<StartRegion>(m, "StartRegion")
      .def(py::init<>())
      .def_readwrite("p_x_lo", &StartRegion::p_x_lo)
      .def_readwrite("p_x_hi", &StartRegion::p_x_hi)
      .def_readwrite("p_y_lo", &StartRegion::p_y_lo)
      .def_readwrite("p_y_hi", &StartRegion::p_y_hi);

  py::class_<GameConfig>(m, "GameConfig")
      .def(py::init<>())
      .def_readwrite("n_cars", &GameConfig::n_cars)
      .def_readwrite("gamma", &GameConfig::gamma)
      .def_readwrite("dt", &GameConfig::dt)
      .def_readwrite("T", &GameConfig::T)
      .def_readwrite("theta_box", &GameConfig::theta_box)
      .def_readwrite("unsafe_dist", &GameConfig::unsafe_dist)
      .def_readwrite("start_regions", &GameConfig::start_regions)
      .def_readwrite("start_speed_lo", &GameConfig::start_speed_lo)
      .def_readwrite("start_speed_hi", &GameConfig::start_speed_hi)
      .def_readwrite("randomize_start_anchor", &GameConfig::randomize_start_anchor);

  py::class_<RaceRecord>(m, "RaceRecord")
      .def_readonly("race_id", &RaceRecord::race_id)
      .def_readonly("seed", &RaceRecord::seed)
      .def_readonly("theta", &RaceRecord::theta)
      .def_readonly("states", &RaceRecord::states)
      .def_readonly("controls", &RaceRecord::controls)
      .def_readonly("utilities", &RaceRecord::utilities)
      .def_readonly("winner", &RaceRecord::winner);

  py::class_<SimContext>(m, "Context")
      .def(py::init<Track, RaceLine, VehicleParams, MpcConfig, GameConfig>(),
           py::arg("track"), py::arg("raceline"), py::arg("vehicle"),
           py::arg("mpc") = MpcConfig{}, py::arg("game") = GameConfig{},
           "Bundle of everything a race needs; copies its arguments.");

  m.def("utility", &utility, py::arg("prev"), py::arg("next"), py::arg("i"));
  m.def("discounted_return",
        [](const std::vector<double>& u, double gamma) { return discounted_return(u, gamma); },
        py::arg("utilities"), py::arg("gamma"));
  m.def("rollout",
        [](const SimContext& pc, const std::vector<CarState>& start,
           std::vector<PolicyParams> theta, int T, std::uint64_t seed) {
          return rollout(pc.ctx, start, std::move(theta), T, seed);
        },
        py::arg("context"), py::arg("start"), py::arg("theta"), py::arg("T"),
        py::arg("seed") = 0);
  m.def("generate_races",
        [](const SimContext& pc, int n_races, std::uint64_t seed, unsigned threads) {
          return generate_races(pc.ctx, n_races, seed, threads);
        },
        py::arg("context"), py::arg("n_races"), py::arg("seed") = 0, py::arg("threads") = 0);

  // ---- learning ----
  py::class_<Mlp>(m, "Mlp")
      .def(py::init<const std::vector<int>&, std::uint64_t>(), py::arg("widths"),
           py::arg("seed"))
      .def_readonly("widths", &Mlp::widths)
      .def_readwrite("out_mean", &Mlp::out_mean)
      .def_readwrite("out_scale", &Mlp::out_scale)
      .def("fit_normalization", &Mlp::fit_normalization, py::arg("X"))
      .def("forward", &Mlp::forward, py::arg("x"))
      .def("forward_batch", &Mlp::forward_batch, py::arg("X"))
      .def("input_gradient", &Mlp::input_gradient, py::arg("x"));

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("gamma", &TrainConfig::gamma)
      .def_readwrite("momentum", &TrainConfig::momentum)
      .def_readwrite("weight_decay", &TrainConfig::weight_decay)
      .def_readwrite("snapshot_best_val", &TrainConfig::snapshot_best_val)
      .def_readwrite("horizon_fraction", &TrainConfig::horizon_fraction)
      .def_readwrite("val_fraction", &TrainConfig::val_fraction)
      .def_readwrite("td_lambda", &TrainConfig::td_lambda)
      .def_readwrite("lambda_", &TrainConfig::lambda)
      .def_readwrite("samples_per_race", &TrainConfig::samples_per_race);

  py::class_<ValueTraining>(m, "ValueTraining")
      .def_readonly("net", &ValueTraining::net)
      .def_readonly("train_loss", &ValueTraining::train_loss)
      .def_readonly("val_loss", &ValueTraining::val_loss)
      .def_readonly("r2", &ValueTraining::r2)
      .def_readonly("value_min", &ValueTraining::value_min)
      .def_readonly("value_max", &ValueTraining::value_max)
      .def_readonly("epoch_loss", &ValueTraining::epoch_loss);

  py::class_<PotentialSample>(m, "PotentialSample")
      .def_readonly("x", &PotentialSample::x)
      .def_readonly("theta", &PotentialSample::theta)
      .def_readonly("theta_i_prime", &PotentialSample::theta_i_prime)
      .def_readonly("i", &PotentialSample::i)
      .def_readonly("dv", &PotentialSample::dv);

  py::class_<PotentialTraining>(m, "PotentialTraining")
      .def_readonly("net", &PotentialTraining::net)
      .def_readonly("alpha_hat", &PotentialTraining::alpha_hat)
      .def_readonly("train_loss", &PotentialTraining::train_loss)
      .def_readonly("epoch_loss", &PotentialTraining::epoch_loss);

  py::class_<GapSummary>(m, "GapSummary")
      .def_readonly("gaps", &GapSummary::gaps)
      .def_readonly("median", &GapSummary::median)
      .def_readonly("max", &GapSummary::max);

  m.def("state_features",
        [](const std::vector<CarState>& joint, const Track& track) {
          return state_features(joint, track);
        },
        py::arg("joint"), py::arg("track"));
  m.def("state_theta_features", &state_theta_features, py::arg("joint"), py::arg("theta"),
        py::arg("track"));
  m.def("train_value",
        [](const std::vector<RaceRecord>& races, int car, const Track& track,
           const std::vector<int>& hidden, const TrainConfig& cfg) {
          return train_value(races, car, track, hidden, cfg);
        },
        py::arg("races"), py::arg("car"), py::arg("track"),
        py::arg("hidden") = std::vector<int>{128, 128, 64}, py::arg("config") = TrainConfig{});
  m.def("build_potential_samples",
        [](const std::vector<RaceRecord>& races, const std::vector<Mlp>& nets,
           const ThetaBox& box, const Track& track, int n, std::uint64_t seed) {
          return build_potential_samples(races, nets, box, track, n, seed);
        },
        py::arg("races"), py::arg("value_nets"), py::arg("box"), py::arg("track"),
        py::arg("n_samples"), py::arg("seed") = 0);
  m.def("train_potential",
        [](const std::vector<PotentialSample>& samples, const std::vector<int>& hidden,
           const TrainConfig& cfg) { return train_potential(samples, hidden, cfg); },
        py::arg("samples"), py::arg("hidden") = std::vector<int>{384, 384, 192},
        py::arg("config") = TrainConfig{});
  m.def("approximation_gap", &approximation_gap, py::arg("phi"), py::arg("samples"),
        py::arg("value_range"));

  // ---- equilibrium ----
  py::class_<ArgmaxConfig>(m, "ArgmaxConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &ArgmaxConfig::learning_rate)
      .def_readwrite("max_iters", &ArgmaxConfig::max_iters)
      .def_readwrite("restarts", &ArgmaxConfig::restarts)
      .def_readwrite("ego_block_only", &ArgmaxConfig::ego_block_only)
      .def_readwrite("seed", &ArgmaxConfig::seed);

  py::enum_<RegretMode>(m, "RegretMode")
      .value("VALUE_NET", RegretMode::kValueNet)
      .value("ROLLOUT", RegretMode::kRollout);

  py::class_<RegretReport>(m, "RegretReport")
      .def_readonly("state_id", &RegretReport::state_id)
      .def_readonly("regret", &RegretReport::regret)
      .def_readonly("regret_rel", &RegretReport::regret_rel)
      .def_readonly("candidate_count", &RegretReport::candidate_count);

  m.def("maximize_potential",
        [](const Mlp& phi, const std::vector<CarState>& x, const SimContext& pc,
           const std::vector<PolicyParams>& current, int ego, const ArgmaxConfig& cfg) {
          double value = 0.0;
          auto theta = maximize_potential(phi, x, pc.track, current, ego,
                                          pc.ctx.game.theta_box, cfg, &value);
          return std::pair<std::vector<PolicyParams>, double>{std::move(theta), value};
        },
        py::arg("phi"), py::arg("x"), py::arg("context"), py::arg("current"),
        py::arg("ego") = 0, py::arg("config") = ArgmaxConfig{});
  m.def("nash_regret",
        [](const SimContext& pc, const std::vector<CarState>& x,
           const std::vector<PolicyParams>& theta_star, int i, RegretMode mode, int budget,
           const Mlp* value_net, double value_range, int horizon, std::uint64_t seed) {
          return nash_regret(pc.ctx, x, theta_star, i, mode, budget, value_net, value_range,
                             horizon, seed);
        },
        py::arg("context"), py::arg("x"), py::arg("theta_star"), py::arg("i") = 0,
        py::arg("mode") = RegretMode::kRollout, py::arg("budget") = 50,
        py::arg("value_net") = nullptr, py::arg("value_range") = 1.0,
        py::arg("horizon") = 100, py::arg("seed") = 0);
  m.def("certify_prop1", &certify_prop1, py::arg("lambda_"), py::arg("alpha_hat"));
  m.def("ibr",
        [](const SimContext& pc, const std::vector<CarState>& x, int horizon, int rounds,
           std::vector<PolicyParams> theta, int budget, std::uint64_t seed) {
          return ibr(pc.ctx, x, horizon, rounds, std::move(theta), budget, seed);
        },
        py::arg("context"), py::arg("x"), py::arg("horizon") = 20, py::arg("rounds") = 6,
        py::arg("theta") = std::vector<PolicyParams>{}, py::arg("budget") = 27,
        py::arg("seed") = 0);

  // ---- io ----
  m.def("save_model_json",
        [](const std::string& path, const Mlp& net) { save_model_json(path, net, {}); },
        py::arg("path"), py::arg("net"));
  m.def("load_model_json", [](const std::string& path) { return load_model_json(path); },
        py::arg("path"));
  m.def("load_vehicle_params", &load_vehicle_params, py::arg("path"));
}
