#include "apexgame/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "apexgame/errors.hpp"

namespace apexgame {

using nlohmann::json;

namespace {

json theta_to_json(const PolicyParams& th) {
  const auto a = th.as_array();
  return json::array({a[0], a[1], a[2], a[3], a[4]});
}

PolicyParams theta_from_json(const json& j) {
  return PolicyParams::from_array({j.at(0).get<double>(), j.at(1).get<double>(),
                                   j.at(2).get<double>(), j.at(3).get<double>(),
                                   j.at(4).get<double>()});
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open " + path + " for writing");
  out.precision(17);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  return in;
}

}  // namespace

// ---- configs ----

json ExperimentConfig::to_json() const {
  json j;
  j["track"] = {{"file", track_file}, {"closed", track_closed}};
  j["vehicle_file"] = vehicle_file;
  j["mu"] = mu;
  j["profile"] = {{"mu_min", profile.mu_min},       {"mu_max", profile.mu_max},
                  {"n_profiles", profile.n_profiles}, {"g", profile.g},
                  {"v_cap", profile.v_cap},         {"a_long_max", profile.a_long_max},
                  {"w_veh", profile.w_veh}};
  j["game"] = {{"n_cars", game.n_cars},
               {"gamma", game.gamma},
               {"dt", game.dt},
               {"T", game.T},
               {"unsafe_dist", game.unsafe_dist},
               {"start_speed", {game.start_speed_lo, game.start_speed_hi}},
               {"randomize_start_anchor", game.randomize_start_anchor},
               {"theta_box",
                {{"lo", theta_to_json(game.theta_box.lo)}, {"hi", theta_to_json(game.theta_box.hi)}}}};
  j["game"]["start_regions"] = json::array();
  for (const auto& r : game.start_regions) {
    j["game"]["start_regions"].push_back(
        {{"p_x", {r.p_x_lo, r.p_x_hi}}, {"p_y", {r.p_y_lo, r.p_y_hi}}});
  }
  j["mpc"] = {{"K", mpc.K},
              {"dt", mpc.dt},
              {"p_x_min", mpc.p_x_min},
              {"p_y_min", mpc.p_y_min},
              {"penalty_weight", mpc.penalty_weight},
              {"max_iters", mpc.max_iters},
              {"tol", mpc.tol},
              {"blocking_sign_flip", mpc.blocking_sign_flip}};
  j["argmax"] = {{"learning_rate", argmax.learning_rate},
                 {"max_iters", argmax.max_iters},
                 {"restarts", argmax.restarts},
                 {"ego_block_only", argmax.ego_block_only}};
  j["replan_every"] = replan_every;
  j["value_arch"] = value_arch;
  j["potential_arch"] = potential_arch;
  j["potential_samples"] = potential_samples;
  j["train"] = {{"learning_rate", train.learning_rate},
                {"epochs", train.epochs},
                {"batch_size", train.batch_size},
                {"gamma", train.gamma},
                {"momentum", train.momentum},
                {"weight_decay", train.weight_decay},
                {"snapshot_best_val", train.snapshot_best_val},
                {"val_fraction", train.val_fraction},
                {"td_lambda", train.td_lambda},
                {"lambda", train.lambda},
                {"samples_per_race", train.samples_per_race},
                {"horizon_fraction", train.horizon_fraction}};
  j["seed"] = seed;
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  try {
    c.track_file = j.at("track").at("file").get<std::string>();
    c.track_closed = j.at("track").value("closed", true);
    c.vehicle_file = j.value("vehicle_file", std::string{});
    c.mu = j.value("mu", c.mu);
    if (j.contains("profile")) {
      const json& p = j["profile"];
      c.profile.mu_min = p.value("mu_min", c.profile.mu_min);
      c.profile.mu_max = p.value("mu_max", c.profile.mu_max);
      c.profile.n_profiles = p.value("n_profiles", c.profile.n_profiles);
      c.profile.g = p.value("g", c.profile.g);
      c.profile.v_cap = p.value("v_cap", c.profile.v_cap);
      c.profile.a_long_max = p.value("a_long_max", c.profile.a_long_max);
      c.profile.w_veh = p.value("w_veh", c.profile.w_veh);
    }
    if (j.contains("game")) {
      const json& g = j["game"];
      c.game.n_cars = g.value("n_cars", c.game.n_cars);
      c.game.gamma = g.value("gamma", c.game.gamma);
      c.game.dt = g.value("dt", c.game.dt);
      c.game.T = g.value("T", c.game.T);
      c.game.unsafe_dist = g.value("unsafe_dist", c.game.unsafe_dist);
      c.game.randomize_start_anchor =
          g.value("randomize_start_anchor", c.game.randomize_start_anchor);
      if (g.contains("start_speed")) {
        c.game.start_speed_lo = g["start_speed"].at(0).get<double>();
        c.game.start_speed_hi = g["start_speed"].at(1).get<double>();
      }
      if (g.contains("theta_box")) {
        c.game.theta_box.lo = theta_from_json(g["theta_box"].at("lo"));
        c.game.theta_box.hi = theta_from_json(g["theta_box"].at("hi"));
      }
      if (g.contains("start_regions")) {
        c.game.start_regions.clear();
        for (const auto& r : g["start_regions"]) {
          StartRegion reg;
          reg.p_x_lo = r.at("p_x").at(0).get<double>();
          reg.p_x_hi = r.at("p_x").at(1).get<double>();
          reg.p_y_lo = r.at("p_y").at(0).get<double>();
          reg.p_y_hi = r.at("p_y").at(1).get<double>();
          c.game.start_regions.push_back(reg);
        }
      }
    }
    if (j.contains("mpc")) {
      const json& m = j["mpc"];
      c.mpc.K = m.value("K", c.mpc.K);
      c.mpc.dt = m.value("dt", c.mpc.dt);
      c.mpc.p_x_min = m.value("p_x_min", c.mpc.p_x_min);
      c.mpc.p_y_min = m.value("p_y_min", c.mpc.p_y_min);
      c.mpc.penalty_weight = m.value("penalty_weight", c.mpc.penalty_weight);
      c.mpc.max_iters = m.value("max_iters", c.mpc.max_iters);
      c.mpc.tol = m.value("tol", c.mpc.tol);
      c.mpc.blocking_sign_flip = m.value("blocking_sign_flip", c.mpc.blocking_sign_flip);
    }
    if (j.contains("argmax")) {
      const json& a = j["argmax"];
      c.argmax.learning_rate = a.value("learning_rate", c.argmax.learning_rate);
      c.argmax.max_iters = a.value("max_iters", c.argmax.max_iters);
      c.argmax.restarts = a.value("restarts", c.argmax.restarts);
      c.argmax.ego_block_only = a.value("ego_block_only", c.argmax.ego_block_only);
    }
    c.replan_every = j.value("replan_every", c.replan_every);
    if (j.contains("value_arch")) c.value_arch = j["value_arch"].get<std::vector<int>>();
    if (j.contains("potential_arch")) {
      c.potential_arch = j["potential_arch"].get<std::vector<int>>();
    }
    c.potential_samples = j.value("potential_samples", c.potential_samples);
    if (j.contains("train")) {
      const json& t = j["train"];
      c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
      c.train.epochs = t.value("epochs", c.train.epochs);
      c.train.batch_size = t.value("batch_size", c.train.batch_size);
      c.train.gamma = t.value("gamma", c.game.gamma);
      c.train.momentum = t.value("momentum", c.train.momentum);
      c.train.weight_decay = t.value("weight_decay", c.train.weight_decay);
      c.train.snapshot_best_val = t.value("snapshot_best_val", c.train.snapshot_best_val);
      c.train.val_fraction = t.value("val_fraction", c.train.val_fraction);
      c.train.td_lambda = t.value("td_lambda", c.train.td_lambda);
      c.train.lambda = t.value("lambda", c.train.lambda);
      c.train.samples_per_race = t.value("samples_per_race", c.train.samples_per_race);
      c.train.horizon_fraction = t.value("horizon_fraction", c.train.horizon_fraction);
    } else {
      c.train.gamma = c.game.gamma;
    }
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad experiment config: ") + e.what());
  }
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  return ExperimentConfig::from_json(read_json_file(path));
}

std::string config_hash(const json& j) {
  const std::string dump = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json read_json_file(const std::string& path) {
  std::ifstream in = open_in(path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
  return j;
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out = open_out(path);
  out << j.dump(2) << "\n";
}

// ---- tracks and racelines ----

Track load_track_csv(const std::string& path, bool closed) {
  std::ifstream in = open_in(path);
  std::vector<TrackSample> samples;
  std::string line;
  bool header_seen = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;  // header row: x,y,w
      continue;
    }
    std::istringstream ss(line);
    TrackSample s;
    char comma;
    if (!(ss >> s.x >> comma >> s.y >> comma >> s.w)) {
      throw ValidationError(path + ":" + std::to_string(line_no) + ": expected x,y,w");
    }
    samples.push_back(s);
  }
  return build_track(samples, closed);
}

void save_track_csv(const std::string& path, const Track& track) {
  std::ofstream out = open_out(path);
  out << "x,y,w\n";
  for (const auto& s : track.samples()) {
    out << s.x << "," << s.y << "," << s.w << "\n";
  }
}

void save_raceline_csv(const std::string& path, const RaceLine& rl,
                       const std::string& meta_comment) {
  std::ofstream out = open_out(path);
  if (!meta_comment.empty()) out << "# " << meta_comment << "\n";
  out << "x,y,s,v_x,a_x,psi,kappa,eta\n";
  for (std::size_t i = 0; i < rl.size(); ++i) {
    out << rl.x[i] << "," << rl.y[i] << "," << rl.s[i] << "," << rl.v_x[i] << ","
        << rl.a_x[i] << "," << rl.psi[i] << "," << rl.kappa[i] << "," << rl.eta[i] << "\n";
  }
}

void save_profile_library_json(const std::string& path, const ProfileLibrary& lib,
                               const json& meta) {
  json j;
  j["schema"] = 1;
  j["_meta"] = meta;
  j["mu_min"] = lib.mu_min();
  j["mu_max"] = lib.mu_max();
  j["profiles"] = json::array();
  for (const auto& p : lib.profiles()) {
    j["profiles"].push_back({{"mu", p.mu}, {"v", p.v}, {"a", p.a}});
  }
  write_json_file(path, j);
}

// ---- vehicle parameters ----

VehicleParams vehicle_params_from_json(const json& j) {
  VehicleParams vp;
  try {
    vp.m = j.at("m").get<double>();
    vp.I_z = j.at("I_z").get<double>();
    vp.l_f = j.at("l_f").get<double>();
    vp.l_r = j.at("l_r").get<double>();
    vp.C1 = j.at("C1").get<double>();
    vp.C2 = j.at("C2").get<double>();
    vp.C3 = j.at("C3").get<double>();
    vp.C4 = j.at("C4").get<double>();
    vp.B_f = j.at("B_f").get<double>();
    vp.C_f = j.at("C_f").get<double>();
    vp.D_f = j.at("D_f").get<double>();
    vp.B_r = j.at("B_r").get<double>();
    vp.C_r = j.at("C_r").get<double>();
    vp.D_r = j.at("D_r").get<double>();
    vp.d_min = j.at("d_min").get<double>();
    vp.d_max = j.at("d_max").get<double>();
    vp.delta_min = j.at("delta_min").get<double>();
    vp.delta_max = j.at("delta_max").get<double>();
    vp.delta_rate_min = j.at("delta_rate_min").get<double>();
    vp.delta_rate_max = j.at("delta_rate_max").get<double>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad vehicle params: ") + e.what());
  }
  if (!(vp.m > 0.0 && vp.I_z > 0.0 && vp.l_f > 0.0 && vp.l_r > 0.0 && vp.D_f > 0.0 &&
        vp.D_r > 0.0 && vp.d_min < vp.d_max && vp.delta_min < vp.delta_max)) {
    throw ValidationError("vehicle params violate positivity/ordering invariants");
  }
  return vp;
}

json vehicle_params_to_json(const VehicleParams& vp) {
  return json{{"m", vp.m},
              {"I_z", vp.I_z},
              {"l_f", vp.l_f},
              {"l_r", vp.l_r},
              {"C1", vp.C1},
              {"C2", vp.C2},
              {"C3", vp.C3},
              {"C4", vp.C4},
              {"B_f", vp.B_f},
              {"C_f", vp.C_f},
              {"D_f", vp.D_f},
              {"B_r", vp.B_r},
              {"C_r", vp.C_r},
              {"D_r", vp.D_r},
              {"d_min", vp.d_min},
              {"d_max", vp.d_max},
              {"delta_min", vp.delta_min},
              {"delta_max", vp.delta_max},
              {"delta_rate_min", vp.delta_rate_min},
              {"delta_rate_max", vp.delta_rate_max}};
}

VehicleParams load_vehicle_params(const std::string& path) {
  return vehicle_params_from_json(read_json_file(path));
}

// ---- datasets ----

json race_record_to_json(const RaceRecord& rec) {
  json j;
  j["race_id"] = rec.race_id;
  j["seed"] = rec.seed;
  j["winner"] = rec.winner;
  j["theta"] = json::array();
  for (const auto& th : rec.theta) j["theta"].push_back(theta_to_json(th));
  j["states"] = json::array();
  for (const auto& frame : rec.states) {
    json f = json::array();
    for (const auto& c : frame) {
      f.push_back(json::array({c.p_x, c.p_y, c.phi, c.v_tilde_x, c.v_tilde_y, c.omega}));
    }
    j["states"].push_back(std::move(f));
  }
  j["controls"] = json::array();
  for (const auto& frame : rec.controls) {
    json f = json::array();
    for (const auto& u : frame) f.push_back(json::array({u.d, u.delta}));
    j["controls"].push_back(std::move(f));
  }
  j["utilities"] = rec.utilities;
  return j;
}

RaceRecord race_record_from_json(const json& j) {
  RaceRecord rec;
  try {
    rec.race_id = j.at("race_id").get<int>();
    rec.seed = j.at("seed").get<std::uint64_t>();
    rec.winner = j.at("winner").get<int>();
    for (const auto& th : j.at("theta")) rec.theta.push_back(theta_from_json(th));
    for (const auto& frame : j.at("states")) {
      std::vector<CarState> f;
      for (const auto& c : frame) {
        f.push_back(CarState{c.at(0).get<double>(), c.at(1).get<double>(),
                             c.at(2).get<double>(), c.at(3).get<double>(),
                             c.at(4).get<double>(), c.at(5).get<double>()});
      }
      rec.states.push_back(std::move(f));
    }
    for (const auto& frame : j.at("controls")) {
      std::vector<ControlInput> f;
      for (const auto& u : frame) {
        f.push_back(ControlInput{u.at(0).get<double>(), u.at(1).get<double>()});
      }
      rec.controls.push_back(std::move(f));
    }
    rec.utilities = j.at("utilities").get<std::vector<std::vector<double>>>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad race record: ") + e.what());
  }
  return rec;
}

void save_dataset_jsonl(const std::string& path, const DatasetMeta& meta,
                        std::span<const RaceRecord> records) {
  std::ofstream out = open_out(path);
  json header;
  header["schema"] = meta.schema;
  header["seed"] = meta.seed;
  header["config_hash"] = meta.config_hash;
  header["git"] = meta.git;
  header["game"] = meta.game;
  header["value_tail_bound"] = meta.value_tail_bound;
  out << header.dump() << "\n";
  for (const auto& rec : records) out << race_record_to_json(rec).dump() << "\n";
}

std::pair<DatasetMeta, std::vector<RaceRecord>> load_dataset_jsonl(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path + ": empty dataset file");
  DatasetMeta meta;
  try {
    const json header = json::parse(line);
    meta.schema = header.at("schema").get<int>();
    if (meta.schema != 1) {
      throw ValidationError(path + ": unsupported schema " + std::to_string(meta.schema));
    }
    meta.seed = header.at("seed").get<std::uint64_t>();
    meta.config_hash = header.value("config_hash", std::string{});
    meta.git = header.value("git", std::string{});
    meta.game = header.value("game", json::object());
    meta.value_tail_bound = header.value("value_tail_bound", 0.0);
  } catch (const json::exception& e) {
    throw ValidationError(path + ": bad dataset header: " + e.what());
  }
  std::vector<RaceRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      records.push_back(race_record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ValidationError(path + ": bad record line: " + e.what());
    }
  }
  return {meta, std::move(records)};
}

// ---- models ----

void save_model_json(const std::string& path, const Mlp& net, const json& meta) {
  json j;
  j["schema"] = 1;
  j["_meta"] = meta;
  j["widths"] = net.widths;
  j["out_mean"] = net.out_mean;
  j["out_scale"] = net.out_scale;
  j["norm_mean"] = std::vector<double>(net.norm_mean.data(),
                                       net.norm_mean.data() + net.norm_mean.size());
  j["norm_var"] =
      std::vector<double>(net.norm_var.data(), net.norm_var.data() + net.norm_var.size());
  j["weights"] = json::array();
  j["biases"] = json::array();
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(net.weights[l].size()));
    for (Eigen::Index r = 0; r < net.weights[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < net.weights[l].cols(); ++c) w.push_back(net.weights[l](r, c));
    }
    j["weights"].push_back(std::move(w));
    j["biases"].push_back(std::vector<double>(net.biases[l].data(),
                                              net.biases[l].data() + net.biases[l].size()));
  }
  write_json_file(path, j);
}

Mlp load_model_json(const std::string& path, json* meta_out) {
  const json j = read_json_file(path);
  try {
    if (j.at("schema").get<int>() != 1) {
      throw ValidationError(path + ": unsupported model schema");
    }
    Mlp net(j.at("widths").get<std::vector<int>>(), 0);
    net.out_mean = j.at("out_mean").get<double>();
    net.out_scale = j.at("out_scale").get<double>();
    const auto nm = j.at("norm_mean").get<std::vector<double>>();
    const auto nv = j.at("norm_var").get<std::vector<double>>();
    net.norm_mean = Eigen::Map<const Eigen::VectorXd>(nm.data(), static_cast<Eigen::Index>(nm.size()));
    net.norm_var = Eigen::Map<const Eigen::VectorXd>(nv.data(), static_cast<Eigen::Index>(nv.size()));
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
      const auto w = j.at("weights").at(l).get<std::vector<double>>();
      const auto b = j.at("biases").at(l).get<std::vector<double>>();
      if (static_cast<Eigen::Index>(w.size()) != net.weights[l].size() ||
          static_cast<Eigen::Index>(b.size()) != net.biases[l].size()) {
        throw DimensionMismatch(path + ": weight blob does not match widths");
      }
      std::size_t k = 0;
      for (Eigen::Index r = 0; r < net.weights[l].rows(); ++r) {
        for (Eigen::Index c = 0; c < net.weights[l].cols(); ++c) net.weights[l](r, c) = w[k++];
      }
      net.biases[l] = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
    }
    if (meta_out != nullptr) *meta_out = j.value("_meta", json::object());
    return net;
  } catch (const json::exception& e) {
    throw ValidationError(path + ": bad model file: " + e.what());
  }
}

// ---- evaluation reports ----

void save_gap_csv(const std::string& path, const GapSummary& gap,
                  const std::string& meta_comment) {
  std::ofstream out = open_out(path);
  if (!meta_comment.empty()) out << "# " << meta_comment << "\n";
  out << "gap_rel\n";
  for (const double g : gap.gaps) out << g << "\n";
}

void save_regret_csv(const std::string& path, std::span<const RegretReport> reports,
                     const std::string& meta_comment) {
  std::ofstream out = open_out(path);
  if (!meta_comment.empty()) out << "# " << meta_comment << "\n";
  out << "state_id,regret,regret_rel\n";
  for (const auto& r : reports) {
    out << r.state_id << "," << r.regret << "," << r.regret_rel << "\n";
  }
}

void save_trajectories_csv(const std::string& path, std::span<const RaceRecord> records,
                           const Track& track, const std::string& meta_comment) {
  std::ofstream out = open_out(path);
  if (!meta_comment.empty()) out << "# " << meta_comment << "\n";
  out << "race_id,step,car,x,y,p_x,p_y,v_tilde_x\n";
  for (const auto& rec : records) {
    for (std::size_t t = 0; t < rec.states.size(); ++t) {
      for (std::size_t i = 0; i < rec.states[t].size(); ++i) {
        const CarState& c = rec.states[t][i];
        const Eigen::Vector2d g = track.frenet_to_global(
            track.closed() ? c.p_x : std::clamp(c.p_x, 0.0, track.total_length()), c.p_y);
        out << rec.race_id << "," << t << "," << i << "," << g.x() << "," << g.y() << ","
            << c.p_x << "," << c.p_y << "," << c.v_tilde_x << "\n";
      }
    }
  }
}

std::string git_describe() {
  FILE* pipe = popen("git describe --always --dirty 2>/dev/null", "r");
  if (pipe == nullptr) return "unknown";
  char buf[128] = {0};
  std::string out;
  while (fgets(buf, sizeof(buf), pipe) != nullptr) out += buf;
  pclose(pipe);
  while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
  return out.empty() ? "unknown" : out;
}

}  // namespace apexgame
