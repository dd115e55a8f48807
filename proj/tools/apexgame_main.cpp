// Batch workbench for the multi-car racing game: raceline fitting, dataset
// generation, value/potential training, equilibrium races and evaluation.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "apexgame/equilibrium.hpp"
#include "apexgame/errors.hpp"
#include "apexgame/game.hpp"
#include "apexgame/io.hpp"
#include "apexgame/learning.hpp"
#include "apexgame/svg.hpp"
#include "apexgame/util.hpp"

namespace {

using namespace apexgame;
using nlohmann::json;

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

struct LoadedContext {
  Track track;
  RaceLine raceline;
  VehicleParams vehicle;
  ProfileLibrary library;
  ExperimentConfig cfg;
  std::string hash;
  RaceContext ctx;
};

LoadedContext load_context(const std::string& config_path) {
  LoadedContext lc;
  lc.cfg = load_experiment_config(config_path);
  lc.hash = config_hash(lc.cfg.to_json());

  const std::filesystem::path base = std::filesystem::path(config_path).parent_path();
  const auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() || base.empty() ? p : (base / fp).string();
  };

  lc.track = load_track_csv(resolve(lc.cfg.track_file), lc.cfg.track_closed);
  lc.vehicle = lc.cfg.vehicle_file.empty() ? VehicleParams{}
                                           : load_vehicle_params(resolve(lc.cfg.vehicle_file));
  const RaceLine geometry = compute_raceline(lc.track, lc.cfg.profile.w_veh);
  lc.library = ProfileLibrary(geometry, lc.cfg.profile);
  lc.raceline = with_profile(geometry, lc.library.lookup(lc.cfg.mu));

  lc.ctx.track = &lc.track;
  lc.ctx.raceline = &lc.raceline;
  lc.ctx.vehicle = &lc.vehicle;
  lc.ctx.mpc = lc.cfg.mpc;
  lc.ctx.mpc.w_max = lc.track.w_max();
  lc.ctx.game = lc.cfg.game;
  return lc;
}

std::string meta_comment(const std::string& hash, std::uint64_t seed) {
  return "config_hash=" + hash + " seed=" + std::to_string(seed) + " git=" + git_describe();
}

PolicyParams load_theta_json(const std::string& path) {
  const json j = read_json_file(path);
  try {
    if (j.is_array()) {
      return PolicyParams::from_array({j.at(0).get<double>(), j.at(1).get<double>(),
                                       j.at(2).get<double>(), j.at(3).get<double>(),
                                       j.at(4).get<double>()});
    }
    PolicyParams th;
    th.q = j.at("q").get<double>();
    th.zeta = j.at("zeta").get<double>();
    th.s1 = j.at("s1").get<double>();
    th.s2 = j.at("s2").get<double>();
    th.s3 = j.at("s3").get<double>();
    return th;
  } catch (const json::exception& e) {
    throw ValidationError(path + ": bad theta file: " + e.what());
  }
}

// controller spec strings: potential | ibr | random | fixed:theta.json
ControllerSpec parse_controller(const std::string& spec, const LoadedContext& lc,
                                const Mlp* phi) {
  ControllerSpec out;
  out.replan_every = lc.cfg.replan_every;
  if (spec == "potential") {
    if (phi == nullptr) {
      throw ValidationError("controller 'potential' needs --potential-model");
    }
    out.kind = ControllerSpec::Kind::kPotential;
    out.phi = phi;
    out.argmax = lc.cfg.argmax;
  } else if (spec == "ibr") {
    out.kind = ControllerSpec::Kind::kIbr;
  } else if (spec == "random") {
    out.kind = ControllerSpec::Kind::kRandom;
  } else if (spec.rfind("fixed:", 0) == 0) {
    out.kind = ControllerSpec::Kind::kFixed;
    out.fixed_theta = load_theta_json(spec.substr(6));
  } else {
    throw ValidationError("unknown controller '" + spec +
                          "' (expected potential|ibr|random|fixed:file.json)");
  }
  return out;
}

int cmd_raceline(const std::string& track_file, bool closed, const std::string& out_dir,
                 const VelocityProfileConfig& profile, double mu_ref, std::uint64_t seed) {
  const Track track = load_track_csv(track_file, closed);
  const RaceLine geometry = compute_raceline(track, profile.w_veh);
  const ProfileLibrary lib(geometry, profile);
  const RaceLine raceline = with_profile(geometry, lib.lookup(mu_ref));

  std::filesystem::create_directories(out_dir);
  json cfg_j;
  cfg_j["track"] = track_file;
  cfg_j["closed"] = closed;
  cfg_j["mu_ref"] = mu_ref;
  cfg_j["profile"] = {{"mu_min", profile.mu_min},
                      {"mu_max", profile.mu_max},
                      {"n_profiles", profile.n_profiles},
                      {"v_cap", profile.v_cap},
                      {"a_long_max", profile.a_long_max},
                      {"w_veh", profile.w_veh}};
  const std::string hash = config_hash(cfg_j);

  const auto out_path = [&](const std::string& name) {
    return (std::filesystem::path(out_dir) / name).string();
  };
  save_raceline_csv(out_path("raceline.csv"), raceline, meta_comment(hash, seed));
  save_profile_library_json(out_path("profiles.json"), lib,
                            {{"config_hash", hash}, {"seed", seed}, {"git", git_describe()}});

  SvgSeries series;
  for (std::size_t i = 0; i < raceline.size(); ++i) {
    series.points.push_back({raceline.x[i], raceline.y[i]});
  }
  series.color = "#d62728";
  write_track_svg(out_path("raceline.svg"), track, {series}, meta_comment(hash, seed));
  std::cout << "raceline: " << out_path("raceline.csv") << " ("
            << raceline.size() << " samples, " << lib.profiles().size() << " profiles)\n";
  return 0;
}

int cmd_generate(const std::string& config_path, int races, std::uint64_t seed,
                 const std::string& out_file, unsigned threads) {
  const LoadedContext lc = load_context(config_path);
  const auto records = generate_races(lc.ctx, races, seed, threads);

  double r_max = 0.0;
  for (const auto& rec : records) {
    for (const auto& frame : rec.utilities) {
      for (const double u : frame) r_max = std::max(r_max, std::abs(u));
    }
  }
  DatasetMeta meta;
  meta.seed = seed;
  meta.config_hash = lc.hash;
  meta.git = git_describe();
  meta.game = lc.cfg.to_json()["game"];
  meta.value_tail_bound = lc.cfg.game.gamma < 1.0
                              ? std::pow(lc.cfg.game.gamma, lc.cfg.game.T) * r_max /
                                    (1.0 - lc.cfg.game.gamma)
                              : 0.0;
  save_dataset_jsonl(out_file, meta, records);
  std::cout << "dataset: " << out_file << " (" << records.size() << " races, tail bound "
            << meta.value_tail_bound << ")\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& dataset_file,
              const std::string& target, int car, const std::string& out_file,
              const std::vector<std::string>& value_model_files, int samples_override,
              std::uint64_t seed) {
  const LoadedContext lc = load_context(config_path);
  const auto [meta, races] = load_dataset_jsonl(dataset_file);
  if (races.empty()) throw ValidationError(dataset_file + ": dataset has no races");

  TrainConfig tcfg = lc.cfg.train;
  tcfg.seed = seed;
  const std::string metrics_file =
      (std::filesystem::path(out_file).parent_path() /
       (std::filesystem::path(out_file).stem().string() + "_metrics.csv"))
          .string();

  if (target == "value") {
    if (car < 0 || car >= lc.cfg.game.n_cars) {
      throw ValidationError("--car must be in [0, " + std::to_string(lc.cfg.game.n_cars) + ")");
    }
    const ValueTraining vt = train_value(races, car, lc.track, lc.cfg.value_arch, tcfg);
    json model_meta = {{"kind", "value"},
                       {"car", car},
                       {"config_hash", lc.hash},
                       {"seed", seed},
                       {"dataset", dataset_file},
                       {"value_min", vt.value_min},
                       {"value_max", vt.value_max},
                       {"r2", vt.r2},
                       {"train_loss", vt.train_loss},
                       {"val_loss", vt.val_loss}};
    save_model_json(out_file, vt.net, model_meta);
    std::ofstream m(metrics_file);
    m.precision(17);
    m << "# " << meta_comment(lc.hash, seed) << "\n";
    m << "epoch,loss\n";
    for (std::size_t e = 0; e < vt.epoch_loss.size(); ++e) m << e << "," << vt.epoch_loss[e] << "\n";
    std::cout << "value model: " << out_file << " (r2 " << vt.r2 << ")\n";
    return 0;
  }
  if (target != "potential") {
    throw ValidationError("--target must be value or potential");
  }
  if (value_model_files.size() != static_cast<std::size_t>(lc.cfg.game.n_cars)) {
    throw ValidationError("potential training needs --value-models with exactly " +
                          std::to_string(lc.cfg.game.n_cars) + " files (train values first)");
  }
  std::vector<Mlp> value_nets;
  double v_min = 1e300, v_max = -1e300;
  for (const auto& f : value_model_files) {
    json vmeta;
    value_nets.push_back(load_model_json(f, &vmeta));
    if (!vmeta.contains("kind") || vmeta["kind"] != "value") {
      throw ValidationError(f + ": not a value model");
    }
    v_min = std::min(v_min, vmeta.value("value_min", 0.0));
    v_max = std::max(v_max, vmeta.value("value_max", 0.0));
  }
  const int n_samples = samples_override > 0 ? samples_override : lc.cfg.potential_samples;
  const auto samples = build_potential_samples(races, value_nets, lc.cfg.game.theta_box,
                                               lc.track, n_samples, splitmix64(seed ^ 0x5a));
  const PotentialTraining pt = train_potential(samples, lc.cfg.potential_arch, tcfg);

  json model_meta = {{"kind", "potential"},
                     {"config_hash", lc.hash},
                     {"seed", seed},
                     {"dataset", dataset_file},
                     {"n_samples", n_samples},
                     {"alpha_hat", pt.alpha_hat},
                     {"value_min", v_min},
                     {"value_max", v_max},
                     {"train_loss", pt.train_loss}};
  save_model_json(out_file, pt.net, model_meta);
  std::ofstream m(metrics_file);
  m.precision(17);
  m << "# " << meta_comment(lc.hash, seed) << "\n";
  m << "epoch,loss\n";
  for (std::size_t e = 0; e < pt.epoch_loss.size(); ++e) m << e << "," << pt.epoch_loss[e] << "\n";
  m << "alpha_hat," << pt.alpha_hat << "\n";
  std::cout << "potential model: " << out_file << " (alpha_hat " << pt.alpha_hat << ")\n";
  return 0;
}

int cmd_race(const std::string& config_path, const std::string& ego_spec,
             const std::string& opp1_spec, const std::string& opp2_spec, int n_races,
             const std::string& region, const std::string& potential_model,
             const std::string& out_dir, std::uint64_t seed, unsigned threads) {
  const LoadedContext lc = load_context(config_path);
  if (lc.cfg.game.start_regions.size() < 3 && lc.cfg.game.n_cars >= 3) {
    throw ValidationError("race command needs >= 3 start regions in the config");
  }

  std::optional<Mlp> phi;
  if (!potential_model.empty()) {
    json pmeta;
    phi = load_model_json(potential_model, &pmeta);
  }
  const Mlp* phi_ptr = phi.has_value() ? &phi.value() : nullptr;

  std::vector<ControllerSpec> specs;
  specs.push_back(parse_controller(ego_spec, lc, phi_ptr));
  specs.push_back(parse_controller(opp1_spec, lc, phi_ptr));
  specs.push_back(parse_controller(opp2_spec, lc, phi_ptr));

  int ego_region = 0;
  if (region == "R1") ego_region = 0;
  else if (region == "R2") ego_region = 1;
  else if (region == "R3") ego_region = 2;
  else if (region == "mixed") ego_region = -1;  // rotate across races
  else throw ValidationError("--region must be R1, R2, R3 or mixed");

  std::filesystem::create_directories(out_dir);
  std::vector<RaceRecord> records(static_cast<std::size_t>(n_races));
  parallel_for(
      static_cast<std::size_t>(n_races),
      [&](std::size_t r) {
        Rng rng = Rng::derive(seed, r);
        // ego takes its region; O1 the front-most remaining, O2 the rear-most
        const int ego_r = ego_region >= 0 ? ego_region : static_cast<int>(r % 3);
        std::vector<int> remaining;
        for (int k = 0; k < 3; ++k) {
          if (k != ego_r) remaining.push_back(k);
        }
        std::vector<int> region_of_car(3);
        region_of_car[0] = ego_r;
        region_of_car[1] = remaining.front();  // regions are ordered front to back
        region_of_car[2] = remaining.back();

        std::vector<CarState> start(3);
        for (int attempt = 0;; ++attempt) {
          for (int i = 0; i < 3; ++i) {
            const StartRegion& reg =
                lc.cfg.game.start_regions[static_cast<std::size_t>(region_of_car[static_cast<std::size_t>(i)])];
            start[static_cast<std::size_t>(i)] =
                CarState{rng.uniform(reg.p_x_lo, reg.p_x_hi), rng.uniform(reg.p_y_lo, reg.p_y_hi),
                         0.0, rng.uniform(lc.cfg.game.start_speed_lo, lc.cfg.game.start_speed_hi),
                         0.0, 0.0};
          }
          bool ok = true;
          for (int i = 0; i < 3 && ok; ++i) {
            for (int j = i + 1; j < 3 && ok; ++j) {
              const auto a = lc.track.frenet_to_global(start[static_cast<std::size_t>(i)].p_x,
                                                       start[static_cast<std::size_t>(i)].p_y);
              const auto b = lc.track.frenet_to_global(start[static_cast<std::size_t>(j)].p_x,
                                                       start[static_cast<std::size_t>(j)].p_y);
              ok = (a - b).norm() > lc.cfg.game.unsafe_dist;
            }
          }
          if (ok) break;
          if (attempt > 1000) throw StartSamplingFailed("race start sampling failed");
        }
        records[r] = race(lc.ctx, specs, start, lc.cfg.game.T, splitmix64(seed ^ splitmix64(r)));
        records[r].race_id = static_cast<int>(r);
      },
      threads);

  std::vector<int> wins(3, 0);
  json races_j = json::array();
  for (const auto& rec : records) {
    wins[static_cast<std::size_t>(rec.winner)]++;
    json rj;
    rj["race_id"] = rec.race_id;
    rj["winner"] = rec.winner;
    rj["final_p_x"] = json::array();
    rj["laps"] = json::array();
    for (const auto& c : rec.states.back()) {
      rj["final_p_x"].push_back(c.p_x);
      rj["laps"].push_back(lc.track.closed()
                               ? static_cast<int>(std::floor(c.p_x / lc.track.total_length()))
                               : 0);
    }
    races_j.push_back(std::move(rj));
  }

  json results;
  results["config_hash"] = lc.hash;
  results["seed"] = seed;
  results["git"] = git_describe();
  results["controllers"] = {ego_spec, opp1_spec, opp2_spec};
  results["region"] = region;
  results["n"] = n_races;
  results["wins"] = wins;
  results["races"] = races_j;
  const auto out_path = [&](const std::string& name) {
    return (std::filesystem::path(out_dir) / name).string();
  };
  write_json_file(out_path("results.json"), results);
  save_trajectories_csv(out_path("trajectories.csv"), records, lc.track,
                        meta_comment(lc.hash, seed));

  const char* colors[3] = {"#d62728", "#1f77b4", "#2ca02c"};
  std::vector<SvgSeries> overlays;
  for (int i = 0; i < 3; ++i) {
    SvgSeries s;
    s.color = colors[i];
    for (const auto& frame : records.front().states) {
      const CarState& c = frame[static_cast<std::size_t>(i)];
      s.points.push_back(lc.track.frenet_to_global(
          lc.track.closed() ? c.p_x : std::clamp(c.p_x, 0.0, lc.track.total_length()), c.p_y));
    }
    overlays.push_back(std::move(s));
  }
  write_track_svg(out_path("track.svg"), lc.track, overlays, meta_comment(lc.hash, seed));

  std::cout << "races: " << n_races << "  wins ego/opp1/opp2: " << wins[0] << "/" << wins[1]
            << "/" << wins[2] << "\n";
  return 0;
}

int cmd_evaluate(const std::string& config_path, const std::string& what,
                 const std::string& dataset_file, const std::string& potential_model,
                 const std::vector<std::string>& value_model_files, int n_states,
                 int candidates, int horizon, const std::string& out_dir,
                 std::uint64_t seed, unsigned threads) {
  const LoadedContext lc = load_context(config_path);
  std::filesystem::create_directories(out_dir);
  const auto out_path = [&](const std::string& name) {
    return (std::filesystem::path(out_dir) / name).string();
  };

  json pmeta;
  const Mlp phi = load_model_json(potential_model, &pmeta);
  const double v_min = pmeta.value("value_min", 0.0);
  const double v_max = pmeta.value("value_max", 0.0);
  const double value_range = v_max - v_min;

  const auto [dmeta, races] = load_dataset_jsonl(dataset_file);
  if (races.empty()) throw ValidationError(dataset_file + ": dataset has no races");

  if (what == "gap") {
    if (value_model_files.empty()) {
      throw ValidationError("gap evaluation needs --value-models");
    }
    std::vector<Mlp> value_nets;
    for (const auto& f : value_model_files) value_nets.push_back(load_model_json(f));
    const auto samples =
        build_potential_samples(races, value_nets, lc.cfg.game.theta_box, lc.track,
                                n_states, splitmix64(seed ^ 0x6a9));
    const GapSummary gap = approximation_gap(phi, samples, value_range);
    save_gap_csv(out_path("gap.csv"), gap, meta_comment(lc.hash, seed));
    write_json_file(out_path("gap_summary.json"),
                    {{"config_hash", lc.hash},
                     {"seed", seed},
                     {"samples", gap.gaps.size()},
                     {"value_range", value_range},
                     {"median", gap.median},
                     {"max", gap.max}});
    std::cout << "gap: median " << gap.median << " max " << gap.max << " over "
              << gap.gaps.size() << " samples\n";
    return 0;
  }
  if (what != "regret") throw ValidationError("--what must be gap or regret");

  Rng rng(splitmix64(seed ^ 0x2e62e7ULL));
  std::vector<RegretReport> reports;
  double mean_rel = 0.0;
  for (int s = 0; s < n_states; ++s) {
    const RaceRecord& rec = races[rng.index(races.size())];
    const std::vector<CarState>& x = rec.states[rng.index(rec.states.size())];
    std::vector<PolicyParams> warm(static_cast<std::size_t>(lc.cfg.game.n_cars));
    for (auto& th : warm) th = lc.cfg.game.theta_box.sample(rng);

    ArgmaxConfig acfg = lc.cfg.argmax;
    acfg.seed = splitmix64(seed + static_cast<std::uint64_t>(s));
    const auto theta_star =
        maximize_potential(phi, x, lc.track, warm, 0, lc.cfg.game.theta_box, acfg);
    RegretReport rep =
        nash_regret(lc.ctx, x, theta_star, 0, RegretMode::kRollout, candidates, nullptr,
                    value_range, horizon, splitmix64(seed ^ (0x77ULL + static_cast<std::uint64_t>(s))),
                    s, threads);
    mean_rel += rep.regret_rel;
    reports.push_back(rep);
    std::cout << "state " << s << ": regret " << rep.regret << " (" << rep.regret_rel
              << " of range)\n";
  }
  mean_rel /= std::max(1, n_states);
  save_regret_csv(out_path("regret.csv"), reports, meta_comment(lc.hash, seed));
  double max_rel = 0.0;
  for (const auto& r : reports) max_rel = std::max(max_rel, r.regret_rel);
  write_json_file(out_path("regret_summary.json"), {{"config_hash", lc.hash},
                                                    {"seed", seed},
                                                    {"states", n_states},
                                                    {"candidates", candidates},
                                                    {"horizon", horizon},
                                                    {"value_range", value_range},
                                                    {"mean_rel", mean_rel},
                                                    {"max_rel", max_rel}});
  std::cout << "regret: mean_rel " << mean_rel << " max_rel " << max_rel << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-car racing game workbench"};
  app.require_subcommand(1);

  // raceline
  std::string track_file, out_dir = "out";
  bool closed = false;
  VelocityProfileConfig profile;
  double mu_ref = -1.0;
  std::uint64_t seed = 0;
  auto* rl = app.add_subcommand("raceline", "fit the minimum-curvature raceline and profiles");
  rl->add_option("track", track_file, "track CSV (x,y,w)")->required();
  rl->add_flag("--closed", closed, "treat the track as a closed loop");
  rl->add_option("--out", out_dir, "output directory");
  rl->add_option("--mu-min", profile.mu_min);
  rl->add_option("--mu-max", profile.mu_max);
  rl->add_option("--n-profiles", profile.n_profiles);
  rl->add_option("--v-cap", profile.v_cap);
  rl->add_option("--a-long-max", profile.a_long_max);
  rl->add_option("--w-veh", profile.w_veh);
  rl->add_option("--mu-ref", mu_ref, "friction for the raceline CSV speeds (default mu_max)");
  rl->add_option("--seed", seed);

  // generate
  std::string config_path, dataset_out = "dataset.jsonl";
  int races = 100;
  unsigned threads = 0;
  auto* gen = app.add_subcommand("generate", "simulate races into a JSONL dataset");
  gen->add_option("config", config_path, "experiment config JSON")->required();
  gen->add_option("--races", races, "number of races");
  gen->add_option("--seed", seed);
  gen->add_option("--out", dataset_out, "output dataset file");
  gen->add_option("--threads", threads, "worker threads (0 = hardware)");

  // train
  std::string train_config, train_dataset, target = "value", model_out = "model.json";
  std::vector<std::string> value_models;
  int car = 0, samples_override = 0;
  auto* tr = app.add_subcommand("train", "train a value or potential model");
  tr->add_option("config", train_config, "experiment config JSON")->required();
  tr->add_option("dataset", train_dataset, "dataset JSONL")->required();
  tr->add_option("--target", target, "value | potential");
  tr->add_option("--car", car, "car index (value target)");
  tr->add_option("--out", model_out, "output model file");
  tr->add_option("--value-models", value_models, "value model files (potential target)");
  tr->add_option("--samples", samples_override, "potential sample count override");
  tr->add_option("--seed", seed);

  // race
  std::string race_config, ego = "potential", opp1 = "random", opp2 = "random";
  std::string region = "mixed", potential_model, race_out = "race_out";
  int n_races = 33;
  auto* rc = app.add_subcommand("race", "run head-to-head races");
  rc->add_option("config", race_config, "experiment config JSON")->required();
  rc->add_option("--ego", ego, "ego controller: potential|ibr|random|fixed:theta.json");
  rc->add_option("--opp1", opp1, "first opponent controller");
  rc->add_option("--opp2", opp2, "second opponent controller");
  rc->add_option("--n", n_races, "number of races");
  rc->add_option("--region", region, "ego start region: R1|R2|R3|mixed");
  rc->add_option("--potential-model", potential_model, "potential model JSON");
  rc->add_option("--out", race_out, "output directory");
  rc->add_option("--seed", seed);
  rc->add_option("--threads", threads);

  // evaluate
  std::string eval_config, what = "gap", eval_dataset, eval_potential, eval_out = "eval_out";
  int eval_states = 20, eval_candidates = 50, eval_horizon = 100;
  std::vector<std::string> eval_value_models;
  auto* ev = app.add_subcommand("evaluate", "approximation-gap and Nash-regret reports");
  ev->add_option("config", eval_config, "experiment config JSON")->required();
  ev->add_option("--what", what, "gap | regret");
  ev->add_option("--dataset", eval_dataset, "dataset JSONL")->required();
  ev->add_option("--potential-model", eval_potential, "potential model JSON")->required();
  ev->add_option("--value-models", eval_value_models, "value model files (gap)");
  ev->add_option("--states", eval_states, "states (regret) / samples (gap)");
  ev->add_option("--candidates", eval_candidates, "regret candidates per state");
  ev->add_option("--horizon", eval_horizon, "regret rollout horizon, steps");
  ev->add_option("--out", eval_out, "output directory");
  ev->add_option("--seed", seed);
  ev->add_option("--threads", threads);

  CLI11_PARSE(app, argc, argv);

  try {
    if (rl->parsed()) {
      if (mu_ref < 0.0) mu_ref = profile.mu_max;
      return cmd_raceline(track_file, closed, out_dir, profile, mu_ref, seed);
    }
    if (gen->parsed()) return cmd_generate(config_path, races, seed, dataset_out, threads);
    if (tr->parsed()) {
      return cmd_train(train_config, train_dataset, target, car, model_out, value_models,
                       samples_override, seed);
    }
    if (rc->parsed()) {
      return cmd_race(race_config, ego, opp1, opp2, n_races, region, potential_model,
                      race_out, seed, threads);
    }
    if (ev->parsed()) {
      return cmd_evaluate(eval_config, what, eval_dataset, eval_potential,
                          eval_value_models, eval_states, eval_candidates, eval_horizon,
                          eval_out, seed, threads);
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ComputeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
