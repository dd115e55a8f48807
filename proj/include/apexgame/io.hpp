#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "apexgame/equilibrium.hpp"
#include "apexgame/game.hpp"
#include "apexgame/learning.hpp"
#include "apexgame/mlp.hpp"
#include "apexgame/raceline.hpp"
#include "apexgame/track.hpp"

namespace apexgame {

// Everything the CLI reads or writes goes through here so file formats stay
// in one place. All output files embed the config hash and seed.

// ---- configs ----

struct ExperimentConfig {
  std::string track_file;
  bool track_closed = true;
  std::string vehicle_file;  // empty: built-in defaults
  double mu = 0.8;           // friction used for the policy raceline profile
  VelocityProfileConfig profile;
  GameConfig game;
  MpcConfig mpc;
  ArgmaxConfig argmax;
  int replan_every = 10;
  std::vector<int> value_arch{128, 128, 64};
  std::vector<int> potential_arch{384, 384, 192};
  int potential_samples = 20000;
  TrainConfig train;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
};

ExperimentConfig load_experiment_config(const std::string& path);

// FNV-1a hash of the canonical JSON dump, as a hex string.
std::string config_hash(const nlohmann::json& j);

nlohmann::json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const nlohmann::json& j);

// ---- tracks and racelines ----

// CSV with header x,y,w; lines starting with '#' are skipped.
Track load_track_csv(const std::string& path, bool closed);
void save_track_csv(const std::string& path, const Track& track);

// CSV header x,y,s,v_x,a_x,psi,kappa,eta with a leading metadata comment.
void save_raceline_csv(const std::string& path, const RaceLine& raceline,
                       const std::string& meta_comment);
void save_profile_library_json(const std::string& path, const ProfileLibrary& lib,
                               const nlohmann::json& meta);

// ---- vehicle parameters ----

VehicleParams vehicle_params_from_json(const nlohmann::json& j);
nlohmann::json vehicle_params_to_json(const VehicleParams& vp);
VehicleParams load_vehicle_params(const std::string& path);

// ---- datasets (JSON-Lines, one race per line, metadata header line) ----

struct DatasetMeta {
  int schema = 1;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string git;
  nlohmann::json game;            // game configuration snapshot
  double value_tail_bound = 0.0;  // gamma^T * r_max / (1-gamma) truncation bound
};

nlohmann::json race_record_to_json(const RaceRecord& rec);
RaceRecord race_record_from_json(const nlohmann::json& j);

void save_dataset_jsonl(const std::string& path, const DatasetMeta& meta,
                        std::span<const RaceRecord> records);
std::pair<DatasetMeta, std::vector<RaceRecord>> load_dataset_jsonl(const std::string& path);

// ---- models ----

void save_model_json(const std::string& path, const Mlp& net, const nlohmann::json& meta);
Mlp load_model_json(const std::string& path, nlohmann::json* meta_out = nullptr);

// ---- evaluation reports ----

void save_gap_csv(const std::string& path, const GapSummary& gap,
                  const std::string& meta_comment);
void save_regret_csv(const std::string& path, std::span<const RegretReport> reports,
                     const std::string& meta_comment);

// trajectories.csv: one row per (race, step, car), global + Frenet positions
void save_trajectories_csv(const std::string& path, std::span<const RaceRecord> records,
                           const Track& track, const std::string& meta_comment);

// "describe" string of the working tree, "unknown" outside a repository
std::string git_describe();

}  // namespace apexgame
