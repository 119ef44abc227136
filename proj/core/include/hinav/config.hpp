#pragma once

#include <string>

#include "hinav/highlevel.hpp"
#include "hinav/hierarchy.hpp"
#include "hinav/lowlevel.hpp"

namespace hinav {

// Flat sectioned key=value config covering every tunable default. Unknown
// sections or keys are rejected; the resolved config is echoed into each
// output directory so runs can be replayed.
struct Config {
  struct Env {
    int num_orientations = 24;
    double forward_step = 1.0;
    double forward_match_radius = 0.7;
    double forward_cone_deg = 20.0;
    int descriptor_dim = 128;
    double noise_level = 0.05;
    int grid_rows = 10;
    int grid_cols = 10;
    double cell_size = 0.5;
    int lidar_beams = 64;
    double lidar_fov_deg = 220.0;
    double lidar_max_range = 5.0;
    double robot_radius = 0.3;
    double wheel_base = 0.4;
    double wheel_radius = 0.1;
    double omega_max = 5.0;
    double dt = 0.1;
  } env;

  struct High {
    std::string target_mode = "onehot";
    int target_embed = 64;
    int fusion_hidden = 64;
    int lstm_hidden = 64;
    int steps = 20000;
    int batch_size = 8;
    double lr = 1e-4;
    int unroll_len = 40;
    int replay_capacity = 2048;
    int collectors = 4;
    int refresh_interval = 500;
    int warmup_episodes = 16;
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    double epsilon_frac = 0.3;
    double grad_clip = 5.0;
    int eval_interval = 250;
    int eval_runs = 20;
    double stop_success = -1.0;
    int checkpoint_interval = 1000;
  } high;

  struct Low {
    int env_steps = 30000;
    int episode_max_steps = 200;
    int warmup_steps = 1000;
    int update_every = 1;
    int batch_size = 256;
    double lr = 1e-4;
    double tau = 0.01;
    double gamma = 0.99;
    double noise_start = 0.4;
    double noise_end = 0.05;
    int buffer_capacity = 100000;
    double grad_clip = 5.0;
    int scatter_obstacles = 0;
    double scatter_radius = 0.2;
  } low;

  struct Eval {
    int runs_per_target = 20;
    double min_start_distance = 15.0;
    int max_high_steps = 150;
    double success_radius = 3.0;
    double snap_radius = 0.7;
    double lost_factor = 3.0;
    double observe_noise = 0.05;
    double forward_distance = 1.0;
    double naive_speed = 0.35;
  } eval;

  static Config from_file(const std::string& path);
  static Config from_text(const std::string& text);
  std::string to_text() const;
  void save(const std::string& path) const;
  // Applies one "section.key=value" override.
  void set(const std::string& dotted_key, const std::string& value);

  LidarSpec lidar_spec() const;
  BuildGraphOptions graph_options() const;
  TrainHighConfig train_high_config() const;
  DdpgConfig ddpg_config() const;
  EvalOptions eval_options() const;
};

}  // namespace hinav
