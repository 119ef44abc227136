#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "hinav/graph_env.hpp"
#include "hinav/nn.hpp"

namespace hinav {

// One supervision path: states connected under step(), ending in the cell.
struct Path {
  int target_cell = 0;
  std::vector<ViewState> states;
};

// Supervision paths plus a per-target index of remaining-step distances.
class PathSet {
 public:
  PathSet() = default;

  // Validates connectivity, state validity and terminal-cell membership.
  static PathSet from_paths(const PanoGraph& graph, std::vector<Path> paths);

  const std::vector<Path>& paths() const { return paths_; }
  std::vector<int> targets() const;
  std::size_t size() const { return paths_.size(); }

  // Remaining action count from the first occurrence of s on any path to the
  // target; nullopt when s is on no path to that target.
  std::optional<int> distance(const PanoGraph& graph, const ViewState& s,
                              int target_cell) const;
  bool covers(const PanoGraph& graph, const ViewState& s, int target_cell) const {
    return distance(graph, s, target_cell).has_value();
  }

  // Union of path sets; distances compose by min and never increase.
  void merge(const PathSet& other);

 private:
  void index_path(const Path& p, int num_orientations);

  std::vector<Path> paths_;
  // target cell -> (state index -> min remaining steps)
  std::map<int, std::map<int, int>> remaining_;
};

// Minimal-action-count paths from every reachable state to each target cell,
// via backward BFS over the (node, orient) state graph. Pass allowed_nodes to
// restrict the search to a subgraph (used to synthesize demonstration sets
// that avoid regions).
PathSet shortest_paths(const PanoGraph& graph, const std::vector<int>& targets,
                       const std::vector<bool>* allowed_nodes = nullptr);

// JSON-lines path file: {"target": cell, "states": [[node, orient], ...]}.
void save_paths_jsonl(const PathSet& paths, const std::string& path);
PathSet load_demonstrations(const std::string& path, const PanoGraph& graph);

std::optional<int> path_distance(const PanoGraph& graph, const ViewState& s,
                                 int target_cell, const PathSet& paths);

struct ProgressLabel {
  double y = 0.0;
  bool valid = false;
};

// y = d(x) - d(x'), with x' = x on a blocked forward; valid only when both
// distances are finite.
ProgressLabel progress_label(HighAction a, const ViewState& x, int target_cell,
                             const PathSet& paths, const PanoGraph& graph);

// Greedy argmax over progress labels with the standard tie-break; the
// supervision oracle's own policy. Returns nullopt off coverage.
std::optional<HighAction> oracle_action(const PanoGraph& graph, const PathSet& paths,
                                        const ViewState& s, int target_cell);

enum class TargetMode { OneHot, ImageOne, ImageTwo };
const char* to_string(TargetMode m);
TargetMode target_mode_from_string(const std::string& s);

struct TargetInstance {
  int cell_rank = 0;
  TargetSpec spec;
};

TargetInstance make_target(const PanoGraph& graph, int cell_rank, TargetMode mode,
                           std::uint64_t rng_seed);

struct ValueNetConfig {
  int descriptor_dim = 128;
  int onehot_dim = 0;  // grid valid-cell count; 0 in image modes
  TargetMode target_mode = TargetMode::OneHot;
  int target_embed = 64;
  int fusion_hidden = 64;
  int lstm_hidden = 64;
};

// Recurrent action-value head over (view descriptor, proximity bit, target
// embedding): a target perceptron, a fusion perceptron, one LSTM layer and a
// linear head with one value per high-level action (Forward, TurnLeft,
// TurnRight).
class ValueNet {
 public:
  ValueNet() = default;
  ValueNet(const ValueNetConfig& cfg, std::uint64_t seed);

  struct StepCache {
    Dense::Cache target;
    Dense::Cache fusion;
    LstmCell::Cache lstm;
    Dense::Cache head;
    std::vector<double> target_input;
  };

  // Target specs map to a fixed-size input: one-hot label or the mean of the
  // image descriptors.
  std::vector<double> target_input(const TargetSpec& target) const;

  std::array<double, kNumHighActions> forward(const Observation& obs,
                                              const std::vector<double>& target_in,
                                              const LstmState& state,
                                              LstmState& next_state,
                                              StepCache* cache = nullptr) const;

  // BPTT step: dvalues flows back through head/LSTM/fusion/target; d_state
  // carries the recurrent gradient between timesteps.
  void backward_step(const StepCache& cache,
                     const std::array<double, kNumHighActions>& dvalues,
                     LstmState& d_state, GradMap& grads) const;

  const ValueNetConfig& config() const { return cfg_; }
  ParamSet& params() { return ps_; }
  const ParamSet& params() const { return ps_; }

  void save(const std::string& path) const;
  static ValueNet load(const std::string& path);

 private:
  void bind_layers();

  ValueNetConfig cfg_;
  ParamSet ps_;
  Dense target_mlp_, fusion_mlp_, head_;
  LstmCell lstm_;
};

std::pair<std::array<double, kNumHighActions>, LstmState> value_forward(
    const ValueNet& net, const Observation& obs, const TargetSpec& target,
    const LstmState& state);

// Argmax with ties broken Forward > TurnLeft > TurnRight.
HighAction select_action(const std::array<double, kNumHighActions>& values);

struct EpisodeStep {
  ViewState state;
  Observation obs;
  HighAction action = HighAction::Forward;
  std::array<double, kNumHighActions> y{};
  std::array<bool, kNumHighActions> valid{};
};

struct Episode {
  ViewState start;
  TargetInstance target;
  std::vector<EpisodeStep> steps;
  bool success = false;
};

// Bounded FIFO of episodes, multi-producer push and uniform sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 2048) : capacity_(capacity) {}

  void push(Episode ep);
  std::size_t size() const;
  std::size_t capacity() const { return capacity_; }
  // Uniform with replacement; requires a non-empty buffer.
  std::vector<Episode> sample(std::size_t n, std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::deque<Episode> episodes_;
};

// Rolls the policy for at most max_len steps or until the target cell is
// reached, recording observations and masked labels for all three actions.
// epsilon > 0 mixes in uniform exploration.
Episode unroll_episode(const ValueNet& net, const PanoGraph& graph,
                       const PathSet& paths, const ViewState& start,
                       const TargetInstance& target, int max_len,
                       std::mt19937_64& rng, double epsilon = 0.0,
                       double noise_level = 0.05);

// Masked squared regression loss over a sampled batch, normalized by the
// number of valid (label-carrying) terms; accumulates the matching gradient
// via truncated BPTT over each episode. Masked terms contribute exactly zero.
double batch_loss_and_grads(const ValueNet& net,
                            const std::vector<Episode>& batch, GradMap& grads);

struct TrainHighConfig {
  TargetMode target_mode = TargetMode::OneHot;
  int target_embed = 64;
  int fusion_hidden = 64;
  int lstm_hidden = 64;

  int steps = 20000;
  int batch_size = 8;
  double lr = 1e-4;
  int unroll_len = 40;
  int replay_capacity = 2048;
  int collectors = 1;
  int refresh_interval = 500;
  int warmup_episodes = 16;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double epsilon_frac = 0.3;  // fraction of steps over which epsilon anneals
  double grad_clip = 5.0;
  double noise_level = 0.05;

  int eval_interval = 250;
  int eval_runs = 20;
  double stop_success = -1.0;  // early stop threshold; < 0 disables
  int checkpoint_interval = 1000;

  std::uint64_t seed = 0;
  std::string out_dir;  // metrics.csv + checkpoint.ckpt when non-empty
  std::function<void(int, double, double)> on_metrics;  // step, loss, eval
};

struct TrainHighResult {
  ValueNet net;
  int steps_run = 0;
  double final_loss = 0.0;
  double final_eval_success = 0.0;
};

TrainHighResult train_high(const PanoGraph& graph, const PathSet& paths,
                           const TrainHighConfig& cfg);

}  // namespace hinav
