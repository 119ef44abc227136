#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hinav/highlevel.hpp"
#include "hinav/lowlevel.hpp"
#include "hinav/maze.hpp"

namespace hinav {

// Continuous maze overlaid with the capture graph the planner was trained on.
struct HybridWorld {
  MazeWorld world;
  PanoGraph graph;
  double snap_radius = 0.7;
  LidarSpec lidar;
};

// Capture poses on a 0.5 m lattice over free space, keeping the robot's
// clearance margin from walls.
std::vector<Pose2D> sample_capture_poses(const Layout& layout,
                                         double spacing = 0.5,
                                         double margin = 0.3);

struct HybridWorldOptions {
  BuildGraphOptions graph;
  int grid_rows = 10;
  int grid_cols = 10;
  double snap_radius = 0.7;
  LidarSpec lidar;
};

// Builds the capture graph over the layout and drops forward edges whose
// straight segment crosses a wall (captures only connect along traversable
// space). Throws if any pose sits inside a wall.
HybridWorld make_hybrid_world(const Layout& layout,
                              const std::vector<Pose2D>& poses,
                              const HybridWorldOptions& opts = {});

int nearest_node(const PanoGraph& graph, const Vec2& p);

// Deployment-side observation: descriptor of the nearest graph state (snap by
// position, orientation rounded to the nearest discrete facing), proximity
// from the LiDAR minimum range.
Observation virtual_observe(const HybridWorld& world, const Pose2D& pose,
                            std::uint64_t rng_seed = 0,
                            double noise_level = 0.0);

enum class RunResult { Success, Timeout, Collision, Lost };
const char* to_string(RunResult r);

struct RunStep {
  Pose2D pose;  // before the action
  HighAction action = HighAction::Forward;
  std::optional<ForwardOutcome> low_outcome;  // Forward only
  std::vector<Pose2D> trace;                  // low-level control trace
};

struct RunRecord {
  Pose2D start;
  int target_cell = 0;
  std::vector<RunStep> steps;
  RunResult result = RunResult::Timeout;
  double path_length = 0.0;
  Pose2D final_pose;
};

// High-level decision source for a single run; owns any recurrent state.
class HighPolicy {
 public:
  virtual ~HighPolicy() = default;
  virtual HighAction act(const Observation& obs, const ViewState& snapped) = 0;
};

// Fresh policy per run, bound to that run's target.
using HighPolicyFactory =
    std::function<std::unique_ptr<HighPolicy>(const TargetInstance&)>;

HighPolicyFactory net_policy_factory(const ValueNet& net);
HighPolicyFactory oracle_policy_factory(const PanoGraph& graph,
                                        const PathSet& paths);

struct RunOptions {
  int max_high_steps = 150;
  double success_radius = 3.0;
  double forward_distance = 1.0;
  double lost_factor = 3.0;  // lost when nearest node > factor * snap_radius
  double observe_noise = 0.0;
  std::uint64_t seed = 0;
  bool naive_forward = false;  // open-loop executor instead of the actor
  double naive_speed = 0.35;
  double robot_radius = 0.3;
  double wheel_base = 0.4;
  double wheel_radius = 0.1;
};

// Executes the two-level loop: observe, pick a high action, rotate in place
// for turns, delegate forwards to the low-level executor. Terminates on the
// success radius around the target cell center, collision, leaving the
// covered area, or the step cap.
RunRecord run_hierarchical(const HybridWorld& world, HighPolicy& policy,
                           const Actor* actor, const Pose2D& start,
                           const TargetInstance& target,
                           const RunOptions& opts = {});

RunRecord run_hierarchical(const HybridWorld& world, const ValueNet& net,
                           const Actor& actor, const Pose2D& start,
                           const TargetInstance& target,
                           const RunOptions& opts = {});

// Graph-only rollout: the high level acts directly on the graph with step().
struct GraphRunRecord {
  ViewState start;
  int target_cell = 0;
  std::vector<HighAction> actions;
  bool success = false;
  int optimal_steps = 0;
  std::vector<ViewState> visited;
};

GraphRunRecord run_graph_only(const PanoGraph& graph, HighPolicy& policy,
                              const ViewState& start, const TargetInstance& target,
                              int max_steps, double success_radius,
                              double observe_noise, std::uint64_t seed);

struct EvalOptions {
  int runs_per_target = 20;
  double min_start_distance = 15.0;  // meters of graph distance
  int max_high_steps = 150;
  double success_radius = 3.0;
  TargetMode target_mode = TargetMode::OneHot;
  double observe_noise = 0.05;
  std::uint64_t seed = 0;
  RunOptions run;  // hybrid runs only
};

struct TargetReport {
  int target_cell = 0;
  int runs = 0;
  double success_rate = 0.0;
  double mean_path_ratio = 0.0;  // over successful runs
};

struct EvalReport {
  int runs = 0;
  double success_rate = 0.0;
  double mean_path_ratio = 0.0;
  std::vector<TargetReport> per_target;
};

std::string report_to_json(const EvalReport& report);

// Seeded random starts at least min_start_distance of graph distance from
// each target; reports success rate and mean executed/optimal length ratio.
EvalReport evaluate_graph(const PanoGraph& graph, const HighPolicyFactory& policy,
                          const std::vector<int>& targets, const EvalOptions& opts,
                          std::vector<GraphRunRecord>* records = nullptr);

EvalReport evaluate_hybrid(const HybridWorld& world, const HighPolicyFactory& policy,
                           const Actor* actor, const std::vector<int>& targets,
                           const EvalOptions& opts,
                           std::vector<RunRecord>* records = nullptr);

// Metric shortest-path distance (meters) from each node to the nearest node
// of the source set, along forward edges in either direction.
std::vector<double> node_metric_distances(const PanoGraph& graph,
                                          const std::vector<int>& source_nodes);

// Minimal action counts from every state to the target cell; -1 unreachable.
std::vector<int> state_distances_to_cell(const PanoGraph& graph, int target_cell);

// Adds disc obstacles the LiDAR and collision tests can see while the graph
// stays unchanged. Rejects obstacle sets that disconnect the node area for
// the robot disc.
HybridWorld insert_obstacles(const HybridWorld& world,
                             const std::vector<DiscObstacle>& obstacles,
                             double robot_radius = 0.3);

// JSON-lines trajectory log, one run per line.
void save_runs_jsonl(const std::vector<RunRecord>& runs, const std::string& path);
std::vector<RunRecord> load_runs_jsonl(const std::string& path);

}  // namespace hinav
