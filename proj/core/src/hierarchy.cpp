#include "hinav/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>

#include <json.hpp>

#include "hinav/errors.hpp"
#include "hinav/rng.hpp"

namespace hinav {

using json = nlohmann::ordered_json;

std::vector<Pose2D> sample_capture_poses(const Layout& layout, double spacing,
                                         double margin) {
  std::vector<Pose2D> poses;
  int nx = static_cast<int>(std::floor(layout.width() / spacing));
  int ny = static_cast<int>(std::floor(layout.height() / spacing));
  for (int j = 1; j < ny; ++j)
    for (int i = 1; i < nx; ++i) {
      Vec2 p{i * spacing, j * spacing};
      if (layout.wall_at_point(p)) continue;
      if (distance_to_walls(layout, p) <= margin) continue;
      poses.emplace_back(p.x, p.y);
    }
  return poses;
}

namespace {

bool segment_clear(const Layout& layout, const Vec2& a, const Vec2& b) {
  double len = distance(a, b);
  if (len < 1e-12) return true;
  double bearing = std::atan2(b.y - a.y, b.x - a.x);
  return cast_ray(layout, a, bearing, len) >= len - 1e-9;
}

}  // namespace

HybridWorld make_hybrid_world(const Layout& layout,
                              const std::vector<Pose2D>& poses,
                              const HybridWorldOptions& opts) {
  for (const Pose2D& p : poses)
    if (layout.wall_at_point(p.position()))
      throw PoseInsideWall("hybrid world: capture pose inside a wall");
  HybridWorld world;
  world.world.layout = layout;
  world.graph = build_graph(poses, opts.graph);
  world.snap_radius = opts.snap_radius;
  world.lidar = opts.lidar;
  // Captures only connect along traversable space: drop forward edges whose
  // straight segment crosses a wall.
  for (auto it = world.graph.forward_edge.begin();
       it != world.graph.forward_edge.end();) {
    int node = it->first / world.graph.num_orientations;
    const Vec2 a = world.graph.nodes[node].pose.position();
    const Vec2 b = world.graph.nodes[it->second].pose.position();
    if (!segment_clear(layout, a, b))
      it = world.graph.forward_edge.erase(it);
    else
      ++it;
  }
  world.graph.grid = make_grid(world.graph, opts.grid_rows, opts.grid_cols);
  return world;
}

int nearest_node(const PanoGraph& graph, const Vec2& p) {
  int best = -1;
  double best_dist = std::numeric_limits<double>::infinity();
  for (const CaptureNode& n : graph.nodes) {
    double d = distance(n.pose.position(), p);
    if (d < best_dist) {
      best = n.id;
      best_dist = d;
    }
  }
  return best;
}

Observation virtual_observe(const HybridWorld& world, const Pose2D& pose,
                            std::uint64_t rng_seed, double noise_level) {
  ViewState s{nearest_node(world.graph, pose.position()),
              world.graph.nearest_orient(pose.theta)};
  Observation obs = observe(world.graph, s, rng_seed, noise_level);
  LidarScan scan = world.world.scan(pose, world.lidar);
  double min_range = *std::min_element(scan.ranges.begin(), scan.ranges.end());
  obs.proximity = min_range < kProximityRange ? 1 : 0;
  return obs;
}

const char* to_string(RunResult r) {
  switch (r) {
    case RunResult::Success: return "success";
    case RunResult::Timeout: return "timeout";
    case RunResult::Collision: return "collision";
    case RunResult::Lost: return "lost";
  }
  return "?";
}

namespace {

class NetPolicy : public HighPolicy {
 public:
  NetPolicy(const ValueNet& net, const TargetInstance& target)
      : net_(net), target_in_(net.target_input(target.spec)),
        state_(LstmState::zero(net.config().lstm_hidden)) {}

  HighAction act(const Observation& obs, const ViewState&) override {
    LstmState next;
    auto values = net_.forward(obs, target_in_, state_, next);
    state_ = std::move(next);
    return select_action(values);
  }

 private:
  const ValueNet& net_;
  std::vector<double> target_in_;
  LstmState state_;
};

class OraclePolicy : public HighPolicy {
 public:
  OraclePolicy(const PanoGraph& graph, const PathSet& paths, int target_cell)
      : graph_(graph), paths_(paths), target_cell_(target_cell) {}

  HighAction act(const Observation&, const ViewState& snapped) override {
    auto a = oracle_action(graph_, paths_, snapped, target_cell_);
    // Off coverage the oracle has no signal; turn until a covered view shows.
    return a ? *a : HighAction::TurnLeft;
  }

 private:
  const PanoGraph& graph_;
  const PathSet& paths_;
  int target_cell_;
};

}  // namespace

HighPolicyFactory net_policy_factory(const ValueNet& net) {
  return [&net](const TargetInstance& target) {
    return std::make_unique<NetPolicy>(net, target);
  };
}

HighPolicyFactory oracle_policy_factory(const PanoGraph& graph,
                                        const PathSet& paths) {
  return [&graph, &paths](const TargetInstance& target) {
    return std::make_unique<OraclePolicy>(graph, paths, target.cell_rank);
  };
}

RunRecord run_hierarchical(const HybridWorld& world, HighPolicy& policy,
                           const Actor* actor, const Pose2D& start,
                           const TargetInstance& target,
                           const RunOptions& opts) {
  RunRecord rec;
  rec.start = start;
  rec.target_cell = target.cell_rank;
  rec.final_pose = start;
  const Vec2 goal = world.graph.grid.cell_center(target.cell_rank);
  RobotState state;
  state.pose = start;
  state.radius = opts.robot_radius;
  state.wheel_base = opts.wheel_base;
  state.wheel_radius = opts.wheel_radius;
  if (distance(start.position(), goal) <= opts.success_radius) {
    rec.result = RunResult::Success;
    return rec;
  }
  auto rng = make_rng(mix_keys(0x40B5, opts.seed));
  ForwardExecOptions fwd;
  fwd.lidar = world.lidar;
  const double slot = 2.0 * kPi / world.graph.num_orientations;
  for (int step = 0; step < opts.max_high_steps; ++step) {
    int nn = nearest_node(world.graph, state.pose.position());
    if (distance(world.graph.nodes[nn].pose.position(),
                 state.pose.position()) >
        opts.lost_factor * world.snap_radius) {
      rec.result = RunResult::Lost;
      break;
    }
    Observation obs =
        virtual_observe(world, state.pose, rng(), opts.observe_noise);
    ViewState snapped{nn, world.graph.nearest_orient(state.pose.theta)};
    RunStep rs;
    rs.pose = state.pose;
    rs.action = policy.act(obs, snapped);
    if (rs.action == HighAction::TurnLeft) {
      state.pose = Pose2D(state.pose.x, state.pose.y, state.pose.theta + slot);
    } else if (rs.action == HighAction::TurnRight) {
      state.pose = Pose2D(state.pose.x, state.pose.y, state.pose.theta - slot);
    } else if (auto fwd_node = world.graph.forward_target(snapped)) {
      // A forward homes on the matched capture of the snapped view: align
      // the heading with its bearing, then let the executor close the gap.
      Vec2 to = world.graph.nodes[*fwd_node].pose.position() -
                state.pose.position();
      double dist = opts.forward_distance;
      if (to.norm() > 1e-9) {
        state.pose =
            Pose2D(state.pose.x, state.pose.y, std::atan2(to.y, to.x));
        dist = std::min(to.norm(), 1.5 * opts.forward_distance);
      }
      ForwardResult fr =
          opts.naive_forward || !actor
              ? execute_forward_openloop(world.world, state, dist,
                                         opts.naive_speed, fwd)
              : execute_forward(*actor, world.world, state, dist, fwd);
      rs.low_outcome = fr.outcome;
      rs.trace = std::move(fr.trace);
      rec.path_length += fr.arc_length;
      state = fr.state;
      if (fr.outcome == ForwardOutcome::Collision) {
        rec.steps.push_back(std::move(rs));
        rec.result = RunResult::Collision;
        break;
      }
    }
    rec.steps.push_back(std::move(rs));
    if (distance(state.pose.position(), goal) <= opts.success_radius) {
      rec.result = RunResult::Success;
      break;
    }
  }
  rec.final_pose = state.pose;
  return rec;
}

RunRecord run_hierarchical(const HybridWorld& world, const ValueNet& net,
                           const Actor& actor, const Pose2D& start,
                           const TargetInstance& target,
                           const RunOptions& opts) {
  auto policy = net_policy_factory(net)(target);
  return run_hierarchical(world, *policy, &actor, start, target, opts);
}

GraphRunRecord run_graph_only(const PanoGraph& graph, HighPolicy& policy,
                              const ViewState& start,
                              const TargetInstance& target, int max_steps,
                              double success_radius, double observe_noise,
                              std::uint64_t seed) {
  GraphRunRecord rec;
  rec.start = start;
  rec.target_cell = target.cell_rank;
  auto dists = state_distances_to_cell(graph, target.cell_rank);
  rec.optimal_steps = dists[graph.state_index(start)];
  const Vec2 goal = graph.grid.cell_center(target.cell_rank);
  auto reached = [&](const ViewState& s) {
    if (node_cell_rank(graph, s.node_id) == target.cell_rank) return true;
    return distance(graph.nodes[s.node_id].pose.position(), goal) <=
           success_radius;
  };
  auto rng = make_rng(mix_keys(0x6E05, seed));
  ViewState s = start;
  rec.visited.push_back(s);
  if (reached(s)) {
    rec.success = true;
    return rec;
  }
  for (int t = 0; t < max_steps; ++t) {
    Observation obs = observe(graph, s, rng(), observe_noise);
    HighAction a = policy.act(obs, s);
    rec.actions.push_back(a);
    s = step_or_stay(graph, s, a);
    rec.visited.push_back(s);
    if (reached(s)) {
      rec.success = true;
      break;
    }
  }
  return rec;
}

std::vector<double> node_metric_distances(const PanoGraph& graph,
                                          const std::vector<int>& source_nodes) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(graph.num_nodes(), inf);
  // Forward edges, both directions, weighted by Euclidean length.
  std::vector<std::vector<std::pair<int, double>>> adj(graph.num_nodes());
  for (const auto& [key, target] : graph.forward_edge) {
    int node = key / graph.num_orientations;
    double w = distance(graph.nodes[node].pose.position(),
                        graph.nodes[target].pose.position());
    adj[node].push_back({target, w});
    adj[target].push_back({node, w});
  }
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
  for (int s : source_nodes) {
    dist[s] = 0.0;
    heap.push({0.0, s});
  }
  while (!heap.empty()) {
    auto [d, u] = heap.top();
    heap.pop();
    if (d > dist[u]) continue;
    for (auto [v, w] : adj[u])
      if (d + w < dist[v]) {
        dist[v] = d + w;
        heap.push({d + w, v});
      }
  }
  return dist;
}

std::vector<int> state_distances_to_cell(const PanoGraph& graph,
                                         int target_cell) {
  const int N = graph.num_orientations;
  const int S = graph.num_states();
  std::vector<std::vector<int>> rev_forward(S);
  for (const auto& [key, target] : graph.forward_edge)
    rev_forward[target * N + key % N].push_back(key / N);
  std::vector<int> dist(S, -1);
  std::vector<int> queue;
  for (const CaptureNode& n : graph.nodes) {
    if (node_cell_rank(graph, n.id) != target_cell) continue;
    for (int o = 0; o < N; ++o) {
      dist[n.id * N + o] = 0;
      queue.push_back(n.id * N + o);
    }
  }
  for (std::size_t head = 0; head < queue.size(); ++head) {
    int u = queue[head];
    int node = u / N, orient = u % N;
    auto relax = [&](int v) {
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    };
    relax(node * N + (orient - 1 + N) % N);
    relax(node * N + (orient + 1) % N);
    for (int m : rev_forward[u]) relax(m * N + orient);
  }
  return dist;
}

namespace {

struct StartPool {
  std::vector<int> nodes;  // eligible start nodes
};

StartPool eligible_starts(const PanoGraph& graph, int target_cell,
                          double min_start_distance) {
  std::vector<int> cell_nodes;
  for (const CaptureNode& n : graph.nodes)
    if (node_cell_rank(graph, n.id) == target_cell)
      cell_nodes.push_back(n.id);
  auto metric = node_metric_distances(graph, cell_nodes);
  StartPool pool;
  for (const CaptureNode& n : graph.nodes)
    if (std::isfinite(metric[n.id]) && metric[n.id] >= min_start_distance)
      pool.nodes.push_back(n.id);
  if (pool.nodes.empty())
    for (const CaptureNode& n : graph.nodes)
      if (std::isfinite(metric[n.id]) && metric[n.id] > 0.0)
        pool.nodes.push_back(n.id);
  if (pool.nodes.empty())
    throw NavError("evaluate: no eligible start nodes for cell " +
                   std::to_string(target_cell));
  return pool;
}

void fold_ratio(double executed, double optimal, double& sum, int& count) {
  if (optimal > 1e-9) {
    sum += executed / optimal;
    ++count;
  } else {
    sum += 1.0;
    ++count;
  }
}

EvalReport finalize_report(std::vector<TargetReport> per_target) {
  EvalReport rep;
  double ratio_sum = 0.0;
  int ratio_count = 0, success = 0;
  for (TargetReport& tr : per_target) {
    rep.runs += tr.runs;
    success += static_cast<int>(std::lround(tr.success_rate * tr.runs));
    if (tr.success_rate > 0.0) {
      ratio_sum += tr.mean_path_ratio * tr.success_rate * tr.runs;
      ratio_count += static_cast<int>(std::lround(tr.success_rate * tr.runs));
    }
  }
  rep.success_rate = rep.runs > 0 ? static_cast<double>(success) / rep.runs : 0.0;
  rep.mean_path_ratio = ratio_count > 0 ? ratio_sum / ratio_count : 0.0;
  rep.per_target = std::move(per_target);
  return rep;
}

}  // namespace

EvalReport evaluate_graph(const PanoGraph& graph,
                          const HighPolicyFactory& policy,
                          const std::vector<int>& targets,
                          const EvalOptions& opts,
                          std::vector<GraphRunRecord>* records) {
  auto rng = make_rng(mix_keys(0xE6A1, opts.seed));
  std::vector<TargetReport> per_target;
  for (int cell : targets) {
    StartPool pool = eligible_starts(graph, cell, opts.min_start_distance);
    std::vector<int> cell_nodes;
    for (const CaptureNode& n : graph.nodes)
      if (node_cell_rank(graph, n.id) == cell) cell_nodes.push_back(n.id);
    auto metric = node_metric_distances(graph, cell_nodes);
    std::uniform_int_distribution<std::size_t> pick_node(0, pool.nodes.size() - 1);
    std::uniform_int_distribution<int> pick_orient(0, graph.num_orientations - 1);
    TargetReport tr;
    tr.target_cell = cell;
    tr.runs = opts.runs_per_target;
    int success = 0;
    double ratio_sum = 0.0;
    int ratio_count = 0;
    for (int r = 0; r < opts.runs_per_target; ++r) {
      ViewState start{pool.nodes[pick_node(rng)], pick_orient(rng)};
      TargetInstance ti = make_target(graph, cell, opts.target_mode, rng());
      auto p = policy(ti);
      GraphRunRecord rec =
          run_graph_only(graph, *p, start, ti, opts.max_high_steps,
                         opts.success_radius, opts.observe_noise, rng());
      if (rec.success) {
        ++success;
        int forwards = static_cast<int>(
            std::count(rec.actions.begin(), rec.actions.end(),
                       HighAction::Forward));
        fold_ratio(forwards * graph.forward_step, metric[start.node_id],
                   ratio_sum, ratio_count);
      }
      if (records) records->push_back(std::move(rec));
    }
    tr.success_rate = static_cast<double>(success) / tr.runs;
    tr.mean_path_ratio = ratio_count > 0 ? ratio_sum / ratio_count : 0.0;
    per_target.push_back(tr);
  }
  return finalize_report(std::move(per_target));
}

EvalReport evaluate_hybrid(const HybridWorld& world,
                           const HighPolicyFactory& policy, const Actor* actor,
                           const std::vector<int>& targets,
                           const EvalOptions& opts,
                           std::vector<RunRecord>* records) {
  auto rng = make_rng(mix_keys(0xE4B2, opts.seed));
  std::uniform_real_distribution<double> utheta(-kPi, kPi);
  std::vector<TargetReport> per_target;
  for (int cell : targets) {
    StartPool pool =
        eligible_starts(world.graph, cell, opts.min_start_distance);
    std::vector<int> cell_nodes;
    for (const CaptureNode& n : world.graph.nodes)
      if (node_cell_rank(world.graph, n.id) == cell) cell_nodes.push_back(n.id);
    auto metric = node_metric_distances(world.graph, cell_nodes);
    std::uniform_int_distribution<std::size_t> pick_node(0, pool.nodes.size() - 1);
    TargetReport tr;
    tr.target_cell = cell;
    tr.runs = opts.runs_per_target;
    int success = 0;
    double ratio_sum = 0.0;
    int ratio_count = 0;
    for (int r = 0; r < opts.runs_per_target; ++r) {
      int node = pool.nodes[pick_node(rng)];
      Pose2D start(world.graph.nodes[node].pose.x,
                   world.graph.nodes[node].pose.y, utheta(rng));
      TargetInstance ti =
          make_target(world.graph, cell, opts.target_mode, rng());
      RunOptions ro = opts.run;
      ro.max_high_steps = opts.max_high_steps;
      ro.success_radius = opts.success_radius;
      ro.observe_noise = opts.observe_noise;
      ro.seed = rng();
      auto p = policy(ti);
      RunRecord rec = run_hierarchical(world, *p, actor, start, ti, ro);
      if (rec.result == RunResult::Success) {
        ++success;
        fold_ratio(rec.path_length, metric[node], ratio_sum, ratio_count);
      }
      if (records) records->push_back(std::move(rec));
    }
    tr.success_rate = static_cast<double>(success) / tr.runs;
    tr.mean_path_ratio = ratio_count > 0 ? ratio_sum / ratio_count : 0.0;
    per_target.push_back(tr);
  }
  return finalize_report(std::move(per_target));
}

std::string report_to_json(const EvalReport& report) {
  json j;
  j["runs"] = report.runs;
  j["success_rate"] = report.success_rate;
  j["mean_path_ratio"] = report.mean_path_ratio;
  json pt = json::array();
  for (const TargetReport& tr : report.per_target)
    pt.push_back({{"target", tr.target_cell},
                  {"runs", tr.runs},
                  {"success_rate", tr.success_rate},
                  {"mean_path_ratio", tr.mean_path_ratio}});
  j["per_target"] = std::move(pt);
  return j.dump(2) + "\n";
}

HybridWorld insert_obstacles(const HybridWorld& world,
                             const std::vector<DiscObstacle>& obstacles,
                             double robot_radius) {
  HybridWorld out = world;
  out.world.obstacles.insert(out.world.obstacles.end(), obstacles.begin(),
                             obstacles.end());
  if (obstacles.empty()) return out;

  // The robot disc must still connect the node area: flood-fill the free
  // configuration lattice and require every standable node in one component.
  const double res = 0.1;
  const Layout& lay = out.world.layout;
  int nx = static_cast<int>(std::ceil(lay.width() / res));
  int ny = static_cast<int>(std::ceil(lay.height() / res));
  auto free_at = [&](int ix, int iy) {
    RobotState s;
    s.pose = Pose2D((ix + 0.5) * res, (iy + 0.5) * res);
    s.radius = robot_radius;
    return !out.world.in_collision(s);
  };
  std::vector<signed char> comp(static_cast<std::size_t>(nx) * ny, -1);
  auto idx = [&](int ix, int iy) { return iy * nx + ix; };
  auto cell_of = [&](const Vec2& p) {
    int ix = std::clamp(static_cast<int>(p.x / res), 0, nx - 1);
    int iy = std::clamp(static_cast<int>(p.y / res), 0, ny - 1);
    return std::pair<int, int>{ix, iy};
  };

  signed char next_comp = 0;
  std::vector<std::pair<int, int>> stack;
  auto flood = [&](int sx, int sy) {
    signed char c = next_comp++;
    comp[idx(sx, sy)] = c;
    stack.push_back({sx, sy});
    while (!stack.empty()) {
      auto [x, y] = stack.back();
      stack.pop_back();
      const int dx[4] = {1, -1, 0, 0};
      const int dy[4] = {0, 0, 1, -1};
      for (int k = 0; k < 4; ++k) {
        int xx = x + dx[k], yy = y + dy[k];
        if (xx < 0 || xx >= nx || yy < 0 || yy >= ny) continue;
        if (comp[idx(xx, yy)] >= 0 || !free_at(xx, yy)) continue;
        comp[idx(xx, yy)] = c;
        stack.push_back({xx, yy});
      }
    }
  };

  signed char node_comp = -1;
  int standable = 0;
  for (const CaptureNode& n : out.graph.nodes) {
    auto [ix, iy] = cell_of(n.pose.position());
    if (!free_at(ix, iy)) continue;  // node buried under an obstacle footprint
    ++standable;
    if (comp[idx(ix, iy)] < 0) flood(ix, iy);
    if (node_comp < 0)
      node_comp = comp[idx(ix, iy)];
    else if (comp[idx(ix, iy)] != node_comp)
      throw CorridorFullyBlocked(
          "insert_obstacles: obstacles split the traversable area");
  }
  if (standable == 0)
    throw CorridorFullyBlocked("insert_obstacles: no standable node remains");
  return out;
}

namespace {

json pose_json(const Pose2D& p) { return json::array({p.x, p.y, p.theta}); }

Pose2D pose_from_json(const json& j) {
  return Pose2D(j.at(0).get<double>(), j.at(1).get<double>(),
                j.at(2).get<double>());
}

HighAction action_from_string(const std::string& s) {
  for (HighAction a : kHighActions)
    if (s == to_string(a)) return a;
  throw IoError("unknown action: " + s);
}

RunResult result_from_string(const std::string& s) {
  for (RunResult r : {RunResult::Success, RunResult::Timeout,
                      RunResult::Collision, RunResult::Lost})
    if (s == to_string(r)) return r;
  throw IoError("unknown run result: " + s);
}

ForwardOutcome outcome_from_string(const std::string& s) {
  for (ForwardOutcome o : {ForwardOutcome::Done, ForwardOutcome::Collision,
                           ForwardOutcome::Timeout})
    if (s == to_string(o)) return o;
  throw IoError("unknown forward outcome: " + s);
}

}  // namespace

void save_runs_jsonl(const std::vector<RunRecord>& runs,
                     const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  for (const RunRecord& run : runs) {
    json steps = json::array();
    for (const RunStep& s : run.steps) {
      json js = {{"pose", pose_json(s.pose)}, {"action", to_string(s.action)}};
      if (s.low_outcome) js["low"] = to_string(*s.low_outcome);
      if (!s.trace.empty()) {
        json trace = json::array();
        for (const Pose2D& p : s.trace) trace.push_back(pose_json(p));
        js["trace"] = std::move(trace);
      }
      steps.push_back(std::move(js));
    }
    json j = {{"start", pose_json(run.start)},
              {"target", run.target_cell},
              {"result", to_string(run.result)},
              {"path_length", run.path_length},
              {"final", pose_json(run.final_pose)},
              {"steps", std::move(steps)}};
    f << j.dump() << "\n";
  }
}

std::vector<RunRecord> load_runs_jsonl(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read " + path);
  std::vector<RunRecord> runs;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw IoError("runs file line " + std::to_string(lineno) + ": " +
                    e.what());
    }
    RunRecord run;
    run.start = pose_from_json(j.at("start"));
    run.target_cell = j.at("target").get<int>();
    run.result = result_from_string(j.at("result").get<std::string>());
    run.path_length = j.at("path_length").get<double>();
    run.final_pose = pose_from_json(j.at("final"));
    for (const auto& js : j.at("steps")) {
      RunStep s;
      s.pose = pose_from_json(js.at("pose"));
      s.action = action_from_string(js.at("action").get<std::string>());
      if (js.contains("low"))
        s.low_outcome = outcome_from_string(js.at("low").get<std::string>());
      if (js.contains("trace"))
        for (const auto& jp : js.at("trace"))
          s.trace.push_back(pose_from_json(jp));
      run.steps.push_back(std::move(s));
    }
    runs.push_back(std::move(run));
  }
  return runs;
}

}  // namespace hinav
