#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hinav/config.hpp"
#include "hinav/errors.hpp"
#include "hinav/graph_env.hpp"
#include "hinav/hierarchy.hpp"
#include "hinav/highlevel.hpp"
#include "hinav/lowlevel.hpp"
#include "hinav/mapgen.hpp"
#include "hinav/maze.hpp"
#include "hinav/svg.hpp"

namespace {

using nlohmann::ordered_json;

struct Common {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "config file (sectioned key=value)");
  cmd->add_option("--seed", c.seed, "rng seed");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--set", c.overrides,
                  "override a config field, e.g. --set high.steps=4000");
}

hinav::Config load_config(const Common& c) {
  hinav::Config cfg = c.config_path.empty()
                          ? hinav::Config{}
                          : hinav::Config::from_file(c.config_path);
  for (const std::string& o : c.overrides) {
    auto eq = o.find('=');
    if (eq == std::string::npos)
      throw hinav::ConfigInvalid("--set expects section.key=value, got '" + o +
                                 "'");
    cfg.set(o.substr(0, eq), o.substr(eq + 1));
  }
  return cfg;
}

std::string require_out(const Common& c) {
  if (c.out.empty()) throw hinav::ConfigInvalid("--out is required");
  std::filesystem::create_directories(c.out);
  return c.out;
}

void echo_config(const hinav::Config& cfg, const std::string& out_dir) {
  cfg.save(out_dir + "/config.txt");
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stoi(item));
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& s, std::size_t n,
                                      const char* what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  if (out.size() != n)
    throw hinav::ConfigInvalid(std::string("expected ") + what);
  return out;
}

// Resolves --targets (cell ranks) / --target-nodes (node ids) to cell ranks.
std::vector<int> resolve_targets(const hinav::PanoGraph& graph,
                                 const std::string& cells_arg,
                                 const std::string& nodes_arg) {
  std::vector<int> cells;
  if (!cells_arg.empty()) cells = parse_int_list(cells_arg);
  for (int node : parse_int_list(nodes_arg)) {
    if (node < 0 || node >= graph.num_nodes())
      throw hinav::ConfigInvalid("target node out of range: " +
                                 std::to_string(node));
    cells.push_back(hinav::node_cell_rank(graph, node));
  }
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  if (cells.empty())
    throw hinav::ConfigInvalid("no targets given (--targets or --target-nodes)");
  for (int c : cells)
    if (c < 0 || c >= graph.grid.num_valid())
      throw hinav::ConfigInvalid("target cell out of range: " +
                                 std::to_string(c));
  return cells;
}

std::vector<hinav::DiscObstacle> parse_obstacles(
    const std::vector<std::string>& specs) {
  std::vector<hinav::DiscObstacle> out;
  for (const std::string& s : specs) {
    auto v = parse_double_list(s, 3, "--obstacle x,y,r");
    out.push_back({{v[0], v[1]}, v[2]});
  }
  return out;
}

int cmd_gen_map(const Common& common, const std::string& kind) {
  hinav::Config cfg = load_config(common);
  std::string out = require_out(common);
  hinav::GeneratedMap map = hinav::generate_map(kind, common.seed);
  hinav::save_layout(map.layout, out + "/layout.txt");
  hinav::save_poses_csv(map.poses, out + "/poses.csv");
  ordered_json j;
  j["kind"] = kind;
  j["seed"] = common.seed;
  j["target_nodes"] = map.target_nodes;
  ordered_json regions = ordered_json::array();
  for (const auto& r : map.regions)
    regions.push_back({{"name", r.name},
                       {"min", {r.min.x, r.min.y}},
                       {"max", {r.max.x, r.max.y}}});
  j["regions"] = std::move(regions);
  std::ofstream f(out + "/map.json", std::ios::binary);
  f << j.dump(2) << "\n";
  echo_config(cfg, out);
  std::cout << "wrote " << out << "/layout.txt with " << map.poses.size()
            << " capture poses\n";
  return 0;
}

int cmd_build_graph(const Common& common, const std::string& poses_path,
                    const std::string& layout_path) {
  hinav::Config cfg = load_config(common);
  std::string out = require_out(common);
  auto poses = hinav::load_poses_csv(poses_path);
  hinav::BuildGraphOptions opts = cfg.graph_options();
  opts.descriptor_seed_base = common.seed;
  hinav::PanoGraph graph;
  if (!layout_path.empty()) {
    hinav::Layout layout = hinav::load_layout(layout_path, cfg.env.cell_size);
    hinav::HybridWorldOptions hopts;
    hopts.graph = opts;
    hopts.grid_rows = cfg.env.grid_rows;
    hopts.grid_cols = cfg.env.grid_cols;
    hopts.snap_radius = cfg.eval.snap_radius;
    hopts.lidar = cfg.lidar_spec();
    graph = hinav::make_hybrid_world(layout, poses, hopts).graph;
  } else {
    graph = hinav::build_graph(poses, opts);
    graph.grid = hinav::make_grid(graph, cfg.env.grid_rows, cfg.env.grid_cols);
  }
  hinav::save_graph(graph, out + "/graph.json");
  echo_config(cfg, out);
  std::cout << "graph: " << graph.num_nodes() << " nodes, "
            << graph.forward_edge.size() << " forward edges, "
            << graph.grid.num_valid() << " valid cells\n";
  return 0;
}

int cmd_plan_paths(const Common& common, const std::string& graph_path,
                   const std::string& targets_arg,
                   const std::string& target_nodes_arg,
                   const std::vector<std::string>& exclude_rects) {
  hinav::Config cfg = load_config(common);
  std::string out = require_out(common);
  hinav::PanoGraph graph = hinav::load_graph(graph_path);
  auto cells = resolve_targets(graph, targets_arg, target_nodes_arg);
  std::optional<std::vector<bool>> allowed;
  if (!exclude_rects.empty()) {
    allowed.emplace(graph.num_nodes(), true);
    for (const std::string& spec : exclude_rects) {
      auto v = parse_double_list(spec, 4, "--exclude-rect x0,y0,x1,y1");
      for (const hinav::CaptureNode& n : graph.nodes)
        if (n.pose.x >= v[0] && n.pose.y >= v[1] && n.pose.x <= v[2] &&
            n.pose.y <= v[3])
          (*allowed)[n.id] = false;
    }
  }
  hinav::PathSet paths =
      hinav::shortest_paths(graph, cells, allowed ? &*allowed : nullptr);
  hinav::save_paths_jsonl(paths, out + "/paths.jsonl");
  echo_config(cfg, out);
  std::cout << "planned " << paths.size() << " paths to " << cells.size()
            << " target cells\n";
  return 0;
}

int cmd_train_high(const Common& common, const std::string& graph_path,
                   const std::string& paths_path, int collectors) {
  hinav::Config cfg = load_config(common);
  std::string out = require_out(common);
  hinav::PanoGraph graph = hinav::load_graph(graph_path);
  hinav::PathSet paths = hinav::load_demonstrations(paths_path, graph);
  hinav::TrainHighConfig tc = cfg.train_high_config();
  tc.collectors = collectors > 0 ? collectors : cfg.high.collectors;
  tc.seed = common.seed;
  tc.out_dir = out;
  echo_config(cfg, out);
  hinav::TrainHighResult result = hinav::train_high(graph, paths, tc);
  std::cout << "trained " << result.steps_run << " steps, final loss "
            << result.final_loss << ", eval success "
            << result.final_eval_success << "\n";
  return 0;
}

int cmd_train_low(const Common& common, const std::string& layout_path,
                  const std::string& map_kind) {
  hinav::Config cfg = load_config(common);
  std::string out = require_out(common);
  hinav::Layout layout;
  if (!layout_path.empty())
    layout = hinav::load_layout(layout_path, cfg.env.cell_size);
  else
    layout = hinav::generate_map(map_kind.empty() ? "hallways" : map_kind,
                                 common.seed)
                 .layout;
  hinav::DdpgConfig dc = cfg.ddpg_config();
  dc.seed = common.seed;
  dc.out_dir = out;
  echo_config(cfg, out);
  hinav::DdpgResult result = hinav::ddpg_train(layout, dc);
  std::cout << "trained " << result.episodes << " episodes, collision rate "
            << result.final_collision_rate << ", mean return "
            << result.final_mean_return << "\n";
  return 0;
}

int cmd_eval_graph(const Common& common, const std::string& graph_path,
                   const std::string& checkpoint, const std::string& paths_path,
                   bool oracle, const std::string& targets_arg,
                   const std::string& target_nodes_arg) {
  hinav::Config cfg = load_config(common);
  std::string out = require_out(common);
  hinav::PanoGraph graph = hinav::load_graph(graph_path);
  auto cells = resolve_targets(graph, targets_arg, target_nodes_arg);
  hinav::EvalOptions opts = cfg.eval_options();
  opts.seed = common.seed;

  hinav::ValueNet net;
  hinav::PathSet paths;
  hinav::HighPolicyFactory factory;
  if (oracle) {
    if (paths_path.empty())
      throw hinav::ConfigInvalid("--oracle needs --paths");
    paths = hinav::load_demonstrations(paths_path, graph);
    factory = hinav::oracle_policy_factory(graph, paths);
  } else {
    if (checkpoint.empty())
      throw hinav::ConfigInvalid("--checkpoint required (or --oracle)");
    net = hinav::ValueNet::load(checkpoint);
    opts.target_mode = net.config().target_mode;
    factory = hinav::net_policy_factory(net);
  }
  hinav::EvalReport report = hinav::evaluate_graph(graph, factory, cells, opts);
  std::ofstream f(out + "/report.json", std::ios::binary);
  f << hinav::report_to_json(report);
  echo_config(cfg, out);
  std::cout << "graph eval: success " << report.success_rate << " over "
            << report.runs << " runs, path ratio " << report.mean_path_ratio
            << "\n";
  return 0;
}

int cmd_eval_hier(const Common& common, const std::string& layout_path,
                  const std::string& graph_path, const std::string& checkpoint,
                  const std::string& paths_path, bool oracle,
                  const std::string& actor_path, bool naive_forward,
                  const std::vector<std::string>& obstacle_specs,
                  const std::string& targets_arg,
                  const std::string& target_nodes_arg) {
  hinav::Config cfg = load_config(common);
  std::string out = require_out(common);
  hinav::HybridWorld world;
  world.world.layout = hinav::load_layout(layout_path, cfg.env.cell_size);
  world.graph = hinav::load_graph(graph_path);
  world.snap_radius = cfg.eval.snap_radius;
  world.lidar = cfg.lidar_spec();
  auto obstacles = parse_obstacles(obstacle_specs);
  if (!obstacles.empty())
    world = hinav::insert_obstacles(world, obstacles, cfg.env.robot_radius);
  auto cells = resolve_targets(world.graph, targets_arg, target_nodes_arg);
  hinav::EvalOptions opts = cfg.eval_options();
  opts.seed = common.seed;
  opts.run.naive_forward = naive_forward;

  hinav::ValueNet net;
  hinav::PathSet paths;
  hinav::HighPolicyFactory factory;
  if (oracle) {
    if (paths_path.empty())
      throw hinav::ConfigInvalid("--oracle needs --paths");
    paths = hinav::load_demonstrations(paths_path, world.graph);
    factory = hinav::oracle_policy_factory(world.graph, paths);
  } else {
    if (checkpoint.empty())
      throw hinav::ConfigInvalid("--checkpoint required (or --oracle)");
    net = hinav::ValueNet::load(checkpoint);
    opts.target_mode = net.config().target_mode;
    factory = hinav::net_policy_factory(net);
  }
  hinav::Actor actor;
  const hinav::Actor* actor_ptr = nullptr;
  if (!actor_path.empty()) {
    actor = hinav::Actor::load(actor_path);
    actor_ptr = &actor;
  } else if (!naive_forward) {
    throw hinav::ConfigInvalid("--actor required unless --naive-forward");
  }

  std::vector<hinav::RunRecord> records;
  hinav::EvalReport report =
      hinav::evaluate_hybrid(world, factory, actor_ptr, cells, opts, &records);
  std::ofstream f(out + "/report.json", std::ios::binary);
  f << hinav::report_to_json(report);
  hinav::save_runs_jsonl(records, out + "/runs.jsonl");
  echo_config(cfg, out);
  std::cout << "hybrid eval: success " << report.success_rate << " over "
            << report.runs << " runs, path ratio " << report.mean_path_ratio
            << "\n";
  return 0;
}

int cmd_export_traj(const Common& common, const std::string& layout_path,
                    const std::string& graph_path, const std::string& runs_path,
                    const std::vector<std::string>& obstacle_specs,
                    bool no_nodes) {
  hinav::Config cfg = load_config(common);
  std::string out = require_out(common);
  hinav::Layout layout = hinav::load_layout(layout_path, cfg.env.cell_size);
  std::optional<hinav::PanoGraph> graph;
  if (!graph_path.empty()) graph = hinav::load_graph(graph_path);
  auto runs = hinav::load_runs_jsonl(runs_path);
  hinav::SvgOptions svg_opts;
  svg_opts.draw_nodes = !no_nodes;
  hinav::write_trajectory_svg(out + "/trajectories.svg", layout,
                              parse_obstacles(obstacle_specs),
                              graph ? &*graph : nullptr, runs, svg_opts);
  std::cout << "wrote " << out << "/trajectories.svg (" << runs.size()
            << " runs)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hierarchical graph navigation toolkit"};
  app.require_subcommand(1);
  std::function<int()> action;

  Common common;

  auto* gen = app.add_subcommand("gen-map", "generate a synthetic layout and capture poses");
  auto gen_kind = std::make_shared<std::string>("building");
  gen->add_option("--kind", *gen_kind, "corridor | building | tworoutes | hallways");
  add_common(gen, common);
  gen->callback([&, gen_kind] { action = [&, gen_kind] { return cmd_gen_map(common, *gen_kind); }; });

  auto* bg = app.add_subcommand("build-graph", "build the capture graph from poses");
  auto bg_poses = std::make_shared<std::string>();
  auto bg_layout = std::make_shared<std::string>();
  bg->add_option("--poses", *bg_poses, "pose csv")->required();
  bg->add_option("--layout", *bg_layout, "layout file; prunes edges crossing walls");
  add_common(bg, common);
  bg->callback([&, bg_poses, bg_layout] {
    action = [&, bg_poses, bg_layout] {
      return cmd_build_graph(common, *bg_poses, *bg_layout);
    };
  });

  auto* pp = app.add_subcommand("plan-paths", "shortest supervision paths to targets");
  auto pp_graph = std::make_shared<std::string>();
  auto pp_targets = std::make_shared<std::string>();
  auto pp_nodes = std::make_shared<std::string>();
  auto pp_excl = std::make_shared<std::vector<std::string>>();
  pp->add_option("--graph", *pp_graph, "graph json")->required();
  pp->add_option("--targets", *pp_targets, "target cell ranks, comma separated");
  pp->add_option("--target-nodes", *pp_nodes, "target node ids, comma separated");
  pp->add_option("--exclude-rect", *pp_excl,
                 "x0,y0,x1,y1 region whose nodes the planner must avoid");
  add_common(pp, common);
  pp->callback([&, pp_graph, pp_targets, pp_nodes, pp_excl] {
    action = [&, pp_graph, pp_targets, pp_nodes, pp_excl] {
      return cmd_plan_paths(common, *pp_graph, *pp_targets, *pp_nodes, *pp_excl);
    };
  });

  auto* th = app.add_subcommand("train-high", "train the high-level value net");
  auto th_graph = std::make_shared<std::string>();
  auto th_paths = std::make_shared<std::string>();
  auto th_collectors = std::make_shared<int>(0);
  th->add_option("--graph", *th_graph, "graph json")->required();
  th->add_option("--paths", *th_paths, "supervision paths jsonl")->required();
  th->add_option("--collectors", *th_collectors,
                 "collector worker count (1 = bit-reproducible)");
  add_common(th, common);
  th->callback([&, th_graph, th_paths, th_collectors] {
    action = [&, th_graph, th_paths, th_collectors] {
      return cmd_train_high(common, *th_graph, *th_paths, *th_collectors);
    };
  });

  auto* tl = app.add_subcommand("train-low", "train the low-level twist policy");
  auto tl_layout = std::make_shared<std::string>();
  auto tl_kind = std::make_shared<std::string>();
  tl->add_option("--layout", *tl_layout, "layout file");
  tl->add_option("--map-kind", *tl_kind, "generate this map kind instead");
  add_common(tl, common);
  tl->callback([&, tl_layout, tl_kind] {
    action = [&, tl_layout, tl_kind] {
      return cmd_train_low(common, *tl_layout, *tl_kind);
    };
  });

  auto* eg = app.add_subcommand("eval-graph", "evaluate on the graph alone");
  auto eg_graph = std::make_shared<std::string>();
  auto eg_ckpt = std::make_shared<std::string>();
  auto eg_paths = std::make_shared<std::string>();
  auto eg_oracle = std::make_shared<bool>(false);
  auto eg_targets = std::make_shared<std::string>();
  auto eg_nodes = std::make_shared<std::string>();
  eg->add_option("--graph", *eg_graph, "graph json")->required();
  eg->add_option("--checkpoint", *eg_ckpt, "value net checkpoint");
  eg->add_option("--paths", *eg_paths, "paths jsonl (oracle policy)");
  eg->add_flag("--oracle", *eg_oracle, "use the supervision oracle policy");
  eg->add_option("--targets", *eg_targets, "target cell ranks");
  eg->add_option("--target-nodes", *eg_nodes, "target node ids");
  add_common(eg, common);
  eg->callback([&, eg_graph, eg_ckpt, eg_paths, eg_oracle, eg_targets, eg_nodes] {
    action = [&, eg_graph, eg_ckpt, eg_paths, eg_oracle, eg_targets, eg_nodes] {
      return cmd_eval_graph(common, *eg_graph, *eg_ckpt, *eg_paths, *eg_oracle,
                            *eg_targets, *eg_nodes);
    };
  });

  auto* eh = app.add_subcommand("eval-hier", "evaluate the full hierarchy in the maze");
  auto eh_layout = std::make_shared<std::string>();
  auto eh_graph = std::make_shared<std::string>();
  auto eh_ckpt = std::make_shared<std::string>();
  auto eh_paths = std::make_shared<std::string>();
  auto eh_oracle = std::make_shared<bool>(false);
  auto eh_actor = std::make_shared<std::string>();
  auto eh_naive = std::make_shared<bool>(false);
  auto eh_obstacles = std::make_shared<std::vector<std::string>>();
  auto eh_targets = std::make_shared<std::string>();
  auto eh_nodes = std::make_shared<std::string>();
  eh->add_option("--layout", *eh_layout, "layout file")->required();
  eh->add_option("--graph", *eh_graph, "graph json")->required();
  eh->add_option("--checkpoint", *eh_ckpt, "value net checkpoint");
  eh->add_option("--paths", *eh_paths, "paths jsonl (oracle policy)");
  eh->add_flag("--oracle", *eh_oracle, "use the supervision oracle policy");
  eh->add_option("--actor", *eh_actor, "low-level actor checkpoint");
  eh->add_flag("--naive-forward", *eh_naive, "open-loop forward executor");
  eh->add_option("--obstacle", *eh_obstacles, "disc obstacle x,y,r");
  eh->add_option("--targets", *eh_targets, "target cell ranks");
  eh->add_option("--target-nodes", *eh_nodes, "target node ids");
  add_common(eh, common);
  eh->callback([&, eh_layout, eh_graph, eh_ckpt, eh_paths, eh_oracle, eh_actor,
                eh_naive, eh_obstacles, eh_targets, eh_nodes] {
    action = [&, eh_layout, eh_graph, eh_ckpt, eh_paths, eh_oracle, eh_actor,
              eh_naive, eh_obstacles, eh_targets, eh_nodes] {
      return cmd_eval_hier(common, *eh_layout, *eh_graph, *eh_ckpt, *eh_paths,
                           *eh_oracle, *eh_actor, *eh_naive, *eh_obstacles,
                           *eh_targets, *eh_nodes);
    };
  });

  auto* et = app.add_subcommand("export-traj", "render logged runs as an SVG overlay");
  auto et_layout = std::make_shared<std::string>();
  auto et_graph = std::make_shared<std::string>();
  auto et_runs = std::make_shared<std::string>();
  auto et_obstacles = std::make_shared<std::vector<std::string>>();
  auto et_no_nodes = std::make_shared<bool>(false);
  et->add_option("--layout", *et_layout, "layout file")->required();
  et->add_option("--graph", *et_graph, "graph json (draws capture nodes)");
  et->add_option("--runs", *et_runs, "runs jsonl")->required();
  et->add_option("--obstacle", *et_obstacles, "disc obstacle x,y,r");
  et->add_flag("--no-nodes", *et_no_nodes, "skip capture node markers");
  add_common(et, common);
  et->callback([&, et_layout, et_graph, et_runs, et_obstacles, et_no_nodes] {
    action = [&, et_layout, et_graph, et_runs, et_obstacles, et_no_nodes] {
      return cmd_export_traj(common, *et_layout, *et_graph, *et_runs,
                             *et_obstacles, *et_no_nodes);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  try {
    return action ? action() : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
