#include "hinav/graph_env.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "hinav/errors.hpp"
#include "hinav/rng.hpp"

namespace hinav {

using json = nlohmann::ordered_json;

const char* to_string(HighAction a) {
  switch (a) {
    case HighAction::Forward: return "forward";
    case HighAction::TurnLeft: return "turn_left";
    case HighAction::TurnRight: return "turn_right";
  }
  return "?";
}

int GridSpec::flat_cell_of(const Vec2& p) const {
  int col = static_cast<int>(std::floor((p.x - origin.x) / cell_size.x));
  int row = static_cast<int>(std::floor((p.y - origin.y) / cell_size.y));
  col = std::clamp(col, 0, cols - 1);
  row = std::clamp(row, 0, rows - 1);
  return row * cols + col;
}

int GridSpec::rank_of_flat(int flat) const {
  auto it = std::lower_bound(valid_cells.begin(), valid_cells.end(), flat);
  if (it == valid_cells.end() || *it != flat) return -1;
  return static_cast<int>(it - valid_cells.begin());
}

Vec2 GridSpec::cell_center(int rank) const {
  int flat = valid_cells.at(rank);
  int row = flat / cols;
  int col = flat % cols;
  return {origin.x + (col + 0.5) * cell_size.x,
          origin.y + (row + 0.5) * cell_size.y};
}

int PanoGraph::nearest_orient(double theta) const {
  double slot = 2.0 * kPi / num_orientations;
  int o = static_cast<int>(std::lround(theta / slot));
  o %= num_orientations;
  if (o < 0) o += num_orientations;
  return o;
}

PanoGraph build_graph(const std::vector<Pose2D>& poses,
                      const BuildGraphOptions& opts) {
  if (poses.empty()) throw EmptyPoseList("build_graph: empty pose list");
  if (!(opts.forward_match_radius < opts.forward_step))
    throw NavError("build_graph: match radius must be below the forward step");

  PanoGraph g;
  g.num_orientations = opts.num_orientations;
  g.forward_step = opts.forward_step;
  g.forward_match_radius = opts.forward_match_radius;
  g.forward_cone_deg = opts.forward_cone_deg;
  g.descriptor_dim = opts.descriptor_dim;
  g.nodes.reserve(poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    CaptureNode n;
    n.id = static_cast<int>(i);
    n.pose = poses[i];
    n.descriptor_seed = splitmix64(opts.descriptor_seed_base + i + 1);
    g.nodes.push_back(n);
  }

  for (const CaptureNode& a : g.nodes) {
    for (const CaptureNode& b : g.nodes) {
      if (a.id < b.id && distance(a.pose.position(), b.pose.position()) < 1e-9)
        throw NavError("build_graph: duplicate capture position at node " +
                       std::to_string(b.id));
    }
  }

  double cone = opts.forward_cone_deg * kPi / 180.0;
  for (const CaptureNode& n : g.nodes) {
    for (int o = 0; o < g.num_orientations; ++o) {
      double phi = o * 2.0 * kPi / g.num_orientations;
      Vec2 nominal = n.pose.position() +
                     Vec2{std::cos(phi), std::sin(phi)} * opts.forward_step;
      int best = -1;
      double best_dist = std::numeric_limits<double>::infinity();
      for (const CaptureNode& m : g.nodes) {
        if (m.id == n.id) continue;
        Vec2 delta = m.pose.position() - n.pose.position();
        if (std::abs(normalize_angle(std::atan2(delta.y, delta.x) - phi)) >
            cone)
          continue;
        double d = distance(m.pose.position(), nominal);
        if (d < best_dist - 1e-12 ||
            (std::abs(d - best_dist) <= 1e-12 && m.id < best)) {
          best = m.id;
          best_dist = d;
        }
      }
      if (best >= 0 && best_dist <= opts.forward_match_radius)
        g.forward_edge[n.id * g.num_orientations + o] = best;
    }
  }
  return g;
}

std::optional<ViewState> try_step(const PanoGraph& graph, const ViewState& s,
                                  HighAction a) {
  int n = graph.num_orientations;
  switch (a) {
    case HighAction::TurnLeft:
      return ViewState{s.node_id, (s.orient + 1) % n};
    case HighAction::TurnRight:
      return ViewState{s.node_id, (s.orient - 1 + n) % n};
    case HighAction::Forward: {
      auto target = graph.forward_target(s);
      if (!target) return std::nullopt;
      return ViewState{*target, s.orient};
    }
  }
  return std::nullopt;
}

ViewState step(const PanoGraph& graph, const ViewState& s, HighAction a) {
  auto next = try_step(graph, s, a);
  if (!next)
    throw ForwardBlocked("step: no forward edge at node " +
                         std::to_string(s.node_id) + " orient " +
                         std::to_string(s.orient));
  return *next;
}

ViewState step_or_stay(const PanoGraph& graph, const ViewState& s, HighAction a) {
  auto next = try_step(graph, s, a);
  return next ? *next : s;
}

namespace {

// Descriptor stream tags. The descriptor stands in for a learned image
// embedding and is split into three blocks:
//   place:   per-node code, each entry visible only from some orientations
//            (a view crop shows part of the surroundings)
//   heading: per-orientation code shared across nodes
//   detail:  independent per-(node, orientation) variation
constexpr std::uint64_t kTagPlace = 0xA1;
constexpr std::uint64_t kTagVisible = 0xA2;
constexpr std::uint64_t kTagHeading = 0xA3;
constexpr std::uint64_t kTagDetail = 0xA4;
constexpr double kPlaceVisibility = 0.6;

}  // namespace

std::vector<double> view_descriptor(const PanoGraph& graph, const ViewState& s) {
  if (!graph.valid_state(s)) throw NavError("view_descriptor: invalid state");
  const CaptureNode& node = graph.nodes[s.node_id];
  int dim = graph.descriptor_dim;
  int place = dim / 2;
  int heading = dim / 4;
  std::vector<double> d(dim);
  int i = 0;
  for (int j = 0; j < place; ++j, ++i) {
    double vis = hash_unit(mix_keys(kTagVisible, node.descriptor_seed,
                                    static_cast<std::uint64_t>(s.orient) * 4096 + j));
    d[i] = vis < kPlaceVisibility
               ? hash_symmetric(mix_keys(kTagPlace, node.descriptor_seed, j))
               : 0.0;
  }
  for (int j = 0; j < heading; ++j, ++i)
    d[i] = hash_symmetric(mix_keys(kTagHeading, s.orient, j));
  for (; i < dim; ++i)
    d[i] = hash_symmetric(mix_keys(kTagDetail, node.descriptor_seed,
                                   static_cast<std::uint64_t>(s.orient) * 4096 + i));
  return d;
}

Observation observe(const PanoGraph& graph, const ViewState& s,
                    std::uint64_t rng_seed, double noise_level) {
  Observation obs;
  obs.descriptor = view_descriptor(graph, s);
  if (noise_level > 0.0) {
    auto rng = make_rng(rng_seed);
    std::uniform_real_distribution<double> noise(-noise_level, noise_level);
    for (double& v : obs.descriptor) v += noise(rng);
  }
  obs.proximity = proximity_bit(graph, s);
  return obs;
}

int proximity_bit(const PanoGraph& graph, const ViewState& s) {
  if (!graph.valid_state(s)) throw NavError("proximity_bit: invalid state");
  if (graph.forward_target(s)) return 0;
  const CaptureNode& n = graph.nodes[s.node_id];
  double phi = s.orient * 2.0 * kPi / graph.num_orientations;
  Vec2 facing{std::cos(phi), std::sin(phi)};
  for (const CaptureNode& m : graph.nodes) {
    if (m.id == n.id) continue;
    Vec2 delta = m.pose.position() - n.pose.position();
    if (delta.dot(facing) > 0.0 && delta.norm() < kProximityRange) return 1;
  }
  return 0;
}

GridSpec make_grid(const PanoGraph& graph, int rows, int cols) {
  if (graph.nodes.empty()) throw NavError("make_grid: empty graph");
  if (rows < 1 || cols < 1) throw NavError("make_grid: bad dims");
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const CaptureNode& n : graph.nodes) {
    xmin = std::min(xmin, n.pose.x);
    xmax = std::max(xmax, n.pose.x);
    ymin = std::min(ymin, n.pose.y);
    ymax = std::max(ymax, n.pose.y);
  }
  GridSpec grid;
  grid.rows = rows;
  grid.cols = cols;
  grid.origin = {xmin, ymin};
  // Sub-micron extents are treated as a point cluster: one cell spans it.
  double ex = xmax - xmin, ey = ymax - ymin;
  grid.cell_size = {ex > 1e-6 ? ex / cols : 1.0, ey > 1e-6 ? ey / rows : 1.0};
  std::vector<int> cells;
  for (const CaptureNode& n : graph.nodes)
    cells.push_back(grid.flat_cell_of(n.pose.position()));
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  grid.valid_cells = std::move(cells);
  return grid;
}

std::vector<ViewState> states_in_cell(const PanoGraph& graph, int cell_rank) {
  if (graph.grid.empty()) throw NavError("states_in_cell: graph has no grid");
  if (cell_rank < 0 || cell_rank >= graph.grid.num_valid())
    throw NavError("states_in_cell: cell rank out of range");
  std::vector<ViewState> out;
  for (const CaptureNode& n : graph.nodes) {
    if (graph.grid.rank_of(n.pose.position()) != cell_rank) continue;
    for (int o = 0; o < graph.num_orientations; ++o) out.push_back({n.id, o});
  }
  return out;
}

int node_cell_rank(const PanoGraph& graph, int node_id) {
  return graph.grid.rank_of(graph.nodes.at(node_id).pose.position());
}

TargetSpec sample_target_image(const PanoGraph& graph, int cell_rank,
                               bool two_views, std::uint64_t rng_seed) {
  auto states = states_in_cell(graph, cell_rank);
  if (states.empty()) throw EmptyCell("sample_target_image: no states in cell");
  auto rng = make_rng(mix_keys(0xB5, rng_seed, cell_rank));
  std::uniform_int_distribution<std::size_t> pick(0, states.size() - 1);
  ViewState s = states[pick(rng)];
  TargetSpec spec;
  spec.kind = TargetSpec::Kind::ImageEmbed;
  spec.cell_rank = cell_rank;
  spec.descriptors.push_back(view_descriptor(graph, s));
  if (two_views) {
    ViewState opposite{s.node_id,
                       (s.orient + graph.num_orientations / 2) % graph.num_orientations};
    spec.descriptors.push_back(view_descriptor(graph, opposite));
  }
  return spec;
}

std::string graph_to_json(const PanoGraph& graph) {
  json j;
  j["magic"] = kGraphMagic;
  j["version"] = 1;
  j["num_orientations"] = graph.num_orientations;
  j["forward_step"] = graph.forward_step;
  j["forward_match_radius"] = graph.forward_match_radius;
  j["forward_cone_deg"] = graph.forward_cone_deg;
  j["descriptor_dim"] = graph.descriptor_dim;
  json nodes = json::array();
  for (const CaptureNode& n : graph.nodes)
    nodes.push_back({{"id", n.id},
                     {"x", n.pose.x},
                     {"y", n.pose.y},
                     {"seed", n.descriptor_seed}});
  j["nodes"] = std::move(nodes);
  std::vector<std::pair<int, int>> edges(graph.forward_edge.begin(),
                                         graph.forward_edge.end());
  std::sort(edges.begin(), edges.end());
  json je = json::array();
  for (auto& [key, target] : edges)
    je.push_back({key / graph.num_orientations, key % graph.num_orientations,
                  target});
  j["edges"] = std::move(je);
  if (!graph.grid.empty()) {
    j["grid"] = {{"origin", {graph.grid.origin.x, graph.grid.origin.y}},
                 {"cell_size", {graph.grid.cell_size.x, graph.grid.cell_size.y}},
                 {"rows", graph.grid.rows},
                 {"cols", graph.grid.cols},
                 {"valid_cells", graph.grid.valid_cells}};
  }
  return j.dump(2) + "\n";
}

PanoGraph graph_from_json(const std::string& text) {
  json j = json::parse(text);
  if (j.value("magic", "") != kGraphMagic)
    throw IoError("graph file: bad magic");
  if (j.value("version", 0) != 1)
    throw IoError("graph file: unsupported version");
  PanoGraph g;
  g.num_orientations = j.at("num_orientations").get<int>();
  g.forward_step = j.at("forward_step").get<double>();
  g.forward_match_radius = j.at("forward_match_radius").get<double>();
  g.forward_cone_deg = j.at("forward_cone_deg").get<double>();
  g.descriptor_dim = j.at("descriptor_dim").get<int>();
  for (const auto& n : j.at("nodes")) {
    CaptureNode node;
    node.id = n.at("id").get<int>();
    node.pose = Pose2D(n.at("x").get<double>(), n.at("y").get<double>());
    node.descriptor_seed = n.at("seed").get<std::uint64_t>();
    g.nodes.push_back(node);
  }
  for (const auto& e : j.at("edges")) {
    int node = e.at(0).get<int>(), orient = e.at(1).get<int>(),
        target = e.at(2).get<int>();
    g.forward_edge[node * g.num_orientations + orient] = target;
  }
  if (j.contains("grid")) {
    const auto& jg = j.at("grid");
    g.grid.origin = {jg.at("origin").at(0).get<double>(),
                     jg.at("origin").at(1).get<double>()};
    g.grid.cell_size = {jg.at("cell_size").at(0).get<double>(),
                        jg.at("cell_size").at(1).get<double>()};
    g.grid.rows = jg.at("rows").get<int>();
    g.grid.cols = jg.at("cols").get<int>();
    g.grid.valid_cells = jg.at("valid_cells").get<std::vector<int>>();
  }
  return g;
}

void save_graph(const PanoGraph& graph, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f << graph_to_json(graph);
}

PanoGraph load_graph(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return graph_from_json(ss.str());
}

namespace {

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

std::vector<Pose2D> load_poses_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read " + path);
  std::string line;
  if (!std::getline(f, line)) throw IoError("pose csv: empty file");
  auto strip = [](std::string s) {
    s.erase(std::remove_if(s.begin(), s.end(),
                           [](char c) { return c == ' ' || c == '\r'; }),
            s.end());
    return s;
  };
  if (strip(line) != "x,y") throw IoError("pose csv: expected header x,y");
  std::vector<Pose2D> poses;
  int lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    std::string s = strip(line);
    if (s.empty()) continue;
    auto comma = s.find(',');
    if (comma == std::string::npos)
      throw IoError("pose csv: bad row at line " + std::to_string(lineno));
    try {
      poses.emplace_back(std::stod(s.substr(0, comma)),
                         std::stod(s.substr(comma + 1)));
    } catch (const std::exception&) {
      throw IoError("pose csv: bad number at line " + std::to_string(lineno));
    }
  }
  return poses;
}

void save_poses_csv(const std::vector<Pose2D>& poses, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f << "x,y\n";
  for (const Pose2D& p : poses)
    f << format_double(p.x) << "," << format_double(p.y) << "\n";
}

}  // namespace hinav
