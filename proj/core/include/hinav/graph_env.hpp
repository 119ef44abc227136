#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hinav/geometry.hpp"

namespace hinav {

// One capture location. Orientation lives on the state, not the node.
struct CaptureNode {
  int id = 0;
  Pose2D pose;
  std::uint64_t descriptor_seed = 0;
};

// State of the high-level policy: a capture node plus a discrete facing.
struct ViewState {
  int node_id = 0;
  int orient = 0;

  bool operator==(const ViewState&) const = default;
};

enum class HighAction { Forward, TurnLeft, TurnRight };
inline constexpr int kNumHighActions = 3;
inline constexpr HighAction kHighActions[kNumHighActions] = {
    HighAction::Forward, HighAction::TurnLeft, HighAction::TurnRight};

const char* to_string(HighAction a);

// Regular grid over the node bounding box. Cells holding at least one node
// are "valid" and indexed row-major by rank; ranks are the location labels.
struct GridSpec {
  Vec2 origin;
  Vec2 cell_size{1.0, 1.0};
  int rows = 0;
  int cols = 0;
  std::vector<int> valid_cells;  // flat indices row*cols+col, ascending

  bool empty() const { return valid_cells.empty(); }
  int num_valid() const { return static_cast<int>(valid_cells.size()); }
  int flat_cell_of(const Vec2& p) const;
  // Rank into valid_cells, or -1 when the cell holds no node.
  int rank_of_flat(int flat) const;
  int rank_of(const Vec2& p) const { return rank_of_flat(flat_cell_of(p)); }
  Vec2 cell_center(int rank) const;
};

// Target given either as a location label or as one/two view descriptors.
struct TargetSpec {
  enum class Kind { OneHot, ImageEmbed };
  Kind kind = Kind::OneHot;
  int cell_rank = 0;                              // OneHot
  std::vector<std::vector<double>> descriptors;   // ImageEmbed, 1 or 2
};

struct Observation {
  std::vector<double> descriptor;
  int proximity = 0;  // 1 iff an obstacle is within the proximity range
};

// Semi-metric graph of capture poses. Immutable after construction apart
// from attaching a grid; safe to share across threads.
struct PanoGraph {
  std::vector<CaptureNode> nodes;
  int num_orientations = 24;
  double forward_step = 1.0;
  double forward_match_radius = 0.7;
  double forward_cone_deg = 20.0;
  int descriptor_dim = 128;
  GridSpec grid;
  // (node_id, orient) -> node_id; key = node_id * num_orientations + orient.
  std::unordered_map<int, int> forward_edge;

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  int num_states() const { return num_nodes() * num_orientations; }
  int state_index(const ViewState& s) const {
    return s.node_id * num_orientations + s.orient;
  }
  ViewState state_of_index(int idx) const {
    return {idx / num_orientations, idx % num_orientations};
  }
  bool valid_state(const ViewState& s) const {
    return s.node_id >= 0 && s.node_id < num_nodes() && s.orient >= 0 &&
           s.orient < num_orientations;
  }
  double orient_angle(int orient) const {
    return normalize_angle(orient * 2.0 * kPi / num_orientations);
  }
  std::optional<int> forward_target(const ViewState& s) const {
    auto it = forward_edge.find(state_index(s));
    if (it == forward_edge.end()) return std::nullopt;
    return it->second;
  }
  // Orientation index closest to the given angle.
  int nearest_orient(double theta) const;
};

struct BuildGraphOptions {
  int num_orientations = 24;
  double forward_step = 1.0;
  double forward_match_radius = 0.7;
  // A capture only matches a forward view if its bearing from the node stays
  // within this cone of the facing; a capture at the right range but well off
  // the travel direction does not look like "one step ahead".
  double forward_cone_deg = 20.0;
  int descriptor_dim = 128;
  std::uint64_t descriptor_seed_base = 0;  // per-node seeds derive from this
};

// Connects capture poses into the high-level action graph. For every node and
// orientation the nominal forward point is forward_step ahead; the nearest
// other node within forward_match_radius of it, bearing within
// forward_cone_deg of the facing (ties to the lowest id), becomes the
// forward target.
PanoGraph build_graph(const std::vector<Pose2D>& poses,
                      const BuildGraphOptions& opts = {});

// Applies a high-level action. Forward with no edge throws ForwardBlocked;
// use try_step where blocked forwards should read as stay-in-place.
ViewState step(const PanoGraph& graph, const ViewState& s, HighAction a);
std::optional<ViewState> try_step(const PanoGraph& graph, const ViewState& s,
                                  HighAction a);

// Blocked forwards resolve to s itself.
ViewState step_or_stay(const PanoGraph& graph, const ViewState& s, HighAction a);

// Synthetic view descriptor for a state, plus uniform noise of the given
// amplitude drawn from rng_seed. Pure function of (graph, s, rng_seed).
Observation observe(const PanoGraph& graph, const ViewState& s,
                    std::uint64_t rng_seed, double noise_level = 0.05);

// Noise-free descriptor only.
std::vector<double> view_descriptor(const PanoGraph& graph, const ViewState& s);

inline constexpr double kProximityRange = 0.3;

// Graph-side surrogate: 1 iff the state has no forward edge and some other
// node sits within kProximityRange in the facing half-plane.
int proximity_bit(const PanoGraph& graph, const ViewState& s);

// Partitions the node bounding box into rows x cols cells.
GridSpec make_grid(const PanoGraph& graph, int rows, int cols);

// Uniformly samples a state whose node lies in the given cell and returns its
// noise-free descriptor; with two_views, adds the view facing the opposite
// direction at the same node.
TargetSpec sample_target_image(const PanoGraph& graph, int cell_rank,
                               bool two_views, std::uint64_t rng_seed);

// All states whose node falls in the cell.
std::vector<ViewState> states_in_cell(const PanoGraph& graph, int cell_rank);
int node_cell_rank(const PanoGraph& graph, int node_id);

// Versioned JSON container, magic NAVGRAPH1. Round-trips bit-exactly.
inline constexpr const char* kGraphMagic = "NAVGRAPH1";
std::string graph_to_json(const PanoGraph& graph);
PanoGraph graph_from_json(const std::string& text);
void save_graph(const PanoGraph& graph, const std::string& path);
PanoGraph load_graph(const std::string& path);

// Pose CSV with header "x,y" (meters); heading is not stored for captures.
std::vector<Pose2D> load_poses_csv(const std::string& path);
void save_poses_csv(const std::vector<Pose2D>& poses, const std::string& path);

}  // namespace hinav
