#include "hinav/mapgen.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "hinav/errors.hpp"
#include "hinav/hierarchy.hpp"
#include "hinav/rng.hpp"

namespace hinav {

namespace {

struct Builder {
  int rows, cols;
  double cell_size;
  std::vector<Cell> cells;

  Builder(int rows_, int cols_, double cell_size_ = 0.5)
      : rows(rows_), cols(cols_), cell_size(cell_size_),
        cells(rows_ * cols_, Cell::Wall) {}

  // Carve a free rectangle, clamped away from the boundary ring.
  void carve(int row0, int row1, int col0, int col1) {
    row0 = std::max(row0, 1);
    col0 = std::max(col0, 1);
    row1 = std::min(row1, rows - 2);
    col1 = std::min(col1, cols - 2);
    for (int r = row0; r <= row1; ++r)
      for (int c = col0; c <= col1; ++c) cells[r * cols + c] = Cell::Free;
  }

  Layout layout() const {
    Layout l;
    l.rows = rows;
    l.cols = cols;
    l.cell_size = cell_size;
    l.cells = cells;
    return l;
  }
};

// Capture traversal builder that skips duplicate positions.
struct PoseList {
  std::vector<Pose2D> poses;
  std::set<std::pair<long long, long long>> seen;

  void add(double x, double y) {
    auto key = std::make_pair(std::llround(x * 1000), std::llround(y * 1000));
    if (!seen.insert(key).second) return;
    poses.emplace_back(x, y);
  }

  void line_x(double y, double x0, double x1, double step = 0.5) {
    for (double x = x0; x <= x1 + 1e-9; x += step) add(x, y);
  }

  void line_y(double x, double y0, double y1, double step = 0.5) {
    for (double y = y0; y <= y1 + 1e-9; y += step) add(x, y);
  }

  int index_of(double x, double y) const {
    for (std::size_t i = 0; i < poses.size(); ++i)
      if (std::abs(poses[i].x - x) < 1e-9 && std::abs(poses[i].y - y) < 1e-9)
        return static_cast<int>(i);
    throw NavError("mapgen: pose lookup failed");
  }
};

}  // namespace

GeneratedMap generate_corridor(double length_m, double width_m,
                               double cell_size) {
  int free_cols = static_cast<int>(std::lround(length_m / cell_size));
  int free_rows = static_cast<int>(std::lround(width_m / cell_size));
  if (free_cols < 2 || free_rows < 2)
    throw ConfigInvalid("corridor: too small");
  Builder b(free_rows + 2, free_cols + 2, cell_size);
  b.carve(1, free_rows, 1, free_cols);

  GeneratedMap map;
  map.layout = b.layout();
  double mid = (free_rows + 2) * cell_size / 2.0;
  PoseList pl;
  pl.line_x(mid, 1.0, (free_cols + 1) * cell_size - 1.0);
  map.poses = std::move(pl.poses);
  map.target_nodes = {static_cast<int>(map.poses.size()) - 1};
  return map;
}

GeneratedMap generate_building(std::uint64_t seed) {
  // Comb shape: a 17 m main corridor with three 6 m branches reaching up.
  Builder b(18, 36);
  b.carve(1, 4, 1, 34);
  int branch_cols[3] = {3, 15, 28};
  if (seed != 0)
    for (int i = 0; i < 3; ++i)
      branch_cols[i] += static_cast<int>(splitmix64(mix_keys(seed, i)) % 3);
  for (int col : branch_cols) b.carve(5, 16, col, col + 3);

  GeneratedMap map;
  map.layout = b.layout();
  PoseList pl;
  pl.line_x(1.5, 1.0, 17.0);
  for (int col : branch_cols) pl.line_y((col + 2) * 0.5, 2.0, 8.0);
  map.poses = pl.poses;
  for (int col : branch_cols)
    map.target_nodes.push_back(pl.index_of((col + 2) * 0.5, 8.0));
  return map;
}

GeneratedMap generate_two_routes() {
  // One straight bottom corridor from start to target, plus an optional
  // detour loop over the top. The bottom middle is route B (shorter), the
  // top corridor is route A.
  Builder b(18, 44);
  b.carve(1, 4, 1, 42);    // bottom: stem, route B, stem
  b.carve(5, 12, 5, 8);    // left riser
  b.carve(5, 12, 37, 40);  // right riser
  b.carve(13, 16, 5, 40);  // top: route A

  GeneratedMap map;
  map.layout = b.layout();
  PoseList pl;
  pl.line_x(1.5, 1.0, 21.0);   // bottom line
  pl.line_y(3.5, 2.0, 7.5);    // left riser (x = 3.5)
  pl.line_y(19.5, 2.0, 7.5);   // right riser
  pl.line_x(7.5, 4.0, 19.0);   // top line
  map.poses = pl.poses;
  map.target_nodes = {pl.index_of(21.0, 1.5)};
  map.regions.push_back({"route_b", {5.0, 0.5}, {18.0, 2.5}});
  map.regions.push_back({"route_a", {5.0, 6.5}, {18.0, 8.5}});
  return map;
}

GeneratedMap generate_hallways(std::uint64_t seed) {
  // Hallway loop with a center room and a few seeded pockets; used as the
  // low-level training ground.
  Builder b(22, 22);
  b.carve(2, 5, 1, 20);    // bottom hallway
  b.carve(16, 19, 1, 20);  // top hallway
  b.carve(2, 19, 2, 5);    // left hallway
  b.carve(2, 19, 16, 19);  // right hallway
  b.carve(8, 13, 7, 14);   // center room
  b.carve(5, 16, 9, 12);   // center connector
  auto rng = make_rng(mix_keys(0x4A11, seed));
  std::uniform_int_distribution<int> pr(6, 14);
  std::uniform_int_distribution<int> side(0, 1);
  for (int i = 0; i < 3; ++i) {
    int at = pr(rng);
    if (side(rng))
      b.carve(at, at + 1, 5, 7);  // pocket off the left hallway
    else
      b.carve(at, at + 1, 14, 16);
  }

  GeneratedMap map;
  map.layout = b.layout();
  map.poses = sample_capture_poses(map.layout);
  return map;
}

GeneratedMap generate_map(const std::string& kind, std::uint64_t seed) {
  if (kind == "corridor") return generate_corridor();
  if (kind == "building") return generate_building(seed);
  if (kind == "tworoutes" || kind == "two_routes") return generate_two_routes();
  if (kind == "hallways") return generate_hallways(seed);
  throw ConfigInvalid("unknown map kind: " + kind);
}

}  // namespace hinav
