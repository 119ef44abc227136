#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hinav/maze.hpp"

namespace hinav {

// A generated fixture: layout plus a capture traversal over its free space,
// with suggested target nodes and named regions (used by the two-route map).
struct GeneratedMap {
  Layout layout;
  std::vector<Pose2D> poses;       // capture traversal, 0.5 m spacing
  std::vector<int> target_nodes;   // pose indices suggested as targets
  struct Region {
    std::string name;
    Vec2 min;
    Vec2 max;
  };
  std::vector<Region> regions;
};

// Straight corridor, default 30 m x 2 m, captures along the centerline.
GeneratedMap generate_corridor(double length_m = 30.0, double width_m = 2.0,
                               double cell_size = 0.5);

// Office-like comb: a main corridor with three branch corridors, captures
// along every centerline; targets at the three branch ends. Roughly 60-70
// capture nodes at the default scale.
GeneratedMap generate_building(std::uint64_t seed = 0);

// Ring with two parallel routes between a start stem and a target stem; the
// lower route is shorter. Regions "route_a" (upper) and "route_b" (lower)
// mark the corridor interiors.
GeneratedMap generate_two_routes();

// Irregular hallway-and-room maze for low-level training.
GeneratedMap generate_hallways(std::uint64_t seed = 0);

GeneratedMap generate_map(const std::string& kind, std::uint64_t seed = 0);

}  // namespace hinav
