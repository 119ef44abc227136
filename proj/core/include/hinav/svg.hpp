#pragma once

#include <string>
#include <vector>

#include "hinav/graph_env.hpp"
#include "hinav/hierarchy.hpp"
#include "hinav/maze.hpp"

namespace hinav {

struct SvgOptions {
  double pixels_per_meter = 40.0;
  bool draw_nodes = true;
};

// Renders the layout, obstacles, capture nodes, and run trajectories colored
// by outcome into a standalone SVG document.
std::string trajectory_svg(const Layout& layout,
                           const std::vector<DiscObstacle>& obstacles,
                           const PanoGraph* graph,
                           const std::vector<RunRecord>& runs,
                           const SvgOptions& opts = {});

void write_trajectory_svg(const std::string& path, const Layout& layout,
                          const std::vector<DiscObstacle>& obstacles,
                          const PanoGraph* graph,
                          const std::vector<RunRecord>& runs,
                          const SvgOptions& opts = {});

}  // namespace hinav
