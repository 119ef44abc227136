#include "hinav/svg.hpp"

#include <charconv>
#include <fstream>

#include "hinav/errors.hpp"

namespace hinav {

namespace {

std::string num(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v,
                                 std::chars_format::fixed, 2);
  return std::string(buf, ptr);
}

const char* run_color(RunResult r) {
  switch (r) {
    case RunResult::Success: return "#2e8b46";
    case RunResult::Collision: return "#c23b22";
    case RunResult::Timeout: return "#d99a2b";
    case RunResult::Lost: return "#7a4fb0";
  }
  return "#000000";
}

}  // namespace

std::string trajectory_svg(const Layout& layout,
                           const std::vector<DiscObstacle>& obstacles,
                           const PanoGraph* graph,
                           const std::vector<RunRecord>& runs,
                           const SvgOptions& opts) {
  const double ppm = opts.pixels_per_meter;
  const double W = layout.width() * ppm;
  const double H = layout.height() * ppm;
  auto px = [&](double x) { return x * ppm; };
  auto py = [&](double y) { return H - y * ppm; };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(W) +
         "\" height=\"" + num(H) + "\" viewBox=\"0 0 " + num(W) + " " + num(H) +
         "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"#fafafa\"/>\n";

  const double cs = layout.cell_size * ppm;
  for (int row = 0; row < layout.rows; ++row)
    for (int col = 0; col < layout.cols; ++col) {
      if (layout.at(row, col) != Cell::Wall) continue;
      svg += "<rect x=\"" + num(col * cs) + "\" y=\"" +
             num(H - (row + 1) * cs) + "\" width=\"" + num(cs) +
             "\" height=\"" + num(cs) + "\" fill=\"#444444\"/>\n";
    }

  for (const DiscObstacle& d : obstacles)
    svg += "<circle cx=\"" + num(px(d.center.x)) + "\" cy=\"" +
           num(py(d.center.y)) + "\" r=\"" + num(d.radius * ppm) +
           "\" fill=\"#8a8a8a\"/>\n";

  if (graph && opts.draw_nodes)
    for (const CaptureNode& n : graph->nodes)
      svg += "<circle cx=\"" + num(px(n.pose.x)) + "\" cy=\"" +
             num(py(n.pose.y)) + "\" r=\"2\" fill=\"#5b8dd9\"/>\n";

  for (const RunRecord& run : runs) {
    std::string points = num(px(run.start.x)) + "," + num(py(run.start.y));
    for (const RunStep& s : run.steps) {
      points += " " + num(px(s.pose.x)) + "," + num(py(s.pose.y));
      for (const Pose2D& p : s.trace)
        points += " " + num(px(p.x)) + "," + num(py(p.y));
    }
    points += " " + num(px(run.final_pose.x)) + "," + num(py(run.final_pose.y));
    svg += std::string("<polyline fill=\"none\" stroke=\"") +
           run_color(run.result) +
           "\" stroke-width=\"2\" stroke-opacity=\"0.7\" points=\"" + points +
           "\"/>\n";
    svg += "<circle cx=\"" + num(px(run.start.x)) + "\" cy=\"" +
           num(py(run.start.y)) + "\" r=\"4\" fill=\"none\" stroke=\"" +
           run_color(run.result) + "\" stroke-width=\"1.5\"/>\n";
    if (graph && !graph->grid.empty()) {
      Vec2 goal = graph->grid.cell_center(run.target_cell);
      svg += "<circle cx=\"" + num(px(goal.x)) + "\" cy=\"" +
             num(py(goal.y)) + "\" r=\"5\" fill=\"none\" stroke=\"#111111\" "
             "stroke-width=\"1.5\" stroke-dasharray=\"3 2\"/>\n";
    }
  }
  svg += "</svg>\n";
  return svg;
}

void write_trajectory_svg(const std::string& path, const Layout& layout,
                          const std::vector<DiscObstacle>& obstacles,
                          const PanoGraph* graph,
                          const std::vector<RunRecord>& runs,
                          const SvgOptions& opts) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f << trajectory_svg(layout, obstacles, graph, runs, opts);
}

}  // namespace hinav
