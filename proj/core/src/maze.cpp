#include "hinav/maze.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "hinav/errors.hpp"

namespace hinav {

bool Layout::wall_at_point(const Vec2& p) const {
  int col = static_cast<int>(std::floor(p.x / cell_size));
  int row = static_cast<int>(std::floor(p.y / cell_size));
  return wall_at(row, col);
}

int Layout::free_count() const {
  int n = 0;
  for (Cell c : cells)
    if (c == Cell::Free) ++n;
  return n;
}

Layout parse_layout(const std::string& text, double cell_size) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && lines.empty()) continue;
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.empty()) throw NonRectangular("layout: no rows");
  std::size_t cols = lines[0].size();
  for (const std::string& l : lines)
    if (l.size() != cols) throw NonRectangular("layout: ragged rows");

  Layout lay;
  lay.rows = static_cast<int>(lines.size());
  lay.cols = static_cast<int>(cols);
  lay.cell_size = cell_size;
  lay.cells.resize(lay.rows * lay.cols, Cell::Free);
  // First text line is the top of the world, so text row k lands on
  // layout row rows-1-k.
  for (int k = 0; k < lay.rows; ++k) {
    int row = lay.rows - 1 - k;
    for (int col = 0; col < lay.cols; ++col) {
      char c = lines[k][col];
      if (c == '#')
        lay.cells[row * lay.cols + col] = Cell::Wall;
      else if (c != '.')
        throw IoError(std::string("layout: bad character '") + c + "'");
    }
  }
  for (int row = 0; row < lay.rows; ++row)
    for (int col = 0; col < lay.cols; ++col) {
      bool edge = row == 0 || row == lay.rows - 1 || col == 0 ||
                  col == lay.cols - 1;
      if (edge && lay.at(row, col) != Cell::Wall)
        throw OpenBoundary("layout: boundary must be walls");
    }
  return lay;
}

Layout load_layout(const std::string& path, double cell_size) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_layout(ss.str(), cell_size);
}

std::string layout_to_text(const Layout& layout) {
  std::string out;
  for (int row = layout.rows - 1; row >= 0; --row) {
    for (int col = 0; col < layout.cols; ++col)
      out += layout.at(row, col) == Cell::Wall ? '#' : '.';
    out += '\n';
  }
  return out;
}

void save_layout(const Layout& layout, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f << layout_to_text(layout);
}

Twist clamp_twist(const Twist& t, double omega_max) {
  return {std::clamp(t.omega_left, -omega_max, omega_max),
          std::clamp(t.omega_right, -omega_max, omega_max)};
}

double linear_velocity(const RobotState& state, const Twist& a) {
  return state.wheel_radius * (a.omega_left + a.omega_right) / 2.0;
}

double angular_velocity(const RobotState& state, const Twist& a) {
  return state.wheel_radius * (a.omega_right - a.omega_left) /
         state.wheel_base;
}

double ray_disc_distance(const Vec2& origin, double bearing,
                         const DiscObstacle& disc) {
  Vec2 d{std::cos(bearing), std::sin(bearing)};
  Vec2 oc = origin - disc.center;
  double b = d.dot(oc);
  double c = oc.dot(oc) - disc.radius * disc.radius;
  double disc_b = b * b - c;
  if (disc_b < 0.0) return std::numeric_limits<double>::infinity();
  double root = std::sqrt(disc_b);
  double t1 = -b - root;
  if (t1 >= 0.0) return t1;
  double t2 = -b + root;
  if (t2 >= 0.0) return 0.0;  // origin inside the disc
  return std::numeric_limits<double>::infinity();
}

double cast_ray(const Layout& layout, const Vec2& origin, double bearing,
                double max_range) {
  if (layout.wall_at_point(origin))
    throw PoseInsideWall("cast_ray: origin inside a wall cell");
  const double cs = layout.cell_size;
  Vec2 dir{std::cos(bearing), std::sin(bearing)};
  int col = static_cast<int>(std::floor(origin.x / cs));
  int row = static_cast<int>(std::floor(origin.y / cs));
  int step_x = dir.x > 0 ? 1 : -1;
  int step_y = dir.y > 0 ? 1 : -1;
  double inf = std::numeric_limits<double>::infinity();
  // Distance along the ray to the next vertical / horizontal cell boundary.
  double t_max_x = inf, t_delta_x = inf;
  if (std::abs(dir.x) > 1e-15) {
    double next = (dir.x > 0 ? (col + 1) * cs : col * cs);
    t_max_x = (next - origin.x) / dir.x;
    t_delta_x = cs / std::abs(dir.x);
  }
  double t_max_y = inf, t_delta_y = inf;
  if (std::abs(dir.y) > 1e-15) {
    double next = (dir.y > 0 ? (row + 1) * cs : row * cs);
    t_max_y = (next - origin.y) / dir.y;
    t_delta_y = cs / std::abs(dir.y);
  }
  double t = 0.0;
  while (t <= max_range) {
    if (t_max_x < t_max_y) {
      t = t_max_x;
      t_max_x += t_delta_x;
      col += step_x;
    } else {
      t = t_max_y;
      t_max_y += t_delta_y;
      row += step_y;
    }
    if (t > max_range) break;
    if (layout.wall_at(row, col)) return t;
  }
  return max_range;
}

LidarScan raycast(const Layout& layout, const Pose2D& pose,
                  const LidarSpec& spec) {
  LidarScan scan;
  scan.ranges.resize(spec.num_beams);
  for (int i = 0; i < spec.num_beams; ++i) {
    double frac = spec.num_beams > 1
                      ? static_cast<double>(i) / (spec.num_beams - 1)
                      : 0.5;
    double bearing = pose.theta - spec.fov / 2.0 + frac * spec.fov;
    scan.ranges[i] = cast_ray(layout, pose.position(), bearing, spec.max_range);
  }
  return scan;
}

LidarScan MazeWorld::scan(const Pose2D& pose, const LidarSpec& spec) const {
  LidarScan s;
  s.ranges.resize(spec.num_beams);
  for (int i = 0; i < spec.num_beams; ++i) {
    double frac = spec.num_beams > 1
                      ? static_cast<double>(i) / (spec.num_beams - 1)
                      : 0.5;
    double bearing = pose.theta - spec.fov / 2.0 + frac * spec.fov;
    double r = cast_ray(layout, pose.position(), bearing, spec.max_range);
    for (const DiscObstacle& d : obstacles)
      r = std::min(r, ray_disc_distance(pose.position(), bearing, d));
    s.ranges[i] = std::min(r, spec.max_range);
  }
  return s;
}

bool MazeWorld::in_collision(const RobotState& state) const {
  if (collision(layout, state)) return true;
  for (const DiscObstacle& d : obstacles)
    if (distance(state.pose.position(), d.center) < state.radius + d.radius)
      return true;
  return false;
}

RobotState step_dynamics(const RobotState& state, const Twist& a, double dt) {
  double v = linear_velocity(state, a);
  double w = angular_velocity(state, a);
  RobotState next = state;
  if (std::abs(w) < 1e-9) {
    next.pose.x += v * std::cos(state.pose.theta) * dt;
    next.pose.y += v * std::sin(state.pose.theta) * dt;
    next.pose.theta = normalize_angle(state.pose.theta + w * dt);
    return next;
  }
  // Exact arc: the robot moves on a circle of radius v/w.
  double theta1 = state.pose.theta + w * dt;
  double r = v / w;
  next.pose.x += r * (std::sin(theta1) - std::sin(state.pose.theta));
  next.pose.y += -r * (std::cos(theta1) - std::cos(state.pose.theta));
  next.pose.theta = normalize_angle(theta1);
  return next;
}

double distance_to_walls(const Layout& layout, const Vec2& p) {
  double cs = layout.cell_size;
  double best = std::numeric_limits<double>::infinity();
  for (int row = 0; row < layout.rows; ++row)
    for (int col = 0; col < layout.cols; ++col) {
      if (layout.at(row, col) != Cell::Wall) continue;
      double x0 = col * cs, x1 = (col + 1) * cs;
      double y0 = row * cs, y1 = (row + 1) * cs;
      double dx = std::max({x0 - p.x, 0.0, p.x - x1});
      double dy = std::max({y0 - p.y, 0.0, p.y - y1});
      best = std::min(best, std::hypot(dx, dy));
    }
  return best;
}

bool collision(const Layout& layout, const RobotState& state) {
  const Vec2 p = state.pose.position();
  const double r = state.radius;
  const double cs = layout.cell_size;
  int col0 = static_cast<int>(std::floor((p.x - r) / cs));
  int col1 = static_cast<int>(std::floor((p.x + r) / cs));
  int row0 = static_cast<int>(std::floor((p.y - r) / cs));
  int row1 = static_cast<int>(std::floor((p.y + r) / cs));
  for (int row = row0; row <= row1; ++row)
    for (int col = col0; col <= col1; ++col) {
      if (!layout.wall_at(row, col)) continue;
      double x0 = col * cs, x1 = (col + 1) * cs;
      double y0 = row * cs, y1 = (row + 1) * cs;
      double dx = std::max({x0 - p.x, 0.0, p.x - x1});
      double dy = std::max({y0 - p.y, 0.0, p.y - y1});
      if (dx * dx + dy * dy < r * r) return true;
    }
  return false;
}

StepResult step_with_collision(const MazeWorld& world, const RobotState& state,
                               const Twist& a, double dt) {
  double v = std::abs(linear_velocity(state, a));
  double travel = v * dt;
  int substeps = std::max(1, static_cast<int>(
                                 std::ceil(travel / (state.radius / 2.0))));
  RobotState cur = state;
  for (int i = 0; i < substeps; ++i) {
    cur = step_dynamics(cur, a, dt / substeps);
    if (world.in_collision(cur)) return {cur, true};
  }
  return {cur, false};
}

double reward(const RobotState& prev, const Twist& a, const RobotState& next,
              bool collided) {
  (void)next;
  if (collided) return kRewardCollision;
  return kRewardLinear * linear_velocity(prev, a) +
         kRewardAngular * std::abs(angular_velocity(prev, a));
}

}  // namespace hinav
