#pragma once

#include <string>
#include <vector>

#include "hinav/geometry.hpp"

namespace hinav {

enum class Cell : unsigned char { Free = 0, Wall = 1 };

// Occupancy layout. Row 0 is the bottom of the world; world coordinates are
// right-handed with the origin at the layout's lower-left corner.
struct Layout {
  int rows = 0;
  int cols = 0;
  double cell_size = 0.5;
  std::vector<Cell> cells;  // row-major, rows * cols

  Cell at(int row, int col) const { return cells[row * cols + col]; }
  bool wall_at(int row, int col) const {
    if (row < 0 || row >= rows || col < 0 || col >= cols) return true;
    return at(row, col) == Cell::Wall;
  }
  bool wall_at_point(const Vec2& p) const;
  double width() const { return cols * cell_size; }
  double height() const { return rows * cell_size; }
  int free_count() const;
};

// Parses an ASCII grid of '#' (wall) and '.' (free). The first text line is
// the top row of the world. Boundary must be closed.
Layout parse_layout(const std::string& text, double cell_size = 0.5);
Layout load_layout(const std::string& path, double cell_size = 0.5);
std::string layout_to_text(const Layout& layout);
void save_layout(const Layout& layout, const std::string& path);

struct RobotState {
  Pose2D pose;
  double radius = 0.3;
  double wheel_base = 0.4;
  double wheel_radius = 0.1;
};

inline constexpr double kOmegaMax = 5.0;  // rad/s per wheel

struct Twist {
  double omega_left = 0.0;
  double omega_right = 0.0;
};

Twist clamp_twist(const Twist& t, double omega_max = kOmegaMax);

double linear_velocity(const RobotState& state, const Twist& a);
double angular_velocity(const RobotState& state, const Twist& a);

struct LidarSpec {
  int num_beams = 64;
  double fov = 220.0 * kPi / 180.0;
  double max_range = 5.0;
};

struct LidarScan {
  std::vector<double> ranges;
};

struct DiscObstacle {
  Vec2 center;
  double radius = 0.0;
};

// First-hit range per beam via exact DDA grid traversal, clipped to
// max_range. Beam i points at pose.theta - fov/2 + i * fov/(num_beams-1).
LidarScan raycast(const Layout& layout, const Pose2D& pose,
                  const LidarSpec& spec = {});

// Single-ray variants; obstacles shorten hits where a disc is struck first.
double cast_ray(const Layout& layout, const Vec2& origin, double bearing,
                double max_range);
double ray_disc_distance(const Vec2& origin, double bearing,
                         const DiscObstacle& disc);

// Layout plus inserted disc obstacles; the sensing/collision world of the
// hierarchical runs.
struct MazeWorld {
  Layout layout;
  std::vector<DiscObstacle> obstacles;

  LidarScan scan(const Pose2D& pose, const LidarSpec& spec = {}) const;
  bool in_collision(const RobotState& state) const;
};

// Exact unicycle arc integration of the differential drive; straight-line
// when the angular rate is negligible. No dynamics.
RobotState step_dynamics(const RobotState& state, const Twist& a, double dt);

inline constexpr double kDefaultDt = 0.1;

// Disc-vs-wall-cells test, exact disc/axis-aligned-rectangle distance.
bool collision(const Layout& layout, const RobotState& state);
double distance_to_walls(const Layout& layout, const Vec2& p);

// Integrates one control interval with substepping so the robot cannot
// tunnel through a wall cell, and reports whether the swept disc collided.
struct StepResult {
  RobotState state;
  bool collided = false;
};
StepResult step_with_collision(const MazeWorld& world, const RobotState& state,
                               const Twist& a, double dt = kDefaultDt);

inline constexpr double kRewardLinear = 1.0;
inline constexpr double kRewardAngular = -0.8;
inline constexpr double kRewardCollision = -1.0;

// Forward-progress reward: fast and straight when collision-free, a flat
// penalty otherwise.
double reward(const RobotState& prev, const Twist& a, const RobotState& next,
              bool collided);

}  // namespace hinav
