#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "hinav/maze.hpp"
#include "hinav/nn.hpp"

namespace hinav {

// The last three range scans stacked into a [beams, 3, 1] image; column
// order oldest first (x-2, x-1, x).
class ScanStack {
 public:
  ScanStack() = default;
  explicit ScanStack(const LidarScan& initial);

  void push(const LidarScan& scan);
  const Tensor& tensor() const { return data_; }
  int num_beams() const { return data_.shape.empty() ? 0 : data_.shape[0]; }

 private:
  Tensor data_;
};

struct ActorConfig {
  int num_beams = 64;
  double omega_max = kOmegaMax;
  double range_scale = 5.0;  // scans divide by this before the conv trunk
};

// Twist policy over stacked scans: two strided convs, two hidden fc layers
// and a tanh head scaled to the wheel-speed box.
class Actor {
 public:
  Actor() = default;
  Actor(const ActorConfig& cfg, std::uint64_t seed);

  struct Cache {
    Conv2D::Cache conv1, conv2;
    Dense::Cache fc1, fc2, out;
    Tensor scaled_input;
    std::vector<double> flat;
    std::array<double, 2> pre_tanh{};
  };

  Twist forward(const ScanStack& stack, Cache* cache = nullptr) const;
  // dout is the gradient w.r.t. the two wheel speeds.
  void backward(const Cache& cache, const std::array<double, 2>& dout,
                GradMap& grads) const;

  const ActorConfig& config() const { return cfg_; }
  ParamSet& params() { return ps_; }
  const ParamSet& params() const { return ps_; }

  void save(const std::string& path) const;
  static Actor load(const std::string& path);

 private:
  void bind_layers();

  ActorConfig cfg_;
  ParamSet ps_;
  Conv2D conv1_, conv2_;
  Dense fc1_, fc2_, out_;
};

// Q approximator: the same conv trunk, trunk features concatenated with the
// action, then a two-layer perceptron to a scalar.
class Critic {
 public:
  Critic() = default;
  Critic(const ActorConfig& cfg, std::uint64_t seed);

  struct Cache {
    Conv2D::Cache conv1, conv2;
    Dense::Cache fc1, fc2, out;
    Tensor scaled_input;
    std::vector<double> joint;  // trunk features + action
  };

  double forward(const ScanStack& stack, const Twist& a,
                 Cache* cache = nullptr) const;
  // Returns dQ/daction; parameter gradients accumulate into grads.
  std::array<double, 2> backward(const Cache& cache, double dq,
                                 GradMap& grads) const;

  const ActorConfig& config() const { return cfg_; }
  ParamSet& params() { return ps_; }
  const ParamSet& params() const { return ps_; }

  void save(const std::string& path) const;
  static Critic load(const std::string& path);

 private:
  void bind_layers();

  ActorConfig cfg_;
  ParamSet ps_;
  Conv2D conv1_, conv2_;
  Dense fc1_, fc2_, out_;
};

// target <- (1 - tau) * target + tau * online, element-wise.
void soft_update(ParamSet& target, const ParamSet& online, double tau);

using ScanPtr = std::shared_ptr<const std::vector<double>>;

// Scans are shared between consecutive transitions, so buffer memory grows
// with unique environment steps rather than stack copies.
struct Transition {
  std::array<ScanPtr, 3> scans;
  Twist action;
  double reward = 0.0;
  std::array<ScanPtr, 3> next_scans;
  bool done = false;  // collision or episode cap
};

class TransitionBuffer {
 public:
  explicit TransitionBuffer(std::size_t capacity) : capacity_(capacity) {}

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  const Transition& sample(std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> items_;
};

ScanStack stack_from_scans(const std::array<ScanPtr, 3>& scans);

struct DdpgConfig {
  LidarSpec lidar;
  double omega_max = kOmegaMax;
  double robot_radius = 0.3;
  double wheel_base = 0.4;
  double wheel_radius = 0.1;
  double dt = kDefaultDt;

  int env_steps = 30000;
  int episode_max_steps = 200;
  int warmup_steps = 1000;
  int update_every = 1;
  int batch_size = 256;
  double lr = 1e-4;
  double tau = 0.01;
  double gamma = 0.99;
  double noise_start = 0.4;
  double noise_end = 0.05;
  std::size_t buffer_capacity = 100000;
  double grad_clip = 5.0;

  // Free-standing discs scattered afresh each episode teach the policy to
  // steer around clutter, not just walls. Zero keeps the map bare.
  int scatter_obstacles = 0;
  double scatter_radius = 0.2;

  std::uint64_t seed = 0;
  std::string out_dir;  // metrics.csv + actor.ckpt/critic.ckpt when non-empty
};

struct DdpgResult {
  Actor actor;
  Critic critic;
  int episodes = 0;
  double final_collision_rate = 0.0;
  double final_mean_return = 0.0;
};

// Continuous Q-learning with target networks, a transition replay buffer and
// annealed Gaussian exploration noise; episodes start at random collision-free
// poses and end on collision or the step cap.
DdpgResult ddpg_train(const Layout& layout, const DdpgConfig& cfg);

enum class ForwardOutcome { Done, Collision, Timeout };
const char* to_string(ForwardOutcome o);

struct ForwardExecOptions {
  LidarSpec lidar;
  double dt = kDefaultDt;
  int max_steps = 50;
};

struct ForwardResult {
  RobotState state;
  ForwardOutcome outcome = ForwardOutcome::Done;
  double arc_length = 0.0;
  std::vector<Pose2D> trace;  // pose after every control step
};

// Runs the actor closed-loop until the odometric arc length covers the
// requested distance, a collision occurs, or the step cap is hit.
ForwardResult execute_forward(const Actor& actor, const MazeWorld& world,
                              const RobotState& state, double distance = 1.0,
                              const ForwardExecOptions& opts = {});

// Open-loop baseline: equal wheel speeds straight ahead, no sensing.
ForwardResult execute_forward_openloop(const MazeWorld& world,
                                       const RobotState& state,
                                       double distance = 1.0,
                                       double cruise_speed = 0.35,
                                       const ForwardExecOptions& opts = {});

// Uniform collision-free pose in the world, heading uniform in [-pi, pi).
Pose2D sample_free_pose(const MazeWorld& world, std::mt19937_64& rng,
                        double robot_radius, double clearance = 0.0);

}  // namespace hinav
