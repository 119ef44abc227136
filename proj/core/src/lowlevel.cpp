#include "hinav/lowlevel.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>

#include "hinav/errors.hpp"
#include "hinav/rng.hpp"

namespace hinav {

ScanStack::ScanStack(const LidarScan& initial) {
  int beams = static_cast<int>(initial.ranges.size());
  data_ = Tensor({beams, 3, 1});
  for (int b = 0; b < beams; ++b)
    for (int t = 0; t < 3; ++t) data_.data[b * 3 + t] = initial.ranges[b];
}

void ScanStack::push(const LidarScan& scan) {
  int beams = num_beams();
  if (static_cast<int>(scan.ranges.size()) != beams)
    throw ShapeMismatch("scan stack: beam count changed");
  for (int b = 0; b < beams; ++b) {
    data_.data[b * 3 + 0] = data_.data[b * 3 + 1];
    data_.data[b * 3 + 1] = data_.data[b * 3 + 2];
    data_.data[b * 3 + 2] = scan.ranges[b];
  }
}

namespace {

struct TrunkDims {
  int h1, h2, flat;
};

TrunkDims trunk_dims(int beams) {
  TrunkDims d;
  d.h1 = (beams - 7) / 5 + 1;
  d.h2 = (d.h1 - 5) / 3 + 1;
  if (d.h1 < 1 || d.h2 < 1)
    throw ConfigInvalid("conv trunk: too few beams");
  d.flat = d.h2 * 20;
  return d;
}

Tensor scale_stack(const Tensor& t, double range_scale) {
  Tensor s = t;
  for (double& v : s.data) v /= range_scale;
  return s;
}

}  // namespace

Actor::Actor(const ActorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  TrunkDims d = trunk_dims(cfg.num_beams);
  auto rng = make_rng(mix_keys(0xAC70, seed));
  conv1_ = Conv2D(ps_, "conv1", 7, 3, 1, 16, 5, rng);
  conv2_ = Conv2D(ps_, "conv2", 5, 1, 16, 20, 3, rng);
  fc1_ = Dense(ps_, "fc1", d.flat, 20, Activation::ReLU, rng);
  fc2_ = Dense(ps_, "fc2", 20, 10, Activation::ReLU, rng);
  out_ = Dense(ps_, "out", 10, 2, Activation::Linear, rng);
}

void Actor::bind_layers() {
  conv1_ = Conv2D(ps_, "conv1", 7, 3, 1, 16, 5);
  conv2_ = Conv2D(ps_, "conv2", 5, 1, 16, 20, 3);
  fc1_ = Dense(ps_, "fc1", Activation::ReLU);
  fc2_ = Dense(ps_, "fc2", Activation::ReLU);
  out_ = Dense(ps_, "out", Activation::Linear);
}

Twist Actor::forward(const ScanStack& stack, Cache* cache) const {
  if (stack.num_beams() != cfg_.num_beams)
    throw ShapeMismatch("actor: beam count mismatch");
  Cache local;
  Cache& c = cache ? *cache : local;
  c.scaled_input = scale_stack(stack.tensor(), cfg_.range_scale);
  Tensor f1 = conv1_.forward(ps_, c.scaled_input, &c.conv1);
  Tensor f2 = conv2_.forward(ps_, f1, &c.conv2);
  c.flat = f2.data;
  auto h1 = fc1_.forward(ps_, c.flat, &c.fc1);
  auto h2 = fc2_.forward(ps_, h1, &c.fc2);
  auto pre = out_.forward(ps_, h2, &c.out);
  c.pre_tanh = {pre[0], pre[1]};
  return {std::tanh(pre[0]) * cfg_.omega_max,
          std::tanh(pre[1]) * cfg_.omega_max};
}

void Actor::backward(const Cache& cache, const std::array<double, 2>& dout,
                     GradMap& grads) const {
  std::vector<double> dpre(2);
  for (int i = 0; i < 2; ++i) {
    double t = std::tanh(cache.pre_tanh[i]);
    dpre[i] = dout[i] * cfg_.omega_max * (1.0 - t * t);
  }
  auto dh2 = out_.backward(ps_, cache.out, dpre, grads);
  auto dh1 = fc2_.backward(ps_, cache.fc2, dh2, grads);
  auto dflat = fc1_.backward(ps_, cache.fc1, dh1, grads);
  TrunkDims d = trunk_dims(cfg_.num_beams);
  Tensor df2({d.h2, 1, 20}, std::move(dflat));
  Tensor df1 = conv2_.backward(ps_, cache.conv2, df2, grads);
  conv1_.backward(ps_, cache.conv1, df1, grads);
}

void Actor::save(const std::string& path) const {
  auto tensors = ps_.checkpoint_tensors();
  tensors.emplace("meta.actor",
                  Tensor({3}, {static_cast<double>(cfg_.num_beams),
                               cfg_.omega_max, cfg_.range_scale}));
  write_checkpoint(tensors, path);
}

Actor Actor::load(const std::string& path) {
  auto tensors = read_checkpoint(path);
  auto mit = tensors.find("meta.actor");
  if (mit == tensors.end() || mit->second.numel() != 3)
    throw IoError("checkpoint: missing actor metadata");
  Actor a;
  a.cfg_.num_beams = static_cast<int>(mit->second.data[0]);
  a.cfg_.omega_max = mit->second.data[1];
  a.cfg_.range_scale = mit->second.data[2];
  tensors.erase(mit);
  a.ps_ = ParamSet::from_checkpoint_tensors(tensors);
  a.bind_layers();
  return a;
}

Critic::Critic(const ActorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  TrunkDims d = trunk_dims(cfg.num_beams);
  auto rng = make_rng(mix_keys(0xC217, seed));
  conv1_ = Conv2D(ps_, "conv1", 7, 3, 1, 16, 5, rng);
  conv2_ = Conv2D(ps_, "conv2", 5, 1, 16, 20, 3, rng);
  fc1_ = Dense(ps_, "fc1", d.flat + 2, 10, Activation::ReLU, rng);
  fc2_ = Dense(ps_, "fc2", 10, 8, Activation::ReLU, rng);
  out_ = Dense(ps_, "out", 8, 1, Activation::Linear, rng);
}

void Critic::bind_layers() {
  conv1_ = Conv2D(ps_, "conv1", 7, 3, 1, 16, 5);
  conv2_ = Conv2D(ps_, "conv2", 5, 1, 16, 20, 3);
  fc1_ = Dense(ps_, "fc1", Activation::ReLU);
  fc2_ = Dense(ps_, "fc2", Activation::ReLU);
  out_ = Dense(ps_, "out", Activation::Linear);
}

double Critic::forward(const ScanStack& stack, const Twist& a,
                       Cache* cache) const {
  if (stack.num_beams() != cfg_.num_beams)
    throw ShapeMismatch("critic: beam count mismatch");
  Cache local;
  Cache& c = cache ? *cache : local;
  c.scaled_input = scale_stack(stack.tensor(), cfg_.range_scale);
  Tensor f1 = conv1_.forward(ps_, c.scaled_input, &c.conv1);
  Tensor f2 = conv2_.forward(ps_, f1, &c.conv2);
  c.joint = f2.data;
  // Actions join the trunk features normalized to the unit box.
  c.joint.push_back(a.omega_left / cfg_.omega_max);
  c.joint.push_back(a.omega_right / cfg_.omega_max);
  auto h1 = fc1_.forward(ps_, c.joint, &c.fc1);
  auto h2 = fc2_.forward(ps_, h1, &c.fc2);
  return out_.forward(ps_, h2, &c.out)[0];
}

std::array<double, 2> Critic::backward(const Cache& cache, double dq,
                                       GradMap& grads) const {
  auto dh2 = out_.backward(ps_, cache.out, {dq}, grads);
  auto dh1 = fc2_.backward(ps_, cache.fc2, dh2, grads);
  auto djoint = fc1_.backward(ps_, cache.fc1, dh1, grads);
  TrunkDims d = trunk_dims(cfg_.num_beams);
  std::array<double, 2> da = {djoint[d.flat] / cfg_.omega_max,
                              djoint[d.flat + 1] / cfg_.omega_max};
  djoint.resize(d.flat);
  Tensor df2({d.h2, 1, 20}, std::move(djoint));
  Tensor df1 = conv2_.backward(ps_, cache.conv2, df2, grads);
  conv1_.backward(ps_, cache.conv1, df1, grads);
  return da;
}

void Critic::save(const std::string& path) const {
  auto tensors = ps_.checkpoint_tensors();
  tensors.emplace("meta.critic",
                  Tensor({3}, {static_cast<double>(cfg_.num_beams),
                               cfg_.omega_max, cfg_.range_scale}));
  write_checkpoint(tensors, path);
}

Critic Critic::load(const std::string& path) {
  auto tensors = read_checkpoint(path);
  auto mit = tensors.find("meta.critic");
  if (mit == tensors.end() || mit->second.numel() != 3)
    throw IoError("checkpoint: missing critic metadata");
  Critic c;
  c.cfg_.num_beams = static_cast<int>(mit->second.data[0]);
  c.cfg_.omega_max = mit->second.data[1];
  c.cfg_.range_scale = mit->second.data[2];
  tensors.erase(mit);
  c.ps_ = ParamSet::from_checkpoint_tensors(tensors);
  c.bind_layers();
  return c;
}

void soft_update(ParamSet& target, const ParamSet& online, double tau) {
  for (auto& [name, p] : target.params()) {
    const Tensor& o = online.at(name);
    if (!p.same_shape(o)) throw ShapeMismatch("soft update: " + name);
    for (int i = 0; i < p.numel(); ++i)
      p.data[i] = (1.0 - tau) * p.data[i] + tau * o.data[i];
  }
}

void TransitionBuffer::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[next_] = std::move(t);
    next_ = (next_ + 1) % capacity_;
  }
}

const Transition& TransitionBuffer::sample(std::mt19937_64& rng) const {
  if (items_.empty()) throw NavError("transition buffer: empty");
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  return items_[pick(rng)];
}

ScanStack stack_from_scans(const std::array<ScanPtr, 3>& scans) {
  LidarScan first;
  first.ranges = *scans[0];
  ScanStack stack(first);
  LidarScan s;
  s.ranges = *scans[1];
  stack.push(s);
  s.ranges = *scans[2];
  stack.push(s);
  return stack;
}

Pose2D sample_free_pose(const MazeWorld& world, std::mt19937_64& rng,
                        double robot_radius, double clearance) {
  std::uniform_real_distribution<double> ux(0.0, world.layout.width());
  std::uniform_real_distribution<double> uy(0.0, world.layout.height());
  std::uniform_real_distribution<double> ut(-kPi, kPi);
  for (int attempt = 0; attempt < 100000; ++attempt) {
    RobotState s;
    s.pose = Pose2D(ux(rng), uy(rng), ut(rng));
    s.radius = robot_radius + clearance;
    if (!world.in_collision(s)) return s.pose;
  }
  throw NavError("sample_free_pose: no free pose found");
}

namespace {

ScanPtr make_scan_ptr(const MazeWorld& world, const Pose2D& pose,
                      const LidarSpec& spec) {
  return std::make_shared<const std::vector<double>>(
      world.scan(pose, spec).ranges);
}

struct DdpgUpdater {
  const DdpgConfig& cfg;
  Actor& actor;
  Critic& critic;
  Actor& actor_target;
  Critic& critic_target;
  const TransitionBuffer& buffer;

  double update(std::mt19937_64& rng) {
    const int B = cfg.batch_size;
    std::vector<const Transition*> batch(B);
    for (int i = 0; i < B; ++i) batch[i] = &buffer.sample(rng);

    GradMap cgrads;
    double closs = 0.0;
    for (const Transition* tr : batch) {
      ScanStack stack = stack_from_scans(tr->scans);
      Critic::Cache cc;
      double q = critic.forward(stack, tr->action, &cc);
      double y = tr->reward;
      if (!tr->done) {
        ScanStack next = stack_from_scans(tr->next_scans);
        Twist a_next = actor_target.forward(next);
        y += cfg.gamma * critic_target.forward(next, a_next);
      }
      double diff = q - y;
      closs += diff * diff / B;
      critic.backward(cc, 2.0 * diff / B, cgrads);
    }
    if (cfg.grad_clip > 0.0) cgrads.clip_global_norm(cfg.grad_clip);
    critic.params().adam_step(cgrads, cfg.lr);

    GradMap agrads;
    GradMap scratch;
    for (const Transition* tr : batch) {
      ScanStack stack = stack_from_scans(tr->scans);
      Actor::Cache ac;
      Twist a = actor.forward(stack, &ac);
      Critic::Cache cc;
      critic.forward(stack, a, &cc);
      scratch.clear();
      auto dqda = critic.backward(cc, 1.0, scratch);
      actor.backward(ac, {-dqda[0] / B, -dqda[1] / B}, agrads);
    }
    if (cfg.grad_clip > 0.0) agrads.clip_global_norm(cfg.grad_clip);
    actor.params().adam_step(agrads, cfg.lr);

    soft_update(actor_target.params(), actor.params(), cfg.tau);
    soft_update(critic_target.params(), critic.params(), cfg.tau);
    return closs;
  }
};

}  // namespace

DdpgResult ddpg_train(const Layout& layout, const DdpgConfig& cfg) {
  if (cfg.env_steps < 1 || cfg.episode_max_steps < 1 || cfg.batch_size < 1 ||
      cfg.update_every < 1 || cfg.buffer_capacity < 1 || !(cfg.lr > 0.0) ||
      !(cfg.tau > 0.0) || cfg.gamma < 0.0 || cfg.gamma > 1.0)
    throw ConfigInvalid("ddpg_train: bad config");
  MazeWorld world{layout, {}};
  ActorConfig acfg{cfg.lidar.num_beams, cfg.omega_max, cfg.lidar.max_range};
  Actor actor(acfg, mix_keys(cfg.seed, 1));
  Critic critic(acfg, mix_keys(cfg.seed, 2));
  Actor actor_target = actor;
  Critic critic_target = critic;
  TransitionBuffer buffer(cfg.buffer_capacity);
  auto rng = make_rng(mix_keys(0xDD96, cfg.seed));

  std::ofstream metrics;
  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    metrics.open(cfg.out_dir + "/metrics.csv", std::ios::binary);
    if (!metrics) throw IoError("cannot write metrics.csv");
    metrics << "episode,return,collision_rate\n";
  }

  DdpgUpdater updater{cfg, actor, critic, actor_target, critic_target, buffer};
  std::uniform_real_distribution<double> uact(-cfg.omega_max, cfg.omega_max);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto sigma_at = [&](int step) {
    double f = std::min(1.0, static_cast<double>(step) / cfg.env_steps);
    return cfg.noise_start + f * (cfg.noise_end - cfg.noise_start);
  };

  std::deque<double> window_return;
  std::deque<bool> window_collide;
  DdpgResult result;
  int env_step = 0;
  while (env_step < cfg.env_steps) {
    MazeWorld ep_world = world;
    for (int k = 0; k < cfg.scatter_obstacles; ++k) {
      Pose2D p = sample_free_pose(world, rng, cfg.scatter_radius, 0.05);
      ep_world.obstacles.push_back({{p.x, p.y}, cfg.scatter_radius});
    }
    RobotState state;
    state.pose = sample_free_pose(ep_world, rng, cfg.robot_radius, 0.05);
    state.radius = cfg.robot_radius;
    state.wheel_base = cfg.wheel_base;
    state.wheel_radius = cfg.wheel_radius;
    ScanPtr s0 = make_scan_ptr(ep_world, state.pose, cfg.lidar);
    std::array<ScanPtr, 3> scans = {s0, s0, s0};
    double ep_return = 0.0;
    bool ep_collided = false;
    for (int t = 0; t < cfg.episode_max_steps && env_step < cfg.env_steps;
         ++t) {
      ++env_step;
      Twist a;
      if (env_step <= cfg.warmup_steps) {
        a = {uact(rng), uact(rng)};
      } else {
        a = actor.forward(stack_from_scans(scans));
        double sigma = sigma_at(env_step) * cfg.omega_max;
        a.omega_left += sigma * gauss(rng);
        a.omega_right += sigma * gauss(rng);
        a = clamp_twist(a, cfg.omega_max);
      }
      RobotState prev = state;
      StepResult res = step_with_collision(ep_world, state, a, cfg.dt);
      double r = reward(prev, a, res.state, res.collided);
      bool done = res.collided || t == cfg.episode_max_steps - 1 ||
                  env_step == cfg.env_steps;
      std::array<ScanPtr, 3> next_scans = {
          scans[1], scans[2],
          make_scan_ptr(ep_world, res.state.pose, cfg.lidar)};
      buffer.push({scans, a, r, next_scans, done});
      scans = next_scans;
      state = res.state;
      ep_return += r;
      ep_collided = ep_collided || res.collided;

      if (env_step > cfg.warmup_steps && env_step % cfg.update_every == 0 &&
          buffer.size() >= static_cast<std::size_t>(cfg.batch_size))
        updater.update(rng);
      if (res.collided) break;
    }
    ++result.episodes;
    window_return.push_back(ep_return);
    window_collide.push_back(ep_collided);
    if (window_return.size() > 50) {
      window_return.pop_front();
      window_collide.pop_front();
    }
    double mean_return =
        std::accumulate(window_return.begin(), window_return.end(), 0.0) /
        window_return.size();
    double coll_rate =
        static_cast<double>(
            std::count(window_collide.begin(), window_collide.end(), true)) /
        window_collide.size();
    result.final_mean_return = mean_return;
    result.final_collision_rate = coll_rate;
    if (metrics.is_open())
      metrics << result.episodes << "," << ep_return << "," << coll_rate << "\n";
  }

  if (!cfg.out_dir.empty()) {
    actor.save(cfg.out_dir + "/actor.ckpt");
    critic.save(cfg.out_dir + "/critic.ckpt");
  }
  result.actor = std::move(actor);
  result.critic = std::move(critic);
  return result;
}

const char* to_string(ForwardOutcome o) {
  switch (o) {
    case ForwardOutcome::Done: return "done";
    case ForwardOutcome::Collision: return "collision";
    case ForwardOutcome::Timeout: return "timeout";
  }
  return "?";
}

namespace {

ForwardResult run_forward_loop(const MazeWorld& world, const RobotState& state,
                               double distance, const ForwardExecOptions& opts,
                               const std::function<Twist(const ScanStack&)>& policy) {
  ForwardResult result;
  result.state = state;
  if (distance <= 0.0) return result;
  LidarScan first = world.scan(state.pose, opts.lidar);
  ScanStack stack(first);
  for (int t = 0; t < opts.max_steps; ++t) {
    Twist a = policy(stack);
    RobotState prev = result.state;
    StepResult res = step_with_collision(world, result.state, a, opts.dt);
    result.state = res.state;
    result.trace.push_back(res.state.pose);
    result.arc_length += std::abs(linear_velocity(prev, a)) * opts.dt;
    if (res.collided) {
      result.outcome = ForwardOutcome::Collision;
      return result;
    }
    if (result.arc_length >= distance) {
      result.outcome = ForwardOutcome::Done;
      return result;
    }
    stack.push(world.scan(res.state.pose, opts.lidar));
  }
  result.outcome = ForwardOutcome::Timeout;
  return result;
}

}  // namespace

ForwardResult execute_forward(const Actor& actor, const MazeWorld& world,
                              const RobotState& state, double distance,
                              const ForwardExecOptions& opts) {
  return run_forward_loop(world, state, distance, opts,
                          [&](const ScanStack& s) { return actor.forward(s); });
}

ForwardResult execute_forward_openloop(const MazeWorld& world,
                                       const RobotState& state, double distance,
                                       double cruise_speed,
                                       const ForwardExecOptions& opts) {
  double omega = cruise_speed / state.wheel_radius;
  Twist cruise = clamp_twist({omega, omega});
  return run_forward_loop(world, state, distance, opts,
                          [&](const ScanStack&) { return cruise; });
}

}  // namespace hinav
