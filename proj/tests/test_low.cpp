#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "fd_check.hpp"
#include "hinav/errors.hpp"
#include "hinav/lowlevel.hpp"
#include "hinav/maze.hpp"
#include "hinav/rng.hpp"

using namespace hinav;

namespace {

const std::string kHallwaysPath = std::string(HINAV_FIXTURE_DIR) + "/hallways.txt";
const std::string kCorridorPath = std::string(HINAV_FIXTURE_DIR) + "/corridor.txt";

LidarScan make_scan(int beams, std::uint64_t key) {
  LidarScan s;
  s.ranges.resize(beams);
  for (int i = 0; i < beams; ++i)
    s.ranges[i] = 5.0 * hash_unit(mix_keys(key, i));
  return s;
}

ScanStack stack_of(std::uint64_t key, int beams = 64) {
  ScanStack stack(make_scan(beams, mix_keys(key, 100)));
  stack.push(make_scan(beams, mix_keys(key, 200)));
  stack.push(make_scan(beams, mix_keys(key, 300)));
  return stack;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("scan stack keeps time in columns, oldest first") {
  LidarScan a = make_scan(8, 1), b = make_scan(8, 2), c = make_scan(8, 3),
            d = make_scan(8, 4);
  ScanStack stack(a);
  CHECK(stack.tensor().shape == std::vector<int>{8, 3, 1});
  // A fresh stack triplicates the first scan.
  for (int i = 0; i < 8; ++i)
    for (int t = 0; t < 3; ++t)
      CHECK(stack.tensor().data[i * 3 + t] == a.ranges[i]);

  stack.push(b);
  stack.push(c);
  for (int i = 0; i < 8; ++i) {
    CHECK(stack.tensor().data[i * 3 + 0] == a.ranges[i]);  // x_-2
    CHECK(stack.tensor().data[i * 3 + 1] == b.ranges[i]);  // x_-1
    CHECK(stack.tensor().data[i * 3 + 2] == c.ranges[i]);  // x
  }
  stack.push(d);
  for (int i = 0; i < 8; ++i) {
    CHECK(stack.tensor().data[i * 3 + 0] == b.ranges[i]);
    CHECK(stack.tensor().data[i * 3 + 2] == d.ranges[i]);
  }
  CHECK_THROWS_AS(stack.push(make_scan(9, 5)), ShapeMismatch);
}

TEST_CASE("actor output is a twist inside the wheel box") {
  ActorConfig cfg;
  Actor actor(cfg, 7);
  for (std::uint64_t k = 0; k < 20; ++k) {
    Twist t = actor.forward(stack_of(k));
    CHECK(std::abs(t.omega_left) <= cfg.omega_max);
    CHECK(std::abs(t.omega_right) <= cfg.omega_max);
  }
  // Exactly two outputs by construction; same input, same twist.
  Twist t1 = actor.forward(stack_of(3));
  Twist t2 = actor.forward(stack_of(3));
  CHECK(t1.omega_left == t2.omega_left);
  CHECK(t1.omega_right == t2.omega_right);
}

TEST_CASE("critic produces a finite scalar") {
  Critic critic({}, 9);
  for (std::uint64_t k = 0; k < 10; ++k) {
    double q = critic.forward(stack_of(k), {1.0, -2.0});
    CHECK(std::isfinite(q));
  }
}

TEST_CASE("actor gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ActorConfig cfg;
    cfg.num_beams = 32;  // smaller trunk keeps the check fast
    Actor actor(cfg, seed);
    ScanStack stack = stack_of(seed, 32);
    std::vector<double> u = fd::readout(2, mix_keys(seed, 9));

    auto loss = [&] {
      Twist t = actor.forward(stack);
      return u[0] * t.omega_left + u[1] * t.omega_right;
    };
    Actor::Cache cache;
    actor.forward(stack, &cache);
    GradMap g;
    actor.backward(cache, {u[0], u[1]}, g);

    auto res = fd::check_param_grads(actor.params(), g, loss, 300,
                                     static_cast<int>(seed));
    CHECK(res.max_rel < 1e-4);
    CHECK(res.entries > 300);
  }
}

TEST_CASE("critic gradients match finite differences, including the action") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ActorConfig cfg;
    cfg.num_beams = 32;
    Critic critic(cfg, mix_keys(seed, 1));
    ScanStack stack = stack_of(seed + 50, 32);
    Twist a{1.3, -0.7};

    auto loss = [&] { return critic.forward(stack, a); };
    Critic::Cache cache;
    critic.forward(stack, a, &cache);
    GradMap g;
    std::array<double, 2> dqda = critic.backward(cache, 1.0, g);

    auto res = fd::check_param_grads(critic.params(), g, loss, 300,
                                     static_cast<int>(seed));
    CHECK(res.max_rel < 1e-4);

    // dQ/da against central differences through the action slot.
    double na = fd::diff_slot(a.omega_left, loss);
    double nb = fd::diff_slot(a.omega_right, loss);
    CHECK(fd::rel_error(dqda[0], na) < 1e-4);
    CHECK(fd::rel_error(dqda[1], nb) < 1e-4);
  }
}

TEST_CASE("soft update blends parameter sets") {
  Actor online({}, 1);
  Actor target({}, 2);
  ParamSet before = target.params();
  soft_update(target.params(), online.params(), 0.1);
  for (const auto& [name, t] : target.params().params()) {
    const Tensor& b = before.at(name);
    const Tensor& o = online.params().at(name);
    for (int i = 0; i < t.numel(); ++i)
      CHECK(t.data[i] ==
            doctest::Approx(0.9 * b.data[i] + 0.1 * o.data[i]).epsilon(1e-12));
  }
  // tau = 1 copies the online net.
  soft_update(target.params(), online.params(), 1.0);
  for (const auto& [name, t] : target.params().params()) {
    const Tensor& o = online.params().at(name);
    for (int i = 0; i < t.numel(); ++i) CHECK(t.data[i] == o.data[i]);
  }
}

TEST_CASE("actor and critic checkpoints reproduce outputs bit-exactly") {
  ActorConfig cfg;
  cfg.num_beams = 32;
  cfg.range_scale = 4.0;
  Actor actor(cfg, 11);
  std::string apath = temp_path("hinav_actor_test.ckpt");
  actor.save(apath);
  Actor actor2 = Actor::load(apath);
  CHECK(actor2.config().num_beams == 32);
  CHECK(actor2.config().range_scale == 4.0);
  ScanStack stack = stack_of(77, 32);
  Twist t1 = actor.forward(stack);
  Twist t2 = actor2.forward(stack);
  CHECK(t1.omega_left == t2.omega_left);
  CHECK(t1.omega_right == t2.omega_right);
  std::remove(apath.c_str());

  Critic critic(cfg, 12);
  std::string cpath = temp_path("hinav_critic_test.ckpt");
  critic.save(cpath);
  Critic critic2 = Critic::load(cpath);
  CHECK(critic.forward(stack, t1) == critic2.forward(stack, t1));
  std::remove(cpath.c_str());
}

TEST_CASE("transition buffer overwrites oldest entries in a ring") {
  TransitionBuffer buf(3);
  auto mk = [](double r) {
    Transition t;
    t.reward = r;
    return t;
  };
  for (int i = 0; i < 5; ++i) buf.push(mk(i));
  CHECK(buf.size() == 3);
  auto rng = make_rng(4);
  bool saw[5] = {};
  for (int i = 0; i < 300; ++i)
    saw[static_cast<int>(buf.sample(rng).reward)] = true;
  CHECK_FALSE(saw[0]);
  CHECK_FALSE(saw[1]);
  CHECK(saw[2]);
  CHECK(saw[3]);
  CHECK(saw[4]);
}

TEST_CASE("stack_from_scans rebuilds the column layout") {
  auto mk = [](std::uint64_t k) {
    return std::make_shared<const std::vector<double>>(
        make_scan(8, k).ranges);
  };
  std::array<ScanPtr, 3> scans = {mk(1), mk(2), mk(3)};
  ScanStack stack = stack_from_scans(scans);
  for (int i = 0; i < 8; ++i)
    for (int t = 0; t < 3; ++t)
      CHECK(stack.tensor().data[i * 3 + t] == (*scans[t])[i]);
}

TEST_CASE("sample_free_pose respects clearance") {
  MazeWorld world{load_layout(kHallwaysPath), {}};
  auto rng = make_rng(8);
  for (int i = 0; i < 50; ++i) {
    Pose2D p = sample_free_pose(world, rng, 0.3, 0.05);
    RobotState s;
    s.pose = p;
    CHECK_FALSE(world.in_collision(s));
    CHECK(distance_to_walls(world.layout, p.position()) >= 0.35);
  }
}

TEST_CASE("open-loop forward runs straight and tallies arc length") {
  MazeWorld world{load_layout(kCorridorPath), {}};
  RobotState s;
  s.pose = {3.0, 1.5, 0.0};
  ForwardResult res = execute_forward_openloop(world, s, 1.0);
  CHECK(res.outcome == ForwardOutcome::Done);
  CHECK(res.arc_length >= 1.0);
  CHECK(res.arc_length < 1.1);  // one control step of overshoot at most
  CHECK(res.state.pose.x == doctest::Approx(3.0 + res.arc_length).epsilon(1e-9));
  CHECK(res.state.pose.y == doctest::Approx(1.5));
  CHECK(res.trace.size() >= 1);

  // Pointed at the wall it must stop with a collision, not pass through.
  RobotState at_wall;
  at_wall.pose = {3.0, 1.5, kPi / 2.0};
  ForwardResult crash = execute_forward_openloop(world, at_wall, 5.0);
  CHECK(crash.outcome == ForwardOutcome::Collision);
  CHECK(crash.state.pose.y < 2.5);

  // Zero distance is an immediate no-op.
  ForwardResult noop = execute_forward_openloop(world, s, 0.0);
  CHECK(noop.outcome == ForwardOutcome::Done);
  CHECK(noop.arc_length == 0.0);

  // A tiny step cap forces a timeout.
  ForwardExecOptions opts;
  opts.max_steps = 1;
  ForwardResult slow = execute_forward_openloop(world, s, 3.0, 0.35, opts);
  CHECK(slow.outcome == ForwardOutcome::Timeout);
}

TEST_CASE("execute_forward with an untrained actor still terminates") {
  MazeWorld world{load_layout(kCorridorPath), {}};
  Actor actor({}, 3);
  RobotState s;
  s.pose = {3.0, 1.5, 0.0};
  ForwardExecOptions opts;
  opts.max_steps = 30;
  ForwardResult res = execute_forward(actor, world, s, 1.0, opts);
  CHECK((res.outcome == ForwardOutcome::Done ||
         res.outcome == ForwardOutcome::Collision ||
         res.outcome == ForwardOutcome::Timeout));
  CHECK(res.trace.size() <= 30);
}

TEST_CASE("ddpg smoke run: metrics format, checkpoints, reproducibility") {
  Layout layout = load_layout(kHallwaysPath);
  DdpgConfig cfg;
  cfg.env_steps = 260;
  cfg.warmup_steps = 120;
  cfg.batch_size = 16;
  cfg.episode_max_steps = 40;
  cfg.update_every = 4;
  cfg.seed = 6;
  std::string out = temp_path("hinav_ddpg_dir");
  std::filesystem::create_directories(out);
  cfg.out_dir = out;

  DdpgResult res = ddpg_train(layout, cfg);
  CHECK(res.episodes >= 1);

  std::ifstream metrics(out + "/metrics.csv");
  std::string header;
  std::getline(metrics, header);
  CHECK(header == "episode,return,collision_rate");
  int rows = 0;
  for (std::string line; std::getline(metrics, line);)
    if (!line.empty()) ++rows;
  CHECK(rows == res.episodes);
  CHECK(std::filesystem::exists(out + "/actor.ckpt"));
  CHECK(std::filesystem::exists(out + "/critic.ckpt"));
  std::filesystem::remove_all(out);

  // Same seed, same run; the actor parameters agree bit-for-bit.
  DdpgConfig again = cfg;
  again.out_dir.clear();
  DdpgResult r2 = ddpg_train(layout, again);
  DdpgConfig third = cfg;
  third.out_dir.clear();
  DdpgResult r3 = ddpg_train(layout, third);
  CHECK(r2.episodes == r3.episodes);
  for (const auto& [name, t] : r2.actor.params().params()) {
    const Tensor& u = r3.actor.params().at(name);
    for (int i = 0; i < t.numel(); ++i) CHECK(t.data[i] == u.data[i]);
  }

  DdpgConfig bad = cfg;
  bad.batch_size = 0;
  CHECK_THROWS_AS(ddpg_train(layout, bad), ConfigInvalid);
}
