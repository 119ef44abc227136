#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "fd_check.hpp"
#include "hinav/errors.hpp"
#include "hinav/nn.hpp"
#include "hinav/rng.hpp"

using namespace hinav;

namespace {

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::vector<double> random_vec(int n, std::uint64_t key) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = hash_symmetric(mix_keys(key, i));
  return v;
}

}  // namespace

TEST_CASE("tensor shape checking") {
  Tensor t({2, 3});
  CHECK(t.numel() == 6);
  CHECK(t.data == std::vector<double>(6, 0.0));
  Tensor u({2, 2}, {1.0, 2.0, 3.0, 4.0});
  CHECK(u.numel() == 4);
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), ShapeMismatch);
}

TEST_CASE("gradmap accumulation, scaling and clipping") {
  GradMap g;
  g.accum("a", {2}).data = {3.0, 4.0};
  g.accum("b", {1}).data = {12.0};
  CHECK(g.global_norm() == doctest::Approx(13.0));
  g.scale(0.5);
  CHECK(g.grads.at("a").data[0] == doctest::Approx(1.5));
  CHECK(g.global_norm() == doctest::Approx(6.5));

  g.clip_global_norm(100.0);  // already below: untouched
  CHECK(g.global_norm() == doctest::Approx(6.5));
  g.clip_global_norm(1.0);
  CHECK(g.global_norm() == doctest::Approx(1.0));
  double ratio = g.grads.at("b").data[0] / g.grads.at("a").data[0];
  CHECK(ratio == doctest::Approx(6.0 / 1.5));  // direction preserved

  // accum twice adds in place.
  GradMap h;
  h.accum("x", {1}).data[0] += 1.0;
  h.accum("x", {1}).data[0] += 2.0;
  CHECK(h.grads.at("x").data[0] == doctest::Approx(3.0));
}

TEST_CASE("adam: zero grads freeze parameters but advance the counter") {
  ParamSet ps;
  ps.declare("w", {3}).data = {1.0, -2.0, 3.0};
  GradMap none;
  ps.adam_step(none, 0.1);
  CHECK(ps.step() == 1);
  CHECK(ps.at("w").data == std::vector<double>{1.0, -2.0, 3.0});
}

TEST_CASE("adam descends on a scalar square") {
  ParamSet ps;
  ps.declare("w", {1}).data = {1.0};
  GradMap g;
  g.accum("w", {1}).data = {2.0};  // d/dw of w^2 at w=1
  ps.adam_step(g, 0.1);
  CHECK(ps.at("w").data[0] < 1.0);
  CHECK(ps.at("w").data[0] > 0.5);
}

TEST_CASE("adam reaches a small gradient on a convex quadratic") {
  // f(w) = 0.5 (w - w*)' A (w - w*) with diagonal SPD A.
  auto rng = make_rng(99);
  std::uniform_real_distribution<double> ua(0.5, 1.5);
  std::uniform_real_distribution<double> ud(-0.01, 0.01);
  std::vector<double> a(10), target(10);
  for (int i = 0; i < 10; ++i) {
    a[i] = ua(rng);
    target[i] = ua(rng) - 1.0;
  }
  ParamSet ps;
  Tensor& w = ps.declare("w", {10});
  for (int i = 0; i < 10; ++i) w.data[i] = target[i] + ud(rng);
  for (int iter = 0; iter < 200; ++iter) {
    GradMap g;
    Tensor& gw = g.accum("w", {10});
    for (int i = 0; i < 10; ++i)
      gw.data[i] = a[i] * (ps.at("w").data[i] - target[i]);
    ps.adam_step(g, 1e-4);
  }
  double norm = 0.0;
  for (int i = 0; i < 10; ++i) {
    double gi = a[i] * (ps.at("w").data[i] - target[i]);
    norm += gi * gi;
  }
  CHECK(std::sqrt(norm) < 1e-3);
}

TEST_CASE("fan-in init is bounded, varied and seed-deterministic") {
  Tensor t({64});
  auto rng1 = make_rng(5);
  init_uniform_fan_in(t, 24, rng1);
  double bound = std::sqrt(6.0 / 24.0);
  double lo = 1e9, hi = -1e9;
  for (double v : t.data) {
    CHECK(std::abs(v) <= bound);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(hi - lo > bound * 0.5);  // actually spread out
  Tensor u({64});
  auto rng2 = make_rng(5);
  init_uniform_fan_in(u, 24, rng2);
  CHECK(u.data == t.data);
}

TEST_CASE("dense layer forward basics") {
  ParamSet ps;
  auto rng = make_rng(1);
  Dense layer(ps, "d", 3, 3, Activation::Linear, rng);
  // Identity weights, zero bias: output = input.
  Tensor& w = ps.at("d.w");
  std::fill(w.data.begin(), w.data.end(), 0.0);
  for (int i = 0; i < 3; ++i) w.data[i * 3 + i] = 1.0;
  std::fill(ps.at("d.b").data.begin(), ps.at("d.b").data.end(), 0.0);
  std::vector<double> x = {0.3, -0.7, 2.0};
  CHECK(layer.forward(ps, x) == x);

  // Zero input: output = activation(bias).
  ps.at("d.b").data = {0.5, -0.25, 0.0};
  std::vector<double> zero(3, 0.0);
  CHECK(layer.forward(ps, zero) == std::vector<double>{0.5, -0.25, 0.0});

  ParamSet ps2;
  Dense relu(ps2, "r", 2, 2, Activation::ReLU, rng);
  ps2.at("r.w").data = {0.0, 0.0, 0.0, 0.0};
  ps2.at("r.b").data = {0.5, -0.5};
  CHECK(relu.forward(ps2, {0.0, 0.0}) == std::vector<double>{0.5, 0.0});

  CHECK_THROWS_AS(layer.forward(ps, {1.0, 2.0}), ShapeMismatch);
}

TEST_CASE("dense gradients match finite differences for every activation") {
  for (Activation act : {Activation::Linear, Activation::ReLU, Activation::Tanh}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      ParamSet ps;
      auto rng = make_rng(mix_keys(700, seed));
      Dense layer(ps, "d", 8, 8, act, rng);
      std::vector<double> x = random_vec(8, mix_keys(seed, 1));
      std::vector<double> u = fd::readout(8, mix_keys(seed, 2));

      auto loss = [&] { return fd::dot(layer.forward(ps, x), u); };
      Dense::Cache cache;
      layer.forward(ps, x, &cache);
      GradMap g;
      std::vector<double> dx = layer.backward(ps, cache, u, g);

      auto pr = fd::check_param_grads(ps, g, loss);
      CHECK(pr.max_rel < 1e-4);
      auto xr = fd::check_vector_grad(x, dx, loss);
      CHECK(xr.max_rel < 1e-4);
    }
  }
}

TEST_CASE("conv2d output shape follows the valid-convolution formula") {
  ParamSet ps;
  auto rng = make_rng(2);
  Conv2D conv(ps, "c", 7, 3, 1, 16, 5, rng);
  auto out = conv.output_shape({64, 3, 1});
  CHECK(out == std::vector<int>{12, 1, 16});

  Tensor in({64, 3, 1}, random_vec(64 * 3, 3));
  Tensor y = conv.forward(ps, in);
  CHECK(y.shape == std::vector<int>{12, 1, 16});
  CHECK_THROWS_AS(conv.forward(ps, Tensor({64, 3, 2})), ShapeMismatch);
  CHECK_THROWS_AS(conv.forward(ps, Tensor({64, 2, 1})), ShapeMismatch);
  CHECK_THROWS_AS(conv.forward(ps, Tensor({5, 3, 1})), ShapeMismatch);
}

TEST_CASE("conv2d 1x1 identity kernel passes input through") {
  ParamSet ps;
  auto rng = make_rng(4);
  Conv2D conv(ps, "c", 1, 1, 1, 1, 1, rng, Activation::Linear);
  ps.at("c.w").data = {1.0};
  ps.at("c.b").data = {0.0};
  Tensor in({5, 1, 1}, {1.0, -2.0, 3.0, -4.0, 5.0});
  Tensor y = conv.forward(ps, in);
  CHECK(y.data == in.data);
}

TEST_CASE("conv2d gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ParamSet ps;
    auto rng = make_rng(mix_keys(800, seed));
    Conv2D conv(ps, "c", 3, 3, 2, 4, 2, rng);
    Tensor in({10, 3, 2}, random_vec(10 * 3 * 2, mix_keys(seed, 5)));
    auto out_shape = conv.output_shape(in.shape);
    int out_n = Tensor::shape_numel(out_shape);
    std::vector<double> u = fd::readout(out_n, mix_keys(seed, 6));

    auto loss = [&] { return fd::dot(conv.forward(ps, in).data, u); };
    Conv2D::Cache cache;
    conv.forward(ps, in, &cache);
    GradMap g;
    Tensor din = conv.backward(ps, cache, Tensor(out_shape, u), g);

    auto pr = fd::check_param_grads(ps, g, loss);
    CHECK(pr.max_rel < 1e-4);
    auto xr = fd::check_vector_grad(in.data, din.data, loss);
    CHECK(xr.max_rel < 1e-4);
  }
}

TEST_CASE("lstm zero weights map zero state to zero output") {
  ParamSet ps;
  auto rng = make_rng(6);
  LstmCell cell(ps, "l", 4, 3, rng);
  for (auto& [name, t] : ps.params())
    std::fill(t.data.begin(), t.data.end(), 0.0);
  LstmState out = cell.forward(ps, {1.0, -1.0, 2.0, 0.5}, LstmState::zero(3));
  for (double h : out.h) CHECK(h == doctest::Approx(0.0));
  for (double c : out.c) CHECK(c == doctest::Approx(0.0));
  CHECK(out.finite());
}

TEST_CASE("lstm single-step gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ParamSet ps;
    auto rng = make_rng(mix_keys(900, seed));
    LstmCell cell(ps, "l", 6, 5, rng);
    std::vector<double> x = random_vec(6, mix_keys(seed, 7));
    LstmState s0;
    s0.h = random_vec(5, mix_keys(seed, 8));
    s0.c = random_vec(5, mix_keys(seed, 9));
    std::vector<double> u = fd::readout(5, mix_keys(seed, 10));

    auto loss = [&] { return fd::dot(cell.forward(ps, x, s0).h, u); };
    LstmCell::Cache cache;
    cell.forward(ps, x, s0, &cache);
    GradMap g;
    LstmState ds{std::vector<double>(5, 0.0), std::vector<double>(5, 0.0)};
    std::vector<double> dx = cell.backward(ps, cache, u, ds, g);

    auto pr = fd::check_param_grads(ps, g, loss);
    CHECK(pr.max_rel < 1e-4);
    auto xr = fd::check_vector_grad(x, dx, loss);
    CHECK(xr.max_rel < 1e-4);
    // ds now holds gradients w.r.t. the incoming state.
    auto hr = fd::check_vector_grad(s0.h, ds.h, loss);
    CHECK(hr.max_rel < 1e-4);
    auto cr = fd::check_vector_grad(s0.c, ds.c, loss);
    CHECK(cr.max_rel < 1e-4);
  }
}

TEST_CASE("lstm 5-step BPTT matches finite differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ParamSet ps;
    auto rng = make_rng(mix_keys(1000, seed));
    const int T = 5, in_dim = 4, hidden = 4;
    LstmCell cell(ps, "l", in_dim, hidden, rng);
    std::vector<std::vector<double>> xs(T);
    std::vector<std::vector<double>> us(T);
    for (int t = 0; t < T; ++t) {
      xs[t] = random_vec(in_dim, mix_keys(seed, 20 + t));
      us[t] = fd::readout(hidden, mix_keys(seed, 40 + t));
    }

    // Loss reads out every step's hidden state.
    auto loss = [&] {
      LstmState s = LstmState::zero(hidden);
      double total = 0.0;
      for (int t = 0; t < T; ++t) {
        s = cell.forward(ps, xs[t], s);
        total += fd::dot(s.h, us[t]);
      }
      return total;
    };

    std::vector<LstmCell::Cache> caches(T);
    LstmState s = LstmState::zero(hidden);
    for (int t = 0; t < T; ++t) s = cell.forward(ps, xs[t], s, &caches[t]);

    GradMap g;
    LstmState ds{std::vector<double>(hidden, 0.0), std::vector<double>(hidden, 0.0)};
    std::vector<std::vector<double>> dxs(T);
    for (int t = T - 1; t >= 0; --t)
      dxs[t] = cell.backward(ps, caches[t], us[t], ds, g);

    auto pr = fd::check_param_grads(ps, g, loss);
    CHECK(pr.max_rel < 1e-3);
    for (int t = 0; t < T; ++t) {
      auto xr = fd::check_vector_grad(xs[t], dxs[t], loss);
      CHECK(xr.max_rel < 1e-3);
    }
  }
}

TEST_CASE("checkpoint round-trips named tensors bit-exactly") {
  std::map<std::string, Tensor> tensors;
  tensors["alpha"] = Tensor({3, 2}, random_vec(6, 1));
  tensors["beta/w"] = Tensor({4}, {0.1, -0.2, 1e-300, 12345.6789});
  tensors["gamma"] = Tensor({1}, {-0.0});
  std::string path = temp_path("hinav_ckpt_test.ckpt");
  write_checkpoint(tensors, path);

  auto loaded = read_checkpoint(path);
  REQUIRE(loaded.size() == tensors.size());
  for (const auto& [name, t] : tensors) {
    REQUIRE(loaded.count(name) == 1);
    CHECK(loaded.at(name).shape == t.shape);
    for (int i = 0; i < t.numel(); ++i) {
      // Bit-exact, including signed zero.
      std::uint64_t a, b;
      std::memcpy(&a, &t.data[i], 8);
      std::memcpy(&b, &loaded.at(name).data[i], 8);
      CHECK(a == b);
    }
  }

  // Magic is enforced.
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  in.close();
  bytes[0] ^= 0x40;
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  CHECK_THROWS_AS(read_checkpoint(path), IoError);
  std::remove(path.c_str());
}

TEST_CASE("paramset checkpoint preserves adam state") {
  auto build = [](ParamSet& ps) {
    ps.declare("w", {4}).data = {1.0, 2.0, 3.0, 4.0};
    ps.declare("b", {2}).data = {-1.0, 1.0};
  };
  ParamSet ps;
  build(ps);
  GradMap g;
  g.accum("w", {4}).data = {0.1, -0.2, 0.3, -0.4};
  g.accum("b", {2}).data = {0.5, 0.25};
  ps.adam_step(g, 1e-2);
  ps.adam_step(g, 1e-2);

  ParamSet restored = ParamSet::from_checkpoint_tensors(ps.checkpoint_tensors());
  CHECK(restored.step() == ps.step());
  // One more identical update must agree bit-for-bit.
  ps.adam_step(g, 1e-2);
  restored.adam_step(g, 1e-2);
  for (const auto& [name, t] : ps.params()) {
    const Tensor& r = restored.at(name);
    for (int i = 0; i < t.numel(); ++i) CHECK(r.data[i] == t.data[i]);
  }
}

TEST_CASE("lstm state round-trips through a checkpoint bit-exactly") {
  LstmState s;
  s.h = random_vec(7, 11);
  s.c = random_vec(7, 12);
  std::map<std::string, Tensor> m;
  m["state.h"] = Tensor({7}, s.h);
  m["state.c"] = Tensor({7}, s.c);
  std::string path = temp_path("hinav_state_test.ckpt");
  write_checkpoint(m, path);
  auto loaded = read_checkpoint(path);
  CHECK(loaded.at("state.h").data == s.h);
  CHECK(loaded.at("state.c").data == s.c);
  std::remove(path.c_str());
}

TEST_CASE("forward passes are deterministic functions of their inputs") {
  ParamSet ps;
  auto rng = make_rng(21);
  Dense layer(ps, "d", 16, 8, Activation::Tanh, rng);
  std::vector<double> x = random_vec(16, 31);
  auto y1 = layer.forward(ps, x);
  auto y2 = layer.forward(ps, x);
  CHECK(y1 == y2);

  ParamSet ps_copy = ps;  // value-type copy shares nothing
  Dense attached(ps_copy, "d", Activation::Tanh);
  CHECK(attached.forward(ps_copy, x) == y1);
}
