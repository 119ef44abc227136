#include <benchmark/benchmark.h>

#include "hinav/graph_env.hpp"
#include "hinav/highlevel.hpp"
#include "hinav/mapgen.hpp"
#include "hinav/maze.hpp"
#include "hinav/nn.hpp"

namespace {

hinav::Layout bench_layout() {
  return hinav::generate_map("hallways", 7).layout;
}

void bm_cast_ray(benchmark::State& state) {
  hinav::Layout layout = bench_layout();
  double angle = 0.0;
  for (auto _ : state) {
    angle += 0.01;
    benchmark::DoNotOptimize(
        hinav::cast_ray(layout, {5.3, 5.1}, angle, 30.0));
  }
}
BENCHMARK(bm_cast_ray);

void bm_scan(benchmark::State& state) {
  hinav::MazeWorld world{bench_layout(), {}};
  hinav::LidarSpec lidar;
  for (auto _ : state)
    benchmark::DoNotOptimize(world.scan({5.3, 5.1, 0.4}, lidar));
}
BENCHMARK(bm_scan);

void bm_build_graph(benchmark::State& state) {
  hinav::GeneratedMap map = hinav::generate_map("building", 3);
  hinav::BuildGraphOptions opts;
  for (auto _ : state)
    benchmark::DoNotOptimize(hinav::build_graph(map.poses, opts));
}
BENCHMARK(bm_build_graph);

void bm_value_forward(benchmark::State& state) {
  hinav::GeneratedMap map = hinav::generate_map("building", 3);
  hinav::PanoGraph graph = hinav::build_graph(map.poses, {});
  graph.grid = hinav::make_grid(graph, 12, 12);
  hinav::ValueNetConfig cfg;
  cfg.descriptor_dim = 128;
  cfg.target_mode = hinav::TargetMode::OneHot;
  cfg.onehot_dim = graph.grid.num_valid();
  hinav::ValueNet net(cfg, 1);
  hinav::TargetInstance target =
      hinav::make_target(graph, 0, hinav::TargetMode::OneHot, 99);
  hinav::LstmState lstm = hinav::LstmState::zero(cfg.lstm_hidden);
  hinav::Observation obs = hinav::observe(graph, {0, 0}, 123, 0.0);
  for (auto _ : state) {
    auto out = hinav::value_forward(net, obs, target.spec, lstm);
    benchmark::DoNotOptimize(out);
  }
}
BENCHMARK(bm_value_forward);

void bm_shortest_paths(benchmark::State& state) {
  hinav::GeneratedMap map = hinav::generate_map("building", 3);
  hinav::PanoGraph graph = hinav::build_graph(map.poses, {});
  graph.grid = hinav::make_grid(graph, 12, 12);
  std::vector<int> cells;
  for (int node : map.target_nodes)
    cells.push_back(hinav::node_cell_rank(graph, node));
  for (auto _ : state)
    benchmark::DoNotOptimize(hinav::shortest_paths(graph, cells, nullptr));
}
BENCHMARK(bm_shortest_paths);

}  // namespace

BENCHMARK_MAIN();
