#include "hinav/highlevel.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "hinav/errors.hpp"
#include "hinav/rng.hpp"

namespace hinav {

using json = nlohmann::ordered_json;

PathSet PathSet::from_paths(const PanoGraph& graph, std::vector<Path> paths) {
  PathSet ps;
  for (const Path& p : paths) {
    if (p.states.empty()) throw DisconnectedPath("path: empty state list");
    for (const ViewState& s : p.states)
      if (!graph.valid_state(s))
        throw UnknownState("path: state (" + std::to_string(s.node_id) + "," +
                           std::to_string(s.orient) + ") not in graph");
    for (std::size_t i = 0; i + 1 < p.states.size(); ++i) {
      bool linked = false;
      for (HighAction a : kHighActions) {
        auto next = try_step(graph, p.states[i], a);
        if (next && *next == p.states[i + 1]) {
          linked = true;
          break;
        }
      }
      if (!linked)
        throw DisconnectedPath("path: no action links step " +
                               std::to_string(i) + " to its successor");
    }
    int terminal_cell = node_cell_rank(graph, p.states.back().node_id);
    if (terminal_cell != p.target_cell)
      throw PathTargetMismatch("path: terminal state lies in cell " +
                               std::to_string(terminal_cell) + ", not " +
                               std::to_string(p.target_cell));
  }
  for (Path& p : paths) {
    ps.index_path(p, graph.num_orientations);
    ps.paths_.push_back(std::move(p));
  }
  return ps;
}

void PathSet::index_path(const Path& p, int num_orientations) {
  std::map<int, int>& dist = remaining_[p.target_cell];
  std::vector<int> seen;
  int len = static_cast<int>(p.states.size());
  for (int i = 0; i < len; ++i) {
    int idx = p.states[i].node_id * num_orientations + p.states[i].orient;
    if (std::find(seen.begin(), seen.end(), idx) != seen.end()) continue;
    seen.push_back(idx);
    int remaining = len - 1 - i;
    auto it = dist.find(idx);
    if (it == dist.end() || remaining < it->second) dist[idx] = remaining;
  }
}

std::vector<int> PathSet::targets() const {
  std::vector<int> out;
  for (const auto& [cell, dist] : remaining_) out.push_back(cell);
  return out;
}

std::optional<int> PathSet::distance(const PanoGraph& graph, const ViewState& s,
                                     int target_cell) const {
  auto tit = remaining_.find(target_cell);
  if (tit == remaining_.end()) return std::nullopt;
  auto sit = tit->second.find(graph.state_index(s));
  if (sit == tit->second.end()) return std::nullopt;
  return sit->second;
}

void PathSet::merge(const PathSet& other) {
  for (const Path& p : other.paths_) paths_.push_back(p);
  for (const auto& [cell, dist] : other.remaining_) {
    std::map<int, int>& mine = remaining_[cell];
    for (const auto& [idx, d] : dist) {
      auto it = mine.find(idx);
      if (it == mine.end() || d < it->second) mine[idx] = d;
    }
  }
}

PathSet shortest_paths(const PanoGraph& graph, const std::vector<int>& targets,
                       const std::vector<bool>* allowed_nodes) {
  const int N = graph.num_orientations;
  const int S = graph.num_states();
  auto allowed = [&](int node) {
    return !allowed_nodes || (*allowed_nodes)[node];
  };
  // Reverse forward adjacency: states that reach (node, orient) by Forward.
  std::vector<std::vector<int>> rev_forward(S);
  for (const auto& [key, target] : graph.forward_edge) {
    int node = key / N, orient = key % N;
    if (allowed(node) && allowed(target))
      rev_forward[target * N + orient].push_back(node);
  }
  for (auto& v : rev_forward) std::sort(v.begin(), v.end());

  std::vector<Path> all;
  for (int t : targets) {
    std::vector<int> dist(S, -1);
    std::vector<int> queue;
    for (const CaptureNode& n : graph.nodes) {
      if (!allowed(n.id) || node_cell_rank(graph, n.id) != t) continue;
      for (int o = 0; o < N; ++o) {
        dist[n.id * N + o] = 0;
        queue.push_back(n.id * N + o);
      }
    }
    if (queue.empty())
      throw NoTargetStates("shortest_paths: no states in target cell " +
                           std::to_string(t));
    for (std::size_t head = 0; head < queue.size(); ++head) {
      int u = queue[head];
      int node = u / N, orient = u % N;
      int d = dist[u];
      auto relax = [&](int v) {
        if (dist[v] < 0) {
          dist[v] = d + 1;
          queue.push_back(v);
        }
      };
      // Predecessors under TurnLeft / TurnRight land on the same node.
      relax(node * N + (orient - 1 + N) % N);
      relax(node * N + (orient + 1) % N);
      for (int m : rev_forward[u]) relax(m * N + orient);
    }

    for (int s0 = 0; s0 < S; ++s0) {
      if (dist[s0] < 0 || !allowed(s0 / N)) continue;
      Path p;
      p.target_cell = t;
      ViewState cur = graph.state_of_index(s0);
      p.states.push_back(cur);
      while (dist[graph.state_index(cur)] > 0) {
        int want = dist[graph.state_index(cur)] - 1;
        bool moved = false;
        for (HighAction a : kHighActions) {
          auto next = try_step(graph, cur, a);
          if (!next || !allowed(next->node_id)) continue;
          if (dist[graph.state_index(*next)] == want) {
            cur = *next;
            p.states.push_back(cur);
            moved = true;
            break;
          }
        }
        if (!moved)
          throw NavError("shortest_paths: broken distance field");
      }
      all.push_back(std::move(p));
    }
  }
  return PathSet::from_paths(graph, std::move(all));
}

void save_paths_jsonl(const PathSet& paths, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  for (const Path& p : paths.paths()) {
    json states = json::array();
    for (const ViewState& s : p.states)
      states.push_back({s.node_id, s.orient});
    json line = {{"target", p.target_cell}, {"states", std::move(states)}};
    f << line.dump() << "\n";
  }
}

PathSet load_demonstrations(const std::string& path, const PanoGraph& graph) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read " + path);
  std::vector<Path> parsed;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    Path p;
    try {
      json j = json::parse(line);
      p.target_cell = j.at("target").get<int>();
      for (const auto& s : j.at("states"))
        p.states.push_back({s.at(0).get<int>(), s.at(1).get<int>()});
    } catch (const json::exception& e) {
      throw IoError("paths file line " + std::to_string(lineno) + ": " +
                    e.what());
    }
    parsed.push_back(std::move(p));
  }
  return PathSet::from_paths(graph, std::move(parsed));
}

std::optional<int> path_distance(const PanoGraph& graph, const ViewState& s,
                                 int target_cell, const PathSet& paths) {
  return paths.distance(graph, s, target_cell);
}

ProgressLabel progress_label(HighAction a, const ViewState& x, int target_cell,
                             const PathSet& paths, const PanoGraph& graph) {
  ViewState xp = step_or_stay(graph, x, a);
  auto d0 = paths.distance(graph, x, target_cell);
  auto d1 = paths.distance(graph, xp, target_cell);
  if (!d0 || !d1) return {0.0, false};
  return {static_cast<double>(*d0 - *d1), true};
}

std::optional<HighAction> oracle_action(const PanoGraph& graph,
                                        const PathSet& paths,
                                        const ViewState& s, int target_cell) {
  std::optional<HighAction> best;
  double best_y = 0.0;
  for (HighAction a : kHighActions) {
    ProgressLabel l = progress_label(a, s, target_cell, paths, graph);
    if (!l.valid) continue;
    if (!best || l.y > best_y) {
      best = a;
      best_y = l.y;
    }
  }
  return best;
}

const char* to_string(TargetMode m) {
  switch (m) {
    case TargetMode::OneHot: return "onehot";
    case TargetMode::ImageOne: return "image1";
    case TargetMode::ImageTwo: return "image2";
  }
  return "?";
}

TargetMode target_mode_from_string(const std::string& s) {
  if (s == "onehot") return TargetMode::OneHot;
  if (s == "image1") return TargetMode::ImageOne;
  if (s == "image2") return TargetMode::ImageTwo;
  throw ConfigInvalid("unknown target mode: " + s);
}

TargetInstance make_target(const PanoGraph& graph, int cell_rank,
                           TargetMode mode, std::uint64_t rng_seed) {
  TargetInstance t;
  t.cell_rank = cell_rank;
  if (mode == TargetMode::OneHot) {
    if (cell_rank < 0 || cell_rank >= graph.grid.num_valid())
      throw NavError("make_target: cell rank out of range");
    t.spec.kind = TargetSpec::Kind::OneHot;
    t.spec.cell_rank = cell_rank;
  } else {
    t.spec = sample_target_image(graph, cell_rank,
                                 mode == TargetMode::ImageTwo, rng_seed);
  }
  return t;
}

ValueNet::ValueNet(const ValueNetConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  int target_in = cfg.target_mode == TargetMode::OneHot ? cfg.onehot_dim
                                                        : cfg.descriptor_dim;
  if (target_in <= 0) throw ConfigInvalid("value net: bad target input dim");
  auto rng = make_rng(mix_keys(0x11A7, seed));
  target_mlp_ = Dense(ps_, "target", target_in, cfg.target_embed,
                      Activation::ReLU, rng);
  fusion_mlp_ = Dense(ps_, "fusion", cfg.descriptor_dim + 1 + cfg.target_embed,
                      cfg.fusion_hidden, Activation::ReLU, rng);
  lstm_ = LstmCell(ps_, "lstm", cfg.fusion_hidden, cfg.lstm_hidden, rng);
  head_ = Dense(ps_, "head", cfg.lstm_hidden, kNumHighActions,
                Activation::Linear, rng);
}

void ValueNet::bind_layers() {
  target_mlp_ = Dense(ps_, "target", Activation::ReLU);
  fusion_mlp_ = Dense(ps_, "fusion", Activation::ReLU);
  lstm_ = LstmCell(ps_, "lstm");
  head_ = Dense(ps_, "head", Activation::Linear);
}

std::vector<double> ValueNet::target_input(const TargetSpec& target) const {
  if (cfg_.target_mode == TargetMode::OneHot) {
    if (target.kind != TargetSpec::Kind::OneHot)
      throw ShapeMismatch("value net: expected one-hot target");
    if (target.cell_rank < 0 || target.cell_rank >= cfg_.onehot_dim)
      throw ShapeMismatch("value net: one-hot rank out of range");
    std::vector<double> in(cfg_.onehot_dim, 0.0);
    in[target.cell_rank] = 1.0;
    return in;
  }
  if (target.kind != TargetSpec::Kind::ImageEmbed || target.descriptors.empty())
    throw ShapeMismatch("value net: expected image target");
  std::vector<double> in(cfg_.descriptor_dim, 0.0);
  for (const auto& d : target.descriptors) {
    if (static_cast<int>(d.size()) != cfg_.descriptor_dim)
      throw ShapeMismatch("value net: target descriptor dim");
    for (int i = 0; i < cfg_.descriptor_dim; ++i) in[i] += d[i];
  }
  for (double& v : in) v /= static_cast<double>(target.descriptors.size());
  return in;
}

std::array<double, kNumHighActions> ValueNet::forward(
    const Observation& obs, const std::vector<double>& target_in,
    const LstmState& state, LstmState& next_state, StepCache* cache) const {
  if (static_cast<int>(obs.descriptor.size()) != cfg_.descriptor_dim)
    throw ShapeMismatch("value net: descriptor dim");
  StepCache local;
  StepCache& c = cache ? *cache : local;
  c.target_input = target_in;
  auto target_embed = target_mlp_.forward(ps_, target_in, &c.target);
  std::vector<double> fusion_in;
  fusion_in.reserve(cfg_.descriptor_dim + 1 + cfg_.target_embed);
  fusion_in.insert(fusion_in.end(), obs.descriptor.begin(),
                   obs.descriptor.end());
  fusion_in.push_back(static_cast<double>(obs.proximity));
  fusion_in.insert(fusion_in.end(), target_embed.begin(), target_embed.end());
  auto fused = fusion_mlp_.forward(ps_, fusion_in, &c.fusion);
  next_state = lstm_.forward(ps_, fused, state, &c.lstm);
  auto values = head_.forward(ps_, next_state.h, &c.head);
  return {values[0], values[1], values[2]};
}

void ValueNet::backward_step(const StepCache& cache,
                             const std::array<double, kNumHighActions>& dvalues,
                             LstmState& d_state, GradMap& grads) const {
  std::vector<double> dv(dvalues.begin(), dvalues.end());
  auto dh = head_.backward(ps_, cache.head, dv, grads);
  auto dfused = lstm_.backward(ps_, cache.lstm, dh, d_state, grads);
  auto dfusion_in = fusion_mlp_.backward(ps_, cache.fusion, dfused, grads);
  std::vector<double> dtarget_embed(
      dfusion_in.begin() + cfg_.descriptor_dim + 1, dfusion_in.end());
  target_mlp_.backward(ps_, cache.target, dtarget_embed, grads);
}

void ValueNet::save(const std::string& path) const {
  auto tensors = ps_.checkpoint_tensors();
  tensors.emplace(
      "meta.value_net",
      Tensor({6}, {static_cast<double>(cfg_.descriptor_dim),
                   static_cast<double>(cfg_.onehot_dim),
                   static_cast<double>(static_cast<int>(cfg_.target_mode)),
                   static_cast<double>(cfg_.target_embed),
                   static_cast<double>(cfg_.fusion_hidden),
                   static_cast<double>(cfg_.lstm_hidden)}));
  write_checkpoint(tensors, path);
}

ValueNet ValueNet::load(const std::string& path) {
  auto tensors = read_checkpoint(path);
  auto mit = tensors.find("meta.value_net");
  if (mit == tensors.end() || mit->second.numel() != 6)
    throw IoError("checkpoint: missing value net metadata");
  ValueNet net;
  const auto& m = mit->second.data;
  net.cfg_.descriptor_dim = static_cast<int>(m[0]);
  net.cfg_.onehot_dim = static_cast<int>(m[1]);
  net.cfg_.target_mode = static_cast<TargetMode>(static_cast<int>(m[2]));
  net.cfg_.target_embed = static_cast<int>(m[3]);
  net.cfg_.fusion_hidden = static_cast<int>(m[4]);
  net.cfg_.lstm_hidden = static_cast<int>(m[5]);
  tensors.erase(mit);
  net.ps_ = ParamSet::from_checkpoint_tensors(tensors);
  net.bind_layers();
  return net;
}

std::pair<std::array<double, kNumHighActions>, LstmState> value_forward(
    const ValueNet& net, const Observation& obs, const TargetSpec& target,
    const LstmState& state) {
  LstmState next;
  auto values = net.forward(obs, net.target_input(target), state, next);
  return {values, next};
}

HighAction select_action(const std::array<double, kNumHighActions>& values) {
  for (double v : values)
    if (!std::isfinite(v)) throw NonFinite("select_action: non-finite value");
  int best = 0;
  for (int i = 1; i < kNumHighActions; ++i)
    if (values[i] > values[best]) best = i;
  return kHighActions[best];
}

void ReplayBuffer::push(Episode ep) {
  std::lock_guard<std::mutex> lock(mu_);
  episodes_.push_back(std::move(ep));
  while (episodes_.size() > capacity_) episodes_.pop_front();
}

std::size_t ReplayBuffer::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return episodes_.size();
}

std::vector<Episode> ReplayBuffer::sample(std::size_t n,
                                          std::mt19937_64& rng) const {
  std::lock_guard<std::mutex> lock(mu_);
  if (episodes_.empty()) throw NavError("replay buffer: empty");
  std::uniform_int_distribution<std::size_t> pick(0, episodes_.size() - 1);
  std::vector<Episode> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(episodes_[pick(rng)]);
  return out;
}

Episode unroll_episode(const ValueNet& net, const PanoGraph& graph,
                       const PathSet& paths, const ViewState& start,
                       const TargetInstance& target, int max_len,
                       std::mt19937_64& rng, double epsilon,
                       double noise_level) {
  Episode ep;
  ep.start = start;
  ep.target = target;
  if (node_cell_rank(graph, start.node_id) == target.cell_rank) {
    ep.success = true;
    return ep;
  }
  auto target_in = net.target_input(target.spec);
  LstmState lstm = LstmState::zero(net.config().lstm_hidden);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> random_action(0, kNumHighActions - 1);
  ViewState s = start;
  for (int t = 0; t < max_len; ++t) {
    EpisodeStep step;
    step.state = s;
    step.obs = observe(graph, s, rng(), noise_level);
    LstmState next_lstm;
    auto values = net.forward(step.obs, target_in, lstm, next_lstm);
    lstm = std::move(next_lstm);
    HighAction a = epsilon > 0.0 && coin(rng) < epsilon
                       ? kHighActions[random_action(rng)]
                       : select_action(values);
    step.action = a;
    for (int i = 0; i < kNumHighActions; ++i) {
      ProgressLabel l =
          progress_label(kHighActions[i], s, target.cell_rank, paths, graph);
      step.y[i] = l.y;
      step.valid[i] = l.valid;
    }
    ep.steps.push_back(std::move(step));
    s = step_or_stay(graph, s, a);
    if (node_cell_rank(graph, s.node_id) == target.cell_rank) {
      ep.success = true;
      break;
    }
  }
  return ep;
}

namespace {

constexpr int kEvalHorizon = 150;

ViewState random_state(const PanoGraph& graph, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> node(0, graph.num_nodes() - 1);
  std::uniform_int_distribution<int> orient(0, graph.num_orientations - 1);
  return {node(rng), orient(rng)};
}

double eval_success_rate(const ValueNet& net, const PanoGraph& graph,
                         const PathSet& paths, const std::vector<int>& targets,
                         const TrainHighConfig& cfg, std::uint64_t seed) {
  auto rng = make_rng(mix_keys(0xE7A1, seed));
  int successes = 0;
  for (int r = 0; r < cfg.eval_runs; ++r) {
    ViewState start = random_state(graph, rng);
    int cell = targets[r % targets.size()];
    TargetInstance ti = make_target(graph, cell, cfg.target_mode, rng());
    Episode ep = unroll_episode(net, graph, paths, start, ti, kEvalHorizon, rng,
                                0.0, cfg.noise_level);
    if (ep.success) ++successes;
  }
  return static_cast<double>(successes) / cfg.eval_runs;
}

Episode collect_episode(const ValueNet& net, const PanoGraph& graph,
                        const PathSet& paths, const std::vector<int>& targets,
                        const TrainHighConfig& cfg, double epsilon,
                        std::mt19937_64& rng) {
  ViewState start = random_state(graph, rng);
  std::uniform_int_distribution<std::size_t> pick(0, targets.size() - 1);
  int cell = targets[pick(rng)];
  TargetInstance ti = make_target(graph, cell, cfg.target_mode, rng());
  return unroll_episode(net, graph, paths, start, ti, cfg.unroll_len, rng,
                        epsilon, cfg.noise_level);
}

}  // namespace

double batch_loss_and_grads(const ValueNet& net,
                            const std::vector<Episode>& batch, GradMap& grads) {
  std::int64_t valid_terms = 0;
  for (const Episode& ep : batch)
    for (const EpisodeStep& s : ep.steps)
      for (bool v : s.valid) valid_terms += v ? 1 : 0;
  if (valid_terms == 0) return 0.0;
  double scale = 1.0 / static_cast<double>(valid_terms);
  double loss = 0.0;
  for (const Episode& ep : batch) {
    if (ep.steps.empty()) continue;
    auto target_in = net.target_input(ep.target.spec);
    std::vector<ValueNet::StepCache> caches(ep.steps.size());
    std::vector<std::array<double, kNumHighActions>> dvalues(ep.steps.size());
    LstmState lstm = LstmState::zero(net.config().lstm_hidden);
    for (std::size_t t = 0; t < ep.steps.size(); ++t) {
      LstmState next;
      auto values =
          net.forward(ep.steps[t].obs, target_in, lstm, next, &caches[t]);
      lstm = std::move(next);
      for (int a = 0; a < kNumHighActions; ++a) {
        if (!ep.steps[t].valid[a]) {
          dvalues[t][a] = 0.0;
          continue;
        }
        double diff = values[a] - ep.steps[t].y[a];
        loss += diff * diff * scale;
        dvalues[t][a] = 2.0 * diff * scale;
      }
    }
    LstmState d_state = LstmState::zero(net.config().lstm_hidden);
    for (std::size_t t = ep.steps.size(); t-- > 0;)
      net.backward_step(caches[t], dvalues[t], d_state, grads);
  }
  return loss;
}

TrainHighResult train_high(const PanoGraph& graph, const PathSet& paths,
                           const TrainHighConfig& cfg) {
  if (cfg.steps < 1 || cfg.batch_size < 1 || cfg.unroll_len < 1 ||
      cfg.replay_capacity < 1 || cfg.collectors < 1 ||
      cfg.refresh_interval < 1 || cfg.warmup_episodes < 1 ||
      cfg.eval_interval < 1 || !(cfg.lr > 0.0))
    throw ConfigInvalid("train_high: bad config");
  std::vector<int> targets = paths.targets();
  if (targets.empty()) throw ConfigInvalid("train_high: empty path set");
  ValueNetConfig ncfg;
  ncfg.descriptor_dim = graph.descriptor_dim;
  ncfg.target_mode = cfg.target_mode;
  ncfg.target_embed = cfg.target_embed;
  ncfg.fusion_hidden = cfg.fusion_hidden;
  ncfg.lstm_hidden = cfg.lstm_hidden;
  if (cfg.target_mode == TargetMode::OneHot) {
    if (graph.grid.empty())
      throw ConfigInvalid("train_high: one-hot targets need a graph grid");
    ncfg.onehot_dim = graph.grid.num_valid();
  }
  ValueNet net(ncfg, cfg.seed);

  ReplayBuffer buffer(cfg.replay_capacity);
  auto epsilon_at = [&](int step) {
    double anneal = cfg.epsilon_frac * cfg.steps;
    if (anneal <= 0.0) return cfg.epsilon_end;
    double f = std::min(1.0, step / anneal);
    return cfg.epsilon_start + f * (cfg.epsilon_end - cfg.epsilon_start);
  };

  std::ofstream metrics;
  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    metrics.open(cfg.out_dir + "/metrics.csv", std::ios::binary);
    if (!metrics) throw IoError("cannot write metrics.csv");
    metrics << "step,loss,eval_success\n";
  }

  // Async collection state; only used when collectors > 1.
  struct Shared {
    std::mutex mu;
    std::shared_ptr<const ValueNet> snapshot;
  } shared;
  std::atomic<bool> stop{false};
  std::atomic<std::int64_t> trainer_steps{0};
  std::atomic<std::int64_t> pushed{0};
  std::vector<std::thread> workers;
  const bool async = cfg.collectors > 1;
  if (async) {
    {
      std::lock_guard<std::mutex> lock(shared.mu);
      shared.snapshot = std::make_shared<const ValueNet>(net);
    }
    for (int w = 0; w < cfg.collectors; ++w) {
      workers.emplace_back([&, w] {
        auto rng = make_rng(mix_keys(0xC011, cfg.seed, w));
        while (!stop.load()) {
          // Keep collection roughly in step with training on one core.
          if (pushed.load() > cfg.warmup_episodes + 2 * trainer_steps.load()) {
            std::this_thread::sleep_for(std::chrono::milliseconds(2));
            continue;
          }
          std::shared_ptr<const ValueNet> snap;
          {
            std::lock_guard<std::mutex> lock(shared.mu);
            snap = shared.snapshot;
          }
          double eps = epsilon_at(static_cast<int>(trainer_steps.load()));
          buffer.push(
              collect_episode(*snap, graph, paths, targets, cfg, eps, rng));
          pushed.fetch_add(1);
        }
      });
    }
    while (buffer.size() < static_cast<std::size_t>(cfg.warmup_episodes))
      std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }

  auto train_rng = make_rng(mix_keys(0x7121, cfg.seed));
  if (!async)
    for (int i = 0; i < cfg.warmup_episodes; ++i)
      buffer.push(collect_episode(net, graph, paths, targets, cfg,
                                  epsilon_at(0), train_rng));

  TrainHighResult result;
  double last_eval = 0.0;
  int step = 0;
  for (step = 1; step <= cfg.steps; ++step) {
    if (!async)
      buffer.push(collect_episode(net, graph, paths, targets, cfg,
                                  epsilon_at(step - 1), train_rng));
    auto batch = buffer.sample(cfg.batch_size, train_rng);
    GradMap grads;
    double loss = batch_loss_and_grads(net, batch, grads);
    if (cfg.grad_clip > 0.0) grads.clip_global_norm(cfg.grad_clip);
    net.params().adam_step(grads, cfg.lr);
    result.final_loss = loss;
    trainer_steps.store(step);

    if (async && step % cfg.refresh_interval == 0) {
      auto snap = std::make_shared<const ValueNet>(net);
      std::lock_guard<std::mutex> lock(shared.mu);
      shared.snapshot = std::move(snap);
    }
    bool last = step == cfg.steps;
    if (step % cfg.eval_interval == 0 || last) {
      last_eval = eval_success_rate(net, graph, paths, targets, cfg,
                                    mix_keys(cfg.seed, step));
      if (metrics.is_open())
        metrics << step << "," << loss << "," << last_eval << "\n" << std::flush;
      if (cfg.on_metrics) cfg.on_metrics(step, loss, last_eval);
      if (cfg.stop_success >= 0.0 && last_eval >= cfg.stop_success) break;
    }
    if (!cfg.out_dir.empty() && cfg.checkpoint_interval > 0 &&
        step % cfg.checkpoint_interval == 0)
      net.save(cfg.out_dir + "/checkpoint.ckpt");
  }
  stop.store(true);
  for (std::thread& t : workers) t.join();

  result.steps_run = std::min(step, cfg.steps);
  result.final_eval_success = last_eval;
  if (!cfg.out_dir.empty()) net.save(cfg.out_dir + "/value_net.ckpt");
  result.net = std::move(net);
  return result;
}

}  // namespace hinav
