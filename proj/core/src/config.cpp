#include "hinav/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "hinav/errors.hpp"

namespace hinav {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string fmt(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

// Typed field registry so parsing and echoing share one table.
struct Field {
  std::function<void(Config&, const std::string&)> set;
  std::function<std::string(const Config&)> get;
};

template <typename Section>
Field make_int(Section Config::* sec, int Section::* p) {
  return {[=](Config& c, const std::string& v) {
            try {
              (c.*sec).*p = std::stoi(v);
            } catch (const std::exception&) {
              throw ConfigInvalid("config: bad integer '" + v + "'");
            }
          },
          [=](const Config& c) { return std::to_string((c.*sec).*p); }};
}

template <typename Section>
Field make_double(Section Config::* sec, double Section::* p) {
  return {[=](Config& c, const std::string& v) {
            try {
              (c.*sec).*p = std::stod(v);
            } catch (const std::exception&) {
              throw ConfigInvalid("config: bad number '" + v + "'");
            }
          },
          [=](const Config& c) { return fmt((c.*sec).*p); }};
}

template <typename Section>
Field make_string(Section Config::* sec, std::string Section::* p) {
  return {[=](Config& c, const std::string& v) { (c.*sec).*p = v; },
          [=](const Config& c) { return (c.*sec).*p; }};
}

using FieldMap = std::map<std::string, Field>;

const std::map<std::string, FieldMap>& schema() {
  static const std::map<std::string, FieldMap> s = [] {
    std::map<std::string, FieldMap> m;
    auto& env = m["env"];
    env["num_orientations"] = make_int(&Config::env, &Config::Env::num_orientations);
    env["forward_step"] = make_double(&Config::env, &Config::Env::forward_step);
    env["forward_match_radius"] =
        make_double(&Config::env, &Config::Env::forward_match_radius);
    env["forward_cone_deg"] =
        make_double(&Config::env, &Config::Env::forward_cone_deg);
    env["descriptor_dim"] = make_int(&Config::env, &Config::Env::descriptor_dim);
    env["noise_level"] = make_double(&Config::env, &Config::Env::noise_level);
    env["grid_rows"] = make_int(&Config::env, &Config::Env::grid_rows);
    env["grid_cols"] = make_int(&Config::env, &Config::Env::grid_cols);
    env["cell_size"] = make_double(&Config::env, &Config::Env::cell_size);
    env["lidar_beams"] = make_int(&Config::env, &Config::Env::lidar_beams);
    env["lidar_fov_deg"] = make_double(&Config::env, &Config::Env::lidar_fov_deg);
    env["lidar_max_range"] =
        make_double(&Config::env, &Config::Env::lidar_max_range);
    env["robot_radius"] = make_double(&Config::env, &Config::Env::robot_radius);
    env["wheel_base"] = make_double(&Config::env, &Config::Env::wheel_base);
    env["wheel_radius"] = make_double(&Config::env, &Config::Env::wheel_radius);
    env["omega_max"] = make_double(&Config::env, &Config::Env::omega_max);
    env["dt"] = make_double(&Config::env, &Config::Env::dt);

    auto& high = m["high"];
    high["target_mode"] = make_string(&Config::high, &Config::High::target_mode);
    high["target_embed"] = make_int(&Config::high, &Config::High::target_embed);
    high["fusion_hidden"] = make_int(&Config::high, &Config::High::fusion_hidden);
    high["lstm_hidden"] = make_int(&Config::high, &Config::High::lstm_hidden);
    high["steps"] = make_int(&Config::high, &Config::High::steps);
    high["batch_size"] = make_int(&Config::high, &Config::High::batch_size);
    high["lr"] = make_double(&Config::high, &Config::High::lr);
    high["unroll_len"] = make_int(&Config::high, &Config::High::unroll_len);
    high["replay_capacity"] =
        make_int(&Config::high, &Config::High::replay_capacity);
    high["collectors"] = make_int(&Config::high, &Config::High::collectors);
    high["refresh_interval"] =
        make_int(&Config::high, &Config::High::refresh_interval);
    high["warmup_episodes"] =
        make_int(&Config::high, &Config::High::warmup_episodes);
    high["epsilon_start"] =
        make_double(&Config::high, &Config::High::epsilon_start);
    high["epsilon_end"] = make_double(&Config::high, &Config::High::epsilon_end);
    high["epsilon_frac"] = make_double(&Config::high, &Config::High::epsilon_frac);
    high["grad_clip"] = make_double(&Config::high, &Config::High::grad_clip);
    high["eval_interval"] = make_int(&Config::high, &Config::High::eval_interval);
    high["eval_runs"] = make_int(&Config::high, &Config::High::eval_runs);
    high["stop_success"] = make_double(&Config::high, &Config::High::stop_success);
    high["checkpoint_interval"] =
        make_int(&Config::high, &Config::High::checkpoint_interval);

    auto& low = m["low"];
    low["env_steps"] = make_int(&Config::low, &Config::Low::env_steps);
    low["episode_max_steps"] =
        make_int(&Config::low, &Config::Low::episode_max_steps);
    low["warmup_steps"] = make_int(&Config::low, &Config::Low::warmup_steps);
    low["update_every"] = make_int(&Config::low, &Config::Low::update_every);
    low["batch_size"] = make_int(&Config::low, &Config::Low::batch_size);
    low["lr"] = make_double(&Config::low, &Config::Low::lr);
    low["tau"] = make_double(&Config::low, &Config::Low::tau);
    low["gamma"] = make_double(&Config::low, &Config::Low::gamma);
    low["noise_start"] = make_double(&Config::low, &Config::Low::noise_start);
    low["noise_end"] = make_double(&Config::low, &Config::Low::noise_end);
    low["buffer_capacity"] =
        make_int(&Config::low, &Config::Low::buffer_capacity);
    low["grad_clip"] = make_double(&Config::low, &Config::Low::grad_clip);
    low["scatter_obstacles"] =
        make_int(&Config::low, &Config::Low::scatter_obstacles);
    low["scatter_radius"] =
        make_double(&Config::low, &Config::Low::scatter_radius);

    auto& eval = m["eval"];
    eval["runs_per_target"] =
        make_int(&Config::eval, &Config::Eval::runs_per_target);
    eval["min_start_distance"] =
        make_double(&Config::eval, &Config::Eval::min_start_distance);
    eval["max_high_steps"] = make_int(&Config::eval, &Config::Eval::max_high_steps);
    eval["success_radius"] =
        make_double(&Config::eval, &Config::Eval::success_radius);
    eval["snap_radius"] = make_double(&Config::eval, &Config::Eval::snap_radius);
    eval["lost_factor"] = make_double(&Config::eval, &Config::Eval::lost_factor);
    eval["observe_noise"] =
        make_double(&Config::eval, &Config::Eval::observe_noise);
    eval["forward_distance"] =
        make_double(&Config::eval, &Config::Eval::forward_distance);
    eval["naive_speed"] = make_double(&Config::eval, &Config::Eval::naive_speed);
    return m;
  }();
  return s;
}

}  // namespace

Config Config::from_text(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  const FieldMap* section = nullptr;
  std::string section_name;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    if (s.front() == '[' && s.back() == ']') {
      section_name = trim(s.substr(1, s.size() - 2));
      auto it = schema().find(section_name);
      if (it == schema().end())
        throw ConfigInvalid("config line " + std::to_string(lineno) +
                            ": unknown section [" + section_name + "]");
      section = &it->second;
      continue;
    }
    auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigInvalid("config line " + std::to_string(lineno) +
                          ": expected key = value");
    if (!section)
      throw ConfigInvalid("config line " + std::to_string(lineno) +
                          ": key outside any section");
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    auto it = section->find(key);
    if (it == section->end())
      throw ConfigInvalid("config line " + std::to_string(lineno) +
                          ": unknown key '" + key + "' in [" + section_name +
                          "]");
    it->second.set(cfg, value);
  }
  return cfg;
}

Config Config::from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return from_text(ss.str());
}

std::string Config::to_text() const {
  std::string out;
  for (const auto& [section_name, fields] : schema()) {
    out += "[" + section_name + "]\n";
    for (const auto& [key, field] : fields)
      out += key + " = " + field.get(*this) + "\n";
    out += "\n";
  }
  return out;
}

void Config::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f << to_text();
}

void Config::set(const std::string& dotted_key, const std::string& value) {
  auto dot = dotted_key.find('.');
  if (dot == std::string::npos)
    throw ConfigInvalid("config override: expected section.key, got '" +
                        dotted_key + "'");
  std::string section = dotted_key.substr(0, dot);
  std::string key = dotted_key.substr(dot + 1);
  auto sit = schema().find(section);
  if (sit == schema().end())
    throw ConfigInvalid("config override: unknown section '" + section + "'");
  auto fit = sit->second.find(key);
  if (fit == sit->second.end())
    throw ConfigInvalid("config override: unknown key '" + key + "' in [" +
                        section + "]");
  fit->second.set(*this, value);
}

LidarSpec Config::lidar_spec() const {
  return {env.lidar_beams, env.lidar_fov_deg * kPi / 180.0,
          env.lidar_max_range};
}

BuildGraphOptions Config::graph_options() const {
  BuildGraphOptions o;
  o.num_orientations = env.num_orientations;
  o.forward_step = env.forward_step;
  o.forward_match_radius = env.forward_match_radius;
  o.forward_cone_deg = env.forward_cone_deg;
  o.descriptor_dim = env.descriptor_dim;
  return o;
}

TrainHighConfig Config::train_high_config() const {
  TrainHighConfig t;
  t.target_mode = target_mode_from_string(high.target_mode);
  t.target_embed = high.target_embed;
  t.fusion_hidden = high.fusion_hidden;
  t.lstm_hidden = high.lstm_hidden;
  t.steps = high.steps;
  t.batch_size = high.batch_size;
  t.lr = high.lr;
  t.unroll_len = high.unroll_len;
  t.replay_capacity = high.replay_capacity;
  t.collectors = high.collectors;
  t.refresh_interval = high.refresh_interval;
  t.warmup_episodes = high.warmup_episodes;
  t.epsilon_start = high.epsilon_start;
  t.epsilon_end = high.epsilon_end;
  t.epsilon_frac = high.epsilon_frac;
  t.grad_clip = high.grad_clip;
  t.noise_level = env.noise_level;
  t.eval_interval = high.eval_interval;
  t.eval_runs = high.eval_runs;
  t.stop_success = high.stop_success;
  t.checkpoint_interval = high.checkpoint_interval;
  return t;
}

DdpgConfig Config::ddpg_config() const {
  DdpgConfig d;
  d.lidar = lidar_spec();
  d.omega_max = env.omega_max;
  d.robot_radius = env.robot_radius;
  d.wheel_base = env.wheel_base;
  d.wheel_radius = env.wheel_radius;
  d.dt = env.dt;
  d.env_steps = low.env_steps;
  d.episode_max_steps = low.episode_max_steps;
  d.warmup_steps = low.warmup_steps;
  d.update_every = low.update_every;
  d.batch_size = low.batch_size;
  d.lr = low.lr;
  d.tau = low.tau;
  d.gamma = low.gamma;
  d.noise_start = low.noise_start;
  d.noise_end = low.noise_end;
  d.buffer_capacity = static_cast<std::size_t>(low.buffer_capacity);
  d.grad_clip = low.grad_clip;
  d.scatter_obstacles = low.scatter_obstacles;
  d.scatter_radius = low.scatter_radius;
  return d;
}

EvalOptions Config::eval_options() const {
  EvalOptions e;
  e.runs_per_target = eval.runs_per_target;
  e.min_start_distance = eval.min_start_distance;
  e.max_high_steps = eval.max_high_steps;
  e.success_radius = eval.success_radius;
  e.target_mode = target_mode_from_string(high.target_mode);
  e.observe_noise = eval.observe_noise;
  e.run.max_high_steps = eval.max_high_steps;
  e.run.success_radius = eval.success_radius;
  e.run.forward_distance = eval.forward_distance;
  e.run.lost_factor = eval.lost_factor;
  e.run.naive_speed = eval.naive_speed;
  e.run.robot_radius = env.robot_radius;
  e.run.wheel_base = env.wheel_base;
  e.run.wheel_radius = env.wheel_radius;
  return e;
}

}  // namespace hinav
