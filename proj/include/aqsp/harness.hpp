// Copyright 2026 The AQSP Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// End-to-end experiment driver: run configuration, the deep Q-learning
// training loop with periodic checkpoints, greedy evaluation, noise sweeps
// and the fixed-target vs arbitrary-target comparison report.

#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aqsp/dqd.hpp"
#include "aqsp/dqn.hpp"
#include "aqsp/env.hpp"
#include "aqsp/error.hpp"
#include "aqsp/mlp.hpp"
#include "aqsp/povm.hpp"
#include "aqsp/quantum.hpp"

namespace aqsp {

// ---------------------------------------------------------------------------
// Configuration

// Accepts a plain number or a multiple of pi written as "pi/5", "2pi",
// "2*pi", "3pi/8", "-pi".
inline double parse_pi_expression(const nlohmann::json& v) {
  if (v.is_number()) return v.get<double>();
  if (!v.is_string()) throw DataError("expected a number or a pi expression");
  std::string s = v.get<std::string>();
  std::erase(s, ' ');
  static const std::regex re(R"(^([+-]?(?:\d+\.?\d*|\.\d+)?)\*?pi(?:/(\d+\.?\d*))?$)");
  std::smatch m;
  if (!std::regex_match(s, m, re)) throw DataError("cannot parse '" + s + "' as a multiple of pi");
  double coeff = 1.0;
  if (m[1].length() > 0) {
    const std::string c = m[1].str();
    coeff = c == "+" ? 1.0 : c == "-" ? -1.0 : std::stod(c);
  }
  const double denom = m[2].matched ? std::stod(m[2].str()) : 1.0;
  return coeff * std::numbers::pi / denom;
}

// Named basis states ("0", "1", "+", "-", "l", "r"; "00".."11" for two
// qubits) or an explicit [[re, im], ...] amplitude array.
inline PureState parse_state_spec(const nlohmann::json& spec, int qubits) {
  const Eigen::Index dim = qubits == 1 ? 2 : 4;
  if (spec.is_array()) {
    if (static_cast<Eigen::Index>(spec.size()) != dim) throw DataError("state has the wrong number of amplitudes");
    ComplexVector v(dim);
    for (Eigen::Index k = 0; k < dim; ++k) {
      const auto& c = spec.at(static_cast<std::size_t>(k));
      if (c.is_number()) {
        v(k) = c.get<double>();
      } else {
        if (c.size() != 2) throw DataError("complex amplitude must be a [re, im] pair");
        v(k) = Complex(c.at(0).get<double>(), c.at(1).get<double>());
      }
    }
    try {
      return PureState(std::move(v));
    } catch (const PreconditionError& e) {
      throw DataError(std::string("invalid state: ") + e.what());
    }
  }
  if (!spec.is_string()) throw DataError("state must be a label or an amplitude array");
  const std::string label = spec.get<std::string>();
  const double r = 1.0 / std::numbers::sqrt2;
  if (qubits == 1) {
    ComplexVector v(2);
    if (label == "0") v << 1.0, 0.0;
    else if (label == "1") v << 0.0, 1.0;
    else if (label == "+") v << r, r;
    else if (label == "-") v << r, -r;
    else if (label == "l") v << r, Complex(0.0, r);
    else if (label == "r") v << r, Complex(0.0, -r);
    else throw DataError("unknown single-qubit state label '" + label + "'");
    return PureState(std::move(v));
  }
  static const std::vector<std::string> kTwo = {"00", "01", "10", "11"};
  for (std::size_t k = 0; k < kTwo.size(); ++k) {
    if (label == kTwo[k]) return PureState::basis(4, static_cast<Eigen::Index>(k));
  }
  throw DataError("unknown two-qubit state label '" + label + "'");
}

enum class Mode { kAqsp, kUsp };

// Every hyperparameter of a run. Defaults are the published settings for the
// chosen qubit count; see RunConfig::defaults.
struct RunConfig {
  int qubits = 1;
  std::string action_set = "full";  // two qubits: "full" {0..5}^2 or "restricted" {1..5}^2
  int train_size = 100;
  int validation_size = 100;
  int test_size = 9306;
  int batch_size = 32;
  int memory_size = 20000;
  double learning_rate = 0.001;
  int replace_period = 200;
  double gamma = 0.9;
  std::vector<int> hidden_layers = {64, 64};
  double epsilon_increment = 0.001;
  double epsilon_max = 0.95;
  double eval_epsilon = 1.0;
  double f_threshold = 0.999;
  int episodes = 100;
  double total_time = 2.0 * std::numbers::pi;
  double dt = std::numbers::pi / 5.0;
  int max_steps = 10;
  Mode mode = Mode::kAqsp;
  nlohmann::json usp_target = "1";
  int checkpoint_every = 50;
  bool clear_memory_on_checkpoint = true;
  std::uint64_t seed = 1;
  std::string optimizer = "adam";
  bool mask_threshold_terminal = false;
  bool record_wall_seconds = false;

  static RunConfig defaults(int qubits) {
    RunConfig c;
    c.qubits = qubits;
    if (qubits == 2) {
      c.test_size = 39600;
      c.memory_size = 30000;
      c.hidden_layers = {128, 128, 64};
      c.epsilon_increment = 0.0001;
      c.f_threshold = 0.99;
      c.episodes = 400;
      c.total_time = 5.0 * std::numbers::pi;
      c.dt = std::numbers::pi / 4.0;
      c.max_steps = 20;
      c.usp_target = "11";
    }
    return c;
  }

  ActionTable action_table() const {
    if (qubits == 1) return action_table_single();
    return action_table_two(action_set == "restricted" ? TwoQubitActionSet::kRestricted : TwoQubitActionSet::kFull);
  }

  int input_size() const { return qubits == 1 ? 8 : 32; }

  std::vector<int> layer_sizes() const {
    std::vector<int> sizes = {input_size()};
    sizes.insert(sizes.end(), hidden_layers.begin(), hidden_layers.end());
    sizes.push_back(static_cast<int>(action_table().size()));
    return sizes;
  }

  OptimizerKind optimizer_kind() const { return optimizer == "sgd" ? OptimizerKind::kSgd : OptimizerKind::kAdam; }

  AgentConfig agent() const { return {gamma, replace_period, {learning_rate, batch_size}}; }

  EpisodeSettings episode_settings() const {
    EpisodeSettings s;
    s.max_steps = max_steps;
    s.f_threshold = f_threshold;
    s.gamma = gamma;
    s.epsilon = eval_epsilon;
    return s;
  }

  PureState usp_state() const { return parse_state_spec(usp_target, qubits); }

  void validate() const {
    auto check = [](bool ok, const std::string& what) {
      if (!ok) throw DataError("invalid config: " + what);
    };
    check(qubits == 1 || qubits == 2, "qubits must be 1 or 2");
    check(action_set == "full" || action_set == "restricted", "action_set must be 'full' or 'restricted'");
    check(train_size > 0 && validation_size > 0 && test_size >= 0, "dataset sizes must be positive");
    check(batch_size > 0, "batch_size must be positive");
    check(memory_size >= batch_size, "memory_size must be at least batch_size");
    check(learning_rate > 0.0 && std::isfinite(learning_rate), "learning_rate must be positive");
    check(replace_period > 0, "replace_period must be positive");
    check(gamma >= 0.0 && gamma <= 1.0, "gamma must lie in [0, 1]");
    check(!hidden_layers.empty(), "hidden_layers must be nonempty");
    for (int h : hidden_layers) check(h > 0, "hidden layer widths must be positive");
    check(epsilon_increment >= 0.0, "epsilon_increment must be non-negative");
    check(epsilon_max >= 0.0 && epsilon_max <= 1.0, "epsilon_max must lie in [0, 1]");
    check(eval_epsilon == 1.0, "eval_epsilon is fixed at 1");
    check(f_threshold > 0.0 && f_threshold <= 1.0, "f_threshold must lie in (0, 1]");
    check(episodes >= 0, "episodes must be non-negative");
    check(total_time > 0.0 && dt > 0.0, "total_time and dt must be positive");
    check(max_steps > 0 && max_steps == static_cast<int>(std::lround(total_time / dt)),
          "max_steps must equal round(total_time / dt)");
    check(checkpoint_every > 0, "checkpoint_every must be positive");
    check(optimizer == "adam" || optimizer == "sgd", "optimizer must be 'adam' or 'sgd'");
    check(std::abs(action_table().dt() - dt) <= 1e-12, "dt does not match the action table");
    if (mode == Mode::kUsp) usp_state();
  }
};

inline nlohmann::json to_json(const RunConfig& c) {
  return {{"qubits", c.qubits},
          {"action_set", c.action_set},
          {"train_size", c.train_size},
          {"validation_size", c.validation_size},
          {"test_size", c.test_size},
          {"batch_size", c.batch_size},
          {"memory_size", c.memory_size},
          {"learning_rate", c.learning_rate},
          {"replace_period", c.replace_period},
          {"gamma", c.gamma},
          {"hidden_layers", c.hidden_layers},
          {"epsilon_increment", c.epsilon_increment},
          {"epsilon_max", c.epsilon_max},
          {"eval_epsilon", c.eval_epsilon},
          {"f_threshold", c.f_threshold},
          {"episodes", c.episodes},
          {"total_time", c.total_time},
          {"dt", c.dt},
          {"max_steps", c.max_steps},
          {"mode", c.mode == Mode::kUsp ? "usp" : "aqsp"},
          {"usp_target", c.usp_target},
          {"checkpoint_every", c.checkpoint_every},
          {"clear_memory_on_checkpoint", c.clear_memory_on_checkpoint},
          {"seed", c.seed},
          {"optimizer", c.optimizer},
          {"mask_threshold_terminal", c.mask_threshold_terminal},
          {"record_wall_seconds", c.record_wall_seconds}};
}

// Keys must be RunConfig field names; missing keys keep the defaults for the
// configured qubit count, unknown keys are rejected.
inline RunConfig run_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("config must be a JSON object");
  try {
    RunConfig c = RunConfig::defaults(j.contains("qubits") ? j.at("qubits").get<int>() : 1);
    for (const auto& [key, v] : j.items()) {
      if (key == "qubits") c.qubits = v.get<int>();
      else if (key == "action_set") c.action_set = v.get<std::string>();
      else if (key == "train_size") c.train_size = v.get<int>();
      else if (key == "validation_size") c.validation_size = v.get<int>();
      else if (key == "test_size") c.test_size = v.get<int>();
      else if (key == "batch_size") c.batch_size = v.get<int>();
      else if (key == "memory_size") c.memory_size = v.get<int>();
      else if (key == "learning_rate") c.learning_rate = v.get<double>();
      else if (key == "replace_period") c.replace_period = v.get<int>();
      else if (key == "gamma") c.gamma = v.get<double>();
      else if (key == "hidden_layers") c.hidden_layers = v.get<std::vector<int>>();
      else if (key == "epsilon_increment") c.epsilon_increment = v.get<double>();
      else if (key == "epsilon_max") c.epsilon_max = v.get<double>();
      else if (key == "eval_epsilon") c.eval_epsilon = v.get<double>();
      else if (key == "f_threshold") c.f_threshold = v.get<double>();
      else if (key == "episodes") c.episodes = v.get<int>();
      else if (key == "total_time") c.total_time = parse_pi_expression(v);
      else if (key == "dt") c.dt = parse_pi_expression(v);
      else if (key == "max_steps") c.max_steps = v.get<int>();
      else if (key == "mode") {
        const auto m = v.get<std::string>();
        if (m != "aqsp" && m != "usp") throw DataError("mode must be 'aqsp' or 'usp'");
        c.mode = m == "usp" ? Mode::kUsp : Mode::kAqsp;
      } else if (key == "usp_target") c.usp_target = v;
      else if (key == "checkpoint_every") c.checkpoint_every = v.get<int>();
      else if (key == "clear_memory_on_checkpoint") c.clear_memory_on_checkpoint = v.get<bool>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "optimizer") c.optimizer = v.get<std::string>();
      else if (key == "mask_threshold_terminal") c.mask_threshold_terminal = v.get<bool>();
      else if (key == "record_wall_seconds") c.record_wall_seconds = v.get<bool>();
      else throw DataError("unknown config key '" + key + "'");
    }
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed config: ") + e.what());
  }
}

inline nlohmann::json read_json_file(const std::filesystem::path& path, const std::string& what) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + what + " " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("cannot parse " + what + " " + path.string() + ": " + e.what());
  }
}

// Writes to a sibling temporary and renames, so readers never see a partial file.
inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << text;
    if (!out) throw DataError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  return run_config_from_json(read_json_file(path, "config"));
}

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr const char* kCheckpointVersion = "aqsp-checkpoint/1";

struct Checkpoint {
  std::string version = kCheckpointVersion;
  RunConfig config;
  MlpNetwork main{std::vector<int>{1, 1}};
  MlpNetwork target{std::vector<int>{1, 1}};
  std::int64_t global_step = 0;
  double epsilon = 0.0;
  int episode = 0;  // completed episodes
  std::string rng_state;
};

inline nlohmann::json to_json(const Checkpoint& c) {
  return {{"version", c.version},     {"config", to_json(c.config)},   {"main", to_json(c.main)},
          {"target", to_json(c.target)}, {"global_step", c.global_step}, {"epsilon", c.epsilon},
          {"episode", c.episode},     {"rng_state", c.rng_state}};
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    Checkpoint c;
    c.version = j.at("version").get<std::string>();
    if (c.version != kCheckpointVersion) {
      throw DataError("checkpoint version '" + c.version + "' is not supported (expected " +
                      std::string(kCheckpointVersion) + ")");
    }
    c.config = run_config_from_json(j.at("config"));
    c.main = mlp_from_json(j.at("main"));
    c.target = mlp_from_json(j.at("target"));
    c.global_step = j.at("global_step").get<std::int64_t>();
    c.epsilon = j.at("epsilon").get<double>();
    c.episode = j.at("episode").get<int>();
    c.rng_state = j.at("rng_state").get<std::string>();
    if (c.main.layer_sizes() != c.config.layer_sizes() || !c.main.same_architecture(c.target)) {
      throw DataError("checkpoint networks do not match its config");
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  write_text_atomic(path, to_json(c).dump() + "\n");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(read_json_file(path, "checkpoint"));
}

// ---------------------------------------------------------------------------
// Policies and evaluation

// A trained network plus how it builds its input: arbitrary-target models
// encode the task's target, fixed-target models always encode their own.
struct Policy {
  const MlpNetwork* net = nullptr;
  std::optional<DensityMatrix> fixed_target;
};

inline Policy policy_of(const Checkpoint& c) {
  Policy p{&c.main, std::nullopt};
  if (c.config.mode == Mode::kUsp) p.fixed_target = DensityMatrix(c.config.usp_state());
  return p;
}

struct NoiseAmplitudes {
  double charge = 0.0;
  double nuclear = 0.0;
};

struct EvalResult {
  double avg_fidelity = 0.0;
  std::vector<double> fidelities;       // repeat-major: index = repeat * tasks + task
  std::vector<EpisodeRecord> records;   // same order
};

// Independent stream per (repeat, task), so results do not depend on the
// order in which tasks are processed.
inline std::mt19937_64 task_rng(std::uint64_t seed, std::size_t repeat, std::size_t task) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(repeat), static_cast<std::uint32_t>(task)};
  return std::mt19937_64(seq);
}

inline EvalResult evaluate_policy(const Policy& policy, const std::vector<TaskPair>& tasks, const ActionTable& table,
                                  const PovmSet& povm, EpisodeSettings settings, NoiseAmplitudes noise = {},
                                  int repeats = 1, std::uint64_t seed = 0) {
  detail::require(!tasks.empty(), "no tasks to evaluate");
  detail::require(repeats > 0, "repeats must be positive");
  detail::require(policy.net != nullptr, "policy has no network");
  settings.noise_charge = noise.charge;
  settings.noise_nuclear = noise.nuclear;
  settings.encoding_target = policy.fixed_target;
  EvalResult out;
  out.fidelities.reserve(tasks.size() * static_cast<std::size_t>(repeats));
  out.records.reserve(out.fidelities.capacity());
  double sum = 0.0;
  for (int r = 0; r < repeats; ++r) {
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      auto rng = task_rng(seed, static_cast<std::size_t>(r), t);
      EpisodeRecord rec = run_episode(*policy.net, tasks[t], table, settings, rng, povm);
      sum += rec.final_fidelity;
      out.fidelities.push_back(rec.final_fidelity);
      out.records.push_back(std::move(rec));
    }
  }
  out.avg_fidelity = sum / static_cast<double>(out.fidelities.size());
  return out;
}

// Greedy (epsilon = 1) rollouts of the checkpoint's main network.
inline EvalResult evaluate(const Checkpoint& ckpt, const std::vector<TaskPair>& tasks, NoiseAmplitudes noise = {},
                           int repeats = 1, std::uint64_t seed = 0) {
  return evaluate_policy(policy_of(ckpt), tasks, ckpt.config.action_table(), pauli4(ckpt.config.qubits),
                         ckpt.config.episode_settings(), noise, repeats, seed);
}

// Tasks for a split. In fixed-target mode every task's target is replaced by
// the configured target.
inline std::vector<TaskPair> tasks_for(const RunConfig& cfg, const Dataset& ds, Split split,
                                       std::size_t limit = SIZE_MAX) {
  std::vector<TaskPair> tasks = ds.tasks(split, limit);
  if (cfg.mode == Mode::kUsp) {
    const DensityMatrix target(cfg.usp_state());
    for (auto& t : tasks) t.rho_tar = target;
  }
  return tasks;
}

// ---------------------------------------------------------------------------
// Training

struct MetricsRow {
  int episode = 0;
  double avg_validation_fidelity = 0.0;
  double avg_validation_total_reward = 0.0;
  std::optional<double> mean_training_loss;
  double epsilon = 0.0;
  std::optional<double> wall_seconds;
};

inline constexpr const char* kMetricsHeader =
    "episode,avg_validation_fidelity,avg_validation_total_reward,mean_training_loss,epsilon,wall_seconds";

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string to_csv(const MetricsRow& m) {
  std::string s = std::to_string(m.episode) + "," + format_double(m.avg_validation_fidelity) + "," +
                  format_double(m.avg_validation_total_reward) + ",";
  if (m.mean_training_loss) s += format_double(*m.mean_training_loss);
  s += "," + format_double(m.epsilon) + ",";
  if (m.wall_seconds) s += format_double(*m.wall_seconds);
  return s;
}

struct TrainOptions {
  std::optional<std::filesystem::path> out_dir;  // metrics.csv and checkpoints go here
  std::function<void(const MetricsRow&)> on_episode;
};

class Trainer {
 public:
  explicit Trainer(RunConfig cfg)
      : cfg_(validated(std::move(cfg))),
        table_(cfg_.action_table()),
        povm_(pauli4(cfg_.qubits)),
        rng_(cfg_.seed),
        main_(MlpNetwork::init(cfg_.layer_sizes(), rng_)),
        target_(main_),
        optimizer_(cfg_.optimizer_kind(), cfg_.learning_rate),
        memory_(static_cast<std::size_t>(cfg_.memory_size)),
        eps_{0.0, cfg_.epsilon_increment, cfg_.epsilon_max} {}

  // Resumes from a checkpoint with an empty replay memory. `cfg` may extend
  // the run (e.g. more episodes) but must keep the architecture.
  explicit Trainer(const Checkpoint& ckpt, std::optional<RunConfig> cfg = std::nullopt)
      : cfg_(validated(cfg ? *cfg : ckpt.config)),
        table_(cfg_.action_table()),
        povm_(pauli4(cfg_.qubits)),
        main_(ckpt.main),
        target_(ckpt.target),
        optimizer_(cfg_.optimizer_kind(), cfg_.learning_rate),
        memory_(static_cast<std::size_t>(cfg_.memory_size)),
        eps_{ckpt.epsilon, cfg_.epsilon_increment, cfg_.epsilon_max},
        global_step_(ckpt.global_step),
        episode_(ckpt.episode) {
    if (main_.layer_sizes() != cfg_.layer_sizes()) throw DataError("checkpoint architecture does not match the config");
    std::istringstream in(ckpt.rng_state);
    in >> rng_;
    if (!in) throw DataError("checkpoint rng state is corrupt");
  }

  // Runs episodes until cfg.episodes have completed. Each episode sweeps the
  // training tasks once in order, then evaluates the validation tasks greedily.
  std::vector<MetricsRow> run(const Dataset& ds, const TrainOptions& opts = {}) {
    check_dataset(ds);
    const auto train_tasks = tasks_for(cfg_, ds, Split::kTrain, static_cast<std::size_t>(cfg_.train_size));
    const auto val_tasks = tasks_for(cfg_, ds, Split::kValidation, static_cast<std::size_t>(cfg_.validation_size));
    const auto start = std::chrono::steady_clock::now();

    std::ofstream metrics;
    if (opts.out_dir) {
      std::filesystem::create_directories(*opts.out_dir);
      const auto path = *opts.out_dir / "metrics.csv";
      const bool fresh = episode_ == 0 || !std::filesystem::exists(path);
      metrics.open(path, fresh ? std::ios::trunc : std::ios::app);
      if (!metrics) throw DataError("cannot write " + path.string());
      if (fresh) metrics << kMetricsHeader << '\n';
    }

    std::vector<MetricsRow> rows;
    while (episode_ < cfg_.episodes) {
      double loss_sum = 0.0;
      long loss_count = 0;
      for (const auto& task : train_tasks) {
        train_on_task(task, loss_sum, loss_count);
      }
      ++episode_;

      const EvalResult val = evaluate_policy(Policy{&main_, fixed_target()}, val_tasks, table_, povm_,
                                             cfg_.episode_settings());
      MetricsRow row;
      row.episode = episode_;
      row.avg_validation_fidelity = val.avg_fidelity;
      double total_reward = 0.0;
      for (const auto& r : val.records) total_reward += r.total_reward;
      row.avg_validation_total_reward = total_reward / static_cast<double>(val.records.size());
      if (loss_count > 0) row.mean_training_loss = loss_sum / static_cast<double>(loss_count);
      row.epsilon = eps_.current;
      if (cfg_.record_wall_seconds) {
        row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      }
      if (!main_.all_finite()) throw NumericalError("network parameters diverged");
      if (metrics) metrics << to_csv(row) << std::endl;
      rows.push_back(row);
      if (opts.on_episode) opts.on_episode(row);

      if (episode_ % cfg_.checkpoint_every == 0 || episode_ == cfg_.episodes) {
        if (opts.out_dir) {
          char name[32];
          std::snprintf(name, sizeof name, "checkpoint_ep%04d.json", episode_);
          save_checkpoint(checkpoint(), *opts.out_dir / name);
        }
        if (episode_ % cfg_.checkpoint_every == 0 && cfg_.clear_memory_on_checkpoint) {
          // Session restart: replay memory and optimizer moments are dropped.
          memory_.clear();
          optimizer_.reset();
        }
      }
    }
    if (opts.out_dir) save_checkpoint(checkpoint(), *opts.out_dir / "final.json");
    return rows;
  }

  Checkpoint checkpoint() const {
    Checkpoint c;
    c.config = cfg_;
    c.main = main_;
    c.target = target_;
    c.global_step = global_step_;
    c.epsilon = eps_.current;
    c.episode = episode_;
    std::ostringstream out;
    out << rng_;
    c.rng_state = out.str();
    return c;
  }

  const RunConfig& config() const { return cfg_; }
  const MlpNetwork& main_network() const { return main_; }
  const MlpNetwork& target_network() const { return target_; }
  const ReplayMemory& memory() const { return memory_; }
  const EpsilonSchedule& epsilon() const { return eps_; }
  std::int64_t global_step() const { return global_step_; }
  int episode() const { return episode_; }
  std::size_t max_memory_seen() const { return max_memory_seen_; }

 private:
  static RunConfig validated(RunConfig c) {
    c.validate();
    return c;
  }

  std::optional<DensityMatrix> fixed_target() const {
    if (cfg_.mode == Mode::kUsp) return DensityMatrix(cfg_.usp_state());
    return std::nullopt;
  }

  void check_dataset(const Dataset& ds) const {
    if (ds.qubits != cfg_.qubits) throw DataError("dataset qubit count does not match the config");
    if (ds.train.size() < static_cast<std::size_t>(cfg_.train_size)) {
      throw DataError("dataset has fewer training pairs than train_size");
    }
    if (ds.validation.size() < static_cast<std::size_t>(cfg_.validation_size)) {
      throw DataError("dataset has fewer validation pairs than validation_size");
    }
  }

  // One rollout with a learning update after every pulse:
  // select -> step -> store -> train -> advance epsilon.
  void train_on_task(const TaskPair& task, double& loss_sum, long& loss_count) {
    const AgentConfig agent = cfg_.agent();
    const NoiseSample quiet = NoiseSample::zero(cfg_.qubits);
    DensityMatrix rho = task.rho_ini;
    EnvEncoding s = encode(rho, task.rho_tar, povm_);
    for (int step = 0; step < cfg_.max_steps; ++step) {
      const int a = select_action(main_, s.values, eps_, rng_);
      StepResult r = env_step(rho, task.rho_tar, static_cast<std::size_t>(a), table_, step, cfg_.max_steps,
                              cfg_.f_threshold, quiet, povm_);
      memory_.store({s.values, a, r.outcome.reward, r.outcome.encoding_next.values,
                     cfg_.mask_threshold_terminal && r.outcome.done_threshold});
      max_memory_seen_ = std::max(max_memory_seen_, memory_.size());
      ++global_step_;
      const auto loss = train_step(main_, target_, memory_, agent, global_step_, rng_,
                                   [this](MlpNetwork& net, const GradientSet& g) { optimizer_.update(net, g); });
      if (loss) {
        loss_sum += *loss;
        ++loss_count;
      }
      eps_ = advance_epsilon(eps_);
      rho = std::move(r.rho_next);
      s = std::move(r.outcome.encoding_next);
      if (r.outcome.done_threshold || r.outcome.done_timeout) break;
    }
  }

  RunConfig cfg_;
  ActionTable table_;
  PovmSet povm_;
  std::mt19937_64 rng_;
  MlpNetwork main_;
  MlpNetwork target_;
  Optimizer optimizer_;
  ReplayMemory memory_;
  EpsilonSchedule eps_;
  std::int64_t global_step_ = 0;
  int episode_ = 0;
  std::size_t max_memory_seen_ = 0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<MetricsRow> metrics;
};

inline TrainResult train(const RunConfig& cfg, const Dataset& ds, const TrainOptions& opts = {}) {
  Trainer t(cfg);
  auto rows = t.run(ds, opts);
  return {t.checkpoint(), std::move(rows)};
}

// ---------------------------------------------------------------------------
// Noise sweeps

enum class NoiseKind { kCharge, kNuclear, kBoth };

inline NoiseKind parse_noise_kind(const std::string& s) {
  if (s == "charge") return NoiseKind::kCharge;
  if (s == "nuclear") return NoiseKind::kNuclear;
  if (s == "both") return NoiseKind::kBoth;
  throw PreconditionError("noise kind must be charge, nuclear or both");
}

inline std::string to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::kCharge: return "charge";
    case NoiseKind::kNuclear: return "nuclear";
    case NoiseKind::kBoth: return "both";
  }
  return "both";
}

inline NoiseAmplitudes amplitudes_for(NoiseKind k, double delta) {
  return {k == NoiseKind::kNuclear ? 0.0 : delta, k == NoiseKind::kCharge ? 0.0 : delta};
}

struct SweepRow {
  double delta = 0.0;
  NoiseKind kind = NoiseKind::kCharge;
  double avg_fidelity = 0.0;
  double std_fidelity = 0.0;  // spread of the per-realization averages
  int repeats = 1;
};

inline constexpr const char* kNoiseHeader = "delta,kind,avg_fidelity,std_fidelity,repeats";

inline std::string to_csv(const SweepRow& r) {
  return format_double(r.delta) + "," + to_string(r.kind) + "," + format_double(r.avg_fidelity) + "," +
         format_double(r.std_fidelity) + "," + std::to_string(r.repeats);
}

// For each amplitude, `repeats` independent noise realizations over all
// tasks, drawn fresh for every pulse.
inline std::vector<SweepRow> noise_sweep(const Checkpoint& ckpt, const std::vector<TaskPair>& tasks, NoiseKind kind,
                                         const std::vector<double>& amplitudes, int repeats, std::uint64_t seed) {
  detail::require(repeats > 0, "repeats must be positive");
  std::vector<SweepRow> rows;
  for (double delta : amplitudes) {
    detail::require(delta >= 0.0 && std::isfinite(delta), "noise amplitudes must be non-negative");
    const EvalResult res = evaluate(ckpt, tasks, amplitudes_for(kind, delta), repeats, seed);
    std::vector<double> means(static_cast<std::size_t>(repeats), 0.0);
    for (std::size_t i = 0; i < res.fidelities.size(); ++i) means[i / tasks.size()] += res.fidelities[i];
    // Running mean: identical realizations (delta = 0) give exactly the noiseless value and zero spread.
    double mu = 0.0;
    for (std::size_t r = 0; r < means.size(); ++r) {
      means[r] /= static_cast<double>(tasks.size());
      mu += (means[r] - mu) / static_cast<double>(r + 1);
    }
    double var = 0.0;
    for (double m : means) var += (m - mu) * (m - mu);
    rows.push_back({delta, kind, mu, std::sqrt(var / repeats), repeats});
  }
  return rows;
}

// delta_k = delta_max * k / steps, k = 0..steps.
inline std::vector<double> sweep_amplitudes(double delta_max, int steps) {
  detail::require(delta_max >= 0.0 && steps >= 1, "sweep needs delta_max >= 0 and steps >= 1");
  std::vector<double> out;
  for (int k = 0; k <= steps; ++k) out.push_back(delta_max * k / steps);
  return out;
}

// ---------------------------------------------------------------------------
// Fixed-target vs arbitrary-target comparison (single qubit)

struct TrajectoryReport {
  std::string model;
  std::string task;
  std::vector<int> actions;
  std::vector<double> controls;  // J of each pulse
  std::vector<double> fidelities;
  double final_fidelity = 0.0;
};

struct Table2Report {
  struct Cell {
    std::string model;
    std::string task;
    std::optional<double> fidelity;
    std::size_t tasks = 0;
  };
  std::vector<Cell> cells;
  std::vector<TrajectoryReport> trajectories;

  std::optional<double> value(const std::string& model, const std::string& task) const {
    for (const auto& c : cells) {
      if (c.model == model && c.task == task) return c.fidelity;
    }
    return std::nullopt;
  }
};

inline const std::vector<std::string>& table2_tasks() {
  static const std::vector<std::string> kTasks = {"arbitrary->|1>", "|0>->|1>", "|1>->|0>", "arbitrary->arbitrary"};
  return kTasks;
}

// Arbitrary states are the 98-point Bloch grid; arbitrary->arbitrary uses
// all of its ordered pairs. The fixed-target model is not scored on
// arbitrary targets.
inline Table2Report table2_suite(const Checkpoint& aqsp_ckpt, const Checkpoint& usp_ckpt) {
  if (aqsp_ckpt.config.qubits != 1 || usp_ckpt.config.qubits != 1) {
    throw DataError("the comparison report needs single-qubit checkpoints");
  }
  if (aqsp_ckpt.config.mode != Mode::kAqsp) throw DataError("--aqsp checkpoint was not trained in aqsp mode");
  if (usp_ckpt.config.mode != Mode::kUsp) throw DataError("--usp checkpoint was not trained in usp mode");

  const auto grid = gen_bloch_states();
  const DensityMatrix zero(PureState::basis(2, 0));
  const DensityMatrix one(PureState::basis(2, 1));
  std::vector<TaskPair> to_one;
  for (const auto& s : grid) to_one.push_back({DensityMatrix(s), one});
  std::vector<TaskPair> any_to_any;
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t j = 0; j < grid.size(); ++j)
      if (i != j) any_to_any.push_back({DensityMatrix(grid[i]), DensityMatrix(grid[j])});
  const std::vector<TaskPair> zero_to_one = {{zero, one}};
  const std::vector<TaskPair> one_to_zero = {{one, zero}};

  Table2Report report;
  for (const auto* ckpt : {&usp_ckpt, &aqsp_ckpt}) {
    const std::string model = ckpt == &usp_ckpt ? "USP" : "AQSP";
    auto score = [&](const std::string& name, const std::vector<TaskPair>& tasks) {
      const EvalResult r = evaluate(*ckpt, tasks);
      report.cells.push_back({model, name, r.avg_fidelity, tasks.size()});
      if (tasks.size() == 1) {
        TrajectoryReport t{model, name, r.records[0].actions, {}, r.records[0].fidelities, r.records[0].final_fidelity};
        const ActionTable table = ckpt->config.action_table();
        for (int a : t.actions) t.controls.push_back(std::get<SingleQubitControls>(table.at(static_cast<std::size_t>(a))).j);
        report.trajectories.push_back(std::move(t));
      }
    };
    score(table2_tasks()[0], to_one);
    score(table2_tasks()[1], zero_to_one);
    score(table2_tasks()[2], one_to_zero);
    if (model == "AQSP") {
      score(table2_tasks()[3], any_to_any);
    } else {
      report.cells.push_back({model, table2_tasks()[3], std::nullopt, 0});
    }
  }
  return report;
}

inline nlohmann::json to_json(const Table2Report& r) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : r.cells) {
    cells.push_back({{"model", c.model},
                     {"task", c.task},
                     {"fidelity", c.fidelity ? nlohmann::json(*c.fidelity) : nlohmann::json(nullptr)},
                     {"tasks", c.tasks}});
  }
  nlohmann::json trajs = nlohmann::json::array();
  for (const auto& t : r.trajectories) {
    trajs.push_back({{"model", t.model},
                     {"task", t.task},
                     {"actions", t.actions},
                     {"controls", t.controls},
                     {"fidelities", t.fidelities},
                     {"final_fidelity", t.final_fidelity}});
  }
  return {{"table", std::move(cells)}, {"trajectories", std::move(trajs)}};
}

inline std::string format_table2(const Table2Report& r) {
  std::string out = "Task";
  for (const auto& t : table2_tasks()) out += "\t" + t;
  out += "\n";
  for (const std::string model : {"USP", "AQSP"}) {
    out += model;
    for (const auto& t : table2_tasks()) {
      const auto v = r.value(model, t);
      char buf[32];
      if (v) std::snprintf(buf, sizeof buf, "%.4f", *v);
      out += "\t" + (v ? std::string(buf) : std::string("-"));
    }
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trajectory export

inline nlohmann::json controls_to_json(const Controls& c) {
  if (const auto* s = std::get_if<SingleQubitControls>(&c)) return {{"J", s->j}, {"h", s->h}};
  const auto& t = std::get<TwoQubitControls>(c);
  return {{"J1", t.j1}, {"J2", t.j2}, {"J12", t.j12}, {"h1", t.h1}, {"h2", t.h2}};
}

// Structured record of one greedy rollout: pulses with their start times and
// the fidelity after each.
inline nlohmann::json export_trajectory(const Checkpoint& ckpt, const Dataset& ds, int pair_index) {
  if (ds.qubits != ckpt.config.qubits) throw DataError("dataset qubit count does not match the checkpoint");
  if (pair_index < 0 || static_cast<std::size_t>(pair_index) >= ds.pairs.size()) {
    throw DataError("pair index out of range");
  }
  std::vector<TaskPair> task = {ds.task(pair_index)};
  if (ckpt.config.mode == Mode::kUsp) task[0].rho_tar = DensityMatrix(ckpt.config.usp_state());
  const EvalResult r = evaluate(ckpt, task);
  const EpisodeRecord& rec = r.records.front();
  const ActionTable table = ckpt.config.action_table();
  nlohmann::json pulses = nlohmann::json::array();
  for (std::size_t k = 0; k < rec.actions.size(); ++k) {
    pulses.push_back({{"step", k},
                      {"t_start", static_cast<double>(k) * table.dt()},
                      {"action", rec.actions[k]},
                      {"controls", controls_to_json(table.at(static_cast<std::size_t>(rec.actions[k])))},
                      {"fidelity", rec.fidelities[k]}});
  }
  const auto [ini, tar] = ds.pairs[static_cast<std::size_t>(pair_index)];
  return {{"qubits", ckpt.config.qubits},
          {"pair", pair_index},
          {"initial_state", ini},
          {"target_state", tar},
          {"dt", table.dt()},
          {"pulses", std::move(pulses)},
          {"final_fidelity", rec.final_fidelity},
          {"total_reward", rec.total_reward},
          {"discounted_return", rec.discounted_return}};
}

}  // namespace aqsp
