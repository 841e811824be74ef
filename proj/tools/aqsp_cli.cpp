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

// Command-line front end. Exit codes: 0 ok, 1 usage, 2 data/config, 3 numerical.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "aqsp/harness.hpp"

namespace {

namespace fs = std::filesystem;

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  aqsp::write_text_atomic(path, text);
}

int cmd_gen_data(int qubits, std::uint64_t seed, const std::string& out, int train_n, int val_n) {
  const aqsp::Dataset ds = aqsp::generate_dataset(qubits, seed, train_n, val_n);
  write_file(out, aqsp::to_json(ds).dump() + "\n");
  std::printf("wrote %zu states, %zu pairs (train %zu / validation %zu / test %zu) to %s\n", ds.states.size(),
              ds.pairs.size(), ds.train.size(), ds.validation.size(), ds.test.size(), out.c_str());
  return 0;
}

int cmd_train(const std::string& config, const std::string& data, const std::string& out_dir,
              const std::string& resume) {
  const aqsp::RunConfig cfg = aqsp::load_run_config(config);
  const aqsp::Dataset ds = aqsp::load_dataset(data);
  aqsp::TrainOptions opts;
  opts.out_dir = fs::path(out_dir);
  opts.on_episode = [](const aqsp::MetricsRow& m) {
    std::printf("episode %4d  val_fidelity %.4f  val_reward %.4f  epsilon %.3f\n", m.episode,
                m.avg_validation_fidelity, m.avg_validation_total_reward, m.epsilon);
    std::fflush(stdout);
  };
  if (resume.empty()) {
    aqsp::Trainer(cfg).run(ds, opts);
  } else {
    aqsp::Trainer(aqsp::load_checkpoint(resume), cfg).run(ds, opts);
  }
  std::printf("final checkpoint: %s\n", (fs::path(out_dir) / "final.json").c_str());
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data, const std::string& split, const std::string& out,
             double charge, double nuclear, int repeats, std::uint64_t seed) {
  const aqsp::Checkpoint ckpt = aqsp::load_checkpoint(ckpt_path);
  const aqsp::Dataset ds = aqsp::load_dataset(data);
  if (ds.qubits != ckpt.config.qubits) throw aqsp::DataError("dataset qubit count does not match the checkpoint");
  const aqsp::Split s = aqsp::parse_split(split);
  const auto tasks = aqsp::tasks_for(ckpt.config, ds, s);
  if (tasks.empty()) throw aqsp::DataError("split '" + split + "' is empty");
  const auto res = aqsp::evaluate(ckpt, tasks, {charge, nuclear}, repeats, seed);
  std::string csv = "repeat,task,pair,final_fidelity,total_reward,discounted_return,steps\n";
  const auto& idx = ds.split(s);
  for (std::size_t i = 0; i < res.records.size(); ++i) {
    const auto& r = res.records[i];
    const std::size_t t = i % tasks.size();
    csv += std::to_string(i / tasks.size()) + "," + std::to_string(t) + "," + std::to_string(idx[t]) + "," +
           aqsp::format_double(r.final_fidelity) + "," + aqsp::format_double(r.total_reward) + "," +
           aqsp::format_double(r.discounted_return) + "," + std::to_string(r.actions.size()) + "\n";
  }
  write_file(out, csv);
  std::printf("%s: %zu tasks x %d repeats, average fidelity %.6f\n", split.c_str(), tasks.size(), repeats,
              res.avg_fidelity);
  return 0;
}

int cmd_noise_sweep(const std::string& ckpt_path, const std::string& data, const std::string& kind_name,
                    double delta_max, int steps, int repeats, const std::string& out, const std::string& split,
                    std::uint64_t seed) {
  const aqsp::Checkpoint ckpt = aqsp::load_checkpoint(ckpt_path);
  const aqsp::Dataset ds = aqsp::load_dataset(data);
  if (ds.qubits != ckpt.config.qubits) throw aqsp::DataError("dataset qubit count does not match the checkpoint");
  const auto tasks = aqsp::tasks_for(ckpt.config, ds, aqsp::parse_split(split));
  if (tasks.empty()) throw aqsp::DataError("split '" + split + "' is empty");
  std::vector<aqsp::NoiseKind> kinds;
  if (kind_name == "both") {
    // One curve per noise source, plus both at once.
    kinds = {aqsp::NoiseKind::kCharge, aqsp::NoiseKind::kNuclear, aqsp::NoiseKind::kBoth};
  } else {
    kinds = {aqsp::parse_noise_kind(kind_name)};
  }
  std::string csv = std::string(aqsp::kNoiseHeader) + "\n";
  for (const auto kind : kinds) {
    for (const auto& row :
         aqsp::noise_sweep(ckpt, tasks, kind, aqsp::sweep_amplitudes(delta_max, steps), repeats, seed)) {
      csv += aqsp::to_csv(row) + "\n";
      std::printf("%-8s delta %.4f  fidelity %.6f +- %.6f\n", aqsp::to_string(kind).c_str(), row.delta,
                  row.avg_fidelity, row.std_fidelity);
    }
  }
  write_file(out, csv);
  return 0;
}

int cmd_table2(const std::string& aqsp_path, const std::string& usp_path, const std::string& out) {
  const auto report = aqsp::table2_suite(aqsp::load_checkpoint(aqsp_path), aqsp::load_checkpoint(usp_path));
  write_file(out, aqsp::to_json(report).dump(2) + "\n");
  std::fputs(aqsp::format_table2(report).c_str(), stdout);
  return 0;
}

int cmd_export_traj(const std::string& ckpt_path, const std::string& data, int pair, const std::string& out) {
  const auto traj = aqsp::export_trajectory(aqsp::load_checkpoint(ckpt_path), aqsp::load_dataset(data), pair);
  write_file(out, traj.dump(2) + "\n");
  std::printf("pair %d: %zu pulses, final fidelity %.6f\n", pair, traj.at("pulses").size(),
              traj.at("final_fidelity").get<double>());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep Q-learning pulse design for double-quantum-dot state preparation"};
  app.require_subcommand(1);
  std::function<int()> action;

  int qubits = 1;
  std::uint64_t seed = 1;
  std::string out, config, data, out_dir, resume, ckpt, split = "test", kind, aqsp_ckpt, usp_ckpt;
  int train_n = 100, val_n = 100, repeats = 1, steps = 10, pair = 0;
  double charge = 0.0, nuclear = 0.0, delta_max = 0.1;

  auto* gen = app.add_subcommand("gen-data", "Generate a task-pair dataset");
  gen->add_option("--qubits", qubits)->required()->check(CLI::IsMember({1, 2}));
  gen->add_option("--seed", seed)->required();
  gen->add_option("--out", out)->required();
  gen->add_option("--train-n", train_n)->check(CLI::PositiveNumber);
  gen->add_option("--val-n", val_n)->check(CLI::PositiveNumber);
  gen->callback([&] { action = [&] { return cmd_gen_data(qubits, seed, out, train_n, val_n); }; });

  auto* tr = app.add_subcommand("train", "Train a model");
  tr->add_option("--config", config)->required();
  tr->add_option("--data", data)->required();
  tr->add_option("--out-dir", out_dir)->required();
  tr->add_option("--resume", resume);
  tr->callback([&] { action = [&] { return cmd_train(config, data, out_dir, resume); }; });

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint greedily on a split");
  ev->add_option("--checkpoint", ckpt)->required();
  ev->add_option("--data", data)->required();
  ev->add_option("--split", split)->required()->check(CLI::IsMember({"train", "validation", "test"}));
  ev->add_option("--out", out)->required();
  ev->add_option("--noise-charge", charge)->check(CLI::NonNegativeNumber);
  ev->add_option("--noise-nuclear", nuclear)->check(CLI::NonNegativeNumber);
  ev->add_option("--repeats", repeats)->check(CLI::PositiveNumber);
  ev->add_option("--seed", seed, "noise seed");
  ev->callback([&] {
    action = [&] { return cmd_eval(ckpt, data, split, out, charge, nuclear, repeats, seed); };
  });

  auto* ns = app.add_subcommand("noise-sweep", "Average fidelity as a function of noise amplitude");
  ns->add_option("--checkpoint", ckpt)->required();
  ns->add_option("--data", data)->required();
  ns->add_option("--kind", kind)->required()->check(CLI::IsMember({"charge", "nuclear", "both"}));
  ns->add_option("--delta-max", delta_max)->required()->check(CLI::NonNegativeNumber);
  ns->add_option("--steps", steps)->required()->check(CLI::PositiveNumber);
  ns->add_option("--repeats", repeats)->required()->check(CLI::PositiveNumber);
  ns->add_option("--out", out)->required();
  ns->add_option("--split", split, "dataset split to evaluate")->check(CLI::IsMember({"train", "validation", "test"}));
  ns->add_option("--seed", seed, "noise seed");
  ns->callback([&] {
    action = [&] { return cmd_noise_sweep(ckpt, data, kind, delta_max, steps, repeats, out, split, seed); };
  });

  auto* t2 = app.add_subcommand("table2", "Fixed-target vs arbitrary-target comparison");
  t2->add_option("--aqsp", aqsp_ckpt)->required();
  t2->add_option("--usp", usp_ckpt)->required();
  t2->add_option("--out", out)->required();
  t2->callback([&] { action = [&] { return cmd_table2(aqsp_ckpt, usp_ckpt, out); }; });

  auto* ex = app.add_subcommand("export-traj", "Write the greedy pulse sequence for one task pair");
  ex->add_option("--checkpoint", ckpt)->required();
  ex->add_option("--data", data)->required();
  ex->add_option("--pair", pair)->required();
  ex->add_option("--out", out)->required();
  ex->callback([&] { action = [&] { return cmd_export_traj(ckpt, data, pair, out); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    return action();
  } catch (const aqsp::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const aqsp::DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const aqsp::PreconditionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
