/*
 * Copyright 2026 The graphleak Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


// Command-line front end: train-mgae, attack, sweep, ablate, report.

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "graphleak/experiment.hpp"

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::string> out;
};

graphleak::ExperimentConfig load(const std::string& path, const Overrides& o) {
  graphleak::ExperimentConfig c = graphleak::load_experiment_config(path);
  if (o.seed) c.seed = *o.seed;
  if (o.workers) c.workers = *o.workers;
  if (o.out) c.output_dir = *o.out;
  c.validate();
  return c;
}

int finish(const graphleak::RunSummary& s) {
  std::cout << s.table;
  std::cout << "wrote " << s.output_dir.string() << " (" << s.cells << " cells, " << s.failed
            << " failed)\n";
  return s.ok() ? 0 : 1;
}

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "Override the experiment seed");
  cmd->add_option("--workers", o.workers, "Override the worker count")->check(CLI::PositiveNumber);
  cmd->add_option("--out", o.out, "Override the output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient inversion audits for federated graph classification"};
  app.require_subcommand(1);

  std::string config;
  std::string dir;
  std::string param;
  std::vector<double> values;
  Overrides o;

  auto* train = app.add_subcommand("train-mgae", "Train the masked graph autoencoder");
  train->add_option("config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  add_overrides(train, o);

  auto* attack = app.add_subcommand("attack", "Run every method on the attack set");
  attack->add_option("config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  add_overrides(attack, o);

  auto* sweep = app.add_subcommand("sweep", "Sweep one FedGIG hyperparameter");
  sweep->add_option("config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  sweep->add_option("--param", param, "n_max, alpha, beta, lambda or attack_lr")
      ->required()
      ->check(CLI::IsMember(graphleak::sweepable_parameters()));
  sweep->add_option("--values", values, "Comma-separated grid")->required()->delimiter(',');
  add_overrides(sweep, o);

  auto* ablate = app.add_subcommand("ablate", "Run the three-variant ablation");
  ablate->add_option("config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  add_overrides(ablate, o);

  auto* rep = app.add_subcommand("report", "Rebuild aggregate.csv and table.txt from results.csv");
  rep->add_option("dir", dir, "Output directory of an attack run")->required()->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      const auto path = graphleak::run_train_mgae(load(config, o));
      std::cout << "wrote " << path.string() << "\n";
      return 0;
    }
    if (*attack) return finish(graphleak::run_experiment(load(config, o)));
    if (*sweep) return finish(graphleak::run_sweep(load(config, o), param, values));
    if (*ablate) return finish(graphleak::run_ablation(load(config, o)));
    if (*rep) {
      std::cout << graphleak::report(dir);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
