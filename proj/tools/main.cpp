// Copyright 2026 The WCF Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "commands.hpp"
#include "wcf/error.hpp"

namespace {

using wcf::cli::ExperimentConfig;

void add_data_flags(CLI::App* app, ExperimentConfig& c) {
  app->add_option("--interactions", c.interactions,
                  "Ratings file (u.data or ratings.dat layout)");
  app->add_option("--genome", c.genome, "Tag-genome scores CSV");
  app->add_option("--item-map", c.item_map,
                  "Optional two-column CSV mapping rating item ids to genome ids");
  app->add_option("--format", c.format, "Ratings layout: tab | double-colon")
      ->capture_default_str();
  app->add_option("--threshold", c.threshold,
                  "Ratings at or above this become positive interactions")
      ->capture_default_str();
}

void add_split_flags(CLI::App* app, ExperimentConfig& c) {
  app->add_option("--ratio", c.ratio, "Interacted:cold split, 3:1 | 1:1 | 1:3")
      ->capture_default_str();
  app->add_option("--folds", c.folds, "Number of folds to use (0 = all)")
      ->capture_default_str();
  app->add_option("--seed", c.seed, "Seed for splits and initialization")
      ->capture_default_str();
}

void add_model_flags(CLI::App* app, ExperimentConfig& c) {
  app->add_option("--gamma", c.gamma, "Entropic regularization")
      ->capture_default_str();
  app->add_option("--latent-dim", c.latent_dim, "WCF latent dimension k")
      ->capture_default_str();
  app->add_option("--tol", c.tol, "Relative objective change to stop WCF")
      ->capture_default_str();
  app->add_option("--max-outer", c.max_outer, "WCF outer iteration cap")
      ->capture_default_str();
  app->add_option("--inner-tol", c.inner_tol,
                  "Projected-gradient norm to stop a dual step")
      ->capture_default_str();
  app->add_option("--inner-max-iter", c.inner_max_iter,
                  "Dual step iteration cap")
      ->capture_default_str();
  app->add_option("--algorithm", c.algorithm, "wf | wcf | both")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  namespace cli = wcf::cli;
  ExperimentConfig config;
  CLI::App app{"Wasserstein filtering for cold-start item recommendation"};
  app.require_subcommand(1);
  app.add_option("--out", config.out,
                 std::string("Output directory (default $") +
                     cli::kOutputDirEnv + ", else ./wcf_out)");

  auto* prepare = app.add_subcommand("prepare", "Binarize and filter a dataset");
  add_data_flags(prepare, config);
  auto* split = app.add_subcommand("split", "Write cold-start split manifests");
  add_split_flags(split, config);
  auto* train = app.add_subcommand("train", "Rank cold items for every fold");
  add_split_flags(train, config);
  add_model_flags(train, config);
  auto* evaluate =
      app.add_subcommand("evaluate", "Score predictions and write reports");
  evaluate->add_option("--scope", config.scope, "Cutoff R for NDCG and recall")
      ->capture_default_str();
  auto* run = app.add_subcommand("run", "prepare, split, train and evaluate");
  add_data_flags(run, config);
  add_split_flags(run, config);
  add_model_flags(run, config);
  run->add_option("--scope", config.scope, "Cutoff R for NDCG and recall")
      ->capture_default_str();
  for (auto* sub : {prepare, split, train, evaluate, run}) {
    sub->add_option("--out", config.out, "Output directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kOk : cli::kUsageError;
  }

  try {
    config.validate();
    if (prepare->parsed()) cli::cmd_prepare(config, std::cout);
    if (split->parsed()) cli::cmd_split(config, std::cout);
    if (train->parsed()) cli::cmd_train(config, std::cout);
    if (evaluate->parsed()) cli::cmd_evaluate(config, std::cout);
    if (run->parsed()) {
      cli::cmd_prepare(config, std::cout);
      cli::cmd_split(config, std::cout);
      cli::cmd_train(config, std::cout);
      cli::cmd_evaluate(config, std::cout);
    }
  } catch (const cli::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return cli::kUsageError;
  } catch (const wcf::SolverError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return cli::kSolverFailure;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return cli::kDataError;
  }
  return cli::kOk;
}
