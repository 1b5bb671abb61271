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

#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <tuple>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "wcf/detail/text_util.hpp"
#include "wcf/error.hpp"
#include "wcf/factorization.hpp"
#include "wcf/metrics.hpp"

namespace wcf::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kAlgorithms[] = {"wf", "wcf"};

void require_file(const fs::path& path, const std::string& what) {
  if (path.empty()) throw UsageError(what + " path is required");
  if (!fs::is_regular_file(path)) {
    throw DataError(what + " file not found: " + path.string());
  }
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

fs::path prepared_dir(const ExperimentConfig& c) {
  return c.output_dir() / "prepared";
}

InteractionTable load_prepared_interactions(const ExperimentConfig& c) {
  const auto path = prepared_dir(c) / "interactions.tsv";
  require_file(path, "prepared interactions (run `wcf prepare` first)");
  return load_interactions(path, InteractionFormat::kTab);
}

GenomeTable load_prepared_genome(const ExperimentConfig& c) {
  const auto path = prepared_dir(c) / "genome.csv";
  require_file(path, "prepared genome (run `wcf prepare` first)");
  return load_genome(path);
}

std::vector<std::string> selected_algorithms(const std::string& algorithm) {
  if (algorithm == "both") return {"wf", "wcf"};
  return {algorithm};
}

// fold<f>.json / fold<f> entries of a directory, ordered by f.
std::vector<std::pair<int, fs::path>> fold_entries(const fs::path& dir,
                                                   bool files) {
  std::vector<std::pair<int, fs::path>> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (files ? !entry.is_regular_file() : !entry.is_directory()) continue;
    std::string name = entry.path().filename().string();
    if (files) {
      if (entry.path().extension() != ".json") continue;
      name = entry.path().stem().string();
    }
    if (name.rfind("fold", 0) != 0) continue;
    const auto f = detail::parse_int(std::string_view(name).substr(4));
    if (f && *f >= 0) out.emplace_back(static_cast<int>(*f), entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<SimplexVector> user_preferences(const ColdStartSplit& split,
                                            std::vector<UserId>& users) {
  std::unordered_map<ItemId, Eigen::Index> index;
  for (std::size_t i = 0; i < split.interacted_items.size(); ++i) {
    index[split.interacted_items[i]] = static_cast<Eigen::Index>(i);
  }
  std::map<UserId, UserInteractions> by_user;
  for (const auto& r : split.train.records) {
    auto& ui = by_user[r.user];
    ui.user_id = r.user;
    ui.counts.emplace_back(index.at(r.item), r.rating);
  }
  const auto n = static_cast<Eigen::Index>(split.interacted_items.size());
  std::vector<SimplexVector> prefs;
  users.clear();
  for (const auto& [u, ui] : by_user) {
    users.push_back(u);
    prefs.push_back(estimate_preference(ui, n));
  }
  return prefs;
}

json split_summary(const ColdStartSplit& split) {
  json j;
  j["ratio"] = to_string(split.ratio);
  j["fold"] = split.fold_index;
  j["interacted_items"] = split.interacted_items.size();
  j["cold_items"] = split.cold_items.size();
  j["train_interactions"] = split.train.records.size();
  j["test_interactions"] = split.test.records.size();
  return j;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw UsageError("--gamma must be a positive finite number");
  }
  if (latent_dim < 1) throw UsageError("--latent-dim must be >= 1");
  if (scope < 1) throw UsageError("--scope must be >= 1");
  if (folds < 0) throw UsageError("--folds must be >= 0");
  if (!(tol > 0.0)) throw UsageError("--tol must be positive");
  if (max_outer < 1) throw UsageError("--max-outer must be >= 1");
  if (!(inner_tol > 0.0)) throw UsageError("--inner-tol must be positive");
  if (inner_max_iter < 1) throw UsageError("--inner-max-iter must be >= 1");
  if (!(threshold >= 0.0)) throw UsageError("--threshold must be >= 0");
  if (algorithm != "wf" && algorithm != "wcf" && algorithm != "both") {
    throw UsageError("--algorithm must be wf, wcf or both");
  }
  try {
    parse_split_ratio(ratio);
    parse_interaction_format(format);
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
  if (folds > partition_count(parse_split_ratio(ratio))) {
    throw UsageError("--folds exceeds the number of folds for ratio " + ratio);
  }
}

fs::path ExperimentConfig::output_dir() const {
  if (!out.empty()) return out;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) {
    return fs::path(env);
  }
  return fs::path("wcf_out");
}

std::string ratio_tag(const std::string& ratio) {
  std::string tag = to_string(parse_split_ratio(ratio));
  const auto colon = tag.find(':');
  return tag.substr(0, colon) + "to" + tag.substr(colon + 1);
}

PrepareResult cmd_prepare(const ExperimentConfig& config, std::ostream& log) {
  config.validate();
  require_file(config.interactions, "interactions");
  require_file(config.genome, "genome");
  if (!config.item_map.empty()) require_file(config.item_map, "item map");

  InteractionTable table = load_interactions(
      config.interactions, parse_interaction_format(config.format));
  PrepareResult result;
  result.malformed_lines = table.malformed_lines;
  if (!config.item_map.empty()) {
    table = remap_items(table, load_item_map(config.item_map));
  }
  table = binarize(table, config.threshold);
  GenomeTable genome = load_genome(config.genome);
  result.genome_missing_entries = genome.missing_entries;
  auto [filtered, kept_genome] = filter_catalog(table, genome);
  result.stats = compute_stats(filtered);

  const auto dir = prepared_dir(config);
  fs::create_directories(dir);
  write_interactions(filtered, dir / "interactions.tsv");
  write_genome(kept_genome, dir / "genome.csv");
  json stats;
  stats["users"] = result.stats.users;
  stats["items"] = result.stats.items;
  stats["interactions"] = result.stats.interactions;
  stats["density"] = result.stats.density;
  stats["tags"] = kept_genome.tag_ids.size();
  stats["threshold"] = config.threshold;
  stats["malformed_lines"] = result.malformed_lines;
  stats["genome_missing_entries"] = result.genome_missing_entries;
  write_json(stats, dir / "stats.json");

  log << "prepared " << result.stats.users << " users, " << result.stats.items
      << " items, " << result.stats.interactions << " interactions (density "
      << detail::format_double(result.stats.density) << ")\n";
  if (result.malformed_lines) {
    log << "skipped " << result.malformed_lines << " malformed lines\n";
  }
  return result;
}

std::vector<fs::path> cmd_split(const ExperimentConfig& config,
                                std::ostream& log) {
  config.validate();
  const InteractionTable table = load_prepared_interactions(config);
  const SplitRatio ratio = parse_split_ratio(config.ratio);
  const auto splits = cold_start_split(table, ratio, config.folds, config.seed);
  const auto dir = config.output_dir() / "splits" / ratio_tag(config.ratio);
  fs::create_directories(dir);
  for (const auto& [f, stale] : fold_entries(dir, true)) fs::remove(stale);
  std::vector<fs::path> paths;
  for (const auto& split : splits) {
    const auto path = dir / ("fold" + std::to_string(split.fold_index) + ".json");
    write_split_manifest(split, path);
    paths.push_back(path);
    log << "split " << to_string(ratio) << " fold " << split.fold_index << ": "
        << split.interacted_items.size() << " interacted, "
        << split.cold_items.size() << " cold, " << split.train.records.size()
        << " train / " << split.test.records.size() << " test interactions\n";
  }
  return paths;
}

std::map<UserId, RankedList> predict_wf(const ColdStartSplit& split,
                                        const GenomeTable& genome,
                                        double gamma) {
  std::vector<UserId> users;
  const auto prefs = user_preferences(split, users);
  const GibbsKernel kernel(
      build_cost_matrix(genome, split.interacted_items, split.cold_items),
      gamma);
  std::map<UserId, RankedList> out;
  for (std::size_t u = 0; u < users.size(); ++u) {
    out.emplace(users[u],
                rank_items(infer_cold(prefs[u], kernel), split.cold_items));
  }
  return out;
}

void cmd_train(const ExperimentConfig& config, std::ostream& log) {
  config.validate();
  const InteractionTable table = load_prepared_interactions(config);
  const GenomeTable genome = load_prepared_genome(config);
  const std::string tag = ratio_tag(config.ratio);
  const auto manifests =
      fold_entries(config.output_dir() / "splits" / tag, true);
  if (manifests.empty()) {
    throw DataError("no split manifests for ratio " + config.ratio +
                    " (run `wcf split` first)");
  }

  for (const std::string& algorithm : selected_algorithms(config.algorithm)) {
    for (const auto& [fold, manifest] : manifests) {
      const ColdStartSplit split = read_split_manifest(manifest, table);
      const auto run_dir = config.output_dir() / "runs" / tag / algorithm /
                           ("fold" + std::to_string(fold));
      fs::create_directories(run_dir);

      json run;
      run["algorithm"] = algorithm;
      run["gamma"] = config.gamma;
      run["seed"] = config.seed;
      run["split"] = split_summary(split);

      std::map<UserId, RankedList> predictions;
      if (algorithm == "wf") {
        predictions = predict_wf(split, genome, config.gamma);
      } else {
        std::vector<UserId> users;
        const auto prefs = user_preferences(split, users);
        const CostMatrix costs =
            build_cost_matrix(genome, split.interacted_items, split.cold_items);
        const auto limit = std::min<Eigen::Index>(
            costs.cols(), static_cast<Eigen::Index>(prefs.size()));
        int k = config.latent_dim;
        if (k > limit) {
          log << "fold " << fold << ": latent dimension " << k
              << " exceeds min(cold items, users) = " << limit
              << ", using " << limit << "\n";
          k = static_cast<int>(limit);
        }
        WcfOptions opts;
        opts.tol = config.tol;
        opts.max_outer = config.max_outer;
        opts.inner_tol = config.inner_tol;
        opts.inner_max_iter = config.inner_max_iter;
        opts.seed = config.seed + static_cast<std::uint64_t>(fold);
        const FactorModel model =
            train_wcf(prefs, costs, k, config.gamma, opts, users);
        save_model(model, run_dir / "model");
        for (UserId u : users) {
          predictions.emplace(u, rank_items(predict_user(model, u),
                                            split.cold_items));
        }
        run["k"] = k;
        run["objective_trace"] = model.objective_trace;
        run["outer_iterations"] = model.outer_iterations;
        run["reinitializations"] = model.reinitializations;
        run["converged"] = model.converged;
        run["max_simplex_violation"] = model.max_simplex_violation;
        log << "wcf " << config.ratio << " fold " << fold << ": "
            << model.outer_iterations << " outer iterations, objective "
            << detail::format_double(model.objective_trace.empty()
                                         ? 0.0
                                         : model.objective_trace.back())
            << (model.converged ? "" : " (not converged)") << "\n";
      }
      run["users"] = predictions.size();
      write_predictions(predictions, run_dir / "predictions.tsv");
      write_json(run, run_dir / "run.json");
      log << algorithm << " " << config.ratio << " fold " << fold << ": "
          << predictions.size() << " users ranked over "
          << split.cold_items.size() << " cold items\n";
    }
  }
}

void cmd_evaluate(const ExperimentConfig& config, std::ostream& log) {
  config.validate();
  const InteractionTable table = load_prepared_interactions(config);
  const fs::path runs = config.output_dir() / "runs";

  std::vector<EvaluationReport> reports;
  std::set<std::string> ratio_tags;
  if (fs::is_directory(runs)) {
    for (const auto& entry : fs::directory_iterator(runs)) {
      if (entry.is_directory()) ratio_tags.insert(entry.path().filename());
    }
  }
  for (const std::string& tag : ratio_tags) {
    for (const char* algorithm : kAlgorithms) {
      for (const auto& [fold, dir] :
           fold_entries(runs / tag / algorithm, false)) {
        const auto pred_path = dir / "predictions.tsv";
        if (!fs::is_regular_file(pred_path)) continue;
        const auto manifest = config.output_dir() / "splits" / tag /
                              ("fold" + std::to_string(fold) + ".json");
        require_file(manifest, "split manifest");
        const ColdStartSplit split = read_split_manifest(manifest, table);
        EvaluationReport rep =
            evaluate_run(read_predictions(pred_path), split.test, config.scope);
        rep.algorithm = algorithm;
        rep.ratio = to_string(split.ratio);
        rep.fold_index = fold;
        reports.push_back(std::move(rep));
      }
    }
  }
  if (reports.empty()) {
    throw DataError("no predictions found under " + runs.string() +
                    " (run `wcf train` first)");
  }
  std::stable_sort(reports.begin(), reports.end(),
                   [](const EvaluationReport& a, const EvaluationReport& b) {
                     return std::tie(a.ratio, a.algorithm, a.fold_index) <
                            std::tie(b.ratio, b.algorithm, b.fold_index);
                   });

  const fs::path dir = config.output_dir() / "reports";
  fs::create_directories(dir);
  write_user_records(reports, dir / "user_records.tsv");
  write_summary(reports, dir / "summary.tsv");

  struct Mean {
    double map = 0, ndcg = 0, recall = 0;
    int folds = 0;
    std::size_t users = 0;
  };
  // ratio -> algorithm -> fold-averaged metrics
  std::map<std::string, std::map<std::string, Mean>> means;
  for (const auto& rep : reports) {
    auto& m = means[rep.ratio][rep.algorithm];
    m.map += rep.map;
    m.ndcg += rep.mean_ndcg;
    m.recall += rep.mean_recall;
    m.users += rep.per_user.size();
    ++m.folds;
  }
  for (auto& [ratio, algs] : means) {
    for (auto& [alg, m] : algs) {
      m.map /= m.folds;
      m.ndcg /= m.folds;
      m.recall /= m.folds;
    }
  }

  const std::string ndcg = "ndcg@" + std::to_string(config.scope);
  const std::string recall = "recall@" + std::to_string(config.scope);
  {
    std::ofstream out(dir / "comparison.tsv", std::ios::binary);
    if (!out) throw DataError("cannot write comparison table");
    out << "ratio\tmetric";
    for (const char* a : kAlgorithms) out << '\t' << a;
    out << "\trelative_change\n";
    for (const auto& [ratio, algs] : means) {
      const auto row = [&](const std::string& metric, double Mean::*field) {
        out << ratio << '\t' << metric;
        std::optional<double> wf, wcf;
        for (const char* a : kAlgorithms) {
          const auto it = algs.find(a);
          out << '\t';
          if (it == algs.end()) {
            out << "NA";
            continue;
          }
          out << detail::format_double(it->second.*field);
          (std::string(a) == "wf" ? wf : wcf) = it->second.*field;
        }
        out << '\t';
        if (wf && wcf && *wf != 0.0) {
          out << detail::format_double((*wcf - *wf) / *wf);
        } else {
          out << "NA";
        }
        out << '\n';
      };
      row("map", &Mean::map);
      row(ndcg, &Mean::ndcg);
      row(recall, &Mean::recall);
    }
  }

  json summary;
  summary["scope"] = config.scope;
  summary["results"] = json::array();
  for (const auto& [ratio, algs] : means) {
    for (const auto& [alg, m] : algs) {
      json r;
      r["ratio"] = ratio;
      r["algorithm"] = alg;
      r["folds"] = m.folds;
      r["users"] = m.users;
      r["map"] = m.map;
      r[ndcg] = m.ndcg;
      r[recall] = m.recall;
      summary["results"].push_back(std::move(r));
    }
  }
  summary["folds"] = json::array();
  for (const auto& rep : reports) {
    json f;
    f["ratio"] = rep.ratio;
    f["algorithm"] = rep.algorithm;
    f["fold"] = rep.fold_index;
    f["users"] = rep.per_user.size();
    f["excluded_users"] = rep.excluded_users;
    f["map"] = rep.map;
    f[ndcg] = rep.mean_ndcg;
    f[recall] = rep.mean_recall;
    summary["folds"].push_back(std::move(f));
  }
  write_json(summary, dir / "summary.json");

  for (const auto& [ratio, algs] : means) {
    for (const auto& [alg, m] : algs) {
      log << ratio << ' ' << alg << ": MAP " << detail::format_double(m.map)
          << ", " << ndcg << ' ' << detail::format_double(m.ndcg) << ", "
          << recall << ' ' << detail::format_double(m.recall) << " over "
          << m.folds << " folds\n";
    }
  }
}

std::map<UserId, RankedList> read_predictions(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::map<UserId, RankedList> out;
  std::map<UserId, std::int64_t> last_rank;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("user", 0) == 0) continue;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split(line, '\t');
    std::optional<std::int64_t> user, rank, item;
    std::optional<double> score;
    if (fields.size() == 4) {
      user = detail::parse_int(fields[0]);
      rank = detail::parse_int(fields[1]);
      item = detail::parse_int(fields[2]);
      score = detail::parse_double(fields[3]);
    }
    if (!user || !rank || !item || !score) {
      throw DataError("malformed prediction line " + std::to_string(line_no) +
                      " in " + path.string());
    }
    auto& prev = last_rank[*user];
    if (*rank != prev + 1) {
      throw DataError("ranks out of order on line " + std::to_string(line_no) +
                      " in " + path.string());
    }
    prev = *rank;
    auto& list = out[*user];
    list.items.push_back(*item);
    list.scores.push_back(*score);
  }
  return out;
}

void write_predictions(const std::map<UserId, RankedList>& predictions,
                       const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "user\trank\titem\tscore\n";
  for (const auto& [user, list] : predictions) {
    for (std::size_t r = 0; r < list.items.size(); ++r) {
      out << user << '\t' << r + 1 << '\t' << list.items[r] << '\t'
          << detail::format_double(list.scores[r]) << '\n';
    }
  }
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace wcf::cli
