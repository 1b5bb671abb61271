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

#include "wcf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <tuple>

#include "wcf/detail/text_util.hpp"
#include "wcf/error.hpp"

namespace wcf {

namespace {

void check_positives(const ItemSet& positives) {
  if (positives.empty()) {
    throw DomainError("metric undefined for a user without held-out positives");
  }
}

void check_scope(int scope) {
  if (scope < 1) throw DomainError("scope must be >= 1");
}

std::string ndcg_header(int scope) { return "ndcg@" + std::to_string(scope); }
std::string recall_header(int scope) {
  return "recall@" + std::to_string(scope);
}

}  // namespace

double average_precision(const RankedList& list, const ItemSet& positives) {
  check_positives(positives);
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < list.items.size(); ++r) {
    if (positives.count(list.items[r])) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  if (hits != positives.size()) {
    throw DomainError("ranked list does not contain every positive item");
  }
  return sum / static_cast<double>(positives.size());
}

double ndcg_at(const RankedList& list, const ItemSet& positives, int scope) {
  check_positives(positives);
  check_scope(scope);
  const auto cutoff =
      std::min(list.items.size(), static_cast<std::size_t>(scope));
  double dcg = 0.0;
  for (std::size_t r = 0; r < cutoff; ++r) {
    if (positives.count(list.items[r])) {
      dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    }
  }
  const auto ideal_hits =
      std::min(positives.size(), static_cast<std::size_t>(scope));
  double idcg = 0.0;
  for (std::size_t r = 0; r < ideal_hits; ++r) {
    idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  }
  return dcg / idcg;
}

double recall_at(const RankedList& list, const ItemSet& positives, int scope) {
  check_positives(positives);
  check_scope(scope);
  const auto cutoff =
      std::min(list.items.size(), static_cast<std::size_t>(scope));
  std::size_t hits = 0;
  for (std::size_t r = 0; r < cutoff; ++r) {
    hits += positives.count(list.items[r]);
  }
  return static_cast<double>(hits) / static_cast<double>(positives.size());
}

EvaluationReport evaluate_run(const std::map<UserId, RankedList>& predictions,
                              const InteractionTable& test, int scope) {
  check_scope(scope);
  std::map<UserId, ItemSet> positives;
  for (const auto& r : test.records) positives[r.user].insert(r.item);

  EvaluationReport report;
  report.scope = scope;
  std::set<UserId> users;
  for (const auto& [u, _] : predictions) users.insert(u);
  for (const auto& [u, _] : positives) users.insert(u);

  for (UserId u : users) {
    const auto pred = predictions.find(u);
    const auto pos = positives.find(u);
    if (pred == predictions.end() || pos == positives.end()) {
      ++report.excluded_users;
      continue;
    }
    UserMetrics m;
    m.average_precision = average_precision(pred->second, pos->second);
    m.ndcg = ndcg_at(pred->second, pos->second, scope);
    m.recall = recall_at(pred->second, pos->second, scope);
    report.per_user.emplace(u, m);
  }
  if (report.per_user.empty()) {
    throw DataError("no evaluable users: no user has both a prediction and "
                    "held-out positives");
  }
  for (const auto& [u, m] : report.per_user) {
    report.map += m.average_precision;
    report.mean_ndcg += m.ndcg;
    report.mean_recall += m.recall;
  }
  const auto n = static_cast<double>(report.per_user.size());
  report.map /= n;
  report.mean_ndcg /= n;
  report.mean_recall /= n;
  return report;
}

void write_user_records(const std::vector<EvaluationReport>& reports,
                        const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  const int scope = reports.empty() ? 20 : reports.front().scope;
  out << "algorithm\tratio\tfold\tuser\tap\t" << ndcg_header(scope) << '\t'
      << recall_header(scope) << '\n';
  for (const auto& rep : reports) {
    for (const auto& [u, m] : rep.per_user) {
      out << rep.algorithm << '\t' << rep.ratio << '\t' << rep.fold_index
          << '\t' << u << '\t' << detail::format_double(m.average_precision)
          << '\t' << detail::format_double(m.ndcg) << '\t'
          << detail::format_double(m.recall) << '\n';
    }
  }
}

void write_summary(const std::vector<EvaluationReport>& reports,
                   const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  const int scope = reports.empty() ? 20 : reports.front().scope;
  out << "algorithm\tratio\tfold\tusers\texcluded\tmap\t" << ndcg_header(scope)
      << '\t' << recall_header(scope) << '\n';

  struct Acc {
    double map = 0, ndcg = 0, recall = 0;
    std::size_t folds = 0, users = 0, excluded = 0;
  };
  std::map<std::pair<std::string, std::string>, Acc> means;
  for (const auto& rep : reports) {
    out << rep.algorithm << '\t' << rep.ratio << '\t' << rep.fold_index << '\t'
        << rep.per_user.size() << '\t' << rep.excluded_users << '\t'
        << detail::format_double(rep.map) << '\t'
        << detail::format_double(rep.mean_ndcg) << '\t'
        << detail::format_double(rep.mean_recall) << '\n';
    auto& a = means[{rep.algorithm, rep.ratio}];
    a.map += rep.map;
    a.ndcg += rep.mean_ndcg;
    a.recall += rep.mean_recall;
    a.users += rep.per_user.size();
    a.excluded += rep.excluded_users;
    ++a.folds;
  }
  for (const auto& [key, a] : means) {
    const auto f = static_cast<double>(a.folds);
    out << key.first << '\t' << key.second << "\tmean\t" << a.users << '\t'
        << a.excluded << '\t' << detail::format_double(a.map / f) << '\t'
        << detail::format_double(a.ndcg / f) << '\t'
        << detail::format_double(a.recall / f) << '\n';
  }
}

}  // namespace wcf
