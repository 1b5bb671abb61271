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

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <unordered_set>
#include <vector>

#include "wcf/dataio.hpp"
#include "wcf/wfilter.hpp"

namespace wcf {

using ItemSet = std::unordered_set<ItemId>;

/// Mean of Precision@r over the ranks r holding a positive. The list ranks
/// every cold item, so the denominator is |positives|.
double average_precision(const RankedList& list, const ItemSet& positives);

/// Binary-relevance NDCG: sum_{r<=R} hit_r / log2(r + 1), normalized by the
/// ideal DCG over min(R, |positives|) hits.
double ndcg_at(const RankedList& list, const ItemSet& positives, int scope);

double recall_at(const RankedList& list, const ItemSet& positives, int scope);

struct UserMetrics {
  double average_precision = 0.0;
  double ndcg = 0.0;
  double recall = 0.0;
};

struct EvaluationReport {
  int scope = 20;
  std::map<UserId, UserMetrics> per_user;
  double map = 0.0;
  double mean_ndcg = 0.0;
  double mean_recall = 0.0;
  std::size_t excluded_users = 0;

  // Run metadata, filled by the caller.
  std::string algorithm;
  std::string ratio;
  int fold_index = 0;
};

/// Positives are each user's test items. Users without positives, or without
/// a prediction, are excluded and counted; means run over the rest.
EvaluationReport evaluate_run(const std::map<UserId, RankedList>& predictions,
                              const InteractionTable& test, int scope = 20);

/// One row per (fold, user):
///   algorithm ratio fold user ap ndcg@R recall@R
void write_user_records(const std::vector<EvaluationReport>& reports,
                        const std::filesystem::path& path);

/// One row per fold plus a "mean" row per (algorithm, ratio):
///   algorithm ratio fold users excluded map ndcg@R recall@R
void write_summary(const std::vector<EvaluationReport>& reports,
                   const std::filesystem::path& path);

}  // namespace wcf
