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

// MovieLens-style interaction and tag-genome ingestion, preprocessing, cost
// matrix construction and item-level cold-start splits.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wcf/transport.hpp"

namespace wcf {

struct Interaction {
  UserId user = 0;
  ItemId item = 0;
  double rating = 0.0;
  std::int64_t timestamp = 0;

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

/// Records sorted by (user, item) with at most one record per pair.
struct InteractionTable {
  std::vector<Interaction> records;
  std::size_t malformed_lines = 0;

  std::vector<UserId> users() const;  // sorted, unique
  std::vector<ItemId> items() const;  // sorted, unique
};

/// Dense tag-relevance vectors keyed by item, all of length tag_ids.size().
struct GenomeTable {
  std::vector<std::int64_t> tag_ids;
  std::map<ItemId, Vector> relevance;
  std::size_t missing_entries = 0;  // (item, tag) pairs defaulted to zero
};

enum class InteractionFormat {
  kTab,          // "user<TAB>item<TAB>rating<TAB>timestamp" (ML-100k u.data)
  kDoubleColon,  // "user::item::rating::timestamp" (ML-1M/10M ratings.dat)
};

InteractionFormat parse_interaction_format(std::string_view name);

/// Parses an interaction file. Malformed lines are skipped and counted;
/// more than 1% malformed is a DataError. Duplicate (user, item) pairs keep
/// the latest timestamp.
InteractionTable load_interactions(const std::filesystem::path& path,
                                   InteractionFormat format);
InteractionTable parse_interactions(std::string_view text,
                                    InteractionFormat format);

/// Long-format genome: header line, then "movieId,tagId,relevance".
GenomeTable load_genome(const std::filesystem::path& path);
GenomeTable parse_genome(std::string_view text);

void write_interactions(const InteractionTable& table,
                        const std::filesystem::path& path);
void write_genome(const GenomeTable& genome, const std::filesystem::path& path);

/// Two-column map from dataset item id to genome item id (whitespace, tab or
/// comma separated; lines starting with '#' ignored).
std::map<ItemId, ItemId> load_item_map(const std::filesystem::path& path);

/// Renames items through the map; unmapped items are dropped.
InteractionTable remap_items(const InteractionTable& table,
                             const std::map<ItemId, ItemId>& item_map);

/// Keeps ratings >= threshold as implicit feedback 1.
InteractionTable binarize(const InteractionTable& table, double threshold = 4.0);

/// Drops interactions on items without a genome, then users left without
/// interactions, and restricts the genome to the remaining items.
std::pair<InteractionTable, GenomeTable> filter_catalog(
    const InteractionTable& table, const GenomeTable& genome);

/// M_ij = 1 - cos(genome(row_i), genome(col_j)), clamped to [0, 2].
CostMatrix build_cost_matrix(const GenomeTable& genome,
                             const std::vector<ItemId>& rows,
                             const std::vector<ItemId>& cols);

struct DatasetStats {
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t interactions = 0;
  double density = 0.0;  // interactions / (users * items)
};

DatasetStats compute_stats(const InteractionTable& table);

enum class SplitRatio { k3to1, k1to1, k1to3 };

SplitRatio parse_split_ratio(std::string_view text);  // "3:1", "1:1", "1:3"
std::string to_string(SplitRatio ratio);
int partition_count(SplitRatio ratio);

struct ColdStartSplit {
  SplitRatio ratio = SplitRatio::k3to1;
  int fold_index = 0;
  std::uint64_t seed = 0;
  std::vector<ItemId> interacted_items;  // V, sorted
  std::vector<ItemId> cold_items;        // C, sorted
  InteractionTable train;                // interactions on V
  InteractionTable test;                 // interactions on C
};

/// Shuffles the items with the seed and cuts them into equal subsets (4 for
/// 3:1 and 1:3, 2 for 1:1). Fold f holds out subset f (3:1, 1:1) or keeps
/// only subset f (1:3). folds = 0 means every fold.
std::vector<ColdStartSplit> cold_start_split(const InteractionTable& table,
                                             SplitRatio ratio, int folds,
                                             std::uint64_t seed);

/// Rebuilds train/test from an item partition.
ColdStartSplit materialize_split(const InteractionTable& table,
                                 SplitRatio ratio, int fold_index,
                                 std::uint64_t seed,
                                 std::vector<ItemId> interacted,
                                 std::vector<ItemId> cold);

void write_split_manifest(const ColdStartSplit& split,
                          const std::filesystem::path& path);
ColdStartSplit read_split_manifest(const std::filesystem::path& path,
                                   const InteractionTable& table);

}  // namespace wcf
