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

#include "wcf/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "wcf/detail/text_util.hpp"
#include "wcf/error.hpp"

namespace wcf {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    fn(text.substr(start, end - start), line_no);
    start = end + 1;
  }
}

// Sorts by (user, item) and keeps the latest timestamp per pair; among equal
// timestamps the later record in input order wins.
void normalize(std::vector<Interaction>& records) {
  std::stable_sort(records.begin(), records.end(),
                   [](const Interaction& a, const Interaction& b) {
                     if (a.user != b.user) return a.user < b.user;
                     if (a.item != b.item) return a.item < b.item;
                     return a.timestamp < b.timestamp;
                   });
  std::vector<Interaction> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (!out.empty() && out.back().user == r.user && out.back().item == r.item) {
      out.back() = r;
    } else {
      out.push_back(r);
    }
  }
  records = std::move(out);
}

std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % n;
  while (true) {
    const std::uint64_t x = rng();
    if (x < limit) return x % n;
  }
}

InteractionTable restrict_items(const InteractionTable& table,
                                const std::vector<ItemId>& sorted_items) {
  InteractionTable out;
  for (const auto& r : table.records) {
    if (std::binary_search(sorted_items.begin(), sorted_items.end(), r.item)) {
      out.records.push_back(r);
    }
  }
  return out;
}

}  // namespace

std::vector<UserId> InteractionTable::users() const {
  std::vector<UserId> out;
  for (const auto& r : records) {
    if (out.empty() || out.back() != r.user) out.push_back(r.user);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<ItemId> InteractionTable::items() const {
  std::vector<ItemId> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.item);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

InteractionFormat parse_interaction_format(std::string_view name) {
  if (name == "tab" || name == "tsv" || name == "100k") {
    return InteractionFormat::kTab;
  }
  if (name == "double-colon" || name == "dat" || name == "::") {
    return InteractionFormat::kDoubleColon;
  }
  throw DomainError("unknown interaction format '" + std::string(name) + "'");
}

InteractionTable parse_interactions(std::string_view text,
                                    InteractionFormat format) {
  const std::string_view delim =
      format == InteractionFormat::kTab ? "\t" : "::";
  InteractionTable table;
  std::size_t lines = 0;
  for_each_line(text, [&](std::string_view line, std::size_t) {
    line = detail::trim(line);
    if (line.empty()) return;
    ++lines;
    const auto fields = detail::split(line, delim);
    if (fields.size() != 4) {
      ++table.malformed_lines;
      return;
    }
    const auto user = detail::parse_int(fields[0]);
    const auto item = detail::parse_int(fields[1]);
    const auto rating = detail::parse_double(fields[2]);
    const auto ts = detail::parse_int(fields[3]);
    if (!user || !item || !rating || !ts || !std::isfinite(*rating) ||
        *rating < 0.0) {
      ++table.malformed_lines;
      return;
    }
    table.records.push_back({*user, *item, *rating, *ts});
  });
  if (table.malformed_lines * 100 > lines) {
    throw DataError(std::to_string(table.malformed_lines) + " of " +
                    std::to_string(lines) +
                    " interaction lines are malformed (limit 1%)");
  }
  normalize(table.records);
  return table;
}

InteractionTable load_interactions(const fs::path& path,
                                   InteractionFormat format) {
  try {
    return parse_interactions(read_file(path), format);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

GenomeTable parse_genome(std::string_view text) {
  struct Entry {
    ItemId item;
    std::int64_t tag;
    double relevance;
  };
  std::vector<Entry> entries;
  std::set<std::int64_t> tags;
  bool header_seen = false;
  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    line = detail::trim(line);
    if (line.empty()) return;
    const auto fields = detail::split(line, ',');
    if (!header_seen) {
      header_seen = true;
      if (fields.empty() || !detail::parse_int(fields[0])) return;
    }
    const auto item = fields.size() == 3 ? detail::parse_int(fields[0])
                                         : std::nullopt;
    const auto tag = fields.size() == 3 ? detail::parse_int(fields[1])
                                        : std::nullopt;
    const auto rel = fields.size() == 3 ? detail::parse_double(fields[2])
                                        : std::nullopt;
    if (!item || !tag || !rel) {
      throw DataError("malformed genome line " + std::to_string(line_no));
    }
    if (!(*rel >= 0.0 && *rel <= 1.0)) {
      throw DataError("genome relevance outside [0,1] on line " +
                      std::to_string(line_no));
    }
    entries.push_back({*item, *tag, *rel});
    tags.insert(*tag);
  });

  GenomeTable g;
  g.tag_ids.assign(tags.begin(), tags.end());
  std::unordered_map<std::int64_t, Eigen::Index> tag_index;
  for (std::size_t t = 0; t < g.tag_ids.size(); ++t) {
    tag_index[g.tag_ids[t]] = static_cast<Eigen::Index>(t);
  }
  const auto width = static_cast<Eigen::Index>(g.tag_ids.size());
  std::size_t filled = 0;
  for (const auto& e : entries) {
    auto [it, inserted] = g.relevance.try_emplace(e.item, Vector::Zero(width));
    it->second[tag_index[e.tag]] = e.relevance;
    ++filled;
  }
  const std::size_t expected = g.relevance.size() * g.tag_ids.size();
  g.missing_entries = expected > filled ? expected - filled : 0;
  return g;
}

GenomeTable load_genome(const fs::path& path) {
  try {
    return parse_genome(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_interactions(const InteractionTable& table, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& r : table.records) {
    out << r.user << '\t' << r.item << '\t' << detail::format_double(r.rating)
        << '\t' << r.timestamp << '\n';
  }
}

void write_genome(const GenomeTable& genome, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "movieId,tagId,relevance\n";
  for (const auto& [item, vec] : genome.relevance) {
    for (std::size_t t = 0; t < genome.tag_ids.size(); ++t) {
      out << item << ',' << genome.tag_ids[t] << ','
          << detail::format_double(vec[static_cast<Eigen::Index>(t)]) << '\n';
    }
  }
}

std::map<ItemId, ItemId> load_item_map(const fs::path& path) {
  const std::string text = read_file(path);
  std::map<ItemId, ItemId> out;
  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    line = detail::trim(line);
    if (line.empty() || line.front() == '#') return;
    std::string normalized(line);
    std::replace(normalized.begin(), normalized.end(), ',', ' ');
    std::replace(normalized.begin(), normalized.end(), '\t', ' ');
    std::istringstream ss(normalized);
    std::string a, b;
    ss >> a >> b;
    const auto from = detail::parse_int(a);
    const auto to = detail::parse_int(b);
    if (!from || !to) {
      // Tolerate a header line.
      if (line_no == 1) return;
      throw DataError(path.string() + ": malformed item map line " +
                      std::to_string(line_no));
    }
    out[*from] = *to;
  });
  return out;
}

InteractionTable remap_items(const InteractionTable& table,
                             const std::map<ItemId, ItemId>& item_map) {
  InteractionTable out;
  out.malformed_lines = table.malformed_lines;
  for (const auto& r : table.records) {
    const auto it = item_map.find(r.item);
    if (it == item_map.end()) continue;
    Interaction mapped = r;
    mapped.item = it->second;
    out.records.push_back(mapped);
  }
  normalize(out.records);
  return out;
}

InteractionTable binarize(const InteractionTable& table, double threshold) {
  InteractionTable out;
  out.malformed_lines = table.malformed_lines;
  for (const auto& r : table.records) {
    if (r.rating >= threshold) {
      Interaction kept = r;
      kept.rating = 1.0;
      out.records.push_back(kept);
    }
  }
  return out;
}

std::pair<InteractionTable, GenomeTable> filter_catalog(
    const InteractionTable& table, const GenomeTable& genome) {
  // Users exist only through their interactions, so one pass is stable.
  InteractionTable kept;
  kept.malformed_lines = table.malformed_lines;
  for (const auto& r : table.records) {
    if (genome.relevance.count(r.item)) kept.records.push_back(r);
  }
  if (kept.records.empty()) {
    throw DataError("no interactions remain after catalog filtering");
  }
  GenomeTable g;
  g.tag_ids = genome.tag_ids;
  for (ItemId item : kept.items()) {
    g.relevance.emplace(item, genome.relevance.at(item));
  }
  g.missing_entries = genome.missing_entries;
  return {std::move(kept), std::move(g)};
}

CostMatrix build_cost_matrix(const GenomeTable& genome,
                             const std::vector<ItemId>& rows,
                             const std::vector<ItemId>& cols) {
  const auto width = static_cast<Eigen::Index>(genome.tag_ids.size());
  auto normalized = [&](const std::vector<ItemId>& ids) {
    Matrix a(static_cast<Eigen::Index>(ids.size()), width);
    for (std::size_t r = 0; r < ids.size(); ++r) {
      const auto it = genome.relevance.find(ids[r]);
      if (it == genome.relevance.end()) {
        throw DataError("item " + std::to_string(ids[r]) + " has no genome");
      }
      const double norm = it->second.norm();
      if (!(norm > 0.0)) {
        throw DataError("item " + std::to_string(ids[r]) +
                        " has an all-zero genome; cosine is undefined");
      }
      a.row(static_cast<Eigen::Index>(r)) = it->second.transpose() / norm;
    }
    return a;
  };
  const Matrix a = normalized(rows);
  const Matrix b = normalized(cols);
  Matrix costs = (1.0 - (a * b.transpose()).array()).cwiseMax(0.0).cwiseMin(2.0);
  return CostMatrix(std::move(costs), rows, cols);
}

DatasetStats compute_stats(const InteractionTable& table) {
  DatasetStats s;
  s.users = table.users().size();
  s.items = table.items().size();
  s.interactions = table.records.size();
  if (s.users && s.items) {
    s.density = static_cast<double>(s.interactions) /
                (static_cast<double>(s.users) * static_cast<double>(s.items));
  }
  return s;
}

SplitRatio parse_split_ratio(std::string_view text) {
  if (text == "3:1") return SplitRatio::k3to1;
  if (text == "1:1") return SplitRatio::k1to1;
  if (text == "1:3") return SplitRatio::k1to3;
  throw DomainError("unknown split ratio '" + std::string(text) +
                    "' (expected 3:1, 1:1 or 1:3)");
}

std::string to_string(SplitRatio ratio) {
  switch (ratio) {
    case SplitRatio::k3to1: return "3:1";
    case SplitRatio::k1to1: return "1:1";
    case SplitRatio::k1to3: return "1:3";
  }
  return "?";
}

int partition_count(SplitRatio ratio) {
  return ratio == SplitRatio::k1to1 ? 2 : 4;
}

ColdStartSplit materialize_split(const InteractionTable& table,
                                 SplitRatio ratio, int fold_index,
                                 std::uint64_t seed,
                                 std::vector<ItemId> interacted,
                                 std::vector<ItemId> cold) {
  std::sort(interacted.begin(), interacted.end());
  std::sort(cold.begin(), cold.end());
  std::vector<ItemId> overlap;
  std::set_intersection(interacted.begin(), interacted.end(), cold.begin(),
                        cold.end(), std::back_inserter(overlap));
  if (!overlap.empty()) {
    throw DataError("interacted and cold item sets overlap on item " +
                    std::to_string(overlap.front()));
  }
  ColdStartSplit split;
  split.ratio = ratio;
  split.fold_index = fold_index;
  split.seed = seed;
  split.train = restrict_items(table, interacted);
  split.test = restrict_items(table, cold);
  split.interacted_items = std::move(interacted);
  split.cold_items = std::move(cold);
  return split;
}

std::vector<ColdStartSplit> cold_start_split(const InteractionTable& table,
                                             SplitRatio ratio, int folds,
                                             std::uint64_t seed) {
  const int parts = partition_count(ratio);
  if (folds < 0 || folds > parts) {
    throw DomainError("fold count " + std::to_string(folds) +
                      " outside [0, " + std::to_string(parts) + "]");
  }
  if (folds == 0) folds = parts;
  std::vector<ItemId> items = table.items();
  if (items.size() < static_cast<std::size_t>(parts)) {
    throw DomainError("cannot split " + std::to_string(items.size()) +
                      " items into " + std::to_string(parts) + " subsets");
  }
  std::mt19937_64 rng(seed);
  for (std::size_t i = items.size() - 1; i > 0; --i) {
    std::swap(items[i], items[bounded(rng, i + 1)]);
  }
  const std::size_t n = items.size();
  // Subset b covers shuffled positions [b n / parts, (b + 1) n / parts).
  std::vector<int> owner(n);
  for (int b = 0; b < parts; ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * n / parts;
    const std::size_t hi = static_cast<std::size_t>(b + 1) * n / parts;
    for (std::size_t pos = lo; pos < hi; ++pos) owner[pos] = b;
  }

  std::vector<ColdStartSplit> out;
  for (int f = 0; f < folds; ++f) {
    std::vector<ItemId> interacted;
    std::vector<ItemId> cold;
    for (std::size_t pos = 0; pos < n; ++pos) {
      const bool in_subset = owner[pos] == f;
      const bool is_cold = ratio == SplitRatio::k1to3 ? !in_subset : in_subset;
      (is_cold ? cold : interacted).push_back(items[pos]);
    }
    out.push_back(materialize_split(table, ratio, f, seed,
                                    std::move(interacted), std::move(cold)));
  }
  return out;
}

void write_split_manifest(const ColdStartSplit& split, const fs::path& path) {
  nlohmann::ordered_json j;
  j["format"] = "wcf-split";
  j["version"] = 1;
  j["ratio"] = to_string(split.ratio);
  j["partitions"] = partition_count(split.ratio);
  j["fold"] = split.fold_index;
  j["seed"] = split.seed;
  j["train_interactions"] = split.train.records.size();
  j["test_interactions"] = split.test.records.size();
  j["interacted_items"] = split.interacted_items;
  j["cold_items"] = split.cold_items;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

ColdStartSplit read_split_manifest(const fs::path& path,
                                   const InteractionTable& table) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read split manifest " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("format") != "wcf-split") {
      throw DataError(path.string() + " is not a split manifest");
    }
    return materialize_split(
        table, parse_split_ratio(j.at("ratio").get<std::string>()),
        j.at("fold").get<int>(), j.at("seed").get<std::uint64_t>(),
        j.at("interacted_items").get<std::vector<ItemId>>(),
        j.at("cold_items").get<std::vector<ItemId>>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed split manifest " + path.string() + ": " +
                    e.what());
  }
}

}  // namespace wcf
