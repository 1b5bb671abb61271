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

#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wcf/detail/text_util.hpp"
#include "wcf/error.hpp"
#include "wcf/factorization.hpp"

namespace wcf {

namespace fs = std::filesystem;

void write_matrix_tsv(const Matrix& m, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << '\t';
      out << detail::format_double(m(i, j));
    }
    out << '\n';
  }
  if (!out) throw DataError("failed writing " + path.string());
}

Matrix read_matrix_tsv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    for (std::string_view field : detail::split(line, '\t')) {
      const auto v = detail::parse_double(field);
      if (!v) {
        throw DataError("bad number '" + std::string(field) + "' in " +
                        path.string());
      }
      row.push_back(*v);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw DataError("ragged matrix in " + path.string());
    }
    rows.push_back(std::move(row));
  }
  Matrix m(static_cast<Eigen::Index>(rows.size()),
           rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

void save_model(const FactorModel& model, const fs::path& dir) {
  fs::create_directories(dir);
  write_matrix_tsv(model.dictionary, dir / "dictionary.tsv");
  write_matrix_tsv(model.loadings, dir / "loadings.tsv");
  nlohmann::ordered_json j;
  j["format"] = "wcf-model";
  j["version"] = 1;
  j["gamma"] = model.gamma;
  j["k"] = model.k;
  j["seed"] = model.seed;
  j["items"] = model.dictionary.rows();
  j["users"] = model.loadings.cols();
  j["dictionary"] = "dictionary.tsv";
  j["loadings"] = "loadings.tsv";
  j["item_ids"] = model.item_ids;
  j["user_ids"] = model.user_ids;
  j["objective_trace"] = model.objective_trace;
  j["outer_iterations"] = model.outer_iterations;
  j["reinitializations"] = model.reinitializations;
  j["converged"] = model.converged;
  j["max_simplex_violation"] = model.max_simplex_violation;
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) throw DataError("cannot write manifest in " + dir.string());
  out << j.dump(2) << '\n';
}

FactorModel load_model(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json", std::ios::binary);
  if (!in) throw DataError("missing model manifest in " + dir.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
    if (j.at("format") != "wcf-model") throw DataError("not a wcf model");
    FactorModel model;
    model.gamma = j.at("gamma").get<double>();
    model.k = j.at("k").get<int>();
    model.seed = j.at("seed").get<std::uint64_t>();
    model.item_ids = j.at("item_ids").get<std::vector<ItemId>>();
    model.user_ids = j.at("user_ids").get<std::vector<UserId>>();
    model.objective_trace = j.at("objective_trace").get<std::vector<double>>();
    model.outer_iterations = j.at("outer_iterations").get<int>();
    model.reinitializations = j.at("reinitializations").get<int>();
    model.converged = j.at("converged").get<bool>();
    model.max_simplex_violation = j.at("max_simplex_violation").get<double>();
    model.dictionary =
        read_matrix_tsv(dir / j.at("dictionary").get<std::string>());
    model.loadings = read_matrix_tsv(dir / j.at("loadings").get<std::string>());
    if (model.dictionary.rows() !=
            static_cast<Eigen::Index>(model.item_ids.size()) ||
        model.loadings.cols() !=
            static_cast<Eigen::Index>(model.user_ids.size()) ||
        model.dictionary.cols() != model.k || model.loadings.rows() != model.k) {
      throw DataError("model matrices do not match the manifest in " +
                      dir.string());
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed model manifest in " + dir.string() + ": " +
                    e.what());
  }
}

}  // namespace wcf
