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

#include <stdexcept>
#include <string>

namespace wcf {

/// Invalid argument value: negative mass, non-positive gamma, shape mismatch.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or missing input data (files, tables, genomes).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical solver failed to reach its stopping criterion.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sinkhorn exhausted its iteration budget.
class ConvergenceError : public SolverError {
 public:
  ConvergenceError(const std::string& what, double violation, int iterations)
      : SolverError(what), violation_(violation), iterations_(iterations) {}

  double violation() const noexcept { return violation_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double violation_;
  int iterations_;
};

/// The fixed factor of a block step is not of full rank.
class RankDeficientError : public SolverError {
 public:
  RankDeficientError(const std::string& what, long rank, long expected)
      : SolverError(what), rank_(rank), expected_(expected) {}

  long rank() const noexcept { return rank_; }
  long expected() const noexcept { return expected_; }

 private:
  long rank_;
  long expected_;
};

}  // namespace wcf
