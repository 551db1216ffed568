// Copyright 2026 The lapforge Authors.
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

#ifndef LAPFORGE_DATAGEN_HPP_
#define LAPFORGE_DATAGEN_HPP_

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lapforge/lap_core.hpp"

namespace lapforge {

inline constexpr int kDatasetFormatVersion = 1;

struct DatasetSpec {
  std::vector<std::size_t> sizes = default_sizes();
  std::size_t samples_per_size = 100;
  // Costs are drawn i.i.d. from U(0, value_upper_bound).
  double value_upper_bound = 1.0;
  // Multiply each matrix by its own factor drawn from U(scale_low, scale_high).
  bool scale_values = false;
  double scale_low = 1.0;
  double scale_high = 10.0;
  unsigned long long seed = 0;

  // 10, 20, ..., 150.
  static std::vector<std::size_t> default_sizes();
  void validate() const;
  // "sizes=10,20 per_size=100 u=1 scale=0 seed=7"
  std::string describe() const;
};

// Parses "lo:hi:step" or a comma list such as "10,20,50".
std::vector<std::size_t> parse_size_list(const std::string& text);

struct SampleRecord {
  CostMatrix cost;
  Permutation optimal;

  AssignmentMatrix optimal_matrix() const {
    return AssignmentMatrix::from_permutation(optimal);
  }
};

struct Dataset {
  // Free-form generation description carried in the file header.
  std::string description;
  std::vector<SampleRecord> records;

  std::size_t size() const { return records.size(); }
  // Record count per problem size.
  std::map<std::size_t, std::size_t> size_histogram() const;
};

// Draws samples_per_size matrices for every size and solves each with the
// Hungarian method (cross-checked against brute force for n <= 7). Fully
// determined by spec.seed; records are generated on up to `threads` workers.
Dataset generate(const DatasetSpec& spec, std::size_t threads = 1);

// Multiplies every cost matrix by a factor from U(low, high), one draw per
// record. Optimal permutations are unchanged by positive scaling.
Dataset scale_dataset(const Dataset& base, double low, double high, unsigned long long seed);

// Random split, stratified by problem size: floor(eval_fraction * count) of
// each size go to the eval set, the rest to training. Relative record order
// is preserved in both halves.
std::pair<Dataset, Dataset> split(const Dataset& data, double eval_fraction,
                                  unsigned long long seed);

// Line-oriented text format: a header line
//   lapforge-dataset <version> records=<count> <description>
// followed by one record per line: n, n*n row-major costs (17 significant
// digits), and n job indices of the optimal permutation.
void write_dataset(std::ostream& out, const Dataset& data);
Dataset read_dataset(std::istream& in);
void save_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

// Record lines only, for single matrices; the permutation part is optional
// on input.
std::string format_record(const CostMatrix& cost, const Permutation* optimal);
SampleRecord parse_record(const std::string& line, bool require_optimal);

// Hash of the serialized dataset.
std::string dataset_hash(const Dataset& data);

// syndata_u{U}_{min}_{max}.lap
std::string default_dataset_filename(const DatasetSpec& spec);

}  // namespace lapforge

#endif  // LAPFORGE_DATAGEN_HPP_
