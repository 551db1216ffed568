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

#include "lapforge/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "lapforge/autodiff.hpp"
#include "lapforge/error.hpp"
#include "lapforge/parallel.hpp"
#include "lapforge/solvers.hpp"
#include "lapforge/text_io.hpp"

namespace lapforge {

namespace {

constexpr const char* kMagic = "lapforge-dataset";
constexpr std::size_t kVerifyWithBruteForceUpTo = 7;
constexpr unsigned long long kCostStream = 0xc057;
constexpr unsigned long long kScaleStream = 0x5ca1e;
constexpr unsigned long long kSplitStream = 0x5b117;

}  // namespace

std::vector<std::size_t> DatasetSpec::default_sizes() {
  std::vector<std::size_t> sizes;
  for (std::size_t n = 10; n <= 150; n += 10) sizes.push_back(n);
  return sizes;
}

void DatasetSpec::validate() const {
  if (sizes.empty()) throw UsageError("dataset spec needs at least one size");
  for (std::size_t n : sizes) {
    if (n == 0) throw UsageError("problem sizes must be positive");
  }
  if (samples_per_size == 0) throw UsageError("samples_per_size must be >= 1");
  if (!(value_upper_bound > 0.0) || !std::isfinite(value_upper_bound)) {
    throw UsageError("value upper bound must be a positive finite number");
  }
  if (scale_values && !(scale_low > 0.0 && scale_high >= scale_low)) {
    throw UsageError("value scale range must satisfy 0 < low <= high");
  }
}

std::string DatasetSpec::describe() const {
  std::ostringstream os;
  os << "sizes=";
  for (std::size_t i = 0; i < sizes.size(); ++i) os << (i ? "," : "") << sizes[i];
  os << " per_size=" << samples_per_size << " u=" << format_double(value_upper_bound)
     << " scale=" << (scale_values ? 1 : 0);
  if (scale_values) {
    os << " scale_low=" << format_double(scale_low) << " scale_high=" << format_double(scale_high);
  }
  os << " seed=" << seed;
  return os.str();
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> out;
  auto positive = [&](std::string_view tok) {
    const long long v = parse_int(tok, "size");
    if (v <= 0) throw UsageError("sizes must be positive: '" + text + "'");
    return static_cast<std::size_t>(v);
  };
  try {
    if (text.find(':') != std::string::npos) {
      std::vector<std::string_view> parts;
      std::string_view rest(text);
      while (true) {
        const auto c = rest.find(':');
        parts.push_back(rest.substr(0, c));
        if (c == std::string_view::npos) break;
        rest.remove_prefix(c + 1);
      }
      if (parts.size() < 2 || parts.size() > 3) {
        throw UsageError("size range must be lo:hi or lo:hi:step, got '" + text + "'");
      }
      const std::size_t lo = positive(parts[0]);
      const std::size_t hi = positive(parts[1]);
      const std::size_t step = parts.size() == 3 ? positive(parts[2]) : 1;
      if (hi < lo) throw UsageError("size range upper bound below lower bound");
      for (std::size_t n = lo; n <= hi; n += step) out.push_back(n);
    } else {
      std::string_view rest(text);
      while (!rest.empty()) {
        const auto c = rest.find(',');
        out.push_back(positive(rest.substr(0, c)));
        if (c == std::string_view::npos) break;
        rest.remove_prefix(c + 1);
      }
    }
  } catch (const DataError& e) {
    throw UsageError(std::string("bad size list: ") + e.what());
  }
  if (out.empty()) throw UsageError("empty size list");
  return out;
}

std::map<std::size_t, std::size_t> Dataset::size_histogram() const {
  std::map<std::size_t, std::size_t> h;
  for (const auto& r : records) ++h[r.cost.size()];
  return h;
}

Dataset generate(const DatasetSpec& spec, std::size_t threads) {
  spec.validate();
  struct Slot {
    std::size_t n;
    std::size_t k;
  };
  std::vector<Slot> slots;
  for (std::size_t n : spec.sizes) {
    for (std::size_t k = 0; k < spec.samples_per_size; ++k) slots.push_back({n, k});
  }
  std::vector<SampleRecord> records(slots.size());
  parallel_for(slots.size(), threads, [&](std::size_t i) {
    const auto [n, k] = slots[i];
    ad::Rng rng(ad::derive_seed(spec.seed, {kCostStream, n, k}));
    std::vector<double> values(n * n);
    for (double& v : values) v = spec.value_upper_bound * rng.uniform();
    CostMatrix cost(n, std::move(values));
    Permutation optimal = hungarian_permutation(cost);
    if (n <= kVerifyWithBruteForceUpTo &&
        total_cost(cost, optimal) != total_cost(cost, brute_force_permutation(cost))) {
      throw NumericError("hungarian disagrees with brute force on a generated record");
    }
    records[i] = SampleRecord{std::move(cost), std::move(optimal)};
  });
  Dataset data{spec.describe(), std::move(records)};
  if (spec.scale_values) {
    data = scale_dataset(data, spec.scale_low, spec.scale_high, spec.seed);
    data.description = spec.describe();
  }
  return data;
}

Dataset scale_dataset(const Dataset& base, double low, double high, unsigned long long seed) {
  if (!(low > 0.0 && high >= low)) throw UsageError("scale range must satisfy 0 < low <= high");
  Dataset out;
  out.description = base.description + " scaled=" + format_double(low) + ":" +
                    format_double(high) + "@" + std::to_string(seed);
  out.records.reserve(base.records.size());
  for (std::size_t i = 0; i < base.records.size(); ++i) {
    const SampleRecord& r = base.records[i];
    ad::Rng rng(ad::derive_seed(seed, {kScaleStream, i}));
    const double factor = rng.uniform(low, high);
    std::vector<double> values(r.cost.values().begin(), r.cost.values().end());
    for (double& v : values) v *= factor;
    out.records.push_back({CostMatrix(r.cost.size(), std::move(values)), r.optimal});
  }
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& data, double eval_fraction,
                                  unsigned long long seed) {
  if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) {
    throw UsageError("eval fraction must lie strictly between 0 and 1");
  }
  std::map<std::size_t, std::vector<std::size_t>> by_size;
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    by_size[data.records[i].cost.size()].push_back(i);
  }
  std::vector<char> to_eval(data.records.size(), 0);
  for (auto& [n, idx] : by_size) {
    ad::Rng rng(ad::derive_seed(seed, {kSplitStream, n}));
    for (std::size_t i = idx.size(); i > 1; --i) {
      std::swap(idx[i - 1], idx[rng.below(i)]);
    }
    const auto eval_count =
        static_cast<std::size_t>(std::floor(eval_fraction * static_cast<double>(idx.size())));
    for (std::size_t k = 0; k < eval_count; ++k) to_eval[idx[k]] = 1;
  }
  Dataset train{data.description + " part=train", {}};
  Dataset eval{data.description + " part=eval", {}};
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    (to_eval[i] ? eval : train).records.push_back(data.records[i]);
  }
  return {std::move(train), std::move(eval)};
}

std::string format_record(const CostMatrix& cost, const Permutation* optimal) {
  std::string line = std::to_string(cost.size());
  for (double v : cost.values()) {
    line += ' ';
    line += format_double(v);
  }
  if (optimal != nullptr) {
    for (int j : *optimal) {
      line += ' ';
      line += std::to_string(j);
    }
  }
  return line;
}

SampleRecord parse_record(const std::string& line, bool require_optimal) {
  const auto tokens = split_ws(line);
  if (tokens.empty()) throw DataError("empty record");
  const long long n_signed = parse_int(tokens[0], "record size");
  if (n_signed <= 0) throw DataError("record size must be positive");
  const auto n = static_cast<std::size_t>(n_signed);
  const std::size_t with_perm = 1 + n * n + n;
  if (tokens.size() != with_perm && (require_optimal || tokens.size() != 1 + n * n)) {
    throw DataError("record of size " + std::to_string(n) + " has " +
                    std::to_string(tokens.size()) + " fields, expected " +
                    std::to_string(with_perm));
  }
  std::vector<double> values(n * n);
  for (std::size_t i = 0; i < n * n; ++i) {
    values[i] = parse_double(tokens[1 + i], "cost value");
    if (!std::isfinite(values[i])) throw DataError("non-finite cost value in record");
  }
  SampleRecord r{CostMatrix(n, std::move(values)), {}};
  if (tokens.size() == with_perm) {
    r.optimal.resize(n);
    std::vector<bool> used(n, false);
    for (std::size_t i = 0; i < n; ++i) {
      const long long j = parse_int(tokens[1 + n * n + i], "permutation entry");
      if (j < 0 || static_cast<std::size_t>(j) >= n) throw DataError("permutation entry out of range");
      if (used[static_cast<std::size_t>(j)]) {
        throw DataError("stored optimal assignment is not a permutation");
      }
      used[static_cast<std::size_t>(j)] = true;
      r.optimal[i] = static_cast<int>(j);
    }
  }
  return r;
}

void write_dataset(std::ostream& out, const Dataset& data) {
  out << kMagic << ' ' << kDatasetFormatVersion << " records=" << data.records.size();
  if (!data.description.empty()) out << ' ' << data.description;
  out << '\n';
  for (const SampleRecord& r : data.records) out << format_record(r.cost, &r.optimal) << '\n';
}

Dataset read_dataset(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw DataError("dataset file is empty");
  const auto tokens = split_ws(header);
  if (tokens.size() < 3 || tokens[0] != kMagic) throw DataError("not a lapforge dataset file");
  const long long version = parse_int(tokens[1], "dataset format version");
  if (version != kDatasetFormatVersion) {
    throw DataError("unsupported dataset format version " + std::to_string(version));
  }
  if (tokens[2].substr(0, 8) != "records=") throw DataError("dataset header lacks records=");
  const long long count = parse_int(tokens[2].substr(8), "record count");
  if (count < 0) throw DataError("negative record count");

  Dataset data;
  const auto desc_pos = header.find(tokens[2]) + tokens[2].size();
  data.description = desc_pos < header.size() ? header.substr(desc_pos + 1) : "";
  data.records.reserve(static_cast<std::size_t>(count));
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (split_ws(line).empty()) continue;
    try {
      data.records.push_back(parse_record(line, true));
    } catch (const Error& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (data.records.size() != static_cast<std::size_t>(count)) {
    throw DataError("dataset truncated: header promises " + std::to_string(count) +
                    " records, found " + std::to_string(data.records.size()));
  }
  return data;
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  write_dataset(out, data);
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path.string() + "'");
  return read_dataset(in);
}

std::string dataset_hash(const Dataset& data) {
  std::ostringstream os;
  write_dataset(os, data);
  return fnv1a_hex(os.str());
}

std::string default_dataset_filename(const DatasetSpec& spec) {
  const auto [lo, hi] = std::minmax_element(spec.sizes.begin(), spec.sizes.end());
  std::ostringstream os;
  os << "syndata_u";
  if (spec.scale_values) {
    os << format_double(spec.value_upper_bound * spec.scale_high);
  } else {
    os << format_double(spec.value_upper_bound);
  }
  os << '_' << *lo << '_' << *hi << ".lap";
  return os.str();
}

}  // namespace lapforge
