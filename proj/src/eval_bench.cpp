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

#include "lapforge/eval_bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "lapforge/error.hpp"
#include "lapforge/parallel.hpp"
#include "lapforge/text_io.hpp"

namespace lapforge {

namespace {

constexpr unsigned long long kRandomStream = 0x7a4d;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

bool matches(std::string_view value, std::string_view filter) {
  return filter.empty() || value == filter;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::string to_string(Method method) {
  switch (method) {
    case Method::kGlan: return "glan";
    case Method::kSinkhorn: return "sinkhorn";
    case Method::kHungarian: return "hungarian";
    case Method::kRandom: return "random";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  if (name == "glan") return Method::kGlan;
  if (name == "sinkhorn" || name == "sh") return Method::kSinkhorn;
  if (name == "hungarian") return Method::kHungarian;
  if (name == "random") return Method::kRandom;
  throw UsageError("unknown method '" + std::string(name) +
                   "' (expected glan, sinkhorn, hungarian, random or all)");
}

std::vector<Method> parse_method_list(std::string_view list) {
  std::vector<Method> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    const std::size_t comma = std::min(list.find(',', pos), list.size());
    const std::string name = trim(list.substr(pos, comma - pos));
    if (name == "all") {
      for (Method m : {Method::kGlan, Method::kSinkhorn, Method::kHungarian, Method::kRandom}) {
        if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
      }
    } else if (!name.empty()) {
      const Method m = parse_method(name);
      if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
    }
    pos = comma + 1;
  }
  if (out.empty()) throw UsageError("empty method list");
  return out;
}

Permutation solve(Method method, const CostMatrix& cost, const GlanModel* model,
                  const SinkhornConfig& sinkhorn_cfg, unsigned long long record_seed) {
  switch (method) {
    case Method::kGlan:
      if (model == nullptr) throw UsageError("method glan needs a trained checkpoint");
      return greedy_permutation(model->predict(cost).scores);
    case Method::kSinkhorn:
      return greedy_permutation(sinkhorn(cost, sinkhorn_cfg));
    case Method::kHungarian:
      return hungarian_permutation(cost);
    case Method::kRandom: {
      Permutation p(cost.size());
      std::iota(p.begin(), p.end(), 0);
      ad::Rng rng(record_seed);
      for (std::size_t i = p.size(); i > 1; --i) std::swap(p[i - 1], p[rng.below(i)]);
      return p;
    }
  }
  throw UsageError("unknown method");
}

double record_precision(Method method, const Permutation& predicted, const SampleRecord& record) {
  const double p = precision(predicted, record.optimal);
  if (method == Method::kHungarian && p < 1.0 &&
      total_cost(record.cost, predicted) == total_cost(record.cost, record.optimal)) {
    return 1.0;
  }
  return p;
}

// ---- BenchReport -------------------------------------------------------------

void BenchReport::append(const BenchReport& other) {
  rows.insert(rows.end(), other.rows.begin(), other.rows.end());
}

std::vector<BenchRow> BenchReport::select(std::string_view method, std::string_view suite,
                                          std::string_view variant) const {
  std::vector<BenchRow> out;
  for (const BenchRow& r : rows) {
    if (matches(r.method, method) && matches(r.suite, suite) && matches(r.variant, variant)) {
      out.push_back(r);
    }
  }
  return out;
}

double BenchReport::mean_precision(std::string_view method, std::string_view suite,
                                   std::string_view variant) const {
  const auto picked = select(method, suite, variant);
  if (picked.empty()) {
    throw UsageError("report has no rows for method '" + std::string(method) + "'");
  }
  double sum = 0.0;
  for (const BenchRow& r : picked) sum += r.mean_precision;
  return sum / static_cast<double>(picked.size());
}

KeyValues environment_echo(std::size_t threads) {
  KeyValues env;
#if defined(__VERSION__)
  env.emplace_back("compiler", __VERSION__);
#endif
#ifdef LAPFORGE_BUILD_FLAGS
  env.emplace_back("build_flags", LAPFORGE_BUILD_FLAGS);
#endif
  env.emplace_back("eval_threads", std::to_string(threads));
  env.emplace_back("timing_threads", "1");
  return env;
}

// ---- evaluation ----------------------------------------------------------------

std::vector<BenchRow> evaluate_method(Method method, const Dataset& data, const GlanModel* model,
                                      const EvalOptions& options, std::string_view suite,
                                      std::string_view variant) {
  if (data.records.empty()) throw UsageError("cannot evaluate on an empty dataset");
  if (method == Method::kGlan && model == nullptr) {
    throw UsageError("method glan needs a trained checkpoint");
  }
  for (const SampleRecord& r : data.records) {
    if (r.cost.size() > options.max_size) {
      throw UsageError("instance of size " + std::to_string(r.cost.size()) +
                       " exceeds the configured limit " + std::to_string(options.max_size));
    }
  }
  const std::size_t count = data.records.size();
  std::vector<double> prec(count), time_ms(count, kNaN);
  auto seed_of = [&](std::size_t i) { return ad::derive_seed(options.seed, {kRandomStream, i}); };

  if (options.repeats == 0) {
    parallel_for(count, options.threads, [&](std::size_t i) {
      const SampleRecord& r = data.records[i];
      prec[i] = record_precision(method, solve(method, r.cost, model, options.sinkhorn, seed_of(i)), r);
    });
  } else {
    // Timing runs on this thread only so that medians are not disturbed.
    for (std::size_t i = 0; i < count; ++i) {
      const SampleRecord& r = data.records[i];
      std::vector<double> samples;
      Permutation first;
      for (std::size_t k = 0; k < options.repeats; ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        Permutation p = solve(method, r.cost, model, options.sinkhorn, seed_of(i));
        const auto t1 = std::chrono::steady_clock::now();
        samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
        if (k == 0) first = std::move(p);
      }
      prec[i] = record_precision(method, first, r);
      time_ms[i] = median(std::move(samples));
    }
  }

  std::map<std::size_t, std::vector<std::size_t>> by_size;
  for (std::size_t i = 0; i < count; ++i) by_size[data.records[i].cost.size()].push_back(i);
  std::vector<BenchRow> rows;
  for (const auto& [n, idx] : by_size) {
    BenchRow row;
    row.suite = std::string(suite);
    row.variant = std::string(variant);
    row.size = n;
    row.method = to_string(method);
    row.samples = idx.size();
    double ps = 0.0, ts = 0.0;
    for (std::size_t i : idx) {
      ps += prec[i];
      ts += time_ms[i];
    }
    row.mean_precision = ps / static_cast<double>(idx.size());
    row.mean_time_ms = options.repeats == 0 ? kNaN : ts / static_cast<double>(idx.size());
    rows.push_back(row);
  }
  return rows;
}

BenchReport evaluate(const std::vector<Method>& methods, const Dataset& data,
                     const GlanModel* model, const EvalOptions& options,
                     const std::string& dataset_label) {
  BenchReport report;
  report.title = "Average precision (%) per size";
  report.environment = environment_echo(options.threads);
  if (!dataset_label.empty()) report.dataset.emplace_back("path", dataset_label);
  report.dataset.emplace_back("hash", dataset_hash(data));
  report.dataset.emplace_back("records", std::to_string(data.size()));
  if (!data.description.empty()) report.dataset.emplace_back("description", data.description);
  report.config.emplace_back("repeats", std::to_string(options.repeats));
  report.config.emplace_back("seed", std::to_string(options.seed));
  report.config.emplace_back("sinkhorn_kernel", to_string(options.sinkhorn.kernel));
  report.config.emplace_back("sinkhorn_iterations", std::to_string(options.sinkhorn.max_iterations));
  if (model != nullptr) {
    const ModelConfig& m = model->config();
    report.config.emplace_back("glan", "latent_dim=" + std::to_string(m.latent_dim) +
                                           " conv_iterations=" + std::to_string(m.conv_iterations) +
                                           " t=" + std::to_string(m.t));
  }
  for (Method method : methods) {
    auto rows = evaluate_method(method, data, model, options);
    report.rows.insert(report.rows.end(), rows.begin(), rows.end());
  }
  report.footer =
      "Times are end-to-end solves (graph construction, network, discretization), median of "
      "repeats, single thread.";
  return report;
}

std::vector<BenchRow> runtime_profile(Method method, const GlanModel* model,
                                      const RuntimeProfileOptions& options) {
  if (options.instances < 1) throw UsageError("runtime profile needs at least one instance");
  DatasetSpec spec;
  spec.sizes = options.sizes;
  spec.samples_per_size = options.instances;
  spec.seed = options.seed;
  const Dataset data = generate(spec, default_thread_count());
  EvalOptions eval;
  eval.repeats = 1;
  eval.seed = options.seed;
  eval.sinkhorn = options.sinkhorn;
  // Warm-up so first-touch allocation does not land in the smallest size.
  solve(method, data.records.front().cost, model, options.sinkhorn, 0);

  std::vector<BenchRow> rows;
  std::size_t begin = 0;
  for (std::size_t n : options.sizes) {
    Dataset slice;
    slice.records.assign(data.records.begin() + static_cast<std::ptrdiff_t>(begin),
                         data.records.begin() + static_cast<std::ptrdiff_t>(begin + options.instances));
    begin += options.instances;
    std::vector<double> times;
    double ps = 0.0;
    for (std::size_t i = 0; i < slice.records.size(); ++i) {
      const SampleRecord& r = slice.records[i];
      const auto t0 = std::chrono::steady_clock::now();
      const Permutation p = solve(method, r.cost, model, options.sinkhorn,
                                  ad::derive_seed(options.seed, {kRandomStream, n, i}));
      const auto t1 = std::chrono::steady_clock::now();
      times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
      ps += record_precision(method, p, r);
    }
    BenchRow row;
    row.suite = "runtime";
    row.size = n;
    row.method = to_string(method);
    row.samples = times.size();
    row.mean_precision = ps / static_cast<double>(times.size());
    row.mean_time_ms = median(std::move(times));
    rows.push_back(row);
  }
  return rows;
}

// ---- ablation --------------------------------------------------------------------

std::vector<AblationVariant> ablation_variants(const ModelConfig& base_model,
                                               const TrainConfig& base_train) {
  std::vector<AblationVariant> out;
  auto add = [&](const char* family, const char* name, bool no_c, bool no_w, bool no_l1,
                 bool no_l2) {
    AblationVariant v{family, name, base_model, base_train};
    v.model.ablate_channel_attention = no_c;
    v.model.ablate_aggregation_weights = no_w;
    v.train.use_sum_constraint = !no_l1;
    v.train.use_norm_constraint = !no_l2;
    out.push_back(v);
  };
  add("attention", "GLAN", false, false, false, false);
  add("attention", "GLAN-C'", true, false, false, false);
  add("attention", "GLAN-W'", false, true, false, false);
  add("attention", "GLAN-C'-W'", true, true, false, false);
  add("loss", "GLAN", false, false, false, false);
  add("loss", "GLAN-L1'", false, false, true, false);
  add("loss", "GLAN-L2'", false, false, false, true);
  add("loss", "GLAN-L1'-L2'", false, false, true, true);
  return out;
}

BenchReport ablation_suite(const Dataset& train_set, const Dataset& eval_set,
                           const ModelConfig& base_model, const TrainConfig& base_train,
                           const EvalOptions& options, const ProgressFn& progress) {
  BenchReport report;
  report.title = "Ablation: average precision (%) per size";
  report.environment = environment_echo(options.threads);
  report.dataset.emplace_back("train_hash", dataset_hash(train_set));
  report.dataset.emplace_back("eval_hash", dataset_hash(eval_set));
  report.config.emplace_back("seed", std::to_string(base_train.seed));
  report.config.emplace_back("epochs", std::to_string(base_train.epochs));

  EvalOptions eval = options;
  eval.repeats = 0;
  std::map<std::string, std::vector<BenchRow>> trained;
  for (const AblationVariant& v : ablation_variants(base_model, base_train)) {
    auto it = trained.find(v.name);
    if (it == trained.end()) {
      if (progress) progress("training " + v.name);
      Trainer trainer(v.model, v.train);
      if (progress) trainer.set_logger(progress);
      trainer.run(train_set, nullptr, options.threads);
      auto rows = evaluate_method(Method::kGlan, eval_set, &trainer.model(), eval, "", v.name);
      it = trained.emplace(v.name, std::move(rows)).first;
      if (progress) {
        double mean = 0.0;
        for (const auto& r : it->second) mean += r.mean_precision;
        std::ostringstream os;
        os << v.name << " mean precision " << std::fixed << std::setprecision(2)
           << 100.0 * mean / static_cast<double>(it->second.size());
        progress(os.str());
      }
    }
    for (BenchRow row : it->second) {
      row.suite = v.family;
      report.rows.push_back(row);
    }
  }
  for (const char* family : {"attention", "loss"}) {
    for (BenchRow row : evaluate_method(Method::kRandom, eval_set, nullptr, eval, family, "random")) {
      report.rows.push_back(row);
    }
  }
  report.footer = "All variants share the training seed, data order and initialization stream.";
  return report;
}

// ---- generalization ----------------------------------------------------------------

BenchReport generalization_suite(const GlanModel& model, const GeneralizationSpec& spec,
                                 const std::vector<Method>& methods, const EvalOptions& options,
                                 const Dataset* base_eval) {
  if (spec.samples_per_size < 1) throw UsageError("samples per size must be >= 1");
  BenchReport report;
  report.title = "Generalization: average precision (%) per size";
  report.environment = environment_echo(options.threads);
  EvalOptions eval = options;
  eval.repeats = 0;

  DatasetSpec base_spec;
  base_spec.sizes = spec.base_sizes;
  base_spec.samples_per_size = spec.samples_per_size;
  base_spec.seed = ad::derive_seed(spec.seed, {0xba5e});
  DatasetSpec large_spec = base_spec;
  large_spec.sizes = spec.large_sizes;
  large_spec.seed = ad::derive_seed(spec.seed, {0x1a26e});

  const Dataset base = base_eval != nullptr ? *base_eval : generate(base_spec, options.threads);
  const Dataset large = spec.large_sizes.empty() ? Dataset{} : generate(large_spec, options.threads);
  const unsigned long long scale_seed = ad::derive_seed(spec.seed, {0x5ca1e});
  const Dataset base_scaled = scale_dataset(base, spec.scale_low, spec.scale_high, scale_seed);
  const Dataset large_scaled =
      large.records.empty() ? Dataset{}
                            : scale_dataset(large, spec.scale_low, spec.scale_high, scale_seed);

  const std::pair<const char*, const Dataset*> parts[] = {
      {"in-distribution", &base},
      {"larger-sizes", &large},
      {"scaled-values", &base_scaled},
      {"larger-scaled", &large_scaled},
  };
  for (const auto& [name, data] : parts) {
    if (data->records.empty()) continue;
    report.dataset.emplace_back(std::string(name) + "_hash", dataset_hash(*data));
    for (Method m : methods) {
      for (BenchRow row : evaluate_method(m, *data, &model, eval, name)) report.rows.push_back(row);
    }
  }
  std::ostringstream scale;
  scale << "x U(" << format_double(spec.scale_low) << ", " << format_double(spec.scale_high) << ")";
  report.config.emplace_back("value_scale", scale.str());
  report.config.emplace_back("samples_per_size", std::to_string(spec.samples_per_size));
  report.config.emplace_back("seed", std::to_string(spec.seed));
  report.footer = "Scaled sets multiply the same instances as the unscaled sets.";
  return report;
}

// ---- output ------------------------------------------------------------------------

void write_report_tsv(std::ostream& out, const BenchReport& report) {
  out << "# title=" << report.title << '\n';
  for (const auto& [k, v] : report.environment) out << "# env." << k << '=' << v << '\n';
  for (const auto& [k, v] : report.dataset) out << "# dataset." << k << '=' << v << '\n';
  for (const auto& [k, v] : report.config) out << "# config." << k << '=' << v << '\n';
  out << "suite\tvariant\tsize\tmethod\tsamples\tprecision\ttime_ms\n";
  for (const BenchRow& r : report.rows) {
    out << r.suite << '\t' << r.variant << '\t' << r.size << '\t' << r.method << '\t' << r.samples
        << '\t' << format_double(r.mean_precision) << '\t'
        << (std::isnan(r.mean_time_ms) ? std::string("nan") : format_double(r.mean_time_ms))
        << '\n';
  }
}

void render_report(std::ostream& out, const BenchReport& report) {
  out << report.title << '\n';
  std::vector<std::string> suites;
  for (const BenchRow& r : report.rows) {
    if (std::find(suites.begin(), suites.end(), r.suite) == suites.end()) suites.push_back(r.suite);
  }
  for (const std::string& suite : suites) {
    std::vector<std::string> columns;
    std::map<std::pair<std::size_t, std::string>, const BenchRow*> cell;
    std::vector<std::size_t> sizes;
    bool timed = false;
    for (const BenchRow& r : report.rows) {
      if (r.suite != suite) continue;
      const std::string col = r.variant.empty() ? r.method : r.variant;
      if (std::find(columns.begin(), columns.end(), col) == columns.end()) columns.push_back(col);
      if (std::find(sizes.begin(), sizes.end(), r.size) == sizes.end()) sizes.push_back(r.size);
      cell[{r.size, col}] = &r;
      timed = timed || !std::isnan(r.mean_time_ms);
    }
    std::sort(sizes.begin(), sizes.end());
    std::size_t width = 8;
    for (const auto& c : columns) width = std::max(width, c.size() + 2);

    auto table = [&](const char* heading, bool time) {
      out << '\n' << "[" << suite << "] " << heading << '\n' << std::setw(6) << "n";
      for (const auto& c : columns) out << std::setw(static_cast<int>(width)) << c;
      out << '\n';
      std::map<std::string, std::pair<double, std::size_t>> avg;
      for (std::size_t n : sizes) {
        out << std::setw(6) << n;
        for (const auto& c : columns) {
          const auto it = cell.find({n, c});
          if (it == cell.end()) {
            out << std::setw(static_cast<int>(width)) << "-";
            continue;
          }
          const double v = time ? it->second->mean_time_ms : 100.0 * it->second->mean_precision;
          out << std::setw(static_cast<int>(width)) << std::fixed << std::setprecision(time ? 3 : 1)
              << v;
          avg[c].first += v;
          avg[c].second += 1;
        }
        out << '\n';
      }
      out << std::setw(6) << "AVG";
      for (const auto& c : columns) {
        const auto& [s, k] = avg[c];
        out << std::setw(static_cast<int>(width)) << std::fixed << std::setprecision(time ? 3 : 1)
            << (k ? s / static_cast<double>(k) : kNaN);
      }
      out << '\n';
    };
    table("precision (%)", false);
    if (timed) table("time (ms)", true);
  }
  out.unsetf(std::ios::floatfield);
  out << '\n';
  for (const auto& [k, v] : report.dataset) out << "dataset " << k << ": " << v << '\n';
  for (const auto& [k, v] : report.config) out << "config " << k << ": " << v << '\n';
  for (const auto& [k, v] : report.environment) out << "env " << k << ": " << v << '\n';
  if (!report.footer.empty()) out << report.footer << '\n';
}

void save_report(const BenchReport& report, const std::filesystem::path& tsv_path,
                 const std::filesystem::path& table_path) {
  std::ofstream tsv(tsv_path);
  if (!tsv) throw DataError("cannot open '" + tsv_path.string() + "' for writing");
  write_report_tsv(tsv, report);
  std::ofstream table(table_path);
  if (!table) throw DataError("cannot open '" + table_path.string() + "' for writing");
  render_report(table, report);
}

// ---- config file ---------------------------------------------------------------------

BenchConfig parse_bench_config(std::istream& in) {
  BenchConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  auto size_of = [](const std::string& v, const std::string& key) {
    const long long x = parse_int(v, key);
    if (x < 0) throw DataError("bench config: '" + key + "' must be >= 0");
    return static_cast<std::size_t>(x);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw DataError("bench config line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    try {
      if (key == "suite") {
        if (value != "eval" && value != "ablation" && value != "generalization" &&
            value != "runtime") {
          throw DataError("unknown suite '" + value + "'");
        }
        cfg.suite = value;
      } else if (key == "methods") {
        cfg.methods = parse_method_list(value);
      } else if (key == "dataset") {
        cfg.dataset = value;
      } else if (key == "checkpoint") {
        cfg.checkpoint = value;
      } else if (key == "out") {
        cfg.out_prefix = value;
      } else if (key == "repeats") {
        cfg.repeats = size_of(value, key);
      } else if (key == "threads") {
        cfg.threads = size_of(value, key);
      } else if (key == "seed") {
        cfg.seed = parse_u64(value, key);
        cfg.generalization.seed = cfg.seed;
        cfg.runtime.seed = cfg.seed;
      } else if (key == "eval_fraction") {
        cfg.eval_fraction = parse_double(value, key);
      } else if (key == "sinkhorn_kernel") {
        cfg.sinkhorn.kernel = parse_sinkhorn_kernel(value);
      } else if (key == "sinkhorn_temperature") {
        cfg.sinkhorn.temperature = parse_double(value, key);
      } else if (key == "sinkhorn_iterations") {
        cfg.sinkhorn.max_iterations = size_of(value, key);
      } else if (key == "base_sizes") {
        cfg.generalization.base_sizes = parse_size_list(value);
      } else if (key == "large_sizes") {
        cfg.generalization.large_sizes = parse_size_list(value);
      } else if (key == "per_size") {
        cfg.generalization.samples_per_size = size_of(value, key);
      } else if (key == "scale_low") {
        cfg.generalization.scale_low = parse_double(value, key);
      } else if (key == "scale_high") {
        cfg.generalization.scale_high = parse_double(value, key);
      } else if (key == "runtime_sizes") {
        cfg.runtime.sizes = parse_size_list(value);
      } else if (key == "runtime_instances") {
        cfg.runtime.instances = size_of(value, key);
      } else {
        throw DataError("unknown key '" + key + "'");
      }
    } catch (const Error& e) {
      throw DataError("bench config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  cfg.runtime.sinkhorn = cfg.sinkhorn;
  return cfg;
}

BenchConfig load_bench_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open bench config '" + path.string() + "'");
  return parse_bench_config(in);
}

}  // namespace lapforge
