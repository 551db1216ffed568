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

#include "lapforge/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "lapforge/datagen.hpp"
#include "lapforge/error.hpp"
#include "lapforge/eval_bench.hpp"
#include "lapforge/parallel.hpp"
#include "lapforge/solvers.hpp"
#include "lapforge/text_io.hpp"
#include "lapforge/trainer.hpp"

namespace lapforge {

namespace {

// Parsed command line; unset optionals fall back to library defaults.
struct CliConfig {
  std::optional<std::size_t> threads;

  // generate
  std::string sizes = "10:150:10";
  std::size_t per_size = 100;
  unsigned long long seed = 0;
  std::string out;
  double u = 1.0;
  bool scale_values = false;
  double scale_low = 1.0;
  double scale_high = 10.0;

  // train
  std::string dataset;
  std::string checkpoint;
  std::string history;
  std::string resume;
  double eval_fraction = 0.3;
  std::optional<unsigned long long> split_seed;
  std::optional<std::size_t> stop_after;
  ModelConfig model;
  TrainConfig train;

  // solve
  std::string input;
  std::string method = "hungarian";

  // bench / eval
  std::string suite = "eval";
  std::string methods;
  std::string config_file;
  std::optional<std::size_t> repeats;
  std::optional<double> heldout;
  std::string base_sizes;
  std::string large_sizes;
  std::optional<std::size_t> gen_per_size;
  std::string runtime_sizes;
  std::optional<std::size_t> instances;
  std::string sinkhorn_kernel;
};

std::size_t resolve_threads(const CliConfig& c, std::optional<std::size_t> fallback = {}) {
  if (c.threads) return std::max<std::size_t>(1, *c.threads);
  if (fallback) return std::max<std::size_t>(1, *fallback);
  return default_thread_count();
}

std::string model_summary(const ModelConfig& m) {
  std::ostringstream os;
  os << "latent_dim=" << m.latent_dim << " conv_iterations=" << m.conv_iterations << " t=" << m.t
     << " hidden_width=" << m.hidden_width << " ablate_attention=" << m.ablate_channel_attention
     << " ablate_weights=" << m.ablate_aggregation_weights;
  return os.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw DataError("failed writing '" + path + "'");
}

void emit_report(const BenchReport& report, const std::string& prefix, std::ostream& out) {
  render_report(out, report);
  if (!prefix.empty()) {
    save_report(report, prefix + ".tsv", prefix + ".txt");
    out << "report written to " << prefix << ".tsv and " << prefix << ".txt\n";
  }
}

int cmd_generate(const CliConfig& c, std::ostream& out, std::ostream& err) {
  DatasetSpec spec;
  spec.sizes = parse_size_list(c.sizes);
  spec.samples_per_size = c.per_size;
  spec.seed = c.seed;
  spec.value_upper_bound = c.u;
  spec.scale_values = c.scale_values;
  spec.scale_low = c.scale_low;
  spec.scale_high = c.scale_high;
  spec.validate();
  err << "generating " << spec.sizes.size() * spec.samples_per_size << " records ("
      << spec.describe() << ")\n";
  const Dataset data = generate(spec, resolve_threads(c));
  save_dataset(data, c.out);
  out << "wrote " << data.size() << " records to " << c.out << " (hash " << dataset_hash(data)
      << ")\n";
  return kExitOk;
}

int cmd_train(const CliConfig& c, std::ostream& out, std::ostream& err) {
  const std::size_t threads = resolve_threads(c);
  std::optional<Trainer> trainer;
  if (!c.resume.empty()) {
    trainer.emplace(load_checkpoint(c.resume));
    err << "resuming from " << c.resume << " after epoch " << trainer->epochs_done() << "\n";
  } else {
    c.model.validate();
    trainer.emplace(c.model, c.train);
  }
  const Dataset data = load_dataset(c.dataset);
  const auto [train_set, eval_set] =
      split(data, c.eval_fraction, c.split_seed.value_or(trainer->train_config().seed));
  err << "training on " << train_set.size() << " records, evaluating on " << eval_set.size()
      << " (" << model_summary(trainer->model().config()) << ")\n";

  const std::string history_path = c.history.empty() ? c.checkpoint + ".history.jsonl" : c.history;
  trainer->set_logger([&err](const std::string& msg) { err << msg << '\n'; });
  std::size_t ran = 0;
  while (!trainer->finished() && (!c.stop_after || ran < *c.stop_after)) {
    const EpochStats s = trainer->run_epoch(train_set, eval_set.records.empty() ? nullptr : &eval_set,
                                            threads);
    ++ran;
    err << history_json_line(s) << '\n';
    // Persist after every epoch so an interrupted run can resume.
    save_checkpoint(trainer->checkpoint(), c.checkpoint);
    std::string log;
    for (const EpochStats& h : trainer->history()) log += history_json_line(h) + "\n";
    write_text(history_path, log);
  }
  if (ran == 0) save_checkpoint(trainer->checkpoint(), c.checkpoint);
  const auto& hist = trainer->history();
  out << "epochs " << trainer->epochs_done() << "/" << trainer->train_config().epochs;
  if (!hist.empty() && std::isfinite(hist.back().eval_precision)) {
    out << ", held-out precision " << std::fixed << std::setprecision(2)
        << 100.0 * hist.back().eval_precision;
    out.unsetf(std::ios::floatfield);
  }
  out << "\ncheckpoint " << c.checkpoint << "\nhistory " << history_path << "\n";
  return kExitOk;
}

unsigned long long derive_seed_for_solve(unsigned long long seed) {
  return ad::derive_seed(seed, {0x501e});
}

int cmd_solve(const CliConfig& c, std::ostream& out) {
  std::ifstream in(c.input);
  if (!in) throw DataError("cannot open '" + c.input + "'");
  std::string line, record_line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    if (!record_line.empty()) throw DataError("solve expects a single record");
    record_line = line;
  }
  if (record_line.empty()) throw DataError("'" + c.input + "' holds no record");
  const SampleRecord record = parse_record(record_line, false);

  const std::vector<Method> methods = parse_method_list(c.method);
  std::optional<GlanModel> model;
  for (Method m : methods) {
    if (m == Method::kGlan) {
      if (c.checkpoint.empty()) throw UsageError("method glan needs --checkpoint");
      const Checkpoint ckpt = load_checkpoint(c.checkpoint);
      model.emplace(ckpt.model_config, ckpt.params);
    }
  }
  SinkhornConfig sk;
  if (!c.sinkhorn_kernel.empty()) sk.kernel = parse_sinkhorn_kernel(c.sinkhorn_kernel);
  for (Method m : methods) {
    const Permutation p = solve(m, record.cost, model ? &*model : nullptr, sk,
                                derive_seed_for_solve(c.seed));
    out << to_string(m) << ": assignment";
    for (int j : p) out << ' ' << j;
    out << "  cost " << format_double(total_cost(record.cost, p));
    if (!record.optimal.empty()) {
      out << "  precision " << format_double(record_precision(m, p, record));
    }
    out << '\n';
  }
  return kExitOk;
}

int cmd_bench(const CliConfig& c, const CLI::App& app, std::ostream& out, std::ostream& err) {
  BenchConfig bc = c.config_file.empty() ? BenchConfig{} : load_bench_config(c.config_file);
  if (app.get_option_no_throw("--suite") != nullptr && app.count("--suite")) bc.suite = c.suite;
  if (!c.methods.empty()) bc.methods = parse_method_list(c.methods);
  if (!c.dataset.empty()) bc.dataset = c.dataset;
  if (!c.checkpoint.empty()) bc.checkpoint = c.checkpoint;
  if (!c.out.empty()) bc.out_prefix = c.out;
  if (c.repeats) bc.repeats = *c.repeats;
  if (app.count("--seed")) {
    bc.seed = c.seed;
    bc.generalization.seed = c.seed;
    bc.runtime.seed = c.seed;
  }
  if (!c.sinkhorn_kernel.empty()) bc.sinkhorn.kernel = parse_sinkhorn_kernel(c.sinkhorn_kernel);
  bc.runtime.sinkhorn = bc.sinkhorn;
  if (!c.base_sizes.empty()) bc.generalization.base_sizes = parse_size_list(c.base_sizes);
  if (!c.large_sizes.empty()) bc.generalization.large_sizes = parse_size_list(c.large_sizes);
  if (c.gen_per_size) bc.generalization.samples_per_size = *c.gen_per_size;
  if (app.count("--scale-low")) bc.generalization.scale_low = c.scale_low;
  if (app.count("--scale-high")) bc.generalization.scale_high = c.scale_high;
  if (!c.runtime_sizes.empty()) bc.runtime.sizes = parse_size_list(c.runtime_sizes);
  if (c.instances) bc.runtime.instances = *c.instances;
  if (c.heldout) bc.eval_fraction = *c.heldout;

  EvalOptions opts;
  opts.threads = resolve_threads(c, bc.threads);
  opts.repeats = bc.repeats;
  opts.seed = bc.seed;
  opts.sinkhorn = bc.sinkhorn;

  std::optional<GlanModel> model;
  if (!bc.checkpoint.empty()) {
    const Checkpoint ckpt = load_checkpoint(bc.checkpoint);
    model.emplace(ckpt.model_config, ckpt.params);
  }
  auto need_dataset = [&]() {
    if (bc.dataset.empty()) throw UsageError("suite '" + bc.suite + "' needs --dataset");
    return load_dataset(bc.dataset);
  };
  // With --heldout the report covers only the held-out share of the dataset,
  // split exactly as the trainer does.
  auto maybe_heldout = [&](const Dataset& data) {
    if (!c.heldout) return data;
    return split(data, *c.heldout, c.split_seed.value_or(bc.seed)).second;
  };

  BenchReport report;
  if (bc.suite == "eval") {
    std::vector<Method> methods = bc.methods;
    if (!model) {
      const auto glan = std::find(methods.begin(), methods.end(), Method::kGlan);
      if (glan != methods.end() && c.methods.empty()) {
        err << "no checkpoint given; skipping glan\n";
        methods.erase(glan);
      }
    }
    const Dataset data = maybe_heldout(need_dataset());
    report = evaluate(methods, data, model ? &*model : nullptr, opts, bc.dataset);
  } else if (bc.suite == "ablation") {
    const Dataset data = need_dataset();
    TrainConfig tc = c.train;
    const auto [train_set, eval_set] = split(data, bc.eval_fraction, c.split_seed.value_or(tc.seed));
    report = ablation_suite(train_set, eval_set, c.model, tc, opts,
                            [&err](const std::string& msg) { err << msg << '\n'; });
    report.dataset.emplace_back("path", bc.dataset);
  } else if (bc.suite == "generalization") {
    if (!model) throw UsageError("suite 'generalization' needs --checkpoint");
    std::optional<Dataset> base;
    if (!bc.dataset.empty()) base = maybe_heldout(load_dataset(bc.dataset));
    std::vector<Method> methods = c.methods.empty() && c.config_file.empty()
                                      ? std::vector<Method>{Method::kGlan, Method::kSinkhorn}
                                      : bc.methods;
    report = generalization_suite(*model, bc.generalization, methods, opts, base ? &*base : nullptr);
  } else if (bc.suite == "runtime") {
    report.title = "Runtime: median end-to-end solve time (ms) per size";
    report.environment = environment_echo(1);
    for (Method m : bc.methods) {
      if (m == Method::kGlan && !model) throw UsageError("method glan needs --checkpoint");
      for (const BenchRow& r : runtime_profile(m, model ? &*model : nullptr, bc.runtime)) {
        report.rows.push_back(r);
      }
    }
    report.config.emplace_back("instances", std::to_string(bc.runtime.instances));
    report.config.emplace_back("seed", std::to_string(bc.runtime.seed));
    report.footer = "Times include graph construction, network and discretization.";
  } else {
    throw UsageError("unknown suite '" + bc.suite + "'");
  }
  if (model) report.config.emplace_back("checkpoint", bc.checkpoint);
  emit_report(report, bc.out_prefix, out);
  return kExitOk;
}

void add_model_flags(CLI::App* cmd, CliConfig& c) {
  cmd->add_option("--t", c.model.t, "Edges kept per agent");
  cmd->add_option("--conv-iters", c.model.conv_iterations, "Convolution iterations S");
  cmd->add_option("--latent-dim", c.model.latent_dim, "Latent attribute width");
  cmd->add_option("--hidden", c.model.hidden_width, "Perceptron hidden width");
  cmd->add_flag("--ablate-attention", c.model.ablate_channel_attention,
                "Disable channel attention");
  cmd->add_flag("--ablate-weights", c.model.ablate_aggregation_weights,
                "Disable aggregation weights");
  cmd->add_option("--epochs", c.train.epochs, "Training epochs");
  cmd->add_option("--lr", c.train.lr_initial, "Initial learning rate");
  cmd->add_option("--lr-decay", c.train.lr_decay, "Learning-rate decay factor");
  cmd->add_option("--lr-decay-every", c.train.lr_decay_every, "Epochs between decays");
  cmd->add_option("--alpha", c.train.alpha_initial, "Initial constraint weight");
  cmd->add_option("--alpha-step", c.train.alpha_step, "Constraint weight increment per epoch");
  cmd->add_option("--w", c.train.w, "Positive-class weight");
  cmd->add_option("--grad-clip", c.train.grad_clip, "Global gradient-norm clip");
  cmd->add_flag("--no-l1", [&c](std::int64_t) { c.train.use_sum_constraint = false; },
                "Drop the row/column sum constraint");
  cmd->add_flag("--no-l2", [&c](std::int64_t) { c.train.use_norm_constraint = false; },
                "Drop the row/column norm constraint");
  cmd->add_option("--eval-fraction", c.eval_fraction, "Held-out share of the dataset");
  cmd->add_option("--split-seed", c.split_seed, "Seed of the train/eval split (default: --seed)");
}

}  // namespace

std::string default_config_dump() {
  const DatasetSpec d;
  const ModelConfig m;
  const TrainConfig t;
  const SinkhornConfig s;
  const EvalOptions e;
  std::ostringstream os;
  os << "dataset.sizes=" << d.sizes.front() << ":" << d.sizes.back() << ":"
     << (d.sizes.size() > 1 ? d.sizes[1] - d.sizes[0] : 1) << '\n'
     << "dataset.per_size=" << d.samples_per_size << '\n'
     << "dataset.u=" << format_short(d.value_upper_bound) << '\n'
     << "dataset.scale_values=" << d.scale_values << '\n'
     << "dataset.scale_range=" << format_short(d.scale_low) << ":" << format_short(d.scale_high)
     << '\n'
     << "split.eval_fraction=0.3\n"
     << "model.latent_dim=" << m.latent_dim << '\n'
     << "model.conv_iterations=" << m.conv_iterations << '\n'
     << "model.t=" << m.t << '\n'
     << "model.hidden_width=" << m.hidden_width << '\n'
     << "model.ablate_attention=" << m.ablate_channel_attention << '\n'
     << "model.ablate_weights=" << m.ablate_aggregation_weights << '\n'
     << "train.epochs=" << t.epochs << '\n'
     << "train.lr_initial=" << format_short(t.lr_initial) << '\n'
     << "train.lr_decay=" << format_short(t.lr_decay) << '\n'
     << "train.lr_decay_every=" << t.lr_decay_every << '\n'
     << "train.alpha_initial=" << format_short(t.alpha_initial) << '\n'
     << "train.alpha_step=" << format_short(t.alpha_step) << '\n'
     << "train.w=" << format_short(t.w) << '\n'
     << "train.epsilon_log=" << format_short(t.epsilon_log) << '\n'
     << "train.use_l1=" << t.use_sum_constraint << '\n'
     << "train.use_l2=" << t.use_norm_constraint << '\n'
     << "train.optimizer=adam beta1=" << format_short(t.beta1)
     << " beta2=" << format_short(t.beta2) << " epsilon=" << format_short(t.adam_epsilon) << '\n'
     << "train.grad_clip=" << format_short(t.grad_clip) << '\n'
     << "train.seed=" << t.seed << '\n'
     << "sinkhorn.kernel=" << to_string(s.kernel) << '\n'
     << "sinkhorn.temperature=" << format_short(s.temperature) << '\n'
     << "sinkhorn.max_iterations=" << s.max_iterations << '\n'
     << "sinkhorn.tolerance=" << format_short(s.tolerance) << '\n'
     << "eval.repeats=" << e.repeats << '\n'
     << "threads=" << default_thread_count() << '\n';
  return os.str();
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CliConfig c;
  CLI::App app{"lapforge: learned and classical linear assignment solvers"};
  app.require_subcommand(0, 1);
  bool show_config = false;
  app.add_flag("--show-config", show_config, "Print every default and exit");
  app.add_option("--threads", c.threads, "Worker threads (default: LAPFORGE_THREADS or all cores)");

  auto* gen = app.add_subcommand("generate", "Generate a labeled synthetic dataset");
  gen->add_option("--sizes", c.sizes, "Sizes as lo:hi:step or a comma list");
  gen->add_option("--per-size", c.per_size, "Records per size");
  gen->add_option("--seed", c.seed, "Generation seed");
  gen->add_option("--out", c.out, "Output dataset file")->required();
  gen->add_option("--u", c.u, "Costs are drawn from U(0, u)");
  gen->add_flag("--scale-values", c.scale_values, "Multiply each matrix by a factor from U(lo, hi)");
  gen->add_option("--scale-low", c.scale_low, "Lower scale factor");
  gen->add_option("--scale-high", c.scale_high, "Upper scale factor");

  auto* train = app.add_subcommand("train", "Train the graph assignment network");
  train->add_option("--dataset", c.dataset, "Dataset file")->required();
  train->add_option("--checkpoint", c.checkpoint, "Checkpoint written after every epoch")
      ->required();
  train->add_option("--history", c.history, "History log (default: <checkpoint>.history.jsonl)");
  train->add_option("--resume", c.resume, "Continue from this checkpoint");
  train->add_option("--seed", c.train.seed, "Initialization and shuffle seed");
  train->add_option("--stop-after", c.stop_after, "Stop after this many epochs in this run");
  add_model_flags(train, c);

  auto* solve_cmd = app.add_subcommand("solve", "Solve a single cost matrix");
  solve_cmd->add_option("input", c.input, "File holding one record: n c11 ... cnn [assignment]")
      ->required();
  solve_cmd->add_option("--method", c.method, "hungarian, sinkhorn, glan, random or all");
  solve_cmd->add_option("--checkpoint", c.checkpoint, "Checkpoint for glan");
  solve_cmd->add_option("--seed", c.seed, "Seed for the random baseline");
  solve_cmd->add_option("--sinkhorn-kernel", c.sinkhorn_kernel, "linear or exponential");

  auto add_bench_flags = [&c](CLI::App* cmd, bool with_suite) {
    if (with_suite) {
      cmd->add_option("--suite", c.suite, "eval, ablation, generalization or runtime")
          ->check(CLI::IsMember({"eval", "ablation", "generalization", "runtime"}));
    }
    cmd->add_option("--methods", c.methods, "Comma-separated methods or all");
    cmd->add_option("--dataset", c.dataset, "Dataset file");
    cmd->add_option("--checkpoint", c.checkpoint, "Trained checkpoint");
    cmd->add_option("--config", c.config_file, "Benchmark config file (key=value lines)");
    cmd->add_option("--out", c.out, "Report prefix; writes <prefix>.tsv and <prefix>.txt");
    cmd->add_option("--repeats", c.repeats, "Timed repeats per record, 0 disables timing");
    cmd->add_option("--seed", c.seed, "Seed for random baselines and generated sets");
    cmd->add_option("--heldout", c.heldout, "Evaluate only the held-out share of the dataset");
    cmd->add_option("--sinkhorn-kernel", c.sinkhorn_kernel, "linear or exponential");
    cmd->add_option("--base-sizes", c.base_sizes, "Generalization: in-distribution sizes");
    cmd->add_option("--large-sizes", c.large_sizes, "Generalization: larger sizes");
    cmd->add_option("--per-size", c.gen_per_size, "Generalization: records per size");
    cmd->add_option("--scale-low", c.scale_low, "Generalization: lower value scale");
    cmd->add_option("--scale-high", c.scale_high, "Generalization: upper value scale");
    cmd->add_option("--runtime-sizes", c.runtime_sizes, "Runtime: sizes to profile");
    cmd->add_option("--instances", c.instances, "Runtime: instances per size");
    add_model_flags(cmd, c);
  };
  auto* bench = app.add_subcommand("bench", "Run a benchmark suite");
  add_bench_flags(bench, true);
  auto* eval = app.add_subcommand("eval", "Per-size precision report (bench --suite eval)");
  add_bench_flags(eval, false);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (show_config) {
      out << default_config_dump();
      return kExitOk;
    }
    if (gen->parsed()) return cmd_generate(c, out, err);
    if (train->parsed()) return cmd_train(c, out, err);
    if (solve_cmd->parsed()) return cmd_solve(c, out);
    if (bench->parsed()) return cmd_bench(c, *bench, out, err);
    if (eval->parsed()) {
      c.suite = "eval";
      return cmd_bench(c, *eval, out, err);
    }
    err << app.help();
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace lapforge
