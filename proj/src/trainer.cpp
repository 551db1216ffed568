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

#include "lapforge/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "lapforge/error.hpp"
#include "lapforge/parallel.hpp"
#include "lapforge/text_io.hpp"

namespace lapforge {

namespace {

constexpr unsigned long long kInitStream = 0x1417;
constexpr unsigned long long kShuffleStream = 0x54f1e;

}  // namespace

// ---- TrainConfig -----------------------------------------------------------

double TrainConfig::learning_rate(std::size_t epoch) const {
  return lr_initial * std::pow(lr_decay, static_cast<double>(epoch / lr_decay_every));
}

double TrainConfig::alpha(std::size_t epoch) const {
  return alpha_initial + alpha_step * static_cast<double>(epoch);
}

LossConfig TrainConfig::loss_config(std::size_t epoch) const {
  LossConfig cfg;
  cfg.w = w;
  cfg.alpha = alpha(epoch);
  cfg.epsilon_log = epsilon_log;
  cfg.use_sum_constraint = use_sum_constraint;
  cfg.use_norm_constraint = use_norm_constraint;
  return cfg;
}

void TrainConfig::validate() const {
  if (epochs == 0) throw UsageError("epochs must be >= 1");
  if (!(lr_initial > 0.0)) throw UsageError("learning rate must be > 0");
  if (!(lr_decay > 0.0)) throw UsageError("lr decay factor must be > 0");
  if (lr_decay_every == 0) throw UsageError("lr decay period must be >= 1");
  if (!(alpha_initial >= 0.0) || !(alpha_step >= 0.0)) throw UsageError("alpha schedule must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw UsageError("Adam betas must lie in [0, 1)");
  }
  if (!(grad_clip > 0.0)) throw UsageError("gradient clip must be > 0");
  loss_config(0).validate();
}

// ---- Trainer ---------------------------------------------------------------

Trainer::Trainer(const ModelConfig& model_cfg, const TrainConfig& train_cfg)
    : train_cfg_(train_cfg),
      model_(GlanModel::initialize(model_cfg, ad::derive_seed(train_cfg.seed, {kInitStream}))),
      rng_(ad::derive_seed(train_cfg.seed, {kShuffleStream})) {
  train_cfg_.validate();
  for (const auto& [name, t] : model_.parameters().named_tensors()) {
    adam_.m.emplace_back(t->numel(), 0.0);
    adam_.v.emplace_back(t->numel(), 0.0);
  }
}

Trainer::Trainer(Checkpoint ckpt)
    : train_cfg_(ckpt.train_config),
      model_(ckpt.model_config, std::move(ckpt.params)),
      adam_(std::move(ckpt.adam)),
      rng_(0),
      epochs_done_(ckpt.epochs_done),
      history_(std::move(ckpt.history)) {
  train_cfg_.validate();
  const auto tensors = model_.parameters().named_tensors();
  if (adam_.m.empty() && adam_.v.empty()) {
    for (const auto& [name, t] : tensors) {
      adam_.m.emplace_back(t->numel(), 0.0);
      adam_.v.emplace_back(t->numel(), 0.0);
    }
  }
  if (adam_.m.size() != tensors.size() || adam_.v.size() != tensors.size()) {
    throw DataError("checkpoint optimizer state does not match the parameters");
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (adam_.m[i].size() != tensors[i].second->numel() ||
        adam_.v[i].size() != tensors[i].second->numel()) {
      throw DataError("checkpoint optimizer state for " + tensors[i].first + " has wrong size");
    }
  }
  if (ckpt.rng_state.empty()) {
    rng_ = ad::Rng(ad::derive_seed(train_cfg_.seed, {kShuffleStream}));
  } else {
    rng_.restore(ckpt.rng_state);
  }
}

void Trainer::adam_step(double lr) {
  ++adam_.step;
  const double t = static_cast<double>(adam_.step);
  const double correction1 = 1.0 - std::pow(train_cfg_.beta1, t);
  const double correction2 = 1.0 - std::pow(train_cfg_.beta2, t);
  auto tensors = model_.parameters().named_tensors();
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    ad::Tensor& p = *tensors[k].second;
    const auto& g = p.grad();
    auto& m = adam_.m[k];
    auto& v = adam_.v[k];
    for (std::size_t i = 0; i < p.numel(); ++i) {
      m[i] = train_cfg_.beta1 * m[i] + (1.0 - train_cfg_.beta1) * g[i];
      v[i] = train_cfg_.beta2 * v[i] + (1.0 - train_cfg_.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + train_cfg_.adam_epsilon);
    }
  }
}

EpochStats Trainer::run_epoch(const Dataset& train_set, const Dataset* eval_set,
                              std::size_t eval_threads) {
  if (train_set.records.empty()) throw UsageError("training set is empty");
  if (finished()) throw UsageError("training already completed all epochs");
  const std::size_t epoch = epochs_done_;
  EpochStats stats;
  stats.epoch = epoch;
  stats.learning_rate = train_cfg_.learning_rate(epoch);
  stats.alpha = train_cfg_.alpha(epoch);
  const LossConfig loss_cfg = train_cfg_.loss_config(epoch);

  std::vector<std::size_t> order(train_set.records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng_.below(i)]);

  ModelParameters& params = model_.parameters();
  double bce_sum = 0.0, constraint_sum = 0.0;
  for (std::size_t idx : order) {
    const SampleRecord& record = train_set.records[idx];
    params.zero_grad();
    ad::Tape tape;
    const ForwardPass pass = model_.forward(tape, record.cost);
    const GroundTruthLabels truth = ground_truth_labels(pass.graph, record.optimal);
    const LossTerms loss = combined_loss(pass.labels, truth.labels, pass.scores, loss_cfg);
    const double total = loss.total.value()[0];
    const double bce = loss.bce.value()[0];
    const double l1 = loss.sum_constraint.value()[0];
    const double l2 = loss.norm_constraint.value()[0];
    if (!std::isfinite(total)) {
      std::ostringstream os;
      os << "non-finite loss at epoch " << epoch << ", record " << idx << " (n=" << record.cost.size()
         << "): total=" << total << " bce=" << bce << " L1=" << l1 << " L2=" << l2;
      throw NumericError(os.str());
    }
    tape.backward(loss.total);

    double sq = 0.0;
    for (const auto& [name, t] : params.named_tensors()) {
      for (double g : t->grad()) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (!std::isfinite(norm)) {
      throw NumericError("non-finite gradient at epoch " + std::to_string(epoch) + ", record " +
                         std::to_string(idx));
    }
    if (norm > train_cfg_.grad_clip) {
      const double k = train_cfg_.grad_clip / norm;
      for (auto& [name, t] : params.named_tensors()) {
        for (double& g : t->grad()) g *= k;
      }
      ++stats.clipped_steps;
    }
    adam_step(stats.learning_rate);
    bce_sum += bce;
    constraint_sum += l1 + l2;
  }
  const auto count = static_cast<double>(order.size());
  stats.mean_bce = bce_sum / count;
  stats.mean_constraint = constraint_sum / count;
  stats.eval_precision = (eval_set != nullptr && !eval_set->records.empty())
                             ? mean_glan_precision(model_, *eval_set, eval_threads)
                             : std::numeric_limits<double>::quiet_NaN();
  if (stats.clipped_steps > 0 && logger_) {
    logger_("epoch " + std::to_string(epoch) + ": gradient norm clipped on " +
            std::to_string(stats.clipped_steps) + " of " + std::to_string(order.size()) +
            " steps");
  }
  ++epochs_done_;
  history_.push_back(stats);
  return stats;
}

void Trainer::run(const Dataset& train_set, const Dataset* eval_set, std::size_t eval_threads,
                  const std::function<void(const Trainer&, const EpochStats&)>& on_epoch) {
  while (!finished()) {
    const EpochStats stats = run_epoch(train_set, eval_set, eval_threads);
    if (logger_) logger_(history_json_line(stats));
    if (on_epoch) on_epoch(*this, stats);
  }
}

Checkpoint Trainer::checkpoint() const {
  return Checkpoint{model_.config(), train_cfg_, model_.parameters(), adam_,
                    epochs_done_,    rng_.state(), history_};
}

TrainResult train(const Dataset& train_set, const Dataset& eval_set, const ModelConfig& model_cfg,
                  const TrainConfig& train_cfg, std::size_t eval_threads) {
  Trainer trainer(model_cfg, train_cfg);
  trainer.run(train_set, &eval_set, eval_threads);
  return TrainResult{trainer.model(), trainer.history()};
}

double mean_glan_precision(const GlanModel& model, const Dataset& data, std::size_t threads) {
  if (data.records.empty()) throw UsageError("cannot evaluate on an empty dataset");
  std::vector<double> per_record(data.records.size());
  parallel_for(data.records.size(), threads, [&](std::size_t i) {
    const SampleRecord& r = data.records[i];
    per_record[i] = precision(greedy_permutation(model.predict(r.cost).scores), r.optimal);
  });
  return std::accumulate(per_record.begin(), per_record.end(), 0.0) /
         static_cast<double>(per_record.size());
}

std::string history_json_line(const EpochStats& s) {
  nlohmann::json j;
  j["epoch"] = s.epoch;
  j["lr"] = s.learning_rate;
  j["alpha"] = s.alpha;
  j["mean_bce"] = s.mean_bce;
  j["mean_constraint"] = s.mean_constraint;
  j["eval_precision"] = std::isfinite(s.eval_precision) ? nlohmann::json(s.eval_precision)
                                                        : nlohmann::json(nullptr);
  j["clipped_steps"] = s.clipped_steps;
  return j.dump();
}

// ---- Checkpoint I/O ----------------------------------------------------------

namespace {

constexpr const char* kCheckpointMagic = "lapforge-checkpoint";

void write_values(std::ostream& out, const char* tag, const std::string& name, std::size_t rows,
                  std::size_t cols, const std::vector<double>& values) {
  out << tag << ' ' << name << ' ' << rows << ' ' << cols;
  for (double v : values) out << ' ' << format_double(v);
  out << '\n';
}

std::string model_line(const ModelConfig& c) {
  std::ostringstream os;
  os << "model latent_dim=" << c.latent_dim << " conv_iterations=" << c.conv_iterations
     << " t=" << c.t << " hidden_width=" << c.hidden_width
     << " ablate_channel_attention=" << c.ablate_channel_attention
     << " ablate_aggregation_weights=" << c.ablate_aggregation_weights;
  return os.str();
}

std::string train_line(const TrainConfig& c) {
  std::ostringstream os;
  os << "train epochs=" << c.epochs << " lr_initial=" << format_double(c.lr_initial)
     << " lr_decay=" << format_double(c.lr_decay) << " lr_decay_every=" << c.lr_decay_every
     << " alpha_initial=" << format_double(c.alpha_initial)
     << " alpha_step=" << format_double(c.alpha_step) << " w=" << format_double(c.w)
     << " epsilon_log=" << format_double(c.epsilon_log)
     << " use_sum_constraint=" << c.use_sum_constraint
     << " use_norm_constraint=" << c.use_norm_constraint << " beta1=" << format_double(c.beta1)
     << " beta2=" << format_double(c.beta2) << " adam_epsilon=" << format_double(c.adam_epsilon)
     << " grad_clip=" << format_double(c.grad_clip) << " seed=" << c.seed;
  return os.str();
}

const std::string& need(const std::map<std::string, std::string>& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw DataError("checkpoint is missing field '" + key + "'");
  return it->second;
}

std::size_t need_size(const std::map<std::string, std::string>& kv, const std::string& key) {
  const long long v = parse_int(need(kv, key), key);
  if (v < 0) throw DataError("checkpoint field '" + key + "' is negative");
  return static_cast<std::size_t>(v);
}

bool need_bool(const std::map<std::string, std::string>& kv, const std::string& key) {
  const std::string& v = need(kv, key);
  if (v != "0" && v != "1") throw DataError("checkpoint field '" + key + "' must be 0 or 1");
  return v == "1";
}

double need_double(const std::map<std::string, std::string>& kv, const std::string& key) {
  return parse_double(need(kv, key), key);
}

std::string rest_after_tag(const std::string& line, std::size_t tag_len) {
  return tag_len < line.size() ? line.substr(tag_len + 1) : std::string();
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out << kCheckpointMagic << ' ' << kCheckpointFormatVersion << '\n';
  out << model_line(ckpt.model_config) << '\n';
  out << train_line(ckpt.train_config) << '\n';
  out << "state epochs_done=" << ckpt.epochs_done << " adam_step=" << ckpt.adam.step << '\n';
  out << "rng " << ckpt.rng_state << '\n';
  for (const EpochStats& s : ckpt.history) {
    out << "history " << s.epoch << ' ' << format_double(s.learning_rate) << ' '
        << format_double(s.alpha) << ' ' << format_double(s.mean_bce) << ' '
        << format_double(s.mean_constraint) << ' ' << format_double(s.eval_precision) << ' '
        << s.clipped_steps << '\n';
  }
  const auto tensors = ckpt.params.named_tensors();
  for (const auto& [name, t] : tensors) {
    write_values(out, "tensor", name, t->rows(), t->cols(),
                 std::vector<double>(t->data().begin(), t->data().end()));
  }
  if (ckpt.adam.m.size() == tensors.size() && ckpt.adam.v.size() == tensors.size()) {
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      const auto* t = tensors[i].second;
      write_values(out, "adam_m", tensors[i].first, t->rows(), t->cols(), ckpt.adam.m[i]);
      write_values(out, "adam_v", tensors[i].first, t->rows(), t->cols(), ckpt.adam.v[i]);
    }
  }
  out << "end\n";
}

Checkpoint read_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("checkpoint file is empty");
  {
    const auto tok = split_ws(line);
    if (tok.size() != 2 || tok[0] != kCheckpointMagic) throw DataError("not a lapforge checkpoint");
    const long long version = parse_int(tok[1], "checkpoint version");
    if (version != kCheckpointFormatVersion) {
      throw DataError("unsupported checkpoint version " + std::to_string(version));
    }
  }
  Checkpoint ckpt;
  bool have_model = false, have_end = false;
  std::map<std::string, ad::Tensor*> by_name;
  std::map<std::string, std::size_t> index_of;
  std::set<std::string> seen_tensors;
  std::vector<std::vector<double>> adam_m, adam_v;

  auto read_values = [](const std::vector<std::string_view>& tok, std::size_t rows, std::size_t cols,
                        const std::string& name) {
    if (tok.size() != 4 + rows * cols) {
      throw DataError("tensor '" + name + "' has " + std::to_string(tok.size() - 4) +
                      " values, expected " + std::to_string(rows * cols));
    }
    std::vector<double> values(rows * cols);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = parse_double(tok[4 + i], name);
    return values;
  };

  while (std::getline(in, line)) {
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    const std::string_view tag = tok[0];
    if (tag == "model") {
      const auto kv = parse_key_values(rest_after_tag(line, tag.size()), "model config");
      ModelConfig& m = ckpt.model_config;
      m.latent_dim = need_size(kv, "latent_dim");
      m.conv_iterations = need_size(kv, "conv_iterations");
      m.t = need_size(kv, "t");
      m.hidden_width = need_size(kv, "hidden_width");
      m.ablate_channel_attention = need_bool(kv, "ablate_channel_attention");
      m.ablate_aggregation_weights = need_bool(kv, "ablate_aggregation_weights");
      try {
        m.validate();
      } catch (const UsageError& e) {
        throw DataError(std::string("checkpoint model config: ") + e.what());
      }
      ckpt.params = ModelParameters::initialize(m, 0);
      for (auto& [name, t] : ckpt.params.named_tensors()) {
        index_of[name] = by_name.size();
        by_name[name] = t;
      }
      adam_m.resize(by_name.size());
      adam_v.resize(by_name.size());
      have_model = true;
    } else if (tag == "train") {
      const auto kv = parse_key_values(rest_after_tag(line, tag.size()), "train config");
      TrainConfig& c = ckpt.train_config;
      c.epochs = need_size(kv, "epochs");
      c.lr_initial = need_double(kv, "lr_initial");
      c.lr_decay = need_double(kv, "lr_decay");
      c.lr_decay_every = need_size(kv, "lr_decay_every");
      c.alpha_initial = need_double(kv, "alpha_initial");
      c.alpha_step = need_double(kv, "alpha_step");
      c.w = need_double(kv, "w");
      c.epsilon_log = need_double(kv, "epsilon_log");
      c.use_sum_constraint = need_bool(kv, "use_sum_constraint");
      c.use_norm_constraint = need_bool(kv, "use_norm_constraint");
      c.beta1 = need_double(kv, "beta1");
      c.beta2 = need_double(kv, "beta2");
      c.adam_epsilon = need_double(kv, "adam_epsilon");
      c.grad_clip = need_double(kv, "grad_clip");
      c.seed = parse_u64(need(kv, "seed"), "seed");
    } else if (tag == "state") {
      const auto kv = parse_key_values(rest_after_tag(line, tag.size()), "state");
      ckpt.epochs_done = need_size(kv, "epochs_done");
      ckpt.adam.step = parse_u64(need(kv, "adam_step"), "adam_step");
    } else if (tag == "rng") {
      ckpt.rng_state = rest_after_tag(line, tag.size());
    } else if (tag == "history") {
      if (tok.size() != 8) throw DataError("malformed history line in checkpoint");
      EpochStats s;
      s.epoch = static_cast<std::size_t>(parse_int(tok[1], "history epoch"));
      s.learning_rate = parse_double(tok[2], "history lr");
      s.alpha = parse_double(tok[3], "history alpha");
      s.mean_bce = parse_double(tok[4], "history bce");
      s.mean_constraint = parse_double(tok[5], "history constraint");
      s.eval_precision = tok[6] == "nan" || tok[6] == "-nan"
                             ? std::numeric_limits<double>::quiet_NaN()
                             : parse_double(tok[6], "history precision");
      s.clipped_steps = static_cast<std::size_t>(parse_int(tok[7], "history clipped"));
      ckpt.history.push_back(s);
    } else if (tag == "tensor" || tag == "adam_m" || tag == "adam_v") {
      if (!have_model) throw DataError("checkpoint tensor before model config");
      if (tok.size() < 4) throw DataError("malformed tensor line in checkpoint");
      const std::string name(tok[1]);
      const auto it = by_name.find(name);
      if (it == by_name.end()) throw DataError("checkpoint has unknown tensor '" + name + "'");
      const auto rows = static_cast<std::size_t>(parse_int(tok[2], "tensor rows"));
      const auto cols = static_cast<std::size_t>(parse_int(tok[3], "tensor cols"));
      ad::Tensor& target = *it->second;
      if (rows != target.rows() || cols != target.cols()) {
        throw DataError("checkpoint tensor '" + name + "' is " + std::to_string(rows) + "x" +
                        std::to_string(cols) + ", model expects " + std::to_string(target.rows()) +
                        "x" + std::to_string(target.cols()));
      }
      auto values = read_values(tok, rows, cols, name);
      if (tag == "tensor") {
        std::copy(values.begin(), values.end(), target.data().begin());
        seen_tensors.insert(name);
      } else if (tag == "adam_m") {
        adam_m[index_of[name]] = std::move(values);
      } else {
        adam_v[index_of[name]] = std::move(values);
      }
    } else if (tag == "end") {
      have_end = true;
      break;
    } else {
      throw DataError("unknown checkpoint line '" + std::string(tag) + "'");
    }
  }
  if (!have_model) throw DataError("checkpoint lacks a model config");
  if (!have_end) throw DataError("checkpoint is truncated (no end marker)");
  if (seen_tensors.size() != by_name.size()) throw DataError("checkpoint is missing parameter tensors");
  const bool full_adam = std::all_of(adam_m.begin(), adam_m.end(), [](auto& v) { return !v.empty(); }) &&
                         std::all_of(adam_v.begin(), adam_v.end(), [](auto& v) { return !v.empty(); });
  if (full_adam) {
    ckpt.adam.m = std::move(adam_m);
    ckpt.adam.v = std::move(adam_v);
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  write_checkpoint(out, ckpt);
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
  return read_checkpoint(in);
}

}  // namespace lapforge
