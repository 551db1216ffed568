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

#ifndef LAPFORGE_TRAINER_HPP_
#define LAPFORGE_TRAINER_HPP_

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "lapforge/datagen.hpp"
#include "lapforge/glan_model.hpp"
#include "lapforge/losses.hpp"

namespace lapforge {

inline constexpr int kCheckpointFormatVersion = 1;

struct TrainConfig {
  std::size_t epochs = 20;
  double lr_initial = 0.003;
  // Learning rate is multiplied by lr_decay after every lr_decay_every epochs.
  double lr_decay = 0.95;
  std::size_t lr_decay_every = 5;
  // Constraint weight alpha = alpha_initial + alpha_step * epoch.
  double alpha_initial = 0.0;
  double alpha_step = 0.01;
  double w = 0.9;
  double epsilon_log = 1e-12;
  bool use_sum_constraint = true;
  bool use_norm_constraint = true;
  // Adam.
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  // Global gradient-norm clip.
  double grad_clip = 10.0;
  // Seeds parameter initialization and the per-epoch shuffles.
  unsigned long long seed = 0;

  double learning_rate(std::size_t epoch) const;
  double alpha(std::size_t epoch) const;
  LossConfig loss_config(std::size_t epoch) const;
  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EpochStats {
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  double alpha = 0.0;
  double mean_bce = 0.0;
  double mean_constraint = 0.0;  // mean of L1 + L2
  double eval_precision = 0.0;   // NaN when no eval set was given
  std::size_t clipped_steps = 0;

  friend bool operator==(const EpochStats&, const EpochStats&) = default;
};

// First and second moment estimates for every named parameter tensor.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  unsigned long long step = 0;
};

struct Checkpoint {
  ModelConfig model_config;
  TrainConfig train_config;
  ModelParameters params;
  AdamState adam;
  std::size_t epochs_done = 0;
  std::string rng_state;
  std::vector<EpochStats> history;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// One JSON object per line: epoch, lr, alpha, mean_bce, mean_constraint,
// eval_precision, clipped_steps.
std::string history_json_line(const EpochStats& stats);

using TrainLogger = std::function<void(const std::string&)>;

// Stateful training loop: one graph per Adam step, seeded shuffles, learning
// rate and alpha schedules applied per epoch.
class Trainer {
 public:
  Trainer(const ModelConfig& model_cfg, const TrainConfig& train_cfg);
  explicit Trainer(Checkpoint ckpt);

  // Runs the next epoch. Throws NumericError on a non-finite loss.
  EpochStats run_epoch(const Dataset& train_set, const Dataset* eval_set,
                       std::size_t eval_threads = 1);
  // Runs the remaining epochs; on_epoch fires after each one.
  void run(const Dataset& train_set, const Dataset* eval_set, std::size_t eval_threads = 1,
           const std::function<void(const Trainer&, const EpochStats&)>& on_epoch = {});

  bool finished() const { return epochs_done_ >= train_cfg_.epochs; }
  std::size_t epochs_done() const { return epochs_done_; }
  const GlanModel& model() const { return model_; }
  const TrainConfig& train_config() const { return train_cfg_; }
  const std::vector<EpochStats>& history() const { return history_; }
  Checkpoint checkpoint() const;

  void set_logger(TrainLogger logger) { logger_ = std::move(logger); }

 private:
  void adam_step(double lr);

  TrainConfig train_cfg_;
  GlanModel model_;
  AdamState adam_;
  ad::Rng rng_;
  std::size_t epochs_done_ = 0;
  std::vector<EpochStats> history_;
  TrainLogger logger_;
};

struct TrainResult {
  GlanModel model;
  std::vector<EpochStats> history;
};

TrainResult train(const Dataset& train_set, const Dataset& eval_set,
                  const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                  std::size_t eval_threads = 1);

// Greedy-discretized precision of the model against the stored optimum,
// averaged over records.
double mean_glan_precision(const GlanModel& model, const Dataset& data,
                           std::size_t threads = 1);

}  // namespace lapforge

#endif  // LAPFORGE_TRAINER_HPP_
