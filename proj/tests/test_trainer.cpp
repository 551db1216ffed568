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

#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "lapforge/error.hpp"
#include "lapforge/trainer.hpp"
#include "test_util.hpp"

using namespace lapforge;

namespace {

Dataset make_data(std::vector<std::size_t> sizes, std::size_t per_size, unsigned long long seed) {
  DatasetSpec s;
  s.sizes = std::move(sizes);
  s.samples_per_size = per_size;
  s.seed = seed;
  return generate(s);
}

std::vector<double> flat_parameters(const GlanModel& m) {
  std::vector<double> out;
  for (const auto& [name, t] : m.parameters().named_tensors()) {
    out.insert(out.end(), t->data().begin(), t->data().end());
  }
  return out;
}

ModelConfig small_model() {
  ModelConfig m;
  m.latent_dim = 8;
  m.hidden_width = 16;
  m.conv_iterations = 3;
  return m;
}

}  // namespace

TEST_CASE("learning-rate and constraint-weight schedules") {
  const TrainConfig cfg;
  CHECK(cfg.epochs == 20);
  for (std::size_t e = 0; e < 5; ++e) CHECK(cfg.learning_rate(e) == doctest::Approx(0.003));
  for (std::size_t e = 5; e < 10; ++e) CHECK(cfg.learning_rate(e) == doctest::Approx(0.00285));
  CHECK(cfg.learning_rate(19) == doctest::Approx(0.003 * std::pow(0.95, 3)));
  CHECK(cfg.alpha(0) == 0.0);
  CHECK(cfg.alpha(10) == doctest::Approx(0.10));
  for (std::size_t e = 0; e < 20; ++e) {
    CHECK(cfg.alpha(e) == doctest::Approx(0.01 * static_cast<double>(e)));
    CHECK(cfg.loss_config(e).alpha == cfg.alpha(e));
    CHECK(cfg.loss_config(e).w == 0.9);
  }
}

TEST_CASE("config validation") {
  TrainConfig cfg;
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg = TrainConfig{};
  cfg.lr_initial = -1.0;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg = TrainConfig{};
  cfg.beta2 = 1.0;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg = TrainConfig{};
  cfg.w = 1.5;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
}

TEST_CASE("tiny run beats the random baseline") {
  const Dataset data = make_data({5}, 50, 1);
  const auto [train_set, eval_set] = split(data, 0.3, 1);
  TrainConfig tc;
  const TrainResult r = train(train_set, eval_set, ModelConfig{}, tc);
  REQUIRE(r.history.size() == 20);
  for (std::size_t e = 0; e < 20; ++e) {
    CHECK(r.history[e].epoch == e);
    CHECK(r.history[e].learning_rate == tc.learning_rate(e));
    CHECK(r.history[e].alpha == tc.alpha(e));
  }
  CHECK(r.history.back().eval_precision > 0.2);
  CHECK(mean_glan_precision(r.model, eval_set, 2) == r.history.back().eval_precision);
}

TEST_CASE("training loss falls over the first epochs") {
  const Dataset data = make_data({10, 20, 30}, 20, 2);
  TrainConfig tc;
  tc.epochs = 5;
  Trainer trainer(ModelConfig{}, tc);
  trainer.run(data, nullptr);
  const auto& h = trainer.history();
  int increases = 0;
  for (std::size_t e = 1; e < h.size(); ++e) {
    if (h[e].mean_bce > h[e - 1].mean_bce) {
      ++increases;
      CHECK(h[e].mean_bce <= 1.05 * h[e - 1].mean_bce);
    }
    CHECK(std::isnan(h[e].eval_precision));
  }
  CHECK(increases <= 1);
}

TEST_CASE("training is deterministic") {
  const Dataset data = make_data({4, 6}, 8, 3);
  TrainConfig tc;
  tc.epochs = 2;
  tc.seed = 5;
  Trainer a(small_model(), tc), b(small_model(), tc);
  a.run(data, nullptr);
  b.run(data, nullptr);
  CHECK(flat_parameters(a.model()) == flat_parameters(b.model()));
  tc.seed = 6;
  Trainer c(small_model(), tc);
  c.run(data, nullptr);
  CHECK(flat_parameters(a.model()) != flat_parameters(c.model()));
}

TEST_CASE("checkpoint round trip reproduces outputs bit for bit") {
  const Dataset data = make_data({4, 7}, 5, 4);
  TrainConfig tc;
  tc.epochs = 2;
  Trainer trainer(small_model(), tc);
  trainer.run_epoch(data, &data);
  std::stringstream buf;
  write_checkpoint(buf, trainer.checkpoint());
  const Checkpoint back = read_checkpoint(buf);
  CHECK(back.model_config == trainer.model().config());
  CHECK(back.train_config == tc);
  CHECK(back.epochs_done == 1);
  CHECK(back.history.size() == 1);
  CHECK(back.history[0].eval_precision == trainer.history()[0].eval_precision);
  const GlanModel restored(back.model_config, back.params);
  ad::Rng rng(7);
  for (int k = 0; k < 10; ++k) {
    const CostMatrix c = testing::random_cost(3 + rng.below(8), rng);
    const Prediction a = trainer.model().predict(c), b = restored.predict(c);
    CHECK(a.labels == b.labels);
    CHECK(a.scores == b.scores);
  }
  const auto path = std::filesystem::temp_directory_path() / "lapforge_test.ckpt";
  save_checkpoint(trainer.checkpoint(), path);
  CHECK(flat_parameters(GlanModel(load_checkpoint(path).model_config, load_checkpoint(path).params)) ==
        flat_parameters(trainer.model()));
  std::filesystem::remove(path);
}

TEST_CASE("resuming from a checkpoint matches an uninterrupted run") {
  const Dataset data = make_data({4, 6}, 8, 5);
  TrainConfig tc;
  tc.epochs = 4;
  tc.seed = 9;
  Trainer straight(small_model(), tc);
  straight.run(data, &data);

  Trainer first(small_model(), tc);
  first.run_epoch(data, &data);
  first.run_epoch(data, &data);
  std::stringstream buf;
  write_checkpoint(buf, first.checkpoint());
  Trainer resumed(read_checkpoint(buf));
  CHECK(resumed.epochs_done() == 2);
  resumed.run(data, &data);
  CHECK(resumed.finished());
  CHECK(flat_parameters(resumed.model()) == flat_parameters(straight.model()));
  REQUIRE(resumed.history().size() == 4);
  for (std::size_t e = 0; e < 4; ++e) {
    CHECK(resumed.history()[e].eval_precision == straight.history()[e].eval_precision);
    CHECK(resumed.history()[e].mean_bce == straight.history()[e].mean_bce);
  }
  CHECK_THROWS_AS(resumed.run_epoch(data, nullptr), UsageError);
}

TEST_CASE("corrupt checkpoints are rejected") {
  TrainConfig tc;
  tc.epochs = 1;
  const Trainer trainer(small_model(), tc);
  std::stringstream buf;
  write_checkpoint(buf, trainer.checkpoint());
  const std::string text = buf.str();
  auto read = [](const std::string& s) {
    std::stringstream in(s);
    return read_checkpoint(in);
  };
  CHECK_NOTHROW(read(text));
  CHECK_THROWS_AS(read(text.substr(0, text.size() / 2)), DataError);
  CHECK_THROWS_AS(read(""), DataError);
  CHECK_THROWS_AS(read("not a checkpoint\n"), DataError);

  std::string version = text;
  version.replace(0, version.find('\n'), "lapforge-checkpoint 2");
  CHECK_THROWS_AS(read(version), DataError);

  std::string dims = text;
  const auto pos = dims.find("latent_dim=8");
  dims.replace(pos, 12, "latent_dim=9");
  CHECK_THROWS_AS(read(dims), DataError);

  std::string value = text;
  const auto tpos = value.find("tensor encoder.0.weight 1 16 ");
  value.replace(tpos + 29, 3, "abc");
  CHECK_THROWS_AS(read(value), DataError);

  CHECK_THROWS_AS(load_checkpoint("/nonexistent/x.ckpt"), DataError);
}

TEST_CASE("non-finite loss aborts with diagnostics") {
  const Dataset data = make_data({4}, 3, 6);
  TrainConfig tc;
  tc.epochs = 1;
  Trainer trainer(small_model(), tc);
  Checkpoint ckpt = trainer.checkpoint();
  for (auto& [name, t] : ckpt.params.named_tensors()) {
    if (name == "decoder.1.bias") (*t)[0] = std::numeric_limits<double>::quiet_NaN();
  }
  Trainer broken(ckpt);
  try {
    broken.run_epoch(data, nullptr);
    FAIL("expected a NumericError");
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("epoch 0") != std::string::npos);
    CHECK(msg.find("record") != std::string::npos);
    CHECK(msg.find("bce") != std::string::npos);
  }
}

TEST_CASE("history log lines are JSON") {
  EpochStats s;
  s.epoch = 3;
  s.learning_rate = 0.003;
  s.alpha = 0.03;
  s.mean_bce = 1.5;
  s.mean_constraint = 2.5;
  s.eval_precision = 0.75;
  const auto j = nlohmann::json::parse(history_json_line(s));
  CHECK(j["epoch"] == 3);
  CHECK(j["lr"] == 0.003);
  CHECK(j["alpha"] == 0.03);
  CHECK(j["eval_precision"] == 0.75);
  s.eval_precision = std::numeric_limits<double>::quiet_NaN();
  CHECK(nlohmann::json::parse(history_json_line(s))["eval_precision"].is_null());
}
