/*
 * Copyright 2026 The airacl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <filesystem>
#include <fstream>

#include "airacl/checkpoint.hpp"
#include "airacl/trainer.hpp"
#include "cli.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace airacl;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("airacl_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

constexpr const char* kTinyConfig = R"(name = "tiny"
[data]
synthetic = true
count = 16
eval_count = 16
classes = 4
size = 8
seed = 3
[model]
preset = micro
projector_hidden = 16
projector_out = 8
[train]
mode = dynacl
epochs = 2
batch_size = 8
lr = 0.05
[attack]
steps = 1
[schedule]
decay_period = 1
[finetune]
protocols = slf,aff
epochs = 1
batch_size = 8
[finetune.attack]
steps = 1
[eval]
severities = 1
[eval.attack]
steps = 1
)";

fs::path write_config(const fs::path& dir, const std::string& text = kTinyConfig) {
  std::ofstream(dir / "exp.toml") << text;
  return dir / "exp.toml";
}

int invoke(std::vector<std::string> args) { return cli::run(args); }

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("pretrain writes a checkpoint and reruns are idempotent") {
    const fs::path dir = scratch("pretrain");
    const fs::path cfg = write_config(dir);
    const std::string out = (dir / "run").string();
    REQUIRE(invoke({"pretrain", "--config", cfg.string(), "--out", out}) == cli::kExitOk);
    CHECK(fs::exists(dir / "run" / "final.ckpt"));
    CHECK(fs::exists(dir / "run" / "manifest.json"));
    CHECK(fs::exists(dir / "run" / "report" / "loss_curve.svg"));
    const auto before = fs::last_write_time(dir / "run" / "final.ckpt");
    CHECK(invoke({"pretrain", "--config", cfg.string(), "--out", out}) == cli::kExitOk);
    CHECK(fs::last_write_time(dir / "run" / "final.ckpt") == before);
    CHECK(invoke({"pretrain", "--config", cfg.string(), "--out", out, "--seed", "9"}) ==
          cli::kExitConfig);
    CHECK(invoke({"pretrain", "--config", cfg.string(), "--out", out, "--seed", "9", "--force"}) ==
          cli::kExitOk);
    CHECK(invoke({"report", "--out", out}) == cli::kExitOk);
  }

  TEST_CASE("dynamic mode logs the schedule per epoch") {
    const fs::path dir = scratch("dynacl");
    const fs::path cfg = write_config(dir);
    REQUIRE(invoke({"pretrain", "--config", cfg.string(), "--out", (dir / "r").string(), "--mode",
                 "dynacl"}) == cli::kExitOk);
    std::ifstream in(dir / "r" / "metrics.jsonl");
    std::string line;
    int epoch = 0;
    while (std::getline(in, line)) {
      const auto [mu, omega] = dynacl_schedule(epoch, 1, 2, 2.0 / 3.0);
      const auto j = nlohmann::json::parse(line);
      CHECK(j["mu"].get<double>() == doctest::Approx(mu));
      CHECK(j["omega"].get<double>() == doctest::Approx(omega));
      ++epoch;
    }
    CHECK(epoch == 2);
  }

  TEST_CASE("full run through every stage") {
    const fs::path dir = scratch("run");
    const fs::path cfg = write_config(dir);
    CHECK(invoke({"run", "--config", cfg.string(), "--out", (dir / "r").string(), "--stage",
               "pretrain,finetune,eval"}) == cli::kExitOk);
    CHECK(fs::exists(dir / "r" / "finetune" / "slf" / "classifier.ckpt"));
    CHECK(fs::exists(dir / "r" / "finetune" / "aff" / "classifier.ckpt"));
    CHECK(fs::exists(dir / "r" / "eval" / "accuracy_table.csv"));
    CHECK(invoke({"finetune", "--config", cfg.string(), "--checkpoint",
               (dir / "r" / "pretrain" / "final.ckpt").string(), "--protocol", "lp-aff", "--out",
               (dir / "lp").string()}) == cli::kExitOk);
  }

  TEST_CASE("missing inputs map to documented exit codes") {
    const fs::path dir = scratch("errors");
    const fs::path cfg = write_config(
        dir, "[data]\ndescriptor = nowhere/train.desc\n[train]\nepochs = 1\n");
    CHECK(invoke({"pretrain", "--config", cfg.string(), "--out", (dir / "a").string()}) ==
          cli::kExitConfig);
    CHECK(invoke({"pretrain", "--config", (dir / "missing.toml").string(), "--out",
               (dir / "b").string()}) == cli::kExitConfig);
    CHECK(invoke({"report", "--out", (dir / "nothing").string()}) == cli::kExitMissingArtifact);
    fs::create_directories(dir / "empty");
    std::ofstream(dir / "empty" / "metrics.jsonl").close();
    CHECK(invoke({"report", "--out", (dir / "empty").string()}) == cli::kExitMissingArtifact);
    const fs::path good = write_config(dir);
    CHECK(invoke({"finetune", "--config", good.string(), "--checkpoint", (dir / "no.ckpt").string(),
               "--out", (dir / "c").string()}) == cli::kExitMissingArtifact);
    CHECK(invoke({"bogus"}) == cli::kExitConfig);
  }

  TEST_CASE("verify exit codes") {
    const fs::path dir = scratch("verify");
    CHECK(invoke({"verify", "--draws", "5", "--out", dir.string()}) == cli::kExitOk);
    CHECK(fs::exists(dir / "verify.jsonl"));
    CHECK(invoke({"verify", "--draws", "5", "--break-decomposition"}) == cli::kExitVerifyFailed);
  }

  TEST_CASE("shipped configurations validate") {
    for (const char* name : {"desk.toml", "full.toml"}) {
      const auto cfg = cli::ExperimentConfig::load(fs::path(AIRACL_SOURCE_DIR) / "configs" / name);
      CHECK_NOTHROW(TrainConfig::from_config(cfg.values));
    }
    const auto full = TrainConfig::from_config(
        cli::ExperimentConfig::load(fs::path(AIRACL_SOURCE_DIR) / "configs" / "full.toml").values);
    CHECK(full.epochs == 1000);
    CHECK(full.batch_size == 512);
    CHECK(full.lr == 5.0);
    CHECK(full.reg.lambda1 == 0.5);
    CHECK(full.reg.lambda2 == 0.5);
    CHECK(full.attack.epsilon == doctest::Approx(8.0 / 255.0));
  }
}
