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

#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "airacl/checkpoint.hpp"
#include "airacl/error.hpp"
#include "airacl/finetune.hpp"
#include "airacl/report.hpp"
#include "airacl/trainer.hpp"
#include "airacl/verify.hpp"
#include "json.hpp"

namespace airacl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  ExperimentConfig c;
  c.values = KeyValueConfig::load(path);
  c.path = fs::absolute(path);
  c.base_dir = c.path.parent_path();
  return c;
}

namespace {

fs::path resolve(const ExperimentConfig& cfg, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : cfg.base_dir / path;
}

Dataset load_split(const ExperimentConfig& cfg, const std::string& descriptor_key,
                   std::uint64_t default_seed, const std::string& count_key) {
  const KeyValueConfig& kv = cfg.values;
  if (kv.get_bool("data.synthetic", false)) {
    BlobSpec b;
    b.count = static_cast<std::size_t>(kv.get_int(count_key, kv.get_int("data.count", 256)));
    b.classes = static_cast<std::size_t>(kv.get_int("data.classes", 4));
    b.channels = static_cast<std::size_t>(kv.get_int("data.channels", 3));
    b.height = static_cast<std::size_t>(kv.get_int("data.size", 32));
    b.width = b.height;
    b.blob_sigma = kv.get_double("data.blob_sigma", b.blob_sigma);
    b.noise = kv.get_double("data.noise", b.noise);
    b.seed = default_seed;
    if (b.count < b.classes || b.classes < 2) throw ConfigError("synthetic data needs count >= classes >= 2");
    return make_blobs(b);
  }
  if (!kv.has(descriptor_key))
    throw ConfigError("config sets neither data.synthetic nor " + descriptor_key);
  const fs::path desc = resolve(cfg, kv.get_string(descriptor_key, ""));
  try {
    return load_dataset(desc);
  } catch (const IoError& e) {
    throw ConfigError(std::string("dataset unavailable: ") + e.what());
  }
}

}  // namespace

Dataset load_train_data(const ExperimentConfig& cfg) {
  const auto seed = static_cast<std::uint64_t>(cfg.values.get_int("data.seed", 0));
  return load_split(cfg, "data.descriptor", seed, "data.count");
}

Dataset load_eval_data(const ExperimentConfig& cfg) {
  const auto seed = static_cast<std::uint64_t>(cfg.values.get_int("data.seed", 0));
  const auto eval_seed = static_cast<std::uint64_t>(cfg.values.get_int("data.eval_seed", static_cast<long long>(seed + 1000)));
  const std::string key = cfg.values.has("data.eval_descriptor") ? "data.eval_descriptor" : "data.descriptor";
  return load_split(cfg, key, eval_seed, "data.eval_count");
}

EncoderSpec encoder_spec(const ExperimentConfig& cfg, const Dataset& data) {
  const KeyValueConfig& kv = cfg.values;
  const Shape& s = data.images.shape();
  const std::string preset = kv.get_string("model.preset", "micro");
  EncoderSpec spec;
  if (preset == "micro") {
    spec = EncoderSpec::micro(s.c, s.h, s.w);
  } else if (preset == "resnet18") {
    spec = EncoderSpec::resnet18(s.c, s.h, s.w);
  } else {
    throw ConfigError("unknown model.preset '" + preset + "' (expected micro or resnet18)");
  }
  const std::string bn = kv.get_string("model.bn", "dual");
  if (bn != "dual" && bn != "single") throw ConfigError("model.bn must be dual or single");
  spec.bn_mode = bn == "dual" ? BnMode::dual : BnMode::single;
  spec.projector_hidden = static_cast<std::size_t>(kv.get_int("model.projector_hidden", static_cast<long long>(spec.projector_hidden)));
  spec.projector_out = static_cast<std::size_t>(kv.get_int("model.projector_out", static_cast<long long>(spec.projector_out)));
  if (spec.projector_hidden == 0 || spec.projector_out == 0) throw ConfigError("projector widths must be positive");
  return spec;
}

namespace {

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

std::uint64_t fnv1a(const std::string& text, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string file_digest(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("missing artifact " + p.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return hex64(fnv1a(buf.str()));
}

json resolved_json(const KeyValueConfig& kv) {
  json j = json::object();
  for (const auto& [k, v] : kv.entries()) j[k] = v;
  return j;
}

/// Output directory that appears only once complete. A finished directory with
/// the same fingerprint is left alone; anything else needs --force.
class StagedOutput {
 public:
  StagedOutput(fs::path out, json manifest, bool force) : out_(std::move(out)), manifest_(std::move(manifest)) {
    manifest_["fingerprint"] = hex64(fnv1a(manifest_.dump()));
    manifest_["out"] = out_.string();
    if (fs::exists(out_)) {
      if (!force && fingerprint_on_disk() == manifest_["fingerprint"]) {
        up_to_date_ = true;
        return;
      }
      if (!force)
        throw ConfigError("output directory " + out_.string() +
                          " holds a different or unfinished run; pass --force to replace it");
    }
    staging_ = out_.parent_path() / ("." + out_.filename().string() + ".partial");
    fs::remove_all(staging_);
    fs::create_directories(staging_);
  }

  bool up_to_date() const { return up_to_date_; }
  const fs::path& staging() const { return staging_; }
  json& manifest() { return manifest_; }

  void commit() {
    manifest_["complete"] = true;
    std::ofstream(staging_ / "manifest.json") << manifest_.dump(2) << "\n";
    fs::remove_all(out_);
    fs::rename(staging_, out_);
  }

 private:
  json fingerprint_on_disk() const {
    std::ifstream in(out_ / "manifest.json");
    if (!in) return nullptr;
    try {
      const json m = json::parse(in);
      if (!m.value("complete", false)) return nullptr;
      return m.value("fingerprint", json(nullptr));
    } catch (const json::exception&) {
      return nullptr;
    }
  }

  fs::path out_, staging_;
  json manifest_;
  bool up_to_date_ = false;
};

int env_workers() {
  const char* v = std::getenv("AIR_NUM_WORKERS");
  if (!v || !*v) return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1) throw ConfigError(std::string("AIR_NUM_WORKERS must be a positive integer, got '") + v + "'");
  return static_cast<int>(n);
}

json base_manifest(const std::string& command, const ExperimentConfig& cfg) {
  return {{"name", cfg.name()},
          {"command", command},
          {"config", cfg.path.string()},
          {"resolved", resolved_json(cfg.values)}};
}

// ------------------------------------------------------------------ commands

fs::path cmd_pretrain(ExperimentConfig cfg, const fs::path& out, bool force) {
  const Dataset data = load_train_data(cfg);
  const EncoderSpec spec = encoder_spec(cfg, data);
  TrainConfig tc = TrainConfig::from_config(cfg.values);
  tc.num_workers = env_workers();

  json m = base_manifest("pretrain", cfg);
  m["seed"] = tc.seed;
  m["stages"] = {"pretrain"};
  m["encoder"] = spec.to_text();
  StagedOutput dir(out, m, force);
  if (dir.up_to_date()) {
    std::cout << "pretrain: " << out.string() << " is up to date\n";
    return out / "final.ckpt";
  }
  std::cout << "pretrain: " << to_string(tc.mode) << ", " << data.size() << " samples, " << tc.epochs
            << " epochs, batch " << tc.batch_size << "\n";
  const PretrainResult r = pretrain(data, spec, tc, dir.staging(), [](const EpochMetrics& e) {
    std::cout << "epoch " << e.epoch << " lr=" << e.lr << " mu=" << e.mu << " omega=" << e.omega
              << " acl=" << e.acl_loss << " sir=" << e.sir << " air=" << e.air << " total=" << e.total
              << std::endl;
  });
  write_report(r.metrics, dir.staging() / "report");
  dir.commit();
  std::cout << "checkpoint: " << (out / "final.ckpt").string() << "\n";
  return out / "final.ckpt";
}

fs::path cmd_finetune(const ExperimentConfig& cfg, const fs::path& checkpoint, const std::string& protocol,
                      const fs::path& out, bool force) {
  if (!fs::exists(checkpoint)) throw IoError("missing checkpoint " + checkpoint.string());
  const Dataset data = load_train_data(cfg);
  FinetuneConfig fc = FinetuneConfig::from_config(cfg.values);
  const bool lp = protocol == "lp-aff" || protocol == "lp_aff";
  if (!lp) fc.mode = parse_finetune_mode(protocol);

  json m = base_manifest("finetune", cfg);
  m["protocol"] = lp ? "lp-aff" : to_string(fc.mode);
  m["seed"] = fc.seed;
  m["checkpoint"] = checkpoint.string();
  m["checkpoint_digest"] = file_digest(checkpoint);
  m["stages"] = {"finetune"};
  StagedOutput dir(out, m, force);
  if (dir.up_to_date()) {
    std::cout << "finetune: " << out.string() << " is up to date\n";
    return out / "classifier.ckpt";
  }
  const EncoderSpec expected = encoder_spec(cfg, data);
  const Checkpoint ckpt = load_checkpoint(checkpoint, expected);
  Classifier clf;
  if (lp) {
    const auto k = static_cast<std::size_t>(cfg.values.get_int("finetune.k", static_cast<long long>(std::max<std::size_t>(2, data.descriptor.classes))));
    Dataset unlabeled = data;
    std::fill(unlabeled.labels.begin(), unlabeled.labels.end(), -1);
    LpAffResult r = lp_aff(ckpt, unlabeled, k, fc);
    dir.manifest()["kmeans"] = {{"k", k},
                                {"inertia", r.clustering.inertia},
                                {"empty_reseeds", r.clustering.empty_reseeds},
                                {"purity", data.labeled() ? clustering_purity(r.clustering.labels, data.labels) : -1.0}};
    clf = std::move(r.classifier);
  } else {
    clf = finetune(ckpt, data, fc);
  }
  save_checkpoint(clf.to_checkpoint(), dir.staging() / "classifier.ckpt");
  if (data.labeled() && !lp) {
    dir.manifest()["train_accuracy"] = standard_accuracy(clf, data);
    std::cout << "finetune " << dir.manifest()["protocol"].get<std::string>()
              << ": train accuracy " << dir.manifest()["train_accuracy"].get<double>() << "\n";
  }
  dir.commit();
  return out / "classifier.ckpt";
}

std::vector<int> parse_severities(const std::string& s) {
  std::vector<int> out;
  std::stringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    try {
      out.push_back(std::stoi(tok));
    } catch (const std::exception&) {
      throw ConfigError("eval.severities: bad entry '" + tok + "'");
    }
    if (out.back() < 1 || out.back() > 5) throw ConfigError("eval.severities entries must be in 1..5");
  }
  return out;
}

std::string protocol_of(const fs::path& classifier) {
  std::ifstream in(classifier.parent_path() / "manifest.json");
  if (in) {
    try {
      const json m = json::parse(in);
      if (m.contains("protocol")) return m["protocol"].get<std::string>();
    } catch (const json::exception&) {
    }
  }
  return classifier.stem().string();
}

void cmd_eval(const ExperimentConfig& cfg, const std::vector<fs::path>& classifiers, const fs::path& out,
              bool force) {
  if (classifiers.empty()) throw ConfigError("eval needs at least one --classifier");
  const KeyValueConfig& kv = cfg.values;
  PgdConfig attack = PgdConfig::evaluation();
  attack.epsilon = kv.get_double("eval.attack.eps", attack.epsilon);
  attack.steps = static_cast<int>(kv.get_int("eval.attack.steps", attack.steps));
  attack.step_size = kv.get_double("eval.attack.alpha", attack.step_size);
  attack.random_start = kv.get_bool("eval.attack.random_start", attack.random_start);
  try {
    attack.validate();
  } catch (const PreconditionError& e) {
    throw ConfigError(e.what());
  }
  const std::vector<int> severities = parse_severities(kv.get_string("eval.severities", "1,3,5"));
  const auto seed = static_cast<std::uint64_t>(kv.get_int("eval.seed", 0));

  json m = base_manifest("eval", cfg);
  m["seed"] = seed;
  m["stages"] = {"eval"};
  json inputs = json::array();
  for (const auto& c : classifiers) inputs.push_back({{"path", c.string()}, {"digest", file_digest(c)}});
  m["classifiers"] = inputs;
  StagedOutput dir(out, m, force);
  if (dir.up_to_date()) {
    std::cout << "eval: " << out.string() << " is up to date\n";
    return;
  }
  const Dataset data = load_eval_data(cfg);
  std::vector<EvalReport> reports;
  for (const auto& path : classifiers) {
    const Classifier clf = Classifier::from_checkpoint(load_checkpoint(path));
    EvalReport r = evaluate(clf, data, protocol_of(path), attack, severities, seed);
    std::ofstream(dir.staging() / (r.protocol + ".json")) << r.to_json() << "\n";
    std::cout << "eval " << r.protocol << ": standard " << r.standard_acc << ", robust " << r.robust_acc << "\n";
    reports.push_back(std::move(r));
  }
  const std::vector<std::pair<std::string, std::vector<EvalReport>>> rows{{cfg.name(), reports}};
  std::ofstream(dir.staging() / "accuracy_table.csv") << render_accuracy_table(rows);
  std::ofstream(dir.staging() / "corruption_table.csv") << render_corruption_table(rows, severities);
  dir.commit();
}

int cmd_verify(const VerifyOptions& opts, const std::optional<fs::path>& out) {
  const std::vector<VerifyRecord> records = run_verification(opts);
  std::ostringstream lines;
  for (const auto& r : records) lines << r.to_json() << "\n";
  std::cout << lines.str();
  if (out) {
    fs::create_directories(*out);
    std::ofstream(*out / "verify.jsonl") << lines.str();
    const json m = {{"command", "verify"},
                    {"seed", opts.seed},
                    {"seeds", opts.seeds},
                    {"draws", opts.draws},
                    {"break_decomposition", opts.break_decomposition},
                    {"stages", {"verify"}},
                    {"complete", true}};
    std::ofstream(*out / "manifest.json") << m.dump(2) << "\n";
  }
  const bool ok = all_passed(records);
  std::cerr << "verify: " << (ok ? "all checks passed" : "FAILED") << "\n";
  return ok ? kExitOk : kExitVerifyFailed;
}

int cmd_report(const fs::path& dir) {
  const fs::path metrics = dir / "metrics.jsonl";
  if (!fs::exists(metrics)) throw IoError("missing metrics file " + metrics.string());
  const auto records = read_metrics(metrics);
  if (records.empty()) throw IoError("metrics file " + metrics.string() + " has no records");
  const ReportFiles f = write_report(records, dir / "report");
  std::cout << "report: " << f.metrics_csv.string() << ", " << f.summary_csv.string() << ", "
            << f.loss_curve.string() << "\n";
  return kExitOk;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ','))
    if (!tok.empty()) out.push_back(tok);
  return out;
}

int cmd_run(const ExperimentConfig& cfg, const std::vector<std::string>& stages, const fs::path& out,
            bool force, const VerifyOptions& vopts) {
  static const std::vector<std::string> kKnown{"pretrain", "finetune", "eval", "verify"};
  for (const auto& s : stages)
    if (std::find(kKnown.begin(), kKnown.end(), s) == kKnown.end())
      throw ConfigError("unknown stage '" + s + "' (expected pretrain, finetune, eval, verify)");
  const auto want = [&](const char* s) { return std::find(stages.begin(), stages.end(), s) != stages.end(); };
  fs::create_directories(out);
  json m = base_manifest("run", cfg);
  m["stages"] = stages;
  m["out"] = out.string();
  std::ofstream(out / "manifest.json") << m.dump(2) << "\n";

  int code = kExitOk;
  const fs::path ckpt = out / "pretrain" / "final.ckpt";
  if (want("pretrain")) cmd_pretrain(cfg, out / "pretrain", force);
  std::vector<fs::path> classifiers;
  const auto protocols = split_list(cfg.values.get_string("finetune.protocols", "slf,alf,aff"));
  if (want("finetune"))
    for (const auto& p : protocols) classifiers.push_back(cmd_finetune(cfg, ckpt, p, out / "finetune" / p, force));
  if (want("eval")) {
    if (classifiers.empty())
      for (const auto& p : protocols) classifiers.push_back(out / "finetune" / p / "classifier.ckpt");
    for (const auto& c : classifiers)
      if (!fs::exists(c)) throw IoError("missing classifier " + c.string() + "; run the finetune stage first");
    cmd_eval(cfg, classifiers, out / "eval", force);
  }
  if (want("verify")) code = cmd_verify(vopts, out / "verify");
  return code;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Adversarial contrastive pre-training with invariant regularization"};
  app.require_subcommand(1);

  std::string config, out, mode, protocol, stage_list = "pretrain,finetune,eval,verify", checkpoint;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> classifier_paths;
  bool force = false;
  VerifyOptions vopts;

  const auto common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", config, "Experiment config (key = value, [sections])");
    if (needs_config) c->required();
    sub->add_option("--seed", seed, "Override the config's seed");
    sub->add_option("--out", out, "Output directory")->required();
    sub->add_flag("--force", force, "Replace an existing output directory");
  };

  auto* pre = app.add_subcommand("pretrain", "Adversarial contrastive pre-training");
  common(pre, true);
  pre->add_option("--mode", mode, "acl or dynacl")->check(CLI::IsMember({"acl", "dynacl"}));

  auto* fin = app.add_subcommand("finetune", "Train a classifier on a pre-trained checkpoint");
  common(fin, true);
  fin->add_option("--checkpoint", checkpoint, "Pre-training checkpoint")->required();
  fin->add_option("--protocol", protocol, "slf, alf, aff or lp-aff (default: finetune.mode)");

  auto* ev = app.add_subcommand("eval", "Standard, robust and corruption accuracy");
  common(ev, true);
  ev->add_option("--classifier", classifier_paths, "Classifier checkpoint(s)")->required();

  auto* ver = app.add_subcommand("verify", "Numeric identity and contract checks");
  ver->add_option("--seed", seed, "Base seed");
  ver->add_option("--seeds", vopts.seeds, "Independent passes")->check(CLI::PositiveNumber);
  ver->add_option("--draws", vopts.draws, "Random draws per check")->check(CLI::PositiveNumber);
  ver->add_option("--out", out, "Also write verify.jsonl here");
  ver->add_flag("--break-decomposition", vopts.break_decomposition, "Fault injection for the decomposition check");

  auto* rep = app.add_subcommand("report", "CSV tables and loss curves from metrics.jsonl");
  rep->add_option("--out", out, "Run directory holding metrics.jsonl")->required();

  auto* run_cmd = app.add_subcommand("run", "Run several stages into one directory");
  common(run_cmd, true);
  run_cmd->add_option("--stage", stage_list, "Comma-separated subset of pretrain,finetune,eval,verify");
  run_cmd->add_option("--mode", mode, "acl or dynacl")->check(CLI::IsMember({"acl", "dynacl"}));

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*ver) {
      if (seed) vopts.seed = *seed;
      return cmd_verify(vopts, out.empty() ? std::nullopt : std::optional<fs::path>(out));
    }
    if (*rep) return cmd_report(out);

    ExperimentConfig cfg = ExperimentConfig::load(config);
    if (seed) {
      for (const char* key : {"train.seed", "finetune.seed", "eval.seed"}) cfg.values.set(key, std::to_string(*seed));
      vopts.seed = *seed;
    }
    if (!mode.empty()) cfg.values.set("train.mode", mode);
    if (*pre) {
      cmd_pretrain(cfg, out, force);
      return kExitOk;
    }
    if (*fin) {
      cmd_finetune(cfg, checkpoint, protocol.empty() ? cfg.values.get_string("finetune.mode", "slf") : protocol, out, force);
      return kExitOk;
    }
    if (*ev) {
      cmd_eval(cfg, std::vector<fs::path>(classifier_paths.begin(), classifier_paths.end()), out, force);
      return kExitOk;
    }
    return cmd_run(cfg, split_list(stage_list), out, force, vopts);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const PreconditionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMissingArtifact;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitVerifyFailed;
  }
}

}  // namespace airacl::cli
