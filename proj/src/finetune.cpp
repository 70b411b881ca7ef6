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

#include "airacl/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "airacl/error.hpp"
#include "airacl/rng.hpp"
#include "json.hpp"

namespace airacl {

const char* to_string(FinetuneMode m) {
  switch (m) {
    case FinetuneMode::slf: return "slf";
    case FinetuneMode::alf: return "alf";
    case FinetuneMode::aff: return "aff";
  }
  return "?";
}

FinetuneMode parse_finetune_mode(const std::string& s) {
  if (s == "slf" || s == "SLF") return FinetuneMode::slf;
  if (s == "alf" || s == "ALF") return FinetuneMode::alf;
  if (s == "aff" || s == "AFF") return FinetuneMode::aff;
  throw ConfigError("unknown finetuning mode '" + s + "' (expected slf, alf or aff)");
}

void FinetuneConfig::validate() const {
  if (epochs < 0) throw ConfigError("finetune.epochs must be >= 0");
  if (!(lr > 0.0)) throw ConfigError("finetune.lr must be positive");
  if (batch_size < 1) throw ConfigError("finetune.batch_size must be >= 1");
  try {
    attack.validate();
  } catch (const PreconditionError& e) {
    throw ConfigError(e.what());
  }
}

FinetuneConfig FinetuneConfig::from_config(const KeyValueConfig& kv) {
  FinetuneConfig c;
  c.mode = parse_finetune_mode(kv.get_string("finetune.mode", to_string(c.mode)));
  c.epochs = static_cast<int>(kv.get_int("finetune.epochs", c.epochs));
  c.lr = kv.get_double("finetune.lr", c.lr);
  c.batch_size = static_cast<std::size_t>(kv.get_int("finetune.batch_size", static_cast<long long>(c.batch_size)));
  c.sgd.momentum = kv.get_double("finetune.momentum", c.sgd.momentum);
  c.sgd.weight_decay = kv.get_double("finetune.weight_decay", c.sgd.weight_decay);
  c.seed = static_cast<std::uint64_t>(kv.get_int("finetune.seed", static_cast<long long>(c.seed)));
  c.attack.epsilon = kv.get_double("finetune.attack.eps", c.attack.epsilon);
  c.attack.steps = static_cast<int>(kv.get_int("finetune.attack.steps", c.attack.steps));
  c.attack.step_size = kv.get_double("finetune.attack.alpha", c.attack.step_size);
  c.attack.random_start = kv.get_bool("finetune.attack.random_start", c.attack.random_start);
  c.validate();
  return c;
}

Matrix extract_features(const Encoder& encoder, const Tensor& images, std::size_t batch_size) {
  const std::size_t n = images.shape().n;
  Matrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(encoder.spec().representation_dim()));
  for (std::size_t b = 0; b < n; b += batch_size) {
    const std::size_t count = std::min(batch_size, n - b);
    out.middleRows(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(count)) =
        encoder.representation(images.slice(b, count), Classifier::kBranch, Mode::eval);
  }
  return out;
}

namespace {

std::size_t class_count(const Dataset& data) {
  if (!data.labeled()) throw ConfigError("finetuning needs a labeled dataset");
  const int top = *std::max_element(data.labels.begin(), data.labels.end());
  const std::size_t declared = data.descriptor.classes;
  if (declared > 0 && static_cast<std::size_t>(top) >= declared)
    throw ConfigError("label " + std::to_string(top) + " exceeds the declared class count " +
                      std::to_string(declared));
  return std::max<std::size_t>(declared, static_cast<std::size_t>(top) + 1);
}

void check_input(const Encoder& enc, const Dataset& data) {
  const Shape& s = data.images.shape();
  const EncoderSpec& spec = enc.spec();
  if (s.c != spec.in_channels || s.h != spec.in_height || s.w != spec.in_width)
    throw ConfigError("dataset images " + s.str() + " do not match the checkpoint's encoder input");
}

}  // namespace

Classifier finetune(const Checkpoint& pretrained, const Dataset& labeled, const FinetuneConfig& cfg) {
  Encoder enc = restore_encoder(pretrained);
  check_input(enc, labeled);
  return finetune(Classifier(std::move(enc), class_count(labeled)), labeled, cfg);
}

Classifier finetune(Classifier clf, const Dataset& labeled, const FinetuneConfig& cfg) {
  cfg.validate();
  check_input(clf.encoder(), labeled);
  if (class_count(labeled) != clf.classes())
    throw ConfigError("dataset has " + std::to_string(class_count(labeled)) +
                      " classes but the head has " + std::to_string(clf.classes()));
  const std::size_t n = labeled.size();
  const std::size_t batches = (n + cfg.batch_size - 1) / cfg.batch_size;
  const auto total_steps = static_cast<std::int64_t>(batches) * cfg.epochs;

  Sgd head_opt(cfg.sgd, clf.head().params.size());
  Sgd enc_opt(cfg.sgd, cfg.freeze_extractor() ? 0 : clf.encoder().num_params());
  Matrix natural_features;
  if (cfg.mode == FinetuneMode::slf) natural_features = extract_features(clf.encoder(), labeled.images);

  Rng rng(derive_seed(cfg.seed, {0xF1}));
  std::vector<std::size_t> order(n);
  std::vector<int> labels;
  std::vector<double> g_head(clf.head().params.size());
  std::vector<double> g_enc;
  std::int64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < batches; ++b, ++step) {
      const std::size_t begin = b * cfg.batch_size;
      const std::span<const std::size_t> idx(order.data() + begin, std::min(cfg.batch_size, n - begin));
      labels.clear();
      for (std::size_t i : idx) labels.push_back(labeled.labels[i]);
      const double lr = cosine_lr(step, total_steps, cfg.lr);
      std::fill(g_head.begin(), g_head.end(), 0.0);

      if (cfg.mode == FinetuneMode::slf) {
        Matrix f(static_cast<Eigen::Index>(idx.size()), natural_features.cols());
        for (std::size_t r = 0; r < idx.size(); ++r)
          f.row(static_cast<Eigen::Index>(r)) = natural_features.row(static_cast<Eigen::Index>(idx[r]));
        clf.head_loss(f, labels, g_head);
        head_opt.step(clf.head().params, g_head, lr);
        continue;
      }

      const Tensor x = labeled.images.gather(idx);
      const Tensor adv = attack_classifier(
          clf, x, labels, cfg.attack,
          derive_seed(cfg.seed, {static_cast<std::uint64_t>(epoch), b, 0xA77}));
      if (cfg.mode == FinetuneMode::alf) {
        clf.head_loss(extract_features(clf.encoder(), adv), labels, g_head);
        head_opt.step(clf.head().params, g_head, lr);
        continue;
      }
      g_enc.assign(clf.encoder().num_params(), 0.0);
      EncoderTrace trace;
      const double l = clf.loss(adv, labels, Mode::train, nullptr, g_enc, g_head, &trace);
      if (!std::isfinite(l)) throw NumericError("non-finite finetuning loss");
      clf.encoder().commit_running_stats(trace);
      enc_opt.step(clf.encoder().params(), g_enc, lr);
      head_opt.step(clf.head().params, g_head, lr);
    }
  }
  return clf;
}

LpAffResult lp_aff(const Checkpoint& pretrained, const Dataset& unlabeled, std::size_t k,
                   const FinetuneConfig& cfg) {
  if (k < 2) throw PreconditionError("LP-AFF needs k >= 2 clusters");
  Encoder enc = restore_encoder(pretrained);
  check_input(enc, unlabeled);
  KMeansConfig kc;
  kc.k = k;
  kc.seed = derive_seed(cfg.seed, {0xC1});
  KMeansResult clusters = kmeans(extract_features(enc, unlabeled.images), kc);

  Dataset pseudo = unlabeled;
  pseudo.labels = clusters.labels;
  pseudo.descriptor.classes = k;
  FinetuneConfig probe = cfg;
  probe.mode = FinetuneMode::slf;
  Classifier clf = finetune(Classifier(std::move(enc), k), pseudo, probe);
  FinetuneConfig full = cfg;
  full.mode = FinetuneMode::aff;
  return {finetune(std::move(clf), pseudo, full), std::move(clusters)};
}

Tensor attack_classifier(const Classifier& clf, const Tensor& images, std::span<const int> labels,
                         const PgdConfig& attack, std::uint64_t seed) {
  const LossGradFn fn = [&](const Tensor& x, Tensor* grad) {
    return clf.loss(x, labels, Mode::eval, grad, {}, {});
  };
  return pgd_ascend(images, attack, seed, fn);
}

double robust_accuracy(const Classifier& clf, const Dataset& data, const PgdConfig& attack,
                       std::uint64_t seed, std::size_t batch_size) {
  attack.validate();
  if (!data.labeled()) throw ConfigError("robust accuracy needs a labeled dataset");
  const std::size_t n = data.size();
  require(n > 0, "robust accuracy of an empty set");
  std::size_t correct = 0;
  for (std::size_t b = 0; b < n; b += batch_size) {
    const std::size_t count = std::min(batch_size, n - b);
    const std::span<const int> y(data.labels.data() + b, count);
    const Tensor adv = attack_classifier(clf, data.images.slice(b, count), y, attack,
                                         derive_seed(seed, {b}));
    const std::vector<int> pred = clf.predict(adv);
    for (std::size_t k = 0; k < count; ++k) correct += pred[k] == y[k] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

double corruption_accuracy(const Classifier& clf, const Dataset& data, const CorruptionSpec& spec,
                           std::uint64_t seed) {
  if (!data.labeled()) throw ConfigError("corruption accuracy needs a labeled dataset");
  return standard_accuracy(clf, corrupt(data.images, spec, seed), data.labels);
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["protocol"] = protocol;
  j["dataset"] = dataset;
  j["standard_acc"] = standard_acc;
  j["robust_acc"] = robust_acc;
  j["corruption"] = nlohmann::json::object();
  for (const auto& [kind, row] : corruption)
    for (const auto& [sev, acc] : row) j["corruption"][kind][std::to_string(sev)] = acc;
  j["corruption_mean"] = nlohmann::json::object();
  for (const auto& [sev, acc] : corruption_mean) j["corruption_mean"][std::to_string(sev)] = acc;
  return j.dump(2);
}

EvalReport EvalReport::from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  EvalReport r;
  r.protocol = j.at("protocol").get<std::string>();
  r.dataset = j.at("dataset").get<std::string>();
  r.standard_acc = j.at("standard_acc").get<double>();
  r.robust_acc = j.at("robust_acc").get<double>();
  for (const auto& [kind, row] : j.at("corruption").items())
    for (const auto& [sev, acc] : row.items()) r.corruption[kind][std::stoi(sev)] = acc.get<double>();
  if (j.contains("corruption_mean"))
    for (const auto& [sev, acc] : j["corruption_mean"].items())
      r.corruption_mean[std::stoi(sev)] = acc.get<double>();
  return r;
}

EvalReport evaluate(const Classifier& clf, const Dataset& data, const std::string& protocol,
                    const PgdConfig& attack, const std::vector<int>& severities, std::uint64_t seed) {
  EvalReport r;
  r.protocol = protocol;
  r.dataset = data.descriptor.name;
  r.standard_acc = standard_accuracy(clf, data);
  r.robust_acc = robust_accuracy(clf, data, attack, derive_seed(seed, {0xE0}));
  for (int sev : severities) {
    double sum = 0.0;
    for (CorruptionKind kind : kAllCorruptions) {
      const double acc = corruption_accuracy(clf, data, {kind, sev}, derive_seed(seed, {0xC0}));
      r.corruption[to_string(kind)][sev] = acc;
      sum += acc;
    }
    r.corruption_mean[sev] = sum / static_cast<double>(kAllCorruptions.size());
  }
  return r;
}

namespace {

std::vector<std::string> protocols_of(
    const std::vector<std::pair<std::string, std::vector<EvalReport>>>& rows) {
  std::vector<std::string> out;
  for (const auto& [method, reports] : rows)
    for (const EvalReport& r : reports)
      if (std::find(out.begin(), out.end(), r.protocol) == out.end()) out.push_back(r.protocol);
  return out;
}

const EvalReport* find_protocol(const std::vector<EvalReport>& reports, const std::string& p) {
  for (const EvalReport& r : reports)
    if (r.protocol == p) return &r;
  return nullptr;
}

std::string pct(double v) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(2);
  s << 100.0 * v;
  return s.str();
}

}  // namespace

std::string render_accuracy_table(
    const std::vector<std::pair<std::string, std::vector<EvalReport>>>& rows) {
  const auto protocols = protocols_of(rows);
  std::ostringstream out;
  out << "method";
  for (const auto& p : protocols) out << "," << p << "_robust," << p << "_standard";
  out << "\n";
  for (const auto& [method, reports] : rows) {
    out << method;
    for (const auto& p : protocols) {
      const EvalReport* r = find_protocol(reports, p);
      out << "," << (r ? pct(r->robust_acc) : "") << "," << (r ? pct(r->standard_acc) : "");
    }
    out << "\n";
  }
  return out.str();
}

std::string render_corruption_table(
    const std::vector<std::pair<std::string, std::vector<EvalReport>>>& rows,
    const std::vector<int>& severities) {
  const auto protocols = protocols_of(rows);
  std::ostringstream out;
  out << "method";
  for (const auto& p : protocols)
    for (int s : severities) out << "," << p << "_cs" << s;
  out << "\n";
  for (const auto& [method, reports] : rows) {
    out << method;
    for (const auto& p : protocols) {
      const EvalReport* r = find_protocol(reports, p);
      for (int s : severities) {
        out << ",";
        if (r && r->corruption_mean.contains(s)) out << pct(r->corruption_mean.at(s));
      }
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace airacl
