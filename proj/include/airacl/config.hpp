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

#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace airacl {

/// Flat `key = value` configuration with TOML-style `[section]` headers; a key
/// `eps` under `[attack]` is stored as `attack.eps`. `#` starts a comment.
/// String values may be double-quoted.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text, const std::string& origin = "<string>");
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.contains(key); }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  std::string require_string(const std::string& key) const;
  double require_double(const std::string& key) const;
  long long require_int(const std::string& key) const;

  const std::map<std::string, std::string>& entries() const { return values_; }
  /// Canonical text (sorted keys, no sections); parse(dump()) round-trips.
  std::string dump() const;

 private:
  std::map<std::string, std::string> values_;
  std::string origin_;
};

}  // namespace airacl
