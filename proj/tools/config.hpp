// SPDX-License-Identifier: Apache-2.0
#pragma once

// Experiment configs: TOML or JSON files normalized to one JSON tree, read
// through Section so every key is validated and unknown keys are rejected.

#include <complex>
#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "clab/errors.hpp"

namespace clab::cli {

using json = nlohmann::json;

/// Malformed config: bad syntax, wrong type, out-of-range value, unknown key.
class ConfigError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

struct Config {
  std::string file;
  json tree;
  std::map<std::string, int> lines;  // dotted key path -> source line (TOML only)
};

/// Parse by extension: .toml, or .json for the programmatic mirror.
Config load_config(const std::string& path);
Config parse_toml(const std::string& text, const std::string& name);
Config parse_json(const std::string& text, const std::string& name);

/// 64-bit FNV-1a of the canonical JSON dump (sorted keys, no whitespace).
std::uint64_t config_hash(const json& tree);
std::string hex64(std::uint64_t v);

class Section {
 public:
  Section(const Config& cfg, const json& node, std::string path);

  [[nodiscard]] bool has(const std::string& key) const;
  double number(const std::string& key, double fallback);
  double positive(const std::string& key, double fallback);
  long integer(const std::string& key, long fallback, long lo, long hi);
  bool boolean(const std::string& key, bool fallback);
  std::string choice(const std::string& key, const std::string& fallback, const std::vector<std::string>& options);
  std::string text(const std::string& key, const std::string& fallback);
  std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback);
  std::vector<long> integers(const std::string& key, const std::vector<long>& fallback, long lo, long hi);
  std::vector<std::string> choices(const std::string& key, const std::vector<std::string>& fallback,
                                   const std::vector<std::string>& options);
  /// A number, or [re, im].
  std::complex<double> complex(const std::string& key, std::complex<double> fallback);
  std::vector<std::complex<double>> complexes(const std::string& key);

  /// Nested table; an absent key reads as an empty table.
  Section table(const std::string& key);

  /// Throws on keys that no accessor consumed.
  void finish() const;

  [[noreturn]] void fail(const std::string& key, const std::string& what) const;

 private:
  const json* lookup(const std::string& key);
  [[nodiscard]] std::string where(const std::string& key) const;

  const Config* cfg_;
  const json* node_;
  std::string path_;
  std::set<std::string> used_;
};

}  // namespace clab::cli
