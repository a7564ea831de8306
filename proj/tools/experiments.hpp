// SPDX-License-Identifier: Apache-2.0
#pragma once

// Config-driven experiments and their on-disk artifacts:
//   <out>/results.csv   one table per experiment, schema in docs/csv_schemas.md
//   <out>/summary.json  config echo, provenance, results, status
// Nothing time-dependent is written, so reruns are byte-identical.

#include <string>
#include <vector>

#include "config.hpp"

namespace clab::cli {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

struct ExperimentOutput {
  std::string kind;
  std::string schema;  // "<kind>/<version>"
  Table table;
  json results = json::object();
  json report = json::object();  // one report row: lambda, mu, lhs, rhs, ratio, stderr
  bool pass = true;
};

inline const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> k{"eigs", "simulate", "identity-check", "carleman", "observability", "hum"};
  return k;
}

/// Shortest round-trip decimal form of a double.
std::string fmt(double v);

/// The experiment named by `kind`, or by the config's `experiment` key when
/// `kind` is empty. A config naming a different experiment is an error.
ExperimentOutput run_experiment(const Config& cfg, const std::string& kind);

struct RunRecord {
  std::string dir;
  ExperimentOutput output;
  json summary;
};

/// Run and write artifacts. `out_dir` overrides the config's `output` key;
/// with neither, the run lands in $CLAB_OUTPUT_ROOT (or ./clab-runs) under
/// "<kind>-<config hash>".
RunRecord run_and_write(const Config& cfg, const std::string& kind, const std::string& out_dir = "");

struct Report {
  Table table;
  std::vector<std::string> incomplete;  // runs without a readable summary.json
};

/// One row per summary.json found in `dir` or its subdirectories, copying
/// the summary's report fields verbatim.
Report build_report(const std::string& dir);
std::string render_markdown(const Report& r);
std::string render_csv(const Table& t);

}  // namespace clab::cli
