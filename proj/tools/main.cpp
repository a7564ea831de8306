// SPDX-License-Identifier: Apache-2.0
// clab: run one configured experiment, or tabulate finished runs.
//
// Exit codes: 0 done/PASS, 1 acceptance failure, 2 usage or config error,
// 3 numerical failure.

#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "clab/errors.hpp"
#include "clab/parallel.hpp"
#include "clab/version.hpp"
#include "config.hpp"
#include "experiments.hpp"

namespace {

constexpr int kExitAcceptance = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

int run_one(const std::string& kind, const std::string& config, const std::string& out) {
  const auto cfg = clab::cli::load_config(config);
  const auto rec = clab::cli::run_and_write(cfg, kind, out);
  std::cout << rec.output.kind << ": " << (rec.output.pass ? "PASS" : "FAIL") << " -> " << rec.dir << '\n';
  return rec.output.pass ? 0 : kExitAcceptance;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic fourth-order Schrodinger laboratory"};
  app.set_version_flag("--version", clab::kVersion);
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "Cap on worker threads (0 = all cores)");

  std::string config, out;
  std::string kind;
  auto add_run = [&](const std::string& name, const std::string& help) {
    auto* sc = app.add_subcommand(name, help);
    sc->add_option("config", config, "Experiment config (.toml or .json)")->required()->check(CLI::ExistingFile);
    sc->add_option("-o,--output", out, "Output directory (default: $CLAB_OUTPUT_ROOT/<kind>-<hash>)");
    sc->callback([&kind, name] { kind = name == "run" ? "" : name; });
  };
  add_run("run", "Run the experiment named in the config");
  for (const auto& k : clab::cli::experiment_kinds()) add_run(k, "Run a " + k + " experiment");

  std::string report_dir, report_csv;
  auto* rep = app.add_subcommand("report", "Tabulate summary.json files under a directory");
  rep->add_option("dir", report_dir, "Results directory")->required();
  rep->add_option("--csv", report_csv, "Also write the table as CSV to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  clab::set_default_threads(threads);
  try {
    if (rep->parsed()) {
      const auto r = clab::cli::build_report(report_dir);
      std::cout << clab::cli::render_markdown(r);
      if (!report_csv.empty()) {
        std::ofstream os(report_csv, std::ios::binary | std::ios::trunc);
        os << clab::cli::render_csv(r.table);
        if (!os) throw clab::NumericalError("cannot write " + report_csv);
      }
      return 0;
    }
    return run_one(kind, config, out);
  } catch (const clab::InvalidInput& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const clab::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
}
