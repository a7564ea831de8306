// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include "experiments.hpp"

namespace fs = std::filesystem;
using clab::cli::json;

namespace {

struct Scratch {
  fs::path root;
  Scratch() : root(fs::temp_directory_path() / ("clab-cli-" + std::to_string(::getpid()) + "-" +
                                                ::testing::UnitTest::GetInstance()->current_test_info()->name())) {
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Scratch() { fs::remove_all(root); }
  [[nodiscard]] fs::path write(const std::string& name, const std::string& text) const {
    const auto p = root / name;
    std::ofstream(p, std::ios::binary) << text;
    return p;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Cli {
  int code;
  std::string out;
  std::string err;
};

Cli clab_cli(const std::string& args, const fs::path& scratch) {
  const auto o = scratch / "stdout.txt";
  const auto e = scratch / "stderr.txt";
  const std::string cmd = std::string("'") + CLAB_CLI_PATH + "' " + args + " >'" + o.string() + "' 2>'" + e.string() + "'";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(o), slurp(e)};
}

std::string source(const std::string& rel) { return std::string(CLAB_SOURCE_DIR) + "/" + rel; }

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const clab::cli::ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, TomlSyntaxErrorNamesLine) {
  const auto msg = message_of([] { clab::cli::parse_toml("experiment = \"eigs\"\nmodes = = 4\n", "bad.toml"); });
  EXPECT_EQ(msg.rfind("bad.toml:2:", 0), 0u) << msg;
}

TEST(Config, JsonSyntaxErrorNamesLine) {
  const auto msg = message_of([] { clab::cli::parse_json("{\n\"experiment\": \"eigs\",\n\"modes\": ]\n}", "bad.json"); });
  EXPECT_EQ(msg.rfind("bad.json:3:", 0), 0u) << msg;
}

TEST(Config, WrongTypeNamesLineAndKey) {
  const auto cfg = clab::cli::parse_toml("experiment = \"eigs\"\n\nmodes = \"sixteen\"\n", "t.toml");
  const auto msg = message_of([&] { clab::cli::run_experiment(cfg, ""); });
  EXPECT_NE(msg.find("t.toml:3: modes: expected an integer"), std::string::npos) << msg;
}

TEST(Config, OutOfRangeAndBadChoice) {
  auto cfg = clab::cli::parse_toml("experiment = \"eigs\"\nmodes = 0\n", "t.toml");
  EXPECT_NE(message_of([&] { clab::cli::run_experiment(cfg, ""); }).find("modes: must lie in"), std::string::npos);
  cfg = clab::cli::parse_toml("experiment = \"simulate\"\nscheme = \"rk4\"\n", "t.toml");
  EXPECT_NE(message_of([&] { clab::cli::run_experiment(cfg, ""); }).find("t.toml:2: scheme: 'rk4' is not one of"),
            std::string::npos);
}

TEST(Config, UnknownKeyIsRejected) {
  const auto cfg = clab::cli::parse_toml("experiment = \"eigs\"\nmodes = 4\nmdoes = 5\n", "t.toml");
  const auto msg = message_of([&] { clab::cli::run_experiment(cfg, ""); });
  EXPECT_NE(msg.find("t.toml:3: mdoes: unknown key"), std::string::npos) << msg;
}

TEST(Config, ExperimentMismatchIsRejected) {
  const auto cfg = clab::cli::parse_toml("experiment = \"eigs\"\n", "t.toml");
  EXPECT_NE(message_of([&] { clab::cli::run_experiment(cfg, "hum"); }).find("not 'hum'"), std::string::npos);
}

TEST(Config, TomlAndJsonMirrorsHashIdentically) {
  const auto t = clab::cli::load_config(source("configs/hum_dense.toml"));
  const auto j = clab::cli::load_config(source("configs/hum_dense.json"));
  EXPECT_EQ(t.tree, j.tree);
  EXPECT_EQ(clab::cli::config_hash(t.tree), clab::cli::config_hash(j.tree));
  // key order and whitespace do not matter, values do
  const auto k = clab::cli::parse_json(R"({"seed": 1, "experiment": "eigs"})", "k.json");
  const auto l = clab::cli::parse_toml("experiment = 'eigs'\n  seed = 1\n", "l.toml");
  EXPECT_EQ(clab::cli::config_hash(k.tree), clab::cli::config_hash(l.tree));
  const auto m = clab::cli::parse_toml("experiment = 'eigs'\nseed = 2\n", "m.toml");
  EXPECT_NE(clab::cli::config_hash(k.tree), clab::cli::config_hash(m.tree));
}

TEST(Cli, MalformedConfigExitsTwoWithLocation) {
  const Scratch s;
  const auto p = s.write("bad.toml", "experiment = \"eigs\"\nmodes = [1,\n");
  const auto r = clab_cli("run '" + p.string() + "'", s.root);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("bad.toml:"), std::string::npos) << r.err;
  const auto q = s.write("key.toml", "experiment = \"eigs\"\nbogus = 1\n");
  const auto r2 = clab_cli("run '" + q.string() + "'", s.root);
  EXPECT_EQ(r2.code, 2);
  EXPECT_NE(r2.err.find("key.toml:2: bogus: unknown key"), std::string::npos) << r2.err;
  EXPECT_EQ(clab_cli("frobnicate", s.root).code, 2);
  EXPECT_EQ(clab_cli("run '" + (s.root / "missing.toml").string() + "'", s.root).code, 2);
}

TEST(Cli, EigsMatchesBisectionOracle) {
  const Scratch s;
  const auto out = s.root / "eigs";
  const auto r = clab_cli("eigs '" + source("configs/eigs.toml") + "' -o '" + out.string() + "'", s.root);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("eigs: PASS"), std::string::npos);
  const auto sm = json::parse(slurp(out / "summary.json"));
  EXPECT_EQ(sm.at("status"), "PASS");
  EXPECT_LE(sm.at("results").at("mu1_difference").get<double>(), 1e-9);
  EXPECT_NEAR(sm.at("results").at("mu1").get<double>(), 4.730040744862704, 1e-12);
  EXPECT_EQ(sm.at("provenance").at("csv_schema"), "eigs/1");
  EXPECT_EQ(slurp(out / "results.csv").rfind("k,mu,lambda,char_residual,eigen_residual\n", 0), 0u);
}

TEST(Cli, FailedCriterionExitsOne) {
  const Scratch s;
  const auto p = s.write("strict.toml", "experiment = \"eigs\"\nmodes = 4\nmax_char_residual = 1e-300\n");
  const auto r = clab_cli("run '" + p.string() + "' -o '" + (s.root / "o").string() + "'", s.root);
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(json::parse(slurp(s.root / "o" / "summary.json")).at("status"), "FAIL");
}

TEST(Cli, HumDenseConfigPasses) {
  const Scratch s;
  const auto out = s.root / "hum";
  const auto r = clab_cli("--threads 1 run '" + source("configs/hum_dense.toml") + "' -o '" + out.string() + "'", s.root);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto res = json::parse(slurp(out / "summary.json")).at("results");
  EXPECT_LE(res.at("iterations").get<int>(), 8);
  EXPECT_GT(res.at("gramian").at("min_eigenvalue").get<double>(), 0.0);
}

TEST(Cli, DefaultOutputDirectoryIsKindAndHash) {
  const Scratch s;
  const auto cfg = clab::cli::load_config(source("configs/eigs.toml"));
  const std::string hash = clab::cli::hex64(clab::cli::config_hash(cfg.tree));
  const std::string cmd = "env CLAB_OUTPUT_ROOT='" + s.root.string() + "' '" + CLAB_CLI_PATH + "' run '" +
                          source("configs/eigs.toml") + "' >/dev/null 2>&1";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_TRUE(fs::exists(s.root / ("eigs-" + hash) / "summary.json"));
}

TEST(Cli, RerunIsBitIdenticalAcrossThreadCounts) {
  const Scratch s;
  const auto p = s.write("sim.toml",
                         "experiment = \"simulate\"\nseed = 21\nmodes = 6\nsteps = 128\npaths = 40\nstride = 8\n"
                         "initial = \"random\"\na = 0.5\nb = [0.2, 0.1]\nf_mode = 2\ng_mode = 1\n");
  ASSERT_EQ(clab_cli("--threads 1 run '" + p.string() + "' -o '" + (s.root / "a").string() + "'", s.root).code, 0);
  ASSERT_EQ(clab_cli("--threads 4 run '" + p.string() + "' -o '" + (s.root / "b").string() + "'", s.root).code, 0);
  EXPECT_EQ(slurp(s.root / "a" / "results.csv"), slurp(s.root / "b" / "results.csv"));
  EXPECT_EQ(slurp(s.root / "a" / "summary.json"), slurp(s.root / "b" / "summary.json"));
  EXPECT_GT(slurp(s.root / "a" / "results.csv").size(), 1000u);
}

TEST(Report, EmptyDirectoryGivesHeaderOnly) {
  const Scratch s;
  const auto r = clab_cli("report '" + s.root.string() + "'", s.root);
  EXPECT_EQ(r.code, 0);
  const auto rep = clab::cli::build_report((s.root / "nothing").string());
  EXPECT_TRUE(rep.table.rows.empty());
  // the CLI's own stdout/stderr capture files are not runs
  EXPECT_TRUE(clab::cli::build_report(s.root.string()).table.rows.empty());
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 2);
}

TEST(Report, SweepRowsCopySummaryValues) {
  const Scratch s;
  for (const std::string w : {"hat", "tilde"}) {
    auto cfg = clab::cli::parse_toml("experiment = \"carleman\"\nseed = 3\nmodes = 6\nsteps = 32\npaths = 8\n"
                                     "weight = \"" + w + "\"\nobservation = \"" +
                                         (w == "hat" ? "interior" : "boundary") + "\"\n",
                                     w + ".toml");
    clab::cli::run_and_write(cfg, "", (s.root / ("sweep-" + w)).string());
  }
  fs::create_directories(s.root / "broken");
  std::ofstream(s.root / "broken" / "summary.json") << "{ not json";
  const auto rep = clab::cli::build_report(s.root.string());
  ASSERT_EQ(rep.table.rows.size(), 2u);
  ASSERT_EQ(rep.incomplete.size(), 1u);
  const auto& h = rep.table.header;
  for (const auto& row : rep.table.rows) {
    const auto sm = json::parse(slurp(s.root / row[0] / "summary.json"));
    EXPECT_EQ(row[1], "carleman");
    for (const std::string key : {"lambda", "mu", "log_lhs", "log_rhs", "ratio", "log10_ratio", "stderr"}) {
      const auto col = static_cast<std::size_t>(std::find(h.begin(), h.end(), key) - h.begin());
      ASSERT_LT(col, h.size());
      const auto& v = sm.at("report").at(key);
      EXPECT_EQ(row[col], v.is_string() ? v.get<std::string>() : v.dump()) << key;
      // the summary value, re-read as a double, prints back to the same digits
      if (v.is_number()) EXPECT_EQ(std::stod(row[col]), v.get<double>());
    }
  }
  const auto csv = clab::cli::render_csv(rep.table);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}
