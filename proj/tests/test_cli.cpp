#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "cpsattack/cli.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

namespace cpsattack {
namespace {

namespace fs = std::filesystem;

struct Run {
  int code;
  std::string out, err;
};

Run run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "cpsattack");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string cs(const char* f) { return (testing::data_dir() / "case_study" / f).string(); }
std::string ing(const char* f) { return (testing::data_dir() / "ingest" / f).string(); }

fs::path fresh_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("cpsattack_cli_" + name);
  fs::remove_all(d);
  return d;
}

std::string slurp(const fs::path& p) { return detail::read_text_file(p); }

TEST(CliValidate, CaseStudyIsValid) {
  auto r = run_cli({"validate", cs("system.json"), cs("actions.json"), cs("profiles.json")});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("OK"), std::string::npos);
}

TEST(CliValidate, ReportsEveryProblem) {
  auto dir = fresh_dir("invalid");
  fs::create_directories(dir);
  Json sys = detail::read_json_file(cs("system.json"));
  sys["edges"].push_back({{"id", "LX"}, {"from", "N1"}, {"to", "GHOST"}, {"channels", {"net"}}});
  for (auto& n : sys["nodes"]) n.erase("target");
  std::ofstream(dir / "system.json") << sys.dump();
  auto r = run_cli({"validate", (dir / "system.json").string(), cs("actions.json"), cs("profiles.json")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("GHOST"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("no target node"), std::string::npos) << r.out;
}

TEST(CliValidate, MissingFileIsIoError) {
  auto r = run_cli({"validate", "/nonexistent/system.json", cs("actions.json"), cs("profiles.json")});
  EXPECT_EQ(r.code, 3);
}

TEST(CliUsage, BadArgumentsExitTwo) {
  EXPECT_EQ(run_cli({}).code, 2);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 2);
  EXPECT_EQ(run_cli({"validate", cs("system.json")}).code, 2);
  EXPECT_EQ(run_cli({"simulate", cs("system.json"), cs("actions.json"), cs("profiles.json"),
                 "--episodes", "0"}).code, 2);
  EXPECT_EQ(run_cli({"simulate", cs("system.json"), cs("actions.json"), cs("profiles.json"),
                 "--profile", "Insider", "--pmf"}).code, 2);
  EXPECT_EQ(run_cli({"--help"}).code, 0);
}

TEST(CliSimulate, WritesOutputsAndIsDeterministic) {
  auto a = fresh_dir("sim_a"), b = fresh_dir("sim_b");
  auto base = std::vector<std::string>{"simulate", cs("system.json"), cs("actions.json"),
                                       cs("profiles.json"), "--episodes", "400", "--seed", "7",
                                       "--traces", "3"};
  auto ra = base, rb = base;
  ra.insert(ra.end(), {"--out", a.string()});
  rb.insert(rb.end(), {"--out", b.string(), "--jobs", "4"});
  auto x = run_cli(ra), y = run_cli(rb);
  ASSERT_EQ(x.code, 0) << x.err;
  ASSERT_EQ(y.code, 0) << y.err;
  EXPECT_EQ(x.out, y.out);
  EXPECT_NE(x.out.find("episodes=400"), std::string::npos);
  EXPECT_NE(x.out.find("seed=7"), std::string::npos);
  for (auto f : {"report.json", "report.csv", "episodes.csv", "trace_0.json", "trace_2.dot"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  EXPECT_FALSE(fs::exists(a / "trace_3.json"));
  auto report = report_from_csv(slurp(a / "report.csv"));
  EXPECT_EQ(report.episodes, 400u);
}

TEST(CliSimulate, StaticProfileTagsEpisodes) {
  auto d = fresh_dir("sim_static");
  auto r = run_cli({"simulate", cs("system.json"), cs("actions.json"), cs("profiles.json"),
                "--episodes", "50", "--seed", "1", "--profile", "Hacktivist", "--out", d.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(slurp(d / "episodes.csv"));
  std::string line;
  std::getline(in, line);
  int rows = 0;
  while (std::getline(in, line)) {
    EXPECT_NE(line.find(",Hacktivist,"), std::string::npos) << line;
    ++rows;
  }
  EXPECT_EQ(rows, 50);
}

TEST(CliSimulate, UnknownProfileIsValidationFailure) {
  auto d = fresh_dir("sim_unknown");
  auto r = run_cli({"simulate", cs("system.json"), cs("actions.json"), cs("profiles.json"),
                "--episodes", "5", "--seed", "1", "--profile", "Nobody", "--out", d.string()});
  EXPECT_EQ(r.code, 1);
}

TEST(CliSimulate, MissingSeedIsDrawnAndPrinted) {
  auto d = fresh_dir("sim_seed");
  auto r = run_cli({"simulate", cs("system.json"), cs("actions.json"), cs("profiles.json"),
                "--episodes", "5", "--out", d.string()});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.err.rfind("seed=", 0), 0u);
}

TEST(CliSimulate, UnwritableOutputIsIoError) {
  auto blocker = fresh_dir("sim_blocker");
  std::ofstream(blocker) << "a file, not a directory";
  auto r = run_cli({"simulate", cs("system.json"), cs("actions.json"), cs("profiles.json"),
                "--episodes", "5", "--seed", "1", "--out", (blocker / "sub").string()});
  EXPECT_EQ(r.code, 3);
  fs::remove(blocker);
}

TEST(CliTrace, SummaryAndDot) {
  auto d = fresh_dir("trace");
  ASSERT_EQ(run_cli({"simulate", cs("system.json"), cs("actions.json"), cs("profiles.json"),
                 "--episodes", "1", "--seed", "1436", "--profile", "Nation State", "--out",
                 d.string()}).code, 0);
  auto file = (d / "trace_0.json").string();
  auto s = run_cli({"trace", file});
  ASSERT_EQ(s.code, 0) << s.err;
  EXPECT_EQ(s.out,
            "step\ttarget\taction\tP\toutcome\n"
            "1\tN1\tUSB-DROP\t1.000\tsuccess\n"
            "2\tN5\tMODBUS-MITM\t0.558\tsuccess\n"
            "3\tN4\tMODBUS-DOS\t0.442\tsuccess\n");
  auto dot = run_cli({"trace", file, "--dot", "--system", cs("system.json")});
  ASSERT_EQ(dot.code, 0);
  auto summary = testing::check_dot(dot.out);
  EXPECT_TRUE(summary.ok) << summary.error;
  EXPECT_EQ(summary.edge_statements, 3u);
  EXPECT_NE(dot.out.find("BPCS"), std::string::npos);
  EXPECT_EQ(run_cli({"trace", file, "--dot", "--summary"}).code, 2);
  EXPECT_EQ(run_cli({"trace", (d / "missing.json").string()}).code, 3);
}

TEST(CliIngest, SkeletonsAndAnnotatedFragment) {
  auto d = fresh_dir("ingest");
  fs::create_directories(d);
  EXPECT_EQ(run_cli({"ingest", "--out", (d / "x.json").string()}).code, 2);

  auto raw = run_cli({"ingest", "--capec", ing("capec_sample.xml"), "--cve", ing("cve_feed_legacy.json"),
                  "--cve", ing("cve_feed_api2.json"), "--out", (d / "skeletons.json").string()});
  ASSERT_EQ(raw.code, 0) << raw.err;
  EXPECT_EQ(raw.out, "imported=6 annotated=0 skipped=6\n");
  EXPECT_EQ(skeletons_from_json(detail::read_json_file(d / "skeletons.json")).size(), 6u);

  auto frag = run_cli({"ingest", "--capec", ing("capec_sample.xml"), "--cve", ing("cve_feed_legacy.json"),
                   "--cve", ing("cve_feed_api2.json"), "--annotations", ing("annotations.json"),
                   "--out", (d / "actions.json").string()});
  ASSERT_EQ(frag.code, 0) << frag.err;
  EXPECT_EQ(frag.out, "imported=6 annotated=6 skipped=0\n");
  EXPECT_EQ(load_action_db(d / "actions.json").size(), 6u);

  std::ofstream(d / "broken.xml") << "<Attack_Pattern_Catalog>\n<unclosed>";
  EXPECT_EQ(run_cli({"ingest", "--capec", (d / "broken.xml").string(), "--out",
                 (d / "y.json").string()}).code, 1);
  EXPECT_EQ(run_cli({"ingest", "--capec", (d / "nope.xml").string(), "--out",
                 (d / "y.json").string()}).code, 3);
}

// Randomly corrupts the case-study inputs; every run must end with a known
// exit code and never crash.
TEST(CliProperty, CorruptedInputsNeverCrash) {
  auto d = fresh_dir("fuzz");
  fs::create_directories(d);
  const std::string originals[3] = {slurp(cs("system.json")), slurp(cs("actions.json")),
                                    slurp(cs("profiles.json"))};
  std::mt19937_64 gen(2024);
  for (int trial = 0; trial < 150; ++trial) {
    std::string files[3] = {originals[0], originals[1], originals[2]};
    std::string& victim = files[gen() % 3];
    switch (gen() % 4) {
      case 0: victim.resize(gen() % victim.size()); break;
      case 1: victim[gen() % victim.size()] = "{}[],:\"x0"[gen() % 9]; break;
      case 2: victim.erase(gen() % victim.size(), 1 + gen() % 20); break;
      default: {
        Json j = Json::parse(victim);
        auto key = j.begin().key();
        j[key] = gen() % 2 ? Json(42) : Json::array();
        victim = j.dump();
      }
    }
    const char* names[3] = {"s.json", "a.json", "p.json"};
    for (int i = 0; i < 3; ++i) std::ofstream(d / names[i]) << files[i];
    auto r = run_cli({"validate", (d / "s.json").string(), (d / "a.json").string(),
                  (d / "p.json").string()});
    EXPECT_TRUE(r.code == 0 || r.code == 1) << r.code << " " << r.err;
  }
}

}  // namespace
}  // namespace cpsattack
