#pragma once

// Command-line front end: validate, simulate, ingest, trace.
//
// Exit codes: 0 success, 1 validation failure, 2 usage error, 3 I/O error.

#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cpsattack/action_db.hpp"
#include "cpsattack/cps_model.hpp"
#include "cpsattack/harness.hpp"
#include "cpsattack/ingest.hpp"
#include "cpsattack/profile.hpp"

namespace cpsattack::cli {

enum ExitCode : int { kOk = 0, kInvalid = 1, kUsage = 2, kIo = 3 };

struct Inputs {
  std::optional<CpsSystem> system;
  std::optional<ActionDatabase> db;
  std::optional<ProfileSet> profiles;
  ValidationReport report;
  bool io_failed = false;
};

namespace detail {

template <typename F>
void guarded(F&& f, Inputs& in, std::ostream& err) {
  try {
    f();
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    in.io_failed = true;
  } catch (const ValidationError& e) {
    for (const auto& p : e.problems()) in.report.add("input", p);
  } catch (const Error& e) {
    in.report.add("input", e.what());
  }
}

}  // namespace detail

// Loads and cross-validates the three model files. Every problem found is
// collected; nothing short-circuits except unreadable files.
inline Inputs load_inputs(const std::string& system_path, const std::string& actions_path,
                          const std::string& profiles_path, std::ostream& err) {
  Inputs in;
  detail::guarded(
      [&] {
        auto parsed = parse_system(cpsattack::detail::read_json_file(system_path));
        in.report.merge(parsed.report);
        if (parsed.report.ok()) {
          in.report.merge(validate_system(parsed.system));
          in.system = std::move(parsed.system);
        }
      },
      in, err);
  detail::guarded(
      [&] {
        ValidationReport r;
        auto db = parse_action_db(cpsattack::detail::read_json_file(actions_path), r);
        if (r.ok()) r.merge(validate_action_db(db));
        in.report.merge(r);
        if (r.ok()) in.db = std::move(db);
      },
      in, err);
  detail::guarded(
      [&] {
        ValidationReport r;
        auto set = parse_profile_set(cpsattack::detail::read_json_file(profiles_path), r);
        if (r.ok() && in.db) r.merge(validate_profile_set(set, in.db->schema()));
        in.report.merge(r);
        if (r.ok()) in.profiles = std::move(set);
      },
      in, err);
  return in;
}

inline int print_inputs_report(const Inputs& in, std::ostream& out) {
  if (in.io_failed) return kIo;
  for (const auto& line : in.report.lines()) out << line << '\n';
  return in.report.ok() ? kOk : kInvalid;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string system, actions, profiles, out_dir = "out";
  std::size_t episodes = 1000;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> profile;
  bool pmf = false;
  std::optional<std::size_t> max_steps;
  unsigned jobs = 1;
  std::size_t traces = 10;
};

inline int run_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
  Inputs in = load_inputs(a.system, a.actions, a.profiles, err);
  if (int rc = print_inputs_report(in, err); rc != kOk) return rc;

  SimConfig config;
  config.episode_count = a.episodes;
  config.profile = a.profile;
  config.max_steps = a.max_steps;
  config.parallelism = a.jobs;
  config.trace_limit = a.traces;
  if (a.seed) {
    config.seed = *a.seed;
  } else {
    std::random_device rd;
    config.seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    err << "seed=" << config.seed << '\n';
  }
  if (!config.profile && !in.profiles->pmf) {
    err << "error: profiles file has no pmf; pass --profile NAME\n";
    return kUsage;
  }

  MonteCarloResult result;
  try {
    const AttackModel model(*in.system, *in.db);
    result = run_monte_carlo(model, *in.profiles, config);
  } catch (const ValidationError& e) {
    for (const auto& p : e.problems()) err << p << '\n';
    return kInvalid;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kInvalid;
  }

  try {
    namespace fs = std::filesystem;
    const fs::path dir(a.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    using cpsattack::detail::write_text_file;
    write_text_file(dir / "report.json", to_json(result.report).dump(2) + "\n");
    write_text_file(dir / "report.csv", report_to_csv(result.report));
    std::string episodes = "episode,profile,status,steps\n";
    for (const auto& s : result.summaries)
      episodes += std::to_string(s.episode) + "," + cpsattack::detail::csv_field(s.profile) + "," +
                  std::string(to_string(s.status)) + "," + std::to_string(s.steps) + "\n";
    write_text_file(dir / "episodes.csv", episodes);
    for (const auto& t : result.traces) {
      const std::string stem = "trace_" + std::to_string(t.episode);
      write_text_file(dir / (stem + ".json"), to_json(t).dump(2) + "\n");
      write_text_file(dir / (stem + ".dot"), export_trace_dot(t, *in.system, &*in.db));
    }
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  }

  const auto& r = result.report;
  const auto [lo, hi] = wilson_interval(r.successes, r.episodes);
  out << "episodes=" << r.episodes << " successes=" << r.successes
      << " success_rate=" << cpsattack::detail::format_double(r.success_rate())
      << " ci95_low=" << cpsattack::detail::format_double(lo)
      << " ci95_high=" << cpsattack::detail::format_double(hi) << " seed=" << config.seed << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct IngestArgs {
  std::vector<std::string> capec, cve;
  std::optional<std::string> annotations;
  std::string out;
};

inline int run_ingest(const IngestArgs& a, std::ostream& out, std::ostream& err) {
  if (a.capec.empty() && a.cve.empty()) {
    err << "error: ingest needs at least one --capec or --cve file\n";
    return kUsage;
  }
  std::vector<ActionSkeleton> all;
  bool parse_failed = false;
  auto take = [&](const ImportResult& r) {
    for (const auto& w : r.warnings) err << "warning: " << w << '\n';
    all.insert(all.end(), r.skeletons.begin(), r.skeletons.end());
  };
  try {
    for (const auto& f : a.capec) {
      try {
        take(import_capec(f));
      } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        parse_failed = true;
      }
    }
    for (const auto& f : a.cve) {
      try {
        take(import_cve_feed(f));
      } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        parse_failed = true;
      }
    }
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  }
  if (parse_failed) return kInvalid;

  const auto skeletons = merge_skeletons(all);
  std::size_t annotated = 0;
  Json output;
  try {
    if (a.annotations) {
      const auto merged =
          merge_annotations(skeletons, cpsattack::detail::read_json_file(*a.annotations));
      for (const auto& id : merged.unannotated) err << "warning: " << id << ": not annotated\n";
      if (!merged.errors.ok()) {
        for (const auto& line : merged.errors.lines()) err << line << '\n';
        return kInvalid;
      }
      annotated = merged.fragment.size();
      output = to_json(merged.fragment);
    } else {
      output = skeletons_to_json(skeletons);
    }
    cpsattack::detail::write_text_file(a.out, output.dump(2) + "\n");
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kInvalid;
  }
  out << "imported=" << skeletons.size() << " annotated=" << annotated
      << " skipped=" << skeletons.size() - annotated << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct TraceArgs {
  std::string file;
  bool dot = false;
  std::optional<std::string> system;
};

inline int run_trace(const TraceArgs& a, std::ostream& out, std::ostream& err) {
  EpisodeTrace trace;
  CpsSystem sys;
  try {
    trace = trace_from_json(cpsattack::detail::read_json_file(a.file));
    if (a.system) sys = load_system(*a.system);
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kInvalid;
  }
  if (a.dot) {
    out << export_trace_dot(trace, sys);
    return kOk;
  }
  out << "step\ttarget\taction\tP\toutcome\n";
  for (std::size_t i = 0; i < trace.decisions.size(); ++i) {
    const auto& d = trace.decisions[i];
    char p[32];
    std::snprintf(p, sizeof p, "%.3f", d.chosen_probability);
    out << i + 1 << '\t' << d.target << '\t' << d.chosen << '\t' << p << '\t'
        << to_string(d.outcome) << '\n';
  }
  return kOk;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Attacker behaviour simulation for cyber-physical systems", "cpsattack"};
  app.require_subcommand(1);

  std::string v_system, v_actions, v_profiles;
  auto* validate = app.add_subcommand("validate", "Check system, action and profile files");
  validate->add_option("system", v_system, "System description (JSON)")->required();
  validate->add_option("actions", v_actions, "Action database (JSON)")->required();
  validate->add_option("profiles", v_profiles, "Attacker profiles and PMF (JSON)")->required();

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Run Monte Carlo attack episodes");
  simulate->add_option("system", sim.system, "System description (JSON)")->required();
  simulate->add_option("actions", sim.actions, "Action database (JSON)")->required();
  simulate->add_option("profiles", sim.profiles, "Attacker profiles and PMF (JSON)")->required();
  simulate->add_option("--episodes", sim.episodes, "Episode count")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim.seed, "Master seed (drawn and printed when absent)");
  simulate->add_option("--out", sim.out_dir, "Output directory");
  auto* profile_opt = simulate->add_option("--profile", sim.profile, "Static attacker profile");
  auto* pmf_flag = simulate->add_flag("--pmf", sim.pmf, "Sample the attacker from the PMF");
  profile_opt->excludes(pmf_flag);
  simulate->add_option("--max-steps", sim.max_steps, "Per-episode decision cap")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--jobs", sim.jobs, "Worker threads")->check(CLI::PositiveNumber);
  simulate->add_option("--traces", sim.traces, "Full traces written (default 10)");

  IngestArgs ing;
  std::string ann;
  auto* ingest = app.add_subcommand("ingest", "Build action skeletons from CAPEC/CVE exports");
  ingest->add_option("--capec", ing.capec, "CAPEC XML catalog export");
  ingest->add_option("--cve", ing.cve, "NVD CVE JSON feed");
  auto* ann_opt = ingest->add_option("--annotations", ann, "Profile annotations (JSON)");
  ingest->add_option("--out", ing.out, "Output file")->required();

  TraceArgs tr;
  std::string tr_system;
  bool summary = false;
  auto* trace = app.add_subcommand("trace", "Render a trace file");
  trace->add_option("file", tr.file, "trace_<i>.json")->required();
  auto* dot_flag = trace->add_flag("--dot", tr.dot, "GraphViz DOT output");
  auto* summary_flag = trace->add_flag("--summary", summary, "Step table (default)");
  dot_flag->excludes(summary_flag);
  auto* tr_sys_opt = trace->add_option("--system", tr_system, "System file for node names");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  }

  if (validate->parsed()) {
    Inputs in = load_inputs(v_system, v_actions, v_profiles, err);
    int rc = print_inputs_report(in, out);
    if (rc == kOk) out << "OK\n";
    return rc;
  }
  if (simulate->parsed()) return run_simulate(sim, out, err);
  if (ingest->parsed()) {
    if (*ann_opt) ing.annotations = ann;
    return run_ingest(ing, out, err);
  }
  if (trace->parsed()) {
    if (*tr_sys_opt) tr.system = tr_system;
    return run_trace(tr, out, err);
  }
  return kUsage;
}

}  // namespace cpsattack::cli
