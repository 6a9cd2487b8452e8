#pragma once

// Monte Carlo episode runner, trace capture, aggregation and export.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cpsattack/engine.hpp"
#include "cpsattack/error.hpp"
#include "cpsattack/json_util.hpp"
#include "cpsattack/profile.hpp"
#include "cpsattack/rng.hpp"

namespace cpsattack {

struct SimConfig {
  std::size_t episode_count = 1;
  std::uint64_t seed = 0;
  std::optional<std::string> profile;  // static profile name; nullopt samples the PMF
  std::optional<std::size_t> max_steps;
  unsigned parallelism = 1;
  std::size_t trace_limit = std::numeric_limits<std::size_t>::max();  // full traces kept
};

inline ValidationReport validate_config(const SimConfig& c) {
  ValidationReport r;
  if (c.episode_count < 1) r.add("config", "episode_count must be at least 1");
  if (c.max_steps && *c.max_steps < 1) r.add("config", "max_steps must be at least 1");
  if (c.parallelism < 1) r.add("config", "parallelism must be at least 1");
  return r;
}

enum class TerminalStatus { target_reached, exhausted, step_capped };

inline std::string_view to_string(TerminalStatus s) {
  switch (s) {
    case TerminalStatus::target_reached: return "target-reached";
    case TerminalStatus::exhausted: return "exhausted";
    case TerminalStatus::step_capped: return "step-capped";
  }
  return "?";
}

inline std::optional<TerminalStatus> terminal_status_from_string(std::string_view s) {
  if (s == "target-reached") return TerminalStatus::target_reached;
  if (s == "exhausted") return TerminalStatus::exhausted;
  if (s == "step-capped") return TerminalStatus::step_capped;
  return std::nullopt;
}

struct EpisodeTrace {
  std::size_t episode = 0;
  std::string profile;
  std::vector<DecisionRecord> decisions;
  TerminalStatus status = TerminalStatus::exhausted;
  CpsKnowledge final_knowledge;

  bool operator==(const EpisodeTrace&) const = default;
};

// What aggregation needs from one episode; always kept for every episode.
struct EpisodeSummary {
  std::size_t episode = 0;
  std::string profile;
  TerminalStatus status = TerminalStatus::exhausted;
  std::size_t steps = 0;
  std::set<ActionId> actions_selected;
  std::set<NodeId> nodes_compromised;
  std::set<EdgeId> entry_points_used;
};

inline EpisodeSummary summarize(const EpisodeTrace& trace, const CpsSystem& sys) {
  EpisodeSummary s{trace.episode, trace.profile, trace.status, trace.decisions.size(), {}, {}, {}};
  s.nodes_compromised = trace.final_knowledge.compromised_nodes;
  for (const auto& d : trace.decisions) {
    s.actions_selected.insert(d.chosen);
    if (d.via_edge)
      if (const Edge* e = sys.find_edge(*d.via_edge); e && e->is_entry_point)
        s.entry_points_used.insert(e->id);
  }
  return s;
}

// Scaled attackers for every profile, plus the rule for picking one per episode.
class AttackerPool {
 public:
  AttackerPool(const AttackModel& model, const ProfileSet& profiles,
               const std::optional<std::string>& fixed_profile) {
    validate_profile_set(profiles, model.database().schema()).throw_if_failed();
    if (fixed_profile) {
      const AttackerProfile* p = profiles.find(*fixed_profile);
      if (!p) throw ValidationError({*fixed_profile + ": no such attacker profile"});
      fixed_ = *fixed_profile;
      attackers_.emplace(p->name, model.make_attacker(*p));
    } else {
      if (!profiles.pmf) throw ValidationError({"pmf: profile file defines no PMF"});
      pmf_ = *profiles.pmf;
      for (const auto& e : pmf_->entries)
        attackers_.emplace(e.profile, model.make_attacker(*profiles.find(e.profile)));
    }
  }

  // Profiles that can appear in a run, in report order.
  std::vector<std::string> names() const {
    if (fixed_) return {*fixed_};
    std::vector<std::string> out;
    for (const auto& e : pmf_->entries) out.push_back(e.profile);
    return out;
  }

  // Samples the PMF once per episode; a static profile consumes no randomness.
  const Attacker& draw(Rng& rng) const {
    if (fixed_) return attackers_.at(*fixed_);
    return attackers_.at(sample_profile(*pmf_, rng));
  }

 private:
  std::optional<std::string> fixed_;
  std::optional<ProfilePmf> pmf_;
  std::map<std::string, Attacker> attackers_;
};

inline EpisodeTrace run_episode(const AttackModel& model, const AttackerPool& pool,
                                const SimConfig& config, Rng& rng, std::size_t index = 0) {
  EpisodeTrace trace;
  trace.episode = index;
  const Attacker& attacker = pool.draw(rng);
  trace.profile = attacker.name;

  AttackState state = AttackState::initial(model, attacker);
  trace.status = TerminalStatus::exhausted;
  for (;;) {
    if (config.max_steps && trace.decisions.size() >= *config.max_steps) {
      trace.status = TerminalStatus::step_capped;
      break;
    }
    auto result = step(state, rng);
    if (!result) break;
    state = std::move(result->state);
    const DecisionRecord& d = trace.decisions.emplace_back(std::move(result->record));
    if (d.outcome == Outcome::success && model.system().find_node(d.target)->is_target) {
      trace.status = TerminalStatus::target_reached;
      break;
    }
  }
  trace.final_knowledge = state.knowledge;
  return trace;
}

// ---------------------------------------------------------------------------
// Aggregation

struct AggregateReport {
  std::size_t episodes = 0;
  std::size_t successes = 0;
  std::map<ActionId, std::size_t> action_selections;  // episodes that chose the action
  std::map<NodeId, std::size_t> node_compromises;     // episodes that owned the node
  std::map<EdgeId, std::size_t> entry_point_usage;    // episodes that attacked through the edge
  std::map<std::string, std::size_t> profile_counts;
  std::optional<double> mean_steps_to_success;
  std::optional<double> median_steps_to_success;

  double success_rate() const {
    return episodes == 0 ? 0.0 : static_cast<double>(successes) / static_cast<double>(episodes);
  }
  double frequency(std::size_t count) const {
    return episodes == 0 ? 0.0 : static_cast<double>(count) / static_cast<double>(episodes);
  }

  bool operator==(const AggregateReport&) const = default;
};

// Wilson score interval for a binomial proportion.
inline std::pair<double, double> wilson_interval(std::size_t successes, std::size_t n,
                                                 double z = 1.959963984540054) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double centre = (p + z2 / (2 * nn)) / (1 + z2 / nn);
  const double half = z * std::sqrt(p * (1 - p) / nn + z2 / (4 * nn * nn)) / (1 + z2 / nn);
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

// Pure fold over summaries in episode order. Every action, node, entry point
// and profile gets a row, including zero counts.
inline AggregateReport aggregate(const std::vector<EpisodeSummary>& summaries,
                                 const CpsSystem& sys, const ActionDatabase& db,
                                 const std::vector<std::string>& profile_names) {
  AggregateReport r;
  for (const auto& a : db.actions()) r.action_selections[a.id] = 0;
  for (const auto& n : sys.nodes()) r.node_compromises[n.id] = 0;
  for (const auto* e : sys.entry_points()) r.entry_point_usage[e->id] = 0;
  for (const auto& p : profile_names) r.profile_counts[p] = 0;

  std::vector<double> success_steps;
  for (const auto& s : summaries) {
    ++r.episodes;
    ++r.profile_counts[s.profile];
    for (const auto& a : s.actions_selected) ++r.action_selections[a];
    for (const auto& n : s.nodes_compromised) ++r.node_compromises[n];
    for (const auto& e : s.entry_points_used) ++r.entry_point_usage[e];
    if (s.status == TerminalStatus::target_reached) {
      ++r.successes;
      success_steps.push_back(static_cast<double>(s.steps));
    }
  }
  if (!success_steps.empty()) {
    double sum = 0.0;
    for (double x : success_steps) sum += x;
    r.mean_steps_to_success = sum / static_cast<double>(success_steps.size());
    std::sort(success_steps.begin(), success_steps.end());
    const std::size_t k = success_steps.size();
    r.median_steps_to_success =
        k % 2 ? success_steps[k / 2] : (success_steps[k / 2 - 1] + success_steps[k / 2]) / 2.0;
  }
  return r;
}

struct MonteCarloResult {
  AggregateReport report;
  std::vector<EpisodeTrace> traces;       // the first config.trace_limit episodes
  std::vector<EpisodeSummary> summaries;  // every episode, in index order
};

// Runs config.episode_count episodes. Episode i draws from
// Rng::for_episode(seed, i), so output is independent of parallelism.
inline MonteCarloResult run_monte_carlo(const AttackModel& model, const ProfileSet& profiles,
                                        const SimConfig& config) {
  validate_config(config).throw_if_failed();
  const AttackerPool pool(model, profiles, config.profile);

  const std::size_t n = config.episode_count;
  const std::size_t kept = std::min(n, config.trace_limit);
  MonteCarloResult out;
  out.summaries.resize(n);
  out.traces.resize(kept);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      Rng rng = Rng::for_episode(config.seed, i);
      EpisodeTrace trace = run_episode(model, pool, config, rng, i);
      out.summaries[i] = summarize(trace, model.system());
      if (i < kept) out.traces[i] = std::move(trace);
    }
  };

  const unsigned workers = static_cast<unsigned>(
      std::min<std::size_t>(std::max(1u, config.parallelism), n));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> threads;
    threads.reserve(workers);
    for (unsigned t = 0; t < workers; ++t) threads.emplace_back(worker);
  }

  out.report = aggregate(out.summaries, model.system(), model.database(), pool.names());
  return out;
}

// Re-applies a trace's decisions through the engine filters from the initial
// knowledge; throws if any decision was not valid when it was taken.
inline CpsKnowledge replay_trace(const AttackModel& model, const EpisodeTrace& trace) {
  AttackState state = AttackState::initial(model, Attacker{});
  for (std::size_t i = 0; i < trace.decisions.size(); ++i) {
    const auto& d = trace.decisions[i];
    const std::string where = "decision " + std::to_string(i + 1);
    if (!state.knowledge.knows_node(d.target) || state.knowledge.is_compromised(d.target))
      throw PreconditionError(where + ": " + d.target + " was not a valid target");
    const auto valid = filter_valid(state, d.target);
    if (std::find(valid.begin(), valid.end(), d.chosen) == valid.end())
      throw PreconditionError(where + ": " + d.chosen + " was not a valid action");
    state = apply_decision(state, d.target, d.chosen, d.outcome);
  }
  return state.knowledge;
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

// Shortest text that parses back to the same double.
inline std::string format_double(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw ParseError("csv: unterminated quote");
  fields.push_back(std::move(cur));
  return fields;
}

inline std::size_t parse_count(const std::string& s) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ParseError("csv: bad count \"" + s + "\"");
  return v;
}

inline std::optional<double> parse_optional_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ParseError("csv: bad number \"" + s + "\"");
  return v;
}

inline Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace detail

inline Json to_json(const AggregateReport& r) {
  auto table = [&](const std::map<std::string, std::size_t>& counts) {
    Json j = Json::object();
    for (const auto& [k, c] : counts) j[k] = {{"count", c}, {"frequency", r.frequency(c)}};
    return j;
  };
  const auto [lo, hi] = wilson_interval(r.successes, r.episodes);
  return {{"episodes", r.episodes},
          {"successes", r.successes},
          {"success_rate", r.success_rate()},
          {"success_ci95", {lo, hi}},
          {"mean_steps_to_success", detail::optional_json(r.mean_steps_to_success)},
          {"median_steps_to_success", detail::optional_json(r.median_steps_to_success)},
          {"action_selection", table(r.action_selections)},
          {"node_compromise", table(r.node_compromises)},
          {"entry_point_usage", table(r.entry_point_usage)},
          {"profile_counts", r.profile_counts}};
}

inline AggregateReport report_from_json(const Json& j) {
  try {
    AggregateReport r;
    j.at("episodes").get_to(r.episodes);
    j.at("successes").get_to(r.successes);
    auto opt = [&](const char* key) -> std::optional<double> {
      const Json& v = j.at(key);
      return v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
    };
    r.mean_steps_to_success = opt("mean_steps_to_success");
    r.median_steps_to_success = opt("median_steps_to_success");
    auto table = [&](const char* key, std::map<std::string, std::size_t>& out) {
      for (const auto& [k, v] : j.at(key).items()) out[k] = v.at("count").get<std::size_t>();
    };
    table("action_selection", r.action_selections);
    table("node_compromise", r.node_compromises);
    table("entry_point_usage", r.entry_point_usage);
    j.at("profile_counts").get_to(r.profile_counts);
    return r;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
}

inline constexpr std::string_view kReportCsvHeader =
    "kind,id,count,episodes,frequency,ci_low,ci_high,mean_steps,median_steps";

// One summary row, then one row per action, node, entry point and profile.
inline std::string report_to_csv(const AggregateReport& r) {
  using detail::format_double;
  std::ostringstream out;
  out << kReportCsvHeader << '\n';
  const auto [lo, hi] = wilson_interval(r.successes, r.episodes);
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  out << "summary,success," << r.successes << ',' << r.episodes << ','
      << format_double(r.success_rate()) << ',' << format_double(lo) << ',' << format_double(hi)
      << ',' << opt(r.mean_steps_to_success) << ',' << opt(r.median_steps_to_success) << '\n';
  auto rows = [&](const char* kind, const std::map<std::string, std::size_t>& counts) {
    for (const auto& [id, c] : counts)
      out << kind << ',' << detail::csv_field(id) << ',' << c << ',' << r.episodes << ','
          << format_double(r.frequency(c)) << ",,,,\n";
  };
  rows("action", r.action_selections);
  rows("node", r.node_compromises);
  rows("entry_point", r.entry_point_usage);
  rows("profile", r.profile_counts);
  return out.str();
}

inline AggregateReport report_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kReportCsvHeader) throw ParseError("csv: bad header");
  AggregateReport r;
  bool have_summary = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 9) throw ParseError("csv: expected 9 fields in \"" + line + "\"");
    const std::size_t count = detail::parse_count(f[2]);
    if (f[0] == "summary") {
      r.successes = count;
      r.episodes = detail::parse_count(f[3]);
      r.mean_steps_to_success = detail::parse_optional_double(f[7]);
      r.median_steps_to_success = detail::parse_optional_double(f[8]);
      have_summary = true;
    } else if (f[0] == "action") {
      r.action_selections[f[1]] = count;
    } else if (f[0] == "node") {
      r.node_compromises[f[1]] = count;
    } else if (f[0] == "entry_point") {
      r.entry_point_usage[f[1]] = count;
    } else if (f[0] == "profile") {
      r.profile_counts[f[1]] = count;
    } else {
      throw ParseError("csv: unknown row kind \"" + f[0] + "\"");
    }
  }
  if (!have_summary) throw ParseError("csv: missing summary row");
  return r;
}

inline Json to_json(const DecisionRecord& d) {
  Json candidates = Json::array();
  for (const auto& c : d.candidates)
    candidates.push_back({{"action", c.action},
                          {"distance", c.distance},
                          {"score", c.score},
                          {"probability", c.probability}});
  return {{"target", d.target},
          {"via_edge", d.via_edge ? Json(*d.via_edge) : Json(nullptr)},
          {"source", d.source},
          {"candidates", candidates},
          {"chosen", d.chosen},
          {"probability", d.chosen_probability},
          {"outcome", to_string(d.outcome)},
          {"effect", to_string(d.effect)}};
}

inline Json to_json(const EpisodeTrace& t) {
  Json decisions = Json::array();
  for (std::size_t i = 0; i < t.decisions.size(); ++i) {
    Json d = to_json(t.decisions[i]);
    d["step"] = i + 1;
    decisions.push_back(std::move(d));
  }
  return {{"episode", t.episode},
          {"profile", t.profile},
          {"status", to_string(t.status)},
          {"decisions", decisions},
          {"knowledge", to_json(t.final_knowledge)}};
}

// Parses and self-checks a trace. Any inconsistency is a ParseError.
inline EpisodeTrace trace_from_json(const Json& j) {
  EpisodeTrace t;
  try {
    j.at("episode").get_to(t.episode);
    j.at("profile").get_to(t.profile);
    auto status = terminal_status_from_string(j.at("status").get<std::string>());
    if (!status) throw ParseError("trace: unknown status");
    t.status = *status;
    for (const auto& dj : j.at("decisions")) {
      DecisionRecord d;
      dj.at("target").get_to(d.target);
      if (const Json& v = dj.at("via_edge"); !v.is_null()) d.via_edge = v.get<std::string>();
      d.source = dj.value("source", std::string());
      for (const auto& cj : dj.at("candidates"))
        d.candidates.push_back({cj.at("action").get<std::string>(), cj.at("distance").get<double>(),
                                cj.at("score").get<double>(), cj.at("probability").get<double>()});
      dj.at("chosen").get_to(d.chosen);
      dj.at("probability").get_to(d.chosen_probability);
      const auto outcome = dj.at("outcome").get<std::string>();
      if (outcome != "success" && outcome != "failure") throw ParseError("trace: unknown outcome");
      d.outcome = outcome == "success" ? Outcome::success : Outcome::failure;
      auto effect = effect_from_string(dj.at("effect").get<std::string>());
      if (!effect) throw ParseError("trace: unknown effect");
      d.effect = *effect;
      t.decisions.push_back(std::move(d));
    }
    t.final_knowledge = knowledge_from_json(j.at("knowledge"));
  } catch (const Json::exception& e) {
    throw ParseError(std::string("trace: ") + e.what());
  }

  for (std::size_t i = 0; i < t.decisions.size(); ++i) {
    const auto& d = t.decisions[i];
    const std::string where = "trace: decision " + std::to_string(i + 1);
    double total = 0.0;
    bool chosen_found = false;
    for (const auto& c : d.candidates) {
      total += c.probability;
      chosen_found = chosen_found || c.action == d.chosen;
    }
    if (!chosen_found) throw ParseError(where + ": chosen action is not a candidate");
    if (std::abs(total - 1.0) > 1e-9) throw ParseError(where + ": probabilities do not sum to 1");
  }
  return t;
}

// ---------------------------------------------------------------------------
// GraphViz

namespace detail {
inline std::string dot_quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

inline std::string fixed3(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", x);
  return buf;
}
}  // namespace detail

// Known nodes (compromised ones filled) and one edge per decision, labelled
// with step number, action name and probability.
inline std::string export_trace_dot(const EpisodeTrace& trace, const CpsSystem& sys,
                                    const ActionDatabase* db = nullptr) {
  using detail::dot_quote;
  std::ostringstream out;
  out << "digraph attack_trace {\n";
  out << "  rankdir=LR;\n";
  out << "  label=" << dot_quote("episode " + std::to_string(trace.episode) + " | " +
                                 trace.profile + " | " + std::string(to_string(trace.status)))
      << ";\n";
  out << "  node [shape=box, fontname=\"Helvetica\"];\n";

  auto source_of = [&](const DecisionRecord& d) -> NodeId {
    if (!d.source.empty()) return d.source;
    const Edge* via = d.via_edge ? sys.find_edge(*d.via_edge) : nullptr;
    return via ? via->from : kExternalOrigin;
  };
  bool needs_origin = false;
  for (const auto& d : trace.decisions) needs_origin = needs_origin || source_of(d) == kExternalOrigin;
  if (needs_origin) out << "  " << dot_quote(kExternalOrigin) << " [shape=point];\n";

  for (const auto& id : trace.final_knowledge.known_nodes) {
    const Node* n = sys.find_node(id);
    const bool owned = trace.final_knowledge.is_compromised(id);
    std::string label = id;
    if (n && !n->name.empty()) label += "\n" + n->name;
    label += owned ? "\n[compromised]" : "\n[known]";
    out << "  " << dot_quote(id) << " [label=" << dot_quote(label);
    if (owned) out << ", style=filled, fillcolor=\"#f4cccc\"";
    if (n && n->is_target) out << ", peripheries=2";
    out << "];\n";
  }

  for (std::size_t i = 0; i < trace.decisions.size(); ++i) {
    const auto& d = trace.decisions[i];
    const NodeId source = source_of(d);
    std::string name = d.chosen;
    if (db)
      if (const Action* a = db->find(d.chosen); a && !a->name.empty()) name = a->name;
    const std::string label = std::to_string(i + 1) + ": " + name +
                              "\nP=" + detail::fixed3(d.chosen_probability) + " (" +
                              std::string(to_string(d.outcome)) + ")";
    out << "  " << dot_quote(source) << " -> " << dot_quote(d.target)
        << " [label=" << dot_quote(label)
        << (d.outcome == Outcome::success ? ", color=\"#cc0000\"" : ", style=dashed") << "];\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace cpsattack
