#pragma once

// The action database: profiled attack actions with target criteria,
// propagation channels and prerequisites.

#include <algorithm>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cpsattack/cps_model.hpp"
#include "cpsattack/error.hpp"
#include "cpsattack/json_util.hpp"
#include "cpsattack/profile.hpp"

namespace cpsattack {

using ActionId = std::string;

// attribute key -> acceptable values. Empty criteria match every node.
struct TargetCriteria {
  std::map<std::string, std::set<std::string>> requirements;

  bool operator==(const TargetCriteria&) const = default;
};

// Both effects count as ownership of the node; the label is reporting metadata.
enum class Effect { compromise, disrupt };

inline std::string_view to_string(Effect e) {
  return e == Effect::compromise ? "compromise" : "disrupt";
}

inline std::optional<Effect> effect_from_string(std::string_view s) {
  if (s == "compromise") return Effect::compromise;
  if (s == "disrupt") return Effect::disrupt;
  return std::nullopt;
}

struct Action {
  ActionId id;
  std::string name;
  std::string description;
  std::vector<std::string> references;  // CAPEC/CWE/CVE/CPE ids
  ProfileValues profile;
  TargetCriteria target_criteria;
  std::set<std::string> channels;
  std::set<ActionId> prerequisites;
  double success_probability = 1.0;
  Effect effect = Effect::compromise;

  bool operator==(const Action&) const = default;
};

class ActionDatabase {
 public:
  ActionDatabase() = default;
  ActionDatabase(Schema schema, std::vector<Action> actions)
      : schema_(std::move(schema)), actions_(std::move(actions)) {
    for (std::size_t i = 0; i < actions_.size(); ++i) index_.emplace(actions_[i].id, i);
  }

  const Schema& schema() const noexcept { return schema_; }
  const std::vector<Action>& actions() const noexcept { return actions_; }
  std::size_t size() const noexcept { return actions_.size(); }

  const Action* find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    return it == index_.end() ? nullptr : &actions_[it->second];
  }

  bool operator==(const ActionDatabase& o) const {
    return schema_ == o.schema_ && actions_ == o.actions_;
  }

 private:
  Schema schema_;
  std::vector<Action> actions_;
  std::map<std::string, std::size_t> index_;
};

inline bool criteria_match(const TargetCriteria& criteria, const Node& node) {
  for (const auto& [key, accepted] : criteria.requirements) {
    auto it = node.attributes.find(key);
    if (it == node.attributes.end() || !accepted.contains(it->second)) return false;
  }
  return true;
}

namespace detail {

// Reports each prerequisite cycle once, as "A -> B -> A".
inline void find_prerequisite_cycles(const std::vector<Action>& actions,
                                     const std::map<std::string, const Action*>& by_id,
                                     ValidationReport& report) {
  enum class Mark { none, active, done };
  std::map<std::string, Mark> mark;
  std::vector<std::string> stack;

  std::function<void(const Action&)> visit = [&](const Action& a) {
    mark[a.id] = Mark::active;
    stack.push_back(a.id);
    for (const auto& pre : a.prerequisites) {
      auto it = by_id.find(pre);
      if (it == by_id.end() || pre == a.id) continue;
      Mark m = mark[pre];
      if (m == Mark::active) {
        auto start = std::find(stack.begin(), stack.end(), pre);
        std::string cycle;
        for (auto s = start; s != stack.end(); ++s) cycle += *s + " -> ";
        cycle += pre;
        report.add(pre, "prerequisite cycle: " + cycle);
      } else if (m == Mark::none) {
        visit(*it->second);
      }
    }
    stack.pop_back();
    mark[a.id] = Mark::done;
  };

  for (const auto& a : actions)
    if (mark[a.id] == Mark::none) visit(a);
}

}  // namespace detail

inline ValidationReport validate_action_db(const ActionDatabase& db) {
  ValidationReport report = validate_schema(db.schema());
  if (db.actions().empty()) report.add("actions", "database holds no actions");

  std::map<std::string, const Action*> by_id;
  for (const auto& a : db.actions()) {
    if (a.id.empty()) report.add("actions", "action with empty id");
    if (!by_id.emplace(a.id, &a).second) report.add(a.id, "duplicate action id");
  }
  for (const auto& a : db.actions()) {
    report.merge(validate_profile_values(db.schema(), a.profile, a.id));
    if (!(a.success_probability >= 0.0 && a.success_probability <= 1.0))
      report.add(a.id, "success_probability outside [0, 1]");
    for (const auto& [key, _] : a.target_criteria.requirements)
      if (key.empty()) report.add(a.id, "target criteria with empty attribute key");
    for (const auto& pre : a.prerequisites) {
      if (pre == a.id)
        report.add(a.id, "action lists itself as a prerequisite");
      else if (!by_id.contains(pre))
        report.add(a.id, "prerequisite " + pre + " does not exist");
    }
  }
  detail::find_prerequisite_cycles(db.actions(), by_id, report);
  return report;
}

// Database-wide values of one unbounded property, in action order.
inline std::vector<double> unbounded_population(const ActionDatabase& db,
                                                const std::string& property) {
  std::vector<double> out;
  for (const auto& a : db.actions())
    if (auto it = a.profile.find(property); it != a.profile.end())
      if (const auto* v = std::get_if<double>(&it->second)) out.push_back(*v);
  return out;
}

inline std::map<std::string, std::vector<double>> unbounded_populations(const ActionDatabase& db) {
  std::map<std::string, std::vector<double>> out;
  for (const auto& p : db.schema())
    if (p.kind == PropertyKind::unbounded_range) out[p.name] = unbounded_population(db, p.name);
  return out;
}

// Scaled profile of every action; unbounded properties are scaled against the
// database-wide population.
inline std::map<ActionId, ScaledProfile> scaled_action_profiles(const ActionDatabase& db) {
  const auto populations = unbounded_populations(db);
  std::map<ActionId, ScaledProfile> out;
  for (const auto& a : db.actions())
    out.emplace(a.id, scale_profile(db.schema(), a.profile, populations, "action " + a.id));
  return out;
}

// Scales an attacker profile against the database: each unbounded population
// is the database values plus the attacker's own value.
inline ScaledProfile scale_attacker(const ActionDatabase& db, const AttackerProfile& attacker) {
  auto populations = unbounded_populations(db);
  for (auto& [name, pop] : populations)
    if (auto it = attacker.values.find(name); it != attacker.values.end())
      if (const auto* v = std::get_if<double>(&it->second)) pop.push_back(*v);
  return scale_profile(db.schema(), attacker.values, populations, "profile " + attacker.name);
}

// ---------------------------------------------------------------------------
// JSON

inline Json to_json(const Action& a) {
  return {{"id", a.id},
          {"name", a.name},
          {"description", a.description},
          {"references", a.references},
          {"profile", to_json(a.profile)},
          {"target_criteria", a.target_criteria.requirements},
          {"channels", a.channels},
          {"prerequisites", a.prerequisites},
          {"success_probability", a.success_probability},
          {"effect", to_string(a.effect)}};
}

inline Json to_json(const ActionDatabase& db) {
  Json actions = Json::array();
  for (const auto& a : db.actions()) actions.push_back(to_json(a));
  return {{"schema", to_json(db.schema())}, {"actions", actions}};
}

inline Action parse_action(const Json& j, std::string subject, ValidationReport& report) {
  Action a;
  if (!j.is_object()) {
    report.add(subject, "not an object");
    return a;
  }
  if (detail::read_field(j, "id", a.id, subject, report)) subject = a.id;
  detail::check_keys(j,
                     {"id", "name", "description", "references", "profile", "target_criteria",
                      "channels", "prerequisites", "success_probability", "effect"},
                     subject, report);
  detail::read_field(j, "name", a.name, subject, report, false);
  detail::read_field(j, "description", a.description, subject, report, false);
  detail::read_field(j, "references", a.references, subject, report, false);
  if (auto it = j.find("profile"); it != j.end())
    a.profile = profile_values_from_json(*it, subject, report);
  else
    report.add(subject, "missing field \"profile\"");
  detail::read_field(j, "target_criteria", a.target_criteria.requirements, subject, report, false);
  detail::read_field(j, "channels", a.channels, subject, report, false);
  detail::read_field(j, "prerequisites", a.prerequisites, subject, report, false);
  detail::read_field(j, "success_probability", a.success_probability, subject, report, false);
  std::string effect;
  if (detail::read_field(j, "effect", effect, subject, report, false)) {
    if (auto e = effect_from_string(effect))
      a.effect = *e;
    else
      report.add(subject, "unknown effect \"" + effect + "\"");
  }
  return a;
}

inline ActionDatabase parse_action_db(const Json& doc, ValidationReport& report) {
  if (!doc.is_object()) {
    report.add("actions", "document is not a JSON object");
    return {};
  }
  detail::check_keys(doc, {"schema", "actions"}, "actions", report);
  Schema schema;
  if (auto it = doc.find("schema"); it != doc.end())
    schema = parse_schema(*it, report);
  else
    report.add("actions", "missing \"schema\"");
  std::vector<Action> actions;
  if (auto it = doc.find("actions"); it == doc.end() || !it->is_array()) {
    report.add("actions", "\"actions\" must be an array");
  } else {
    for (std::size_t i = 0; i < it->size(); ++i)
      actions.push_back(parse_action((*it)[i], "actions[" + std::to_string(i) + "]", report));
  }
  return ActionDatabase(std::move(schema), std::move(actions));
}

// Loads and fully validates an action database file. Throws IoError,
// ParseError, or ValidationError listing every failure.
inline ActionDatabase load_action_db(const std::filesystem::path& path) {
  ValidationReport report;
  auto db = parse_action_db(detail::read_json_file(path), report);
  if (report.ok()) report.merge(validate_action_db(db));
  report.throw_if_failed();
  return db;
}

}  // namespace cpsattack
