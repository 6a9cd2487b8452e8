#pragma once

// One attacker decision step: target selection, one-step look-ahead filtering,
// profile-distance scoring and weighted action sampling.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cpsattack/action_db.hpp"
#include "cpsattack/cps_model.hpp"
#include "cpsattack/error.hpp"
#include "cpsattack/profile.hpp"
#include "cpsattack/rng.hpp"

namespace cpsattack {

// Where prerequisite checks live. Both give the same valid set; the separate
// reading keeps the criteria-only target filter visible in FilterSets.
enum class PrerequisiteMode { target_filter, separate_filter };

struct EngineOptions {
  PrerequisiteMode prerequisites = PrerequisiteMode::target_filter;
};

enum class Outcome { success, failure };

inline std::string_view to_string(Outcome o) { return o == Outcome::success ? "success" : "failure"; }

// Scaled attacker profile, fixed for an episode.
struct Attacker {
  std::string name;
  ScaledProfile theta;

  bool operator==(const Attacker&) const = default;
};

// Immutable inputs shared by every episode. Holds references: the system and
// database must outlive the model.
class AttackModel {
 public:
  AttackModel(const CpsSystem& system, const ActionDatabase& db, EngineOptions options = {})
      : system_(&system), db_(&db), options_(options) {
    ValidationReport report = validate_system(system);
    report.merge(validate_action_db(db));
    report.throw_if_failed();
    initial_ = initial_knowledge(system);
    action_profiles_ = scaled_action_profiles(db);
    for (const auto& p : db.schema()) criticality_.push_back(p.criticality);
    for (const auto& a : db.actions()) actions_.push_back(&a);
    std::sort(actions_.begin(), actions_.end(),
              [](const Action* a, const Action* b) { return a->id < b->id; });
  }

  const CpsSystem& system() const noexcept { return *system_; }
  const ActionDatabase& database() const noexcept { return *db_; }
  const EngineOptions& options() const noexcept { return options_; }
  const CpsKnowledge& initial() const noexcept { return initial_; }
  const std::vector<double>& criticality() const noexcept { return criticality_; }

  // Actions sorted by id; the canonical candidate order.
  const std::vector<const Action*>& actions() const noexcept { return actions_; }

  const ScaledProfile& action_profile(const ActionId& id) const { return action_profiles_.at(id); }

  Attacker make_attacker(const AttackerProfile& profile) const {
    validate_profile_values(db_->schema(), profile.values, profile.name).throw_if_failed();
    return {profile.name, scale_attacker(*db_, profile)};
  }

 private:
  const CpsSystem* system_;
  const ActionDatabase* db_;
  EngineOptions options_;
  CpsKnowledge initial_;
  std::map<ActionId, ScaledProfile> action_profiles_;
  std::vector<double> criticality_;
  std::vector<const Action*> actions_;
};

// node -> (action -> outcome) for every attempt in the episode.
using History = std::map<NodeId, std::map<ActionId, Outcome>>;

struct AttackState {
  const AttackModel* model = nullptr;
  Attacker attacker;
  CpsKnowledge knowledge;
  History history;
  std::optional<NodeId> current_target;

  static AttackState initial(const AttackModel& model, Attacker attacker) {
    return {&model, std::move(attacker), model.initial(), {}, std::nullopt};
  }

  bool attempted(const NodeId& node, const ActionId& action) const {
    auto it = history.find(node);
    return it != history.end() && it->second.contains(action);
  }

  // Prerequisites are satisfied by a success anywhere earlier in the episode.
  bool succeeded(const ActionId& action) const {
    for (const auto& [_, attempts] : history)
      if (auto it = attempts.find(action); it != attempts.end() && it->second == Outcome::success)
        return true;
    return false;
  }
};

struct Candidate {
  ActionId action;
  double distance = 0.0;
  double score = 0.0;
  double probability = 0.0;

  bool operator==(const Candidate&) const = default;
};

struct DecisionRecord {
  NodeId target;
  std::optional<EdgeId> via_edge;  // propagation path the chosen action used
  NodeId source;                   // tail of via_edge (owned node or the external origin)
  std::vector<Candidate> candidates;
  ActionId chosen;
  double chosen_probability = 0.0;
  Outcome outcome = Outcome::failure;
  Effect effect = Effect::compromise;

  bool operator==(const DecisionRecord&) const = default;
};

// ---------------------------------------------------------------------------
// Action assessment

// Weighted profile distance. Unordered-set slots contribute (1 - match).
inline double distance(const ScaledProfile& attacker, const ScaledProfile& action,
                       std::span<const double> criticality) {
  if (attacker.size() != action.size() || attacker.size() != criticality.size())
    throw DomainError("distance: dimension mismatch (" + std::to_string(attacker.size()) + ", " +
                      std::to_string(action.size()) + ", " + std::to_string(criticality.size()) +
                      ")");
  double sum = 0.0;
  for (std::size_t j = 0; j < attacker.size(); ++j) {
    const double beta = criticality[j];
    if (!(beta > 0.0 && beta <= 1.0)) throw DomainError("distance: criticality outside (0, 1]");
    double diff = 0.0;
    if (attacker[j].index() != action[j].index())
      throw DomainError("distance: slot " + std::to_string(j) + " mixes a label and a number");
    if (const auto* label = std::get_if<std::string>(&attacker[j]))
      diff = *label == std::get<std::string>(action[j]) ? 0.0 : 1.0;
    else
      diff = std::get<double>(attacker[j]) - std::get<double>(action[j]);
    sum += diff * diff / (beta * beta);
  }
  return std::sqrt(sum);
}

// s_i = 1 - d_i / sum(d). A lone candidate scores 1; all-zero distances score
// uniformly.
inline std::vector<double> scores(std::span<const double> distances) {
  if (distances.empty()) throw DomainError("scores: no candidates");
  double total = 0.0;
  for (double d : distances) {
    if (!(d >= 0.0)) throw DomainError("scores: negative distance");
    total += d;
  }
  std::vector<double> out(distances.size(), 1.0);
  if (distances.size() == 1 || total == 0.0) return out;
  for (std::size_t i = 0; i < distances.size(); ++i) out[i] = 1.0 - distances[i] / total;
  return out;
}

// P_i = s_i / sum(s).
inline std::vector<double> probabilities(std::span<const double> score_values) {
  double total = 0.0;
  for (double s : score_values) {
    if (!(s >= 0.0)) throw DomainError("probabilities: negative score");
    total += s;
  }
  if (!(total > 0.0)) throw DomainError("probabilities: scores sum to zero");
  std::vector<double> out;
  out.reserve(score_values.size());
  for (double s : score_values) out.push_back(s / total);
  return out;
}

inline ActionId sample_action(const std::vector<Candidate>& candidates, Rng& rng) {
  if (candidates.empty()) throw DomainError("sample_action: empty candidate set");
  std::vector<double> p;
  p.reserve(candidates.size());
  for (const auto& c : candidates) p.push_back(c.probability);
  return candidates[weighted_index(p, rng)].action;
}

// ---------------------------------------------------------------------------
// Filters

struct FilterSets {
  std::vector<ActionId> target;         // criteria (and prerequisites in target_filter mode)
  std::vector<ActionId> not_executed;   // never attempted on the target
  std::vector<ActionId> vector;         // has a viable propagation path
  std::vector<ActionId> prerequisites;  // separate_filter mode only
  std::vector<ActionId> valid;          // intersection, sorted by id
};

// Known attack-vector edges into `target` whose source is owned or external.
inline std::vector<const Edge*> viable_edges(const AttackState& state, const NodeId& target) {
  std::vector<const Edge*> out;
  for (const auto* e : state.model->system().incident_edges(target)) {
    if (e->to != target || !e->is_attack_vector) continue;
    if (!state.knowledge.known_edges.contains(e->id)) continue;
    if (e->from != kExternalOrigin && !state.knowledge.is_compromised(e->from)) continue;
    out.push_back(e);
  }
  std::sort(out.begin(), out.end(), [](const Edge* a, const Edge* b) { return a->id < b->id; });
  return out;
}

namespace detail {
inline bool shares_channel(const std::set<std::string>& a, const std::set<std::string>& b) {
  return std::any_of(a.begin(), a.end(), [&](const std::string& c) { return b.contains(c); });
}
}  // namespace detail

inline FilterSets compute_filters(const AttackState& state, const NodeId& target) {
  const Node* node = state.model->system().find_node(target);
  if (!node) throw PreconditionError("filter: unknown node " + target);
  const auto edges = viable_edges(state, target);
  const bool separate = state.model->options().prerequisites == PrerequisiteMode::separate_filter;

  FilterSets f;
  for (const Action* a : state.model->actions()) {
    const bool prereqs_met = std::all_of(a->prerequisites.begin(), a->prerequisites.end(),
                                         [&](const ActionId& p) { return state.succeeded(p); });
    const bool in_target = criteria_match(a->target_criteria, *node) && (separate || prereqs_met);
    const bool in_ex = !state.attempted(target, a->id);
    const bool in_vect = std::any_of(edges.begin(), edges.end(), [&](const Edge* e) {
      return detail::shares_channel(e->channels, a->channels);
    });
    if (in_target) f.target.push_back(a->id);
    if (in_ex) f.not_executed.push_back(a->id);
    if (in_vect) f.vector.push_back(a->id);
    if (separate && prereqs_met) f.prerequisites.push_back(a->id);
    if (in_target && in_ex && in_vect && (!separate || prereqs_met)) f.valid.push_back(a->id);
  }
  return f;
}

// Actions the attacker may perform against `target` right now.
inline std::vector<ActionId> filter_valid(const AttackState& state, const NodeId& target) {
  return compute_filters(state, target).valid;
}

// Distance, score and probability of every valid action against `target`.
inline std::vector<Candidate> evaluate_candidates(const AttackState& state, const NodeId& target) {
  const auto valid = filter_valid(state, target);
  if (valid.empty()) return {};
  std::vector<double> d;
  d.reserve(valid.size());
  for (const auto& id : valid)
    d.push_back(distance(state.attacker.theta, state.model->action_profile(id),
                         state.model->criticality()));
  const auto s = scores(d);
  const auto p = probabilities(s);
  std::vector<Candidate> out;
  out.reserve(valid.size());
  for (std::size_t i = 0; i < valid.size(); ++i) out.push_back({valid[i], d[i], s[i], p[i]});
  return out;
}

// ---------------------------------------------------------------------------
// Target selection and stepping

inline bool is_valid_target(const AttackState& state, const NodeId& node) {
  return state.knowledge.knows_node(node) && !state.knowledge.is_compromised(node) &&
         !filter_valid(state, node).empty();
}

// Keeps the current target while it has qualified actions left; otherwise
// picks uniformly among valid known nodes (sorted by id). nullopt when none.
inline std::optional<NodeId> select_target(const AttackState& state, Rng& rng) {
  if (state.current_target && is_valid_target(state, *state.current_target))
    return state.current_target;
  std::vector<NodeId> valid;
  for (const auto& n : state.knowledge.known_nodes)
    if (is_valid_target(state, n)) valid.push_back(n);
  if (valid.empty()) return std::nullopt;
  return valid[rng.below(valid.size())];
}

// Records an attempt and, on success, takes ownership of the node.
inline AttackState apply_decision(const AttackState& state, const NodeId& target,
                                  const ActionId& action, Outcome outcome) {
  if (!state.knowledge.knows_node(target))
    throw PreconditionError("apply_decision: target " + target + " is not known");
  if (state.attempted(target, action))
    throw PreconditionError("apply_decision: " + action + " already attempted on " + target);
  AttackState next = state;
  next.history[target][action] = outcome;
  if (outcome == Outcome::success) {
    next.knowledge = reveal_on_compromise(state.knowledge, state.model->system(), target);
    next.current_target.reset();
  } else {
    next.current_target = target;
  }
  return next;
}

struct StepResult {
  AttackState state;
  DecisionRecord record;
};

// One full decision cycle. nullopt signals that no valid target remains.
inline std::optional<StepResult> step(const AttackState& state, Rng& rng) {
  const auto target = select_target(state, rng);
  if (!target) return std::nullopt;

  DecisionRecord record;
  record.target = *target;
  record.candidates = evaluate_candidates(state, *target);
  record.chosen = sample_action(record.candidates, rng);
  for (const auto& c : record.candidates)
    if (c.action == record.chosen) record.chosen_probability = c.probability;

  const Action& action = *state.model->database().find(record.chosen);
  record.effect = action.effect;
  for (const auto* e : viable_edges(state, *target)) {
    if (detail::shares_channel(e->channels, action.channels)) {
      record.via_edge = e->id;
      record.source = e->from;
      break;
    }
  }
  record.outcome = rng.bernoulli(action.success_probability) ? Outcome::success : Outcome::failure;
  return StepResult{apply_decision(state, *target, record.chosen, record.outcome),
                    std::move(record)};
}

}  // namespace cpsattack
