#pragma once

// Attacker and action profiles: property schemas, scaling of property values
// into [0,1], and the probabilistic attacker profile (a PMF over profiles).

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cpsattack/error.hpp"
#include "cpsattack/json_util.hpp"
#include "cpsattack/rng.hpp"

namespace cpsattack {

enum class PropertyKind { unordered_set, ordered_set, bounded_range, unbounded_range };

inline std::string_view to_string(PropertyKind k) {
  switch (k) {
    case PropertyKind::unordered_set: return "unordered-set";
    case PropertyKind::ordered_set: return "ordered-set";
    case PropertyKind::bounded_range: return "bounded-range";
    case PropertyKind::unbounded_range: return "unbounded-range";
  }
  return "?";
}

inline std::optional<PropertyKind> property_kind_from_string(std::string_view s) {
  if (s == "unordered-set") return PropertyKind::unordered_set;
  if (s == "ordered-set") return PropertyKind::ordered_set;
  if (s == "bounded-range") return PropertyKind::bounded_range;
  if (s == "unbounded-range") return PropertyKind::unbounded_range;
  return std::nullopt;
}

struct PropertySchema {
  std::string name;
  PropertyKind kind = PropertyKind::bounded_range;
  std::vector<std::string> allowed_values;  // set kinds, in order for ordered sets
  std::vector<double> membership;           // optional explicit ordered-set values
  double lower = 0.0;                       // bounded-range only
  double upper = 1.0;
  double criticality = 1.0;                 // beta, in (0, 1]

  bool is_set() const {
    return kind == PropertyKind::unordered_set || kind == PropertyKind::ordered_set;
  }
  bool operator==(const PropertySchema&) const = default;
};

using Schema = std::vector<PropertySchema>;

// Label for set properties, raw number for range properties.
using ProfileValue = std::variant<std::string, double>;
using ProfileValues = std::map<std::string, ProfileValue>;

struct AttackerProfile {
  std::string name;
  ProfileValues values;

  bool operator==(const AttackerProfile&) const = default;
};

struct PmfEntry {
  std::string profile;
  double likelihood = 0.0;

  bool operator==(const PmfEntry&) const = default;
};

// Likelihood-weighted attacker profiles. Entries name profiles of the
// enclosing ProfileSet.
struct ProfilePmf {
  std::vector<PmfEntry> entries;

  bool operator==(const ProfilePmf&) const = default;
};

// A scaled slot is a number in [0,1], or the raw label for unordered sets
// (compared pairwise at distance time).
using ScaledSlot = std::variant<double, std::string>;
using ScaledProfile = std::vector<ScaledSlot>;

namespace detail {
inline std::string named(std::string_view property) {
  return property.empty() ? std::string("value") : "property " + std::string(property);
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Scaling regimes

inline double scale_bounded(double value, double lower, double upper,
                            std::string_view property = {}) {
  if (!(lower < upper))
    throw DomainError(detail::named(property) + ": bounded range needs lower < upper");
  if (!(value >= lower && value <= upper))
    throw DomainError(detail::named(property) + ": " + std::to_string(value) +
                      " outside [" + std::to_string(lower) + ", " + std::to_string(upper) + "]");
  return (value - lower) / (upper - lower);
}

// Min/max scaling against a population (all database values of the
// property). A population without spread maps to 0.5.
inline double scale_unbounded(double value, std::span<const double> population,
                              std::string_view property = {}) {
  if (population.empty())
    throw DomainError(detail::named(property) + ": empty population for unbounded scaling");
  if (!std::isfinite(value)) throw DomainError(detail::named(property) + ": value is not finite");
  const auto [lo_it, hi_it] = std::minmax_element(population.begin(), population.end());
  const double lo = *lo_it, hi = *hi_it;
  if (hi == lo) return 0.5;
  return std::clamp((value - lo) / (hi - lo), 0.0, 1.0);
}

// Linear ordered-set membership: index/(k-1), or 0.5 for a single label.
// An explicit membership list, when given, overrides the linear map.
inline double scale_ordered_set(std::string_view label, std::span<const std::string> allowed,
                                std::span<const double> membership = {},
                                std::string_view property = {}) {
  auto it = std::find(allowed.begin(), allowed.end(), label);
  if (it == allowed.end())
    throw DomainError(detail::named(property) + ": unknown label \"" + std::string(label) + "\"");
  const auto index = static_cast<std::size_t>(it - allowed.begin());
  if (!membership.empty()) {
    if (membership.size() != allowed.size())
      throw DomainError(detail::named(property) + ": membership list length mismatch");
    return membership[index];
  }
  if (allowed.size() == 1) return 0.5;
  return static_cast<double>(index) / static_cast<double>(allowed.size() - 1);
}

// 1 when the labels match, 0 otherwise.
inline double match_unordered(std::string_view a, std::string_view b,
                              std::span<const std::string> allowed,
                              std::string_view property = {}) {
  for (auto label : {a, b})
    if (std::find(allowed.begin(), allowed.end(), label) == allowed.end())
      throw DomainError(detail::named(property) + ": unknown label \"" + std::string(label) + "\"");
  return a == b ? 1.0 : 0.0;
}

// ---------------------------------------------------------------------------
// Schema and profile validation

inline ValidationReport validate_schema(const Schema& schema) {
  ValidationReport report;
  std::set<std::string> names;
  for (const auto& p : schema) {
    const std::string subject = p.name.empty() ? std::string("schema") : p.name;
    if (p.name.empty()) report.add(subject, "property with empty name");
    if (!names.insert(p.name).second) report.add(subject, "duplicate property");
    if (!(p.criticality > 0.0 && p.criticality <= 1.0))
      report.add(subject, "criticality must lie in (0, 1]");
    if (p.is_set()) {
      if (p.allowed_values.empty()) report.add(subject, "set property without allowed values");
      std::set<std::string> uniq(p.allowed_values.begin(), p.allowed_values.end());
      if (uniq.size() != p.allowed_values.size()) report.add(subject, "duplicate allowed value");
      if (!p.membership.empty()) {
        if (p.kind != PropertyKind::ordered_set)
          report.add(subject, "membership values apply to ordered sets only");
        if (p.membership.size() != p.allowed_values.size())
          report.add(subject, "membership list length differs from allowed values");
        for (double m : p.membership)
          if (!(m >= 0.0 && m <= 1.0)) report.add(subject, "membership value outside [0, 1]");
      }
    } else if (p.kind == PropertyKind::bounded_range && !(p.lower < p.upper)) {
      report.add(subject, "bounded range needs lower < upper");
    }
  }
  return report;
}

// Values must cover the schema exactly and lie in each property's domain.
inline ValidationReport validate_profile_values(const Schema& schema, const ProfileValues& values,
                                                const std::string& subject) {
  ValidationReport report;
  for (const auto& p : schema) {
    auto it = values.find(p.name);
    if (it == values.end()) {
      report.add(subject, "missing property " + p.name);
      continue;
    }
    if (p.is_set()) {
      const auto* label = std::get_if<std::string>(&it->second);
      if (!label)
        report.add(subject, "property " + p.name + " expects a label");
      else if (std::find(p.allowed_values.begin(), p.allowed_values.end(), *label) ==
               p.allowed_values.end())
        report.add(subject, "property " + p.name + ": unknown label \"" + *label + "\"");
    } else {
      const auto* num = std::get_if<double>(&it->second);
      if (!num) {
        report.add(subject, "property " + p.name + " expects a number");
      } else if (!std::isfinite(*num)) {
        report.add(subject, "property " + p.name + " is not finite");
      } else if (p.kind == PropertyKind::bounded_range && !(*num >= p.lower && *num <= p.upper)) {
        report.add(subject, "property " + p.name + ": " + std::to_string(*num) + " outside [" +
                                std::to_string(p.lower) + ", " + std::to_string(p.upper) + "]");
      }
    }
  }
  for (const auto& [name, _] : values) {
    bool in_schema = std::any_of(schema.begin(), schema.end(),
                                 [&](const PropertySchema& p) { return p.name == name; });
    if (!in_schema) report.add(subject, "property " + name + " is not in the schema");
  }
  return report;
}

// Scales one profile in schema order. `populations` holds, per unbounded
// property, the values it is scaled against.
inline ScaledProfile scale_profile(const Schema& schema, const ProfileValues& values,
                                   const std::map<std::string, std::vector<double>>& populations,
                                   const std::string& subject) {
  ScaledProfile out;
  out.reserve(schema.size());
  for (const auto& p : schema) {
    auto it = values.find(p.name);
    if (it == values.end()) throw DomainError(subject + ": missing property " + p.name);
    try {
      switch (p.kind) {
        case PropertyKind::unordered_set:
          out.emplace_back(std::get<std::string>(it->second));
          break;
        case PropertyKind::ordered_set:
          out.emplace_back(scale_ordered_set(std::get<std::string>(it->second), p.allowed_values,
                                             p.membership, p.name));
          break;
        case PropertyKind::bounded_range:
          out.emplace_back(scale_bounded(std::get<double>(it->second), p.lower, p.upper, p.name));
          break;
        case PropertyKind::unbounded_range: {
          auto pop = populations.find(p.name);
          std::span<const double> population;
          if (pop != populations.end()) population = pop->second;
          out.emplace_back(scale_unbounded(std::get<double>(it->second), population, p.name));
          break;
        }
      }
    } catch (const std::bad_variant_access&) {
      throw DomainError(subject + ": property " + p.name + " has the wrong value type");
    } catch (const DomainError& e) {
      throw DomainError(subject + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Probabilistic attacker profile

inline std::vector<double> pmf_probabilities(std::span<const double> likelihoods) {
  double total = 0.0;
  for (double l : likelihoods) {
    if (!(l >= 0.0 && l <= 1.0)) throw DomainError("likelihood outside [0, 1]");
    total += l;
  }
  if (!(total > 0.0)) throw DomainError("profile PMF has no positive likelihood");
  std::vector<double> out;
  out.reserve(likelihoods.size());
  for (double l : likelihoods) out.push_back(l / total);
  return out;
}

inline std::vector<double> pmf_probabilities(const ProfilePmf& pmf) {
  std::vector<double> l;
  for (const auto& e : pmf.entries) l.push_back(e.likelihood);
  return pmf_probabilities(l);
}

// Draws one profile name from the PMF.
inline const std::string& sample_profile(const ProfilePmf& pmf, Rng& rng) {
  const auto probs = pmf_probabilities(pmf);
  return pmf.entries[weighted_index(probs, rng)].profile;
}

// Attacker profiles plus an optional PMF over them.
struct ProfileSet {
  std::vector<AttackerProfile> profiles;
  std::optional<ProfilePmf> pmf;

  const AttackerProfile* find(std::string_view name) const {
    for (const auto& p : profiles)
      if (p.name == name) return &p;
    return nullptr;
  }
  bool operator==(const ProfileSet&) const = default;
};

inline ValidationReport validate_profile_set(const ProfileSet& set, const Schema& schema) {
  ValidationReport report;
  std::set<std::string> names;
  if (set.profiles.empty()) report.add("profiles", "no attacker profiles");
  for (const auto& p : set.profiles) {
    if (p.name.empty()) report.add("profiles", "profile with empty name");
    if (!names.insert(p.name).second) report.add(p.name, "duplicate profile name");
    report.merge(validate_profile_values(schema, p.values, p.name));
  }
  if (set.pmf) {
    bool positive = false;
    std::set<std::string> listed;
    for (const auto& e : set.pmf->entries) {
      if (!names.contains(e.profile)) report.add(e.profile, "PMF names an unknown profile");
      if (!listed.insert(e.profile).second) report.add(e.profile, "profile listed twice in PMF");
      if (!(e.likelihood >= 0.0 && e.likelihood <= 1.0))
        report.add(e.profile, "likelihood outside [0, 1]");
      positive = positive || e.likelihood > 0.0;
    }
    if (!positive) report.add("pmf", "no positive likelihood");
  }
  return report;
}

// ---------------------------------------------------------------------------
// JSON

inline Json to_json(const ProfileValue& v) {
  return std::visit([](const auto& x) { return Json(x); }, v);
}

inline std::optional<ProfileValue> profile_value_from_json(const Json& j) {
  if (j.is_string()) return ProfileValue(j.get<std::string>());
  if (j.is_number()) return ProfileValue(j.get<double>());
  return std::nullopt;
}

inline Json to_json(const ProfileValues& values) {
  Json j = Json::object();
  for (const auto& [k, v] : values) j[k] = to_json(v);
  return j;
}

inline ProfileValues profile_values_from_json(const Json& j, const std::string& subject,
                                              ValidationReport& report) {
  ProfileValues out;
  if (!j.is_object()) {
    report.add(subject, "profile must be an object");
    return out;
  }
  for (const auto& [k, v] : j.items()) {
    if (auto pv = profile_value_from_json(v))
      out.emplace(k, *pv);
    else
      report.add(subject, "property " + k + " must be a label or a number");
  }
  return out;
}

inline Json to_json(const PropertySchema& p) {
  Json j = {{"name", p.name}, {"kind", to_string(p.kind)}, {"criticality", p.criticality}};
  if (p.is_set()) j["values"] = p.allowed_values;
  if (!p.membership.empty()) j["membership"] = p.membership;
  if (p.kind == PropertyKind::bounded_range) {
    j["lower"] = p.lower;
    j["upper"] = p.upper;
  }
  return j;
}

inline Json to_json(const Schema& schema) {
  Json j = Json::array();
  for (const auto& p : schema) j.push_back(to_json(p));
  return j;
}

inline Schema parse_schema(const Json& j, ValidationReport& report) {
  Schema schema;
  if (!j.is_array()) {
    report.add("schema", "must be an array of properties");
    return schema;
  }
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Json& e = j[i];
    std::string subject = "schema[" + std::to_string(i) + "]";
    if (!e.is_object()) {
      report.add(subject, "not an object");
      continue;
    }
    PropertySchema p;
    if (detail::read_field(e, "name", p.name, subject, report)) subject = p.name;
    detail::check_keys(e, {"name", "kind", "values", "membership", "lower", "upper", "criticality"},
                       subject, report);
    std::string kind;
    if (detail::read_field(e, "kind", kind, subject, report)) {
      if (auto k = property_kind_from_string(kind))
        p.kind = *k;
      else
        report.add(subject, "unknown property kind \"" + kind + "\"");
    }
    detail::read_field(e, "values", p.allowed_values, subject, report, false);
    detail::read_field(e, "membership", p.membership, subject, report, false);
    bool bounded = p.kind == PropertyKind::bounded_range;
    detail::read_field(e, "lower", p.lower, subject, report, bounded);
    detail::read_field(e, "upper", p.upper, subject, report, bounded);
    detail::read_field(e, "criticality", p.criticality, subject, report, false);
    schema.push_back(std::move(p));
  }
  return schema;
}

inline Json to_json(const ProfileSet& set) {
  Json profiles = Json::array();
  for (const auto& p : set.profiles)
    profiles.push_back({{"name", p.name}, {"values", to_json(p.values)}});
  Json j = {{"profiles", profiles}};
  if (set.pmf) {
    Json pmf = Json::array();
    for (const auto& e : set.pmf->entries)
      pmf.push_back({{"profile", e.profile}, {"likelihood", e.likelihood}});
    j["pmf"] = pmf;
  }
  return j;
}

inline ProfileSet parse_profile_set(const Json& doc, ValidationReport& report) {
  ProfileSet set;
  if (!doc.is_object()) {
    report.add("profiles", "document is not a JSON object");
    return set;
  }
  detail::check_keys(doc, {"profiles", "pmf"}, "profiles", report);
  if (auto it = doc.find("profiles"); it == doc.end() || !it->is_array()) {
    report.add("profiles", "\"profiles\" must be an array");
  } else {
    for (std::size_t i = 0; i < it->size(); ++i) {
      const Json& e = (*it)[i];
      std::string subject = "profiles[" + std::to_string(i) + "]";
      if (!e.is_object()) {
        report.add(subject, "not an object");
        continue;
      }
      AttackerProfile p;
      if (detail::read_field(e, "name", p.name, subject, report)) subject = p.name;
      detail::check_keys(e, {"name", "values"}, subject, report);
      if (auto v = e.find("values"); v != e.end())
        p.values = profile_values_from_json(*v, subject, report);
      else
        report.add(subject, "missing field \"values\"");
      set.profiles.push_back(std::move(p));
    }
  }
  if (auto it = doc.find("pmf"); it != doc.end()) {
    ProfilePmf pmf;
    if (!it->is_array()) {
      report.add("pmf", "must be an array");
    } else {
      for (std::size_t i = 0; i < it->size(); ++i) {
        const Json& e = (*it)[i];
        std::string subject = "pmf[" + std::to_string(i) + "]";
        PmfEntry entry;
        if (!e.is_object()) {
          report.add(subject, "not an object");
          continue;
        }
        detail::check_keys(e, {"profile", "likelihood"}, subject, report);
        detail::read_field(e, "profile", entry.profile, subject, report);
        detail::read_field(e, "likelihood", entry.likelihood, subject, report);
        pmf.entries.push_back(std::move(entry));
      }
    }
    set.pmf = std::move(pmf);
  }
  return set;
}

// Loads a profiles file. Format problems throw ValidationError; schema
// coverage is checked by validate_profile_set.
inline ProfileSet load_profile_set(const std::filesystem::path& path) {
  ValidationReport report;
  auto set = parse_profile_set(detail::read_json_file(path), report);
  report.throw_if_failed();
  return set;
}

}  // namespace cpsattack
