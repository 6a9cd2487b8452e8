#pragma once

// Compiles vulnerability-catalog exports (CAPEC XML, NVD CVE JSON) into
// action skeletons, and merges analyst annotations into action databases.

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "cpsattack/action_db.hpp"
#include "cpsattack/error.hpp"
#include "cpsattack/json_util.hpp"
#include "cpsattack/profile.hpp"

namespace cpsattack {

// An action awaiting profile annotation.
struct ActionSkeleton {
  std::string id;  // provisional: CAPEC-<n> or the CVE id
  std::string name;
  std::string description;
  std::vector<std::string> references;
  TargetCriteria suggested_criteria;              // vendor/product from CPE data
  std::vector<std::string> version_constraints;   // opaque CPE version ranges
  std::vector<std::string> provenance;            // "<file>#<record>"

  bool operator==(const ActionSkeleton&) const = default;
};

struct ImportResult {
  std::vector<ActionSkeleton> skeletons;
  std::vector<std::string> warnings;
};

namespace detail {

inline void add_unique(std::vector<std::string>& v, const std::string& s) {
  if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
}

inline std::string local_name(const std::string& tag) {
  auto colon = tag.rfind(':');
  return colon == std::string::npos ? tag : tag.substr(colon + 1);
}

// Child elements whose local name (namespace prefix stripped) is `name`.
inline std::vector<const boost::property_tree::ptree*> children(
    const boost::property_tree::ptree& node, std::string_view name) {
  std::vector<const boost::property_tree::ptree*> out;
  for (const auto& [tag, child] : node)
    if (local_name(tag) == name) out.push_back(&child);
  return out;
}

inline std::string attribute(const boost::property_tree::ptree& node, const std::string& name) {
  return node.get<std::string>("<xmlattr>." + name, "");
}

// Concatenated text content, nested markup flattened.
inline std::string text_content(const boost::property_tree::ptree& node) {
  std::string out = node.data();
  for (const auto& [tag, child] : node) {
    if (tag == "<xmlattr>" || tag == "<xmlcomment>") continue;
    std::string inner = text_content(child);
    if (!inner.empty()) {
      if (!out.empty()) out += ' ';
      out += inner;
    }
  }
  std::string squashed;
  bool space = false;
  for (char c : out) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = !squashed.empty();
      continue;
    }
    if (space) squashed += ' ';
    space = false;
    squashed += c;
  }
  return squashed;
}

}  // namespace detail

// One skeleton per Attack_Pattern; related CWE ids go into references.
inline ImportResult import_capec_text(const std::string& xml, const std::string& source) {
  namespace pt = boost::property_tree;
  pt::ptree doc;
  std::istringstream in(xml);
  try {
    pt::read_xml(in, doc);
  } catch (const pt::xml_parser_error& e) {
    throw ParseError(source + ":" + std::to_string(e.line()) + ": " + e.message());
  }

  ImportResult result;
  const auto roots = detail::children(doc, "Attack_Pattern_Catalog");
  if (roots.empty()) {
    if (doc.empty()) return result;
    throw ParseError(source + ": no Attack_Pattern_Catalog element");
  }
  const auto& root = *roots.front();
  const std::string version = detail::attribute(root, "Version");
  if (version.rfind("3.", 0) != 0)
    result.warnings.push_back(source + ": unrecognized CAPEC catalog version \"" + version +
                              "\", extracting best-effort");

  for (const auto* list : detail::children(root, "Attack_Patterns")) {
    for (const auto* ap : detail::children(*list, "Attack_Pattern")) {
      const std::string num = detail::attribute(*ap, "ID");
      if (num.empty()) {
        result.warnings.push_back(source + ": Attack_Pattern without ID skipped");
        continue;
      }
      ActionSkeleton s;
      s.id = "CAPEC-" + num;
      s.name = detail::attribute(*ap, "Name");
      if (auto d = detail::children(*ap, "Description"); !d.empty())
        s.description = detail::text_content(*d.front());
      s.references.push_back(s.id);
      for (const auto* rw : detail::children(*ap, "Related_Weaknesses"))
        for (const auto* w : detail::children(*rw, "Related_Weakness"))
          if (auto cwe = detail::attribute(*w, "CWE_ID"); !cwe.empty())
            detail::add_unique(s.references, "CWE-" + cwe);
      s.provenance.push_back(source + "#Attack_Pattern[@ID=" + num + "]");
      result.skeletons.push_back(std::move(s));
    }
  }
  return result;
}

inline ImportResult import_capec(const std::filesystem::path& file) {
  return import_capec_text(detail::read_text_file(file), file.string());
}

// ---------------------------------------------------------------------------
// CPE

struct CpeName {
  std::string part, vendor, product, version;
};

// Splits a CPE 2.3 formatted string or a CPE 2.2 URI; backslash escapes are
// honoured and removed.
inline std::optional<CpeName> parse_cpe(std::string_view cpe) {
  std::vector<std::string> fields;
  std::string cur;
  for (std::size_t i = 0; i < cpe.size(); ++i) {
    if (cpe[i] == '\\' && i + 1 < cpe.size()) {
      cur += cpe[++i];
    } else if (cpe[i] == ':') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += cpe[i];
    }
  }
  fields.push_back(std::move(cur));
  if (fields.size() < 2 || fields[0] != "cpe") return std::nullopt;

  std::size_t first = 0;
  if (fields[1] == "2.3") {
    first = 2;
  } else if (fields[1].size() == 2 && fields[1][0] == '/') {
    fields[1] = fields[1].substr(1);  // 2.2 URI: cpe:/a:vendor:product:version
    first = 1;
  } else {
    return std::nullopt;
  }
  auto at = [&](std::size_t i) { return first + i < fields.size() ? fields[first + i] : ""; };
  CpeName name{at(0), at(1), at(2), at(3)};
  if (name.part.empty()) return std::nullopt;
  return name;
}

namespace detail {

inline bool cpe_value_present(const std::string& v) { return !v.empty() && v != "*" && v != "-"; }

// Adds one CPE applicability entry (legacy or 2.0 field names) to `s`.
inline void apply_cpe_match(const Json& m, ActionSkeleton& s) {
  if (m.contains("vulnerable") && m["vulnerable"].is_boolean() && !m["vulnerable"].get<bool>())
    return;
  std::string uri;
  for (const char* key : {"cpe23Uri", "criteria", "cpe22Uri"})
    if (m.contains(key) && m[key].is_string()) {
      uri = m[key].get<std::string>();
      break;
    }
  if (uri.empty()) return;
  add_unique(s.references, uri);
  if (auto cpe = parse_cpe(uri)) {
    if (cpe_value_present(cpe->vendor)) s.suggested_criteria.requirements["vendor"].insert(cpe->vendor);
    if (cpe_value_present(cpe->product))
      s.suggested_criteria.requirements["product"].insert(cpe->product);
  }
  std::string range;
  for (const auto& [key, op] : {std::pair{"versionStartIncluding", ">="},
                                {"versionStartExcluding", ">"},
                                {"versionEndIncluding", "<="},
                                {"versionEndExcluding", "<"}}) {
    if (m.contains(key) && m[key].is_string()) {
      if (!range.empty()) range += ", ";
      range += std::string(op) + m[key].get<std::string>();
    }
  }
  if (!range.empty()) add_unique(s.version_constraints, uri + " [" + range + "]");
}

inline void walk_configuration_nodes(const Json& nodes, ActionSkeleton& s) {
  if (!nodes.is_array()) return;
  for (const auto& n : nodes) {
    for (const char* key : {"cpe_match", "cpeMatch"})
      if (n.contains(key) && n[key].is_array())
        for (const auto& m : n[key]) apply_cpe_match(m, s);
    if (n.contains("children")) walk_configuration_nodes(n["children"], s);
  }
}

inline std::string english_description(const Json& list) {
  if (!list.is_array()) return {};
  for (const auto& d : list)
    if (d.value("lang", "en") == "en" && d.contains("value") && d["value"].is_string())
      return d["value"].get<std::string>();
  return {};
}

inline void add_cwes(const Json& problem_descriptions, ActionSkeleton& s) {
  if (!problem_descriptions.is_array()) return;
  for (const auto& d : problem_descriptions)
    if (d.contains("value") && d["value"].is_string()) {
      const auto v = d["value"].get<std::string>();
      if (v.rfind("CWE-", 0) == 0) add_unique(s.references, v);
    }
}

}  // namespace detail

// One skeleton per CVE. Accepts the legacy 1.1 data feed ("CVE_Items") and
// the 2.0 API layout ("vulnerabilities").
inline ImportResult import_cve_feed_text(const std::string& text, const std::string& source) {
  const Json doc = detail::parse_json_text(text, source);
  ImportResult result;
  if (!doc.is_object()) throw ParseError(source + ": CVE feed is not a JSON object");

  try {
    if (doc.contains("CVE_Items")) {
      if (auto v = doc.value("CVE_data_version", std::string()); v != "4.0")
        result.warnings.push_back(source + ": unrecognized CVE_data_version \"" + v +
                                  "\", extracting best-effort");
      const auto& items = doc.at("CVE_Items");
      for (std::size_t i = 0; i < items.size(); ++i) {
        const Json& item = items[i];
        const Json& cve = item.at("cve");
        ActionSkeleton s;
        s.id = cve.at("CVE_data_meta").at("ID").get<std::string>();
        s.name = s.id;
        if (cve.contains("description"))
          s.description = detail::english_description(cve["description"].value("description_data", Json()));
        s.references.push_back(s.id);
        if (cve.contains("problemtype"))
          for (const auto& pt : cve["problemtype"].value("problemtype_data", Json::array()))
            detail::add_cwes(pt.value("description", Json()), s);
        if (item.contains("configurations"))
          detail::walk_configuration_nodes(item["configurations"].value("nodes", Json()), s);
        s.provenance.push_back(source + "#CVE_Items[" + std::to_string(i) + "]");
        result.skeletons.push_back(std::move(s));
      }
    } else if (doc.contains("vulnerabilities")) {
      if (auto v = doc.value("version", std::string()); v.rfind("2.", 0) != 0)
        result.warnings.push_back(source + ": unrecognized feed version \"" + v +
                                  "\", extracting best-effort");
      const auto& items = doc.at("vulnerabilities");
      for (std::size_t i = 0; i < items.size(); ++i) {
        const Json& cve = items[i].at("cve");
        ActionSkeleton s;
        s.id = cve.at("id").get<std::string>();
        s.name = s.id;
        s.description = detail::english_description(cve.value("descriptions", Json()));
        s.references.push_back(s.id);
        for (const auto& w : cve.value("weaknesses", Json::array()))
          detail::add_cwes(w.value("description", Json()), s);
        for (const auto& c : cve.value("configurations", Json::array()))
          detail::walk_configuration_nodes(c.value("nodes", Json()), s);
        s.provenance.push_back(source + "#vulnerabilities[" + std::to_string(i) + "]");
        result.skeletons.push_back(std::move(s));
      }
    } else {
      result.warnings.push_back(source + ": no CVE_Items or vulnerabilities array found");
    }
  } catch (const Json::exception& e) {
    throw ParseError(source + ": " + e.what());
  }
  return result;
}

inline ImportResult import_cve_feed(const std::filesystem::path& file) {
  return import_cve_feed_text(detail::read_text_file(file), file.string());
}

// Deduplicates skeletons by id, keeping first-seen order. Duplicates pool
// their references, criteria and provenance.
inline std::vector<ActionSkeleton> merge_skeletons(const std::vector<ActionSkeleton>& all) {
  std::vector<ActionSkeleton> out;
  std::map<std::string, std::size_t> index;
  for (const auto& s : all) {
    auto [it, fresh] = index.emplace(s.id, out.size());
    if (fresh) {
      out.push_back(s);
      continue;
    }
    ActionSkeleton& m = out[it->second];
    if (m.description.empty()) m.description = s.description;
    for (const auto& r : s.references) detail::add_unique(m.references, r);
    for (const auto& v : s.version_constraints) detail::add_unique(m.version_constraints, v);
    for (const auto& p : s.provenance) detail::add_unique(m.provenance, p);
    for (const auto& [k, vals] : s.suggested_criteria.requirements)
      m.suggested_criteria.requirements[k].insert(vals.begin(), vals.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Skeleton file

inline Json to_json(const ActionSkeleton& s) {
  return {{"id", s.id},
          {"name", s.name},
          {"description", s.description},
          {"references", s.references},
          {"suggested_criteria", s.suggested_criteria.requirements},
          {"version_constraints", s.version_constraints},
          {"provenance", s.provenance},
          {"profile", nullptr},
          {"annotated", false}};
}

inline Json skeletons_to_json(const std::vector<ActionSkeleton>& skeletons) {
  Json list = Json::array();
  for (const auto& s : skeletons) list.push_back(to_json(s));
  return {{"skeletons", list}};
}

inline std::vector<ActionSkeleton> skeletons_from_json(const Json& doc) {
  std::vector<ActionSkeleton> out;
  try {
    for (const auto& j : doc.at("skeletons")) {
      ActionSkeleton s;
      j.at("id").get_to(s.id);
      j.at("name").get_to(s.name);
      j.at("description").get_to(s.description);
      j.at("references").get_to(s.references);
      j.at("suggested_criteria").get_to(s.suggested_criteria.requirements);
      j.at("version_constraints").get_to(s.version_constraints);
      j.at("provenance").get_to(s.provenance);
      out.push_back(std::move(s));
    }
  } catch (const Json::exception& e) {
    throw ParseError(std::string("skeletons: ") + e.what());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Annotation merge

struct MergeResult {
  ActionDatabase fragment;
  std::vector<std::string> unannotated;  // skeleton ids left out
  ValidationReport errors;               // empty iff the fragment is loadable
};

// `annotations` is {"schema": [...], "annotations": [{"id", "profile",
// "channels", ...optional action fields}]}. Annotated skeletons become actions;
// the rest are reported in `unannotated`.
inline MergeResult merge_annotations(const std::vector<ActionSkeleton>& skeletons,
                                     const Json& annotations) {
  MergeResult result;
  ValidationReport& errors = result.errors;
  if (!annotations.is_object()) {
    errors.add("annotations", "document is not a JSON object");
    return result;
  }
  detail::check_keys(annotations, {"schema", "annotations"}, "annotations", errors);
  Schema schema;
  if (auto it = annotations.find("schema"); it != annotations.end())
    schema = parse_schema(*it, errors);
  else
    errors.add("annotations", "missing \"schema\"");

  std::map<std::string, const ActionSkeleton*> by_id;
  for (const auto& s : skeletons) by_id.emplace(s.id, &s);

  std::map<std::string, Action> annotated;
  if (auto it = annotations.find("annotations"); it == annotations.end() || !it->is_array()) {
    errors.add("annotations", "\"annotations\" must be an array");
  } else {
    for (std::size_t i = 0; i < it->size(); ++i) {
      const Json& a = (*it)[i];
      std::string subject = "annotations[" + std::to_string(i) + "]";
      std::string id;
      if (!a.is_object() || !detail::read_field(a, "id", id, subject, errors)) continue;
      auto sk = by_id.find(id);
      if (sk == by_id.end()) {
        errors.add(id, "annotation references unknown skeleton");
        continue;
      }
      // Start from the skeleton, let the annotation fill in or override.
      Json merged = {{"id", id},
                     {"name", sk->second->name},
                     {"description", sk->second->description},
                     {"references", sk->second->references},
                     {"target_criteria", sk->second->suggested_criteria.requirements}};
      for (const auto& [k, v] : a.items()) merged[k] = v;
      if (!a.contains("profile")) errors.add(id, "annotation has no profile");
      Action action = parse_action(merged, id, errors);
      errors.merge(validate_profile_values(schema, action.profile, id));
      if (!annotated.emplace(id, std::move(action)).second)
        errors.add(id, "skeleton annotated twice");
    }
  }

  std::vector<Action> actions;
  for (const auto& s : skeletons) {
    if (auto it = annotated.find(s.id); it != annotated.end())
      actions.push_back(it->second);
    else
      result.unannotated.push_back(s.id);
  }
  result.fragment = ActionDatabase(std::move(schema), std::move(actions));
  if (errors.ok()) errors.merge(validate_action_db(result.fragment));
  return result;
}

}  // namespace cpsattack
