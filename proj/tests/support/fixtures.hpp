#pragma once

#include <filesystem>
#include <string>

#include "cpsattack/cpsattack.hpp"

namespace cpsattack::testing {

inline std::filesystem::path data_dir() { return CPSATTACK_DATA_DIR; }

inline Node node(std::string id, std::map<std::string, std::string> attrs = {},
                 bool target = false) {
  return Node{id, id, std::move(attrs), target};
}

inline Edge edge(std::string id, std::string from, std::string to,
                 std::set<std::string> channels = {"net"}, bool entry = false) {
  return Edge{std::move(id), std::move(from), std::move(to), std::move(channels), true, entry};
}

inline Edge entry(std::string id, std::string to, std::set<std::string> channels = {"net"}) {
  return edge(std::move(id), kExternalOrigin, std::move(to), std::move(channels), true);
}

// Single bounded "Knowledge" property on [0, 10].
inline Schema knowledge_schema() {
  PropertySchema p;
  p.name = "Knowledge";
  p.kind = PropertyKind::bounded_range;
  p.lower = 0;
  p.upper = 10;
  return {p};
}

inline Action action(std::string id, double knowledge, TargetCriteria criteria = {},
                     std::set<std::string> channels = {"net"}, double p_success = 1.0) {
  Action a;
  a.id = id;
  a.name = id;
  a.profile = {{"Knowledge", knowledge}};
  a.target_criteria = std::move(criteria);
  a.channels = std::move(channels);
  a.success_probability = p_success;
  return a;
}

inline AttackerProfile attacker(std::string name, double knowledge) {
  return {std::move(name), {{"Knowledge", knowledge}}};
}

struct CaseStudy {
  CpsSystem system = load_system(data_dir() / "case_study/system.json");
  ActionDatabase db = load_action_db(data_dir() / "case_study/actions.json");
  ProfileSet profiles = load_profile_set(data_dir() / "case_study/profiles.json");
};

struct Analytic {
  CpsSystem system = load_system(data_dir() / "analytic/system.json");
  ActionDatabase db = load_action_db(data_dir() / "analytic/actions.json");
  ProfileSet profiles = load_profile_set(data_dir() / "analytic/profiles.json");
};

}  // namespace cpsattack::testing
