#pragma once

// Formal system description (nodes, edges, attack vectors, entry points) and
// the attacker's evolving knowledge of it.

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cpsattack/error.hpp"
#include "cpsattack/json_util.hpp"

namespace cpsattack {

using NodeId = std::string;
using EdgeId = std::string;

// Reserved pseudo-node that entry-point edges originate from.
inline const NodeId kExternalOrigin = "@external";

struct Node {
  NodeId id;
  std::string name;
  std::map<std::string, std::string> attributes;
  bool is_target = false;

  bool operator==(const Node&) const = default;
};

// Directed link. Bidirectional links are two edges.
struct Edge {
  EdgeId id;
  NodeId from;
  NodeId to;
  std::set<std::string> channels;
  bool is_attack_vector = false;
  bool is_entry_point = false;

  bool operator==(const Edge&) const = default;
};

// Immutable after construction; lookups are indexed by id. Construction never
// fails, so malformed systems can still be inspected by validate_system.
class CpsSystem {
 public:
  CpsSystem() = default;
  CpsSystem(std::vector<Node> nodes, std::vector<Edge> edges)
      : nodes_(std::move(nodes)), edges_(std::move(edges)) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) node_index_.emplace(nodes_[i].id, i);
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      edge_index_.emplace(edges_[i].id, i);
      incident_[edges_[i].from].push_back(i);
      if (edges_[i].to != edges_[i].from) incident_[edges_[i].to].push_back(i);
    }
  }

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }

  const Node* find_node(std::string_view id) const {
    auto it = node_index_.find(std::string(id));
    return it == node_index_.end() ? nullptr : &nodes_[it->second];
  }

  const Edge* find_edge(std::string_view id) const {
    auto it = edge_index_.find(std::string(id));
    return it == edge_index_.end() ? nullptr : &edges_[it->second];
  }

  // Edges with `node` at either end, in file order.
  std::vector<const Edge*> incident_edges(std::string_view node) const {
    std::vector<const Edge*> out;
    if (auto it = incident_.find(std::string(node)); it != incident_.end())
      for (auto i : it->second) out.push_back(&edges_[i]);
    return out;
  }

  std::vector<const Edge*> entry_points() const {
    std::vector<const Edge*> out;
    for (const auto& e : edges_)
      if (e.is_entry_point) out.push_back(&e);
    return out;
  }

  std::set<NodeId> target_nodes() const {
    std::set<NodeId> out;
    for (const auto& n : nodes_)
      if (n.is_target) out.insert(n.id);
    return out;
  }

 private:
  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::map<std::string, std::size_t> node_index_;
  std::map<std::string, std::size_t> edge_index_;
  std::map<std::string, std::vector<std::size_t>> incident_;
};

struct CpsKnowledge {
  std::set<NodeId> known_nodes;
  std::set<EdgeId> known_edges;
  std::set<NodeId> compromised_nodes;

  bool knows_node(const NodeId& id) const { return known_nodes.contains(id); }
  bool is_compromised(const NodeId& id) const { return compromised_nodes.contains(id); }

  bool operator==(const CpsKnowledge&) const = default;
};

inline ValidationReport validate_system(const CpsSystem& sys) {
  ValidationReport report;

  std::set<NodeId> seen_nodes;
  for (const auto& n : sys.nodes()) {
    if (n.id.empty()) report.add("node", "empty node id");
    if (n.id == kExternalOrigin) report.add(n.id, "node id is reserved for the external origin");
    if (!seen_nodes.insert(n.id).second) report.add(n.id, "duplicate node id");
    for (const auto& [key, _] : n.attributes)
      if (key.empty()) report.add(n.id, "empty attribute key");
  }

  std::set<EdgeId> seen_edges;
  bool has_entry = false;
  for (const auto& e : sys.edges()) {
    if (e.id.empty()) report.add("edge", "empty edge id");
    if (!seen_edges.insert(e.id).second) report.add(e.id, "duplicate edge id");
    if (e.from == e.to) report.add(e.id, "edge loops on " + e.from);
    if (e.is_entry_point) {
      has_entry = true;
      if (!e.is_attack_vector) report.add(e.id, "entry point is not marked as an attack vector");
      if (e.from != kExternalOrigin)
        report.add(e.id, "entry point must originate at " + kExternalOrigin + ", not " + e.from);
    } else if (e.from == kExternalOrigin) {
      report.add(e.id, "only entry points may originate at " + kExternalOrigin);
    } else if (!sys.find_node(e.from)) {
      report.add(e.id, "references missing node " + e.from);
    }
    if (e.to == kExternalOrigin)
      report.add(e.id, "edge may not point at " + kExternalOrigin);
    else if (!sys.find_node(e.to))
      report.add(e.id, "references missing node " + e.to);
  }

  if (!has_entry) report.add("system", "no entry point");
  if (sys.target_nodes().empty()) report.add("system", "no target node");
  return report;
}

// Attacker knowledge at the start of an episode: entry-point edges and their
// destination nodes, nothing compromised.
inline CpsKnowledge initial_knowledge(const CpsSystem& sys) {
  validate_system(sys).throw_if_failed();
  CpsKnowledge k;
  for (const auto* e : sys.entry_points()) {
    k.known_edges.insert(e->id);
    k.known_nodes.insert(e->to);
  }
  return k;
}

// Marks `node` compromised and discovers every incident edge and adjacent node,
// ignoring edge direction. Pure: `k` is not modified.
inline CpsKnowledge reveal_on_compromise(const CpsKnowledge& k, const CpsSystem& sys,
                                         const NodeId& node) {
  if (!k.knows_node(node))
    throw PreconditionError("cannot compromise " + node + ": node is not known to the attacker");
  CpsKnowledge next = k;
  next.compromised_nodes.insert(node);
  for (const auto* e : sys.incident_edges(node)) {
    next.known_edges.insert(e->id);
    const NodeId& other = e->from == node ? e->to : e->from;
    if (other != kExternalOrigin) next.known_nodes.insert(other);
  }
  return next;
}

// Checks the knowledge invariants against `sys`.
inline ValidationReport validate_knowledge(const CpsKnowledge& k, const CpsSystem& sys) {
  ValidationReport report;
  for (const auto& n : k.compromised_nodes)
    if (!k.knows_node(n)) report.add(n, "compromised but not known");
  for (const auto& id : k.known_edges) {
    const Edge* e = sys.find_edge(id);
    if (!e) {
      report.add(id, "known edge does not exist");
      continue;
    }
    for (const auto* end : {&e->from, &e->to})
      if (*end != kExternalOrigin && !k.knows_node(*end))
        report.add(id, "endpoint " + *end + " is not known");
  }
  return report;
}

// ---------------------------------------------------------------------------
// JSON

struct SystemParse {
  CpsSystem system;
  ValidationReport report;  // format problems only; structure is validate_system's job
};

inline SystemParse parse_system(const Json& doc) {
  ValidationReport report;
  std::vector<Node> nodes;
  std::vector<Edge> edges;

  if (!doc.is_object()) {
    report.add("system", "document is not a JSON object");
    return {CpsSystem{}, report};
  }
  detail::check_keys(doc, {"nodes", "edges"}, "system", report);

  if (auto it = doc.find("nodes"); it == doc.end() || !it->is_array()) {
    report.add("system", "\"nodes\" must be an array");
  } else {
    for (std::size_t i = 0; i < it->size(); ++i) {
      const Json& j = (*it)[i];
      std::string subject = "nodes[" + std::to_string(i) + "]";
      if (!j.is_object()) {
        report.add(subject, "not an object");
        continue;
      }
      Node n;
      if (detail::read_field(j, "id", n.id, subject, report)) subject = n.id;
      detail::check_keys(j, {"id", "name", "attributes", "target"}, subject, report);
      detail::read_field(j, "name", n.name, subject, report, false);
      detail::read_field(j, "attributes", n.attributes, subject, report, false);
      detail::read_field(j, "target", n.is_target, subject, report, false);
      nodes.push_back(std::move(n));
    }
  }

  if (auto it = doc.find("edges"); it == doc.end() || !it->is_array()) {
    report.add("system", "\"edges\" must be an array");
  } else {
    for (std::size_t i = 0; i < it->size(); ++i) {
      const Json& j = (*it)[i];
      std::string subject = "edges[" + std::to_string(i) + "]";
      if (!j.is_object()) {
        report.add(subject, "not an object");
        continue;
      }
      Edge e;
      if (detail::read_field(j, "id", e.id, subject, report)) subject = e.id;
      detail::check_keys(j, {"id", "from", "to", "channels", "entry_point", "attack_vector"},
                         subject, report);
      detail::read_field(j, "from", e.from, subject, report);
      detail::read_field(j, "to", e.to, subject, report);
      detail::read_field(j, "channels", e.channels, subject, report, false);
      detail::read_field(j, "entry_point", e.is_entry_point, subject, report, false);
      detail::read_field(j, "attack_vector", e.is_attack_vector, subject, report, false);
      edges.push_back(std::move(e));
    }
  }
  return {CpsSystem(std::move(nodes), std::move(edges)), report};
}

// Loads a system file. Throws ParseError/IoError, or ValidationError on format
// problems. Structural invariants are left to validate_system.
inline CpsSystem load_system(const std::filesystem::path& path) {
  auto parsed = parse_system(detail::read_json_file(path));
  parsed.report.throw_if_failed();
  return std::move(parsed.system);
}

inline Json to_json(const CpsSystem& sys) {
  Json nodes = Json::array();
  for (const auto& n : sys.nodes()) {
    Json j = {{"id", n.id}, {"name", n.name}, {"attributes", n.attributes}};
    if (n.is_target) j["target"] = true;
    nodes.push_back(std::move(j));
  }
  Json edges = Json::array();
  for (const auto& e : sys.edges())
    edges.push_back({{"id", e.id},
                     {"from", e.from},
                     {"to", e.to},
                     {"channels", e.channels},
                     {"entry_point", e.is_entry_point},
                     {"attack_vector", e.is_attack_vector}});
  return {{"nodes", nodes}, {"edges", edges}};
}

inline Json to_json(const CpsKnowledge& k) {
  return {{"known_nodes", k.known_nodes},
          {"known_edges", k.known_edges},
          {"compromised_nodes", k.compromised_nodes}};
}

inline CpsKnowledge knowledge_from_json(const Json& j) {
  try {
    CpsKnowledge k;
    j.at("known_nodes").get_to(k.known_nodes);
    j.at("known_edges").get_to(k.known_edges);
    j.at("compromised_nodes").get_to(k.compromised_nodes);
    return k;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("knowledge: ") + e.what());
  }
}

}  // namespace cpsattack
