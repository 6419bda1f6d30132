#pragma once

#include <algorithm>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "xolap/decimal.hpp"
#include "xolap/error.hpp"
#include "xolap/xmltree.hpp"

namespace xolap {

// Which parts of a document are facts, dimension containers and measures.
// Level labels are listed most detailed first; when a dimension has none,
// every element inside its container is a level element.
struct SchemaConfig {
  std::string fact_label;
  std::vector<std::string> dimension_roots;
  std::vector<std::string> measure_labels;
  std::map<std::string, std::vector<std::string>> level_labels;

  std::vector<std::string> problems() const {
    std::vector<std::string> out;
    if (fact_label.empty()) out.push_back("fact label is empty");
    if (measure_labels.empty()) out.push_back("no measure labels");
    std::set<std::string> seen{fact_label};
    auto distinct = [&](const std::string& l, const char* what) {
      if (l.empty()) out.push_back(std::string(what) + " label is empty");
      else if (!seen.insert(l).second) out.push_back("label '" + l + "' is used twice");
    };
    for (const auto& d : dimension_roots) distinct(d, "dimension");
    for (const auto& m : measure_labels) distinct(m, "measure");
    for (const auto& [dim, levels] : level_labels) {
      if (std::find(dimension_roots.begin(), dimension_roots.end(), dim) == dimension_roots.end()) {
        out.push_back("levels given for undeclared dimension '" + dim + "'");
      }
      std::set<std::string> lv;
      for (const auto& l : levels) {
        if (l.empty() || !lv.insert(l).second) out.push_back("levels of '" + dim + "' are empty or repeated");
      }
    }
    return out;
  }
};

inline SchemaConfig parse_schema_config(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("schema: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("schema: top level must be an object");
  auto strings = [&](const char* key) {
    std::vector<std::string> out;
    auto it = j.find(key);
    if (it == j.end()) return out;
    if (!it->is_array()) throw ParseError(std::string("schema.") + key + " must be an array of strings");
    for (const auto& s : *it) {
      if (!s.is_string()) throw ParseError(std::string("schema.") + key + " must be an array of strings");
      out.push_back(s.get<std::string>());
    }
    return out;
  };
  SchemaConfig cfg;
  auto fact = j.find("fact");
  if (fact == j.end() || !fact->is_string()) throw ParseError("schema.fact must be a string");
  cfg.fact_label = fact->get<std::string>();
  cfg.dimension_roots = strings("dimensions");
  cfg.measure_labels = strings("measures");
  if (auto lv = j.find("levels"); lv != j.end() && !lv->is_null()) {
    if (!lv->is_object()) throw ParseError("schema.levels must be an object");
    for (const auto& [dim, arr] : lv->items()) {
      if (!arr.is_array()) throw ParseError("schema.levels." + dim + " must be an array of strings");
      for (const auto& s : arr) {
        if (!s.is_string()) throw ParseError("schema.levels." + dim + " must be an array of strings");
        cfg.level_labels[dim].push_back(s.get<std::string>());
      }
    }
  }
  if (auto p = cfg.problems(); !p.empty()) throw ParseError("schema: " + p.front());
  return cfg;
}

inline SchemaConfig load_schema_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LookupError("cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_schema_config(text);
}

// One element of a hierarchy chain.
struct LevelRef {
  std::string label;
  std::string value;

  friend auto operator<=>(const LevelRef&, const LevelRef&) = default;
};

// Path from a most-detailed level element down the XML nesting toward the
// most general one.
using Chain = std::vector<LevelRef>;

struct LevelInstance {
  std::string id;
  std::string level_label;
  std::set<std::string> parent_refs;
  std::set<std::pair<std::string, std::string>> members;  // opaque (label, value) payload
};

struct FactInstance {
  NodeId node;
  std::string path;
  std::map<std::string, Decimal> measures;
  std::map<std::string, std::vector<Chain>> dimension_paths;
};

struct WarehouseView {
  SchemaConfig config;
  std::vector<FactInstance> facts;
  // dimension root -> level label -> id -> instance
  std::map<std::string, std::map<std::string, std::map<std::string, LevelInstance>>> dimension_levels;
  std::vector<std::string> warnings;

  // Level instances across all dimensions, keyed by level label then id.
  std::map<std::string, std::map<std::string, LevelInstance>> levels() const {
    std::map<std::string, std::map<std::string, LevelInstance>> out;
    for (const auto& [dim, by_label] : dimension_levels) {
      for (const auto& [label, by_id] : by_label) {
        for (const auto& [id, inst] : by_id) {
          auto [it, fresh] = out[label].try_emplace(id, inst);
          if (!fresh) {
            it->second.parent_refs.insert(inst.parent_refs.begin(), inst.parent_refs.end());
            it->second.members.insert(inst.members.begin(), inst.members.end());
          }
        }
      }
    }
    return out;
  }
};

struct HierarchyClass {
  bool strict = true;
  bool covering = true;
  bool complex = false;

  friend bool operator==(const HierarchyClass&, const HierarchyClass&) = default;
};

namespace detail {

struct LevelScanner {
  const DataTree& t;
  const std::vector<std::string>* declared;  // null: every element is a level

  bool is_level(NodeId n) const {
    const std::string& label = t.node(n).label;
    if (is_attribute_label(label)) return false;
    return !declared || std::find(declared->begin(), declared->end(), label) != declared->end();
  }

  void chains(NodeId n, Chain& prefix, std::vector<Chain>& out) const {
    prefix.push_back({t.node(n).label, std::string(t.effective_value(n))});
    bool leaf = true;
    for (NodeId c : t.node(n).children) {
      if (!is_level(c)) continue;
      leaf = false;
      chains(c, prefix, out);
    }
    if (leaf) out.push_back(prefix);
    prefix.pop_back();
  }

  void members(NodeId n, LevelInstance& inst) const {
    for (NodeId c : t.node(n).children) {
      const DataNode& dn = t.node(c);
      if (dn.label == "@name" || is_level(c) || !dn.children.empty()) continue;
      inst.members.emplace(dn.label, dn.value.value_or(""));
    }
  }

  void record(NodeId n, std::map<std::string, std::map<std::string, LevelInstance>>& levels) const {
    LevelInstance& inst = levels[t.node(n).label][std::string(t.effective_value(n))];
    inst.id = std::string(t.effective_value(n));
    inst.level_label = t.node(n).label;
    members(n, inst);
    for (NodeId c : t.node(n).children) {
      if (!is_level(c)) continue;
      inst.parent_refs.insert(std::string(t.effective_value(c)));
      record(c, levels);
    }
  }
};

}  // namespace detail

// Interprets every fact_label element as a fact. Throws BindingError when a
// declared measure is missing or non-numeric.
inline WarehouseView bind_schema(const DataTree& t, const SchemaConfig& cfg) {
  if (auto p = cfg.problems(); !p.empty()) throw BindingError("invalid schema: " + p.front());
  WarehouseView view;
  view.config = cfg;
  for (const auto& dim : cfg.dimension_roots) view.dimension_levels[dim];
  for (NodeId n : t.preorder()) {
    if (t.node(n).label != cfg.fact_label) continue;
    FactInstance fact;
    fact.node = n;
    fact.path = t.path(n);
    for (const auto& m : cfg.measure_labels) {
      std::optional<NodeId> found;
      for (NodeId c : t.node(n).children) {
        if (t.node(c).label == m) {
          found = c;
          break;
        }
      }
      if (!found) throw BindingError("fact " + fact.path + ": measure '" + m + "' is missing");
      auto v = Decimal::parse(t.effective_value(*found));
      if (!v) {
        throw BindingError("fact " + fact.path + ": measure '" + m + "' is not numeric ('" +
                           std::string(t.effective_value(*found)) + "')");
      }
      fact.measures.emplace(m, *v);
    }
    for (const auto& dim : cfg.dimension_roots) {
      auto lv = cfg.level_labels.find(dim);
      const detail::LevelScanner scan{t, lv == cfg.level_labels.end() ? nullptr : &lv->second};
      auto& chains = fact.dimension_paths[dim];
      for (NodeId container : t.node(n).children) {
        if (t.node(container).label != dim) continue;
        for (NodeId top : t.node(container).children) {
          if (!scan.is_level(top)) continue;
          Chain prefix;
          scan.chains(top, prefix, chains);
          scan.record(top, view.dimension_levels[dim]);
        }
      }
    }
    view.facts.push_back(std::move(fact));
  }
  if (view.facts.empty()) view.warnings.push_back("no '" + cfg.fact_label + "' elements in document");
  return view;
}

// Non-strict: a level instance rolls up to several parents, or a fact reaches
// one level through several chains. Non-covering: a chain skips a declared
// level, or (no declared levels) chains of different depth end on the same
// level label.
inline HierarchyClass classify_hierarchy(const WarehouseView& view, const std::string& dimension_root) {
  auto dl = view.dimension_levels.find(dimension_root);
  if (dl == view.dimension_levels.end()) throw LookupError("unknown dimension '" + dimension_root + "'");
  HierarchyClass out;
  for (const auto& [label, by_id] : dl->second) {
    for (const auto& [id, inst] : by_id) {
      if (inst.parent_refs.size() > 1) out.strict = false;
    }
  }
  const auto declared = view.config.level_labels.find(dimension_root);
  std::map<std::string, std::set<std::size_t>> depth_by_terminal;
  for (const FactInstance& f : view.facts) {
    auto it = f.dimension_paths.find(dimension_root);
    if (it == f.dimension_paths.end()) continue;
    const std::set<Chain> chains(it->second.begin(), it->second.end());
    std::map<std::string, std::size_t> through;
    for (const Chain& c : chains) {
      std::set<std::string> labels;
      for (const LevelRef& r : c) labels.insert(r.label);
      for (const auto& l : labels) {
        if (++through[l] > 1) out.strict = false;
      }
      if (c.empty()) continue;
      if (declared != view.config.level_labels.end()) {
        const auto& order = declared->second;
        auto position = [&](const std::string& l) {
          return static_cast<std::size_t>(std::find(order.begin(), order.end(), l) - order.begin());
        };
        for (std::size_t i = 1; i < c.size(); ++i) {
          if (position(c[i].label) > position(c[i - 1].label) + 1) out.covering = false;
        }
      } else {
        depth_by_terminal[c.back().label].insert(c.size());
      }
    }
  }
  for (const auto& [label, depths] : depth_by_terminal) {
    if (depths.size() > 1) out.covering = false;
  }
  out.complex = !out.strict && !out.covering;
  return out;
}

}  // namespace xolap
