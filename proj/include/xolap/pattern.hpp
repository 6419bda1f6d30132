#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "xolap/binding.hpp"
#include "xolap/decimal.hpp"
#include "xolap/error.hpp"
#include "xolap/xmltree.hpp"

namespace xolap {

// Parent-child ("/") or ancestor-descendant ("//").
enum class EdgeKind { pc, ad };

// "-" exactly one, "+" one or more, "*" zero or more, "?" zero or one.
enum class Cardinality { one, one_or_more, zero_or_more, zero_or_one };

struct EdgeAnnotation {
  Cardinality cardinality = Cardinality::one;
  bool mandatory = true;
  bool ordered = false;

  // Annotation whose mandatory flag agrees with the cardinality.
  static EdgeAnnotation of(Cardinality c, bool ordered = false) {
    return {c, c == Cardinality::one || c == Cardinality::one_or_more, ordered};
  }

  bool groups() const noexcept {
    return cardinality == Cardinality::one_or_more || cardinality == Cardinality::zero_or_more;
  }

  bool optional() const noexcept {
    return cardinality == Cardinality::zero_or_more || cardinality == Cardinality::zero_or_one;
  }

  friend bool operator==(const EdgeAnnotation&, const EdgeAnnotation&) = default;
};

struct PatternEdge {
  EdgeKind kind = EdgeKind::pc;
  EdgeAnnotation annotation;

  friend bool operator==(const PatternEdge&, const PatternEdge&) = default;
};

struct PatternNode {
  PatternVar var;
  std::optional<std::string> label;  // absent: wildcard
  bool output = false;
  bool computed = false;  // has no data-tree counterpart, skipped by matching
  std::optional<PatternVar> parent;
  std::optional<PatternEdge> edge;

  friend bool operator==(const PatternNode&, const PatternNode&) = default;
};

enum class Accessor { value, label };
enum class Comparator { eq, ne, lt, le, gt, ge, contains };

struct Predicate {
  PatternVar var;
  Accessor accessor = Accessor::value;
  Comparator op = Comparator::eq;
  std::string constant;

  friend bool operator==(const Predicate&, const Predicate&) = default;
};

// Boolean combination of predicates. An empty conjunction is TRUE and an
// empty disjunction is FALSE.
class Formula {
 public:
  enum class Kind { predicate, all, any, negation };

  Formula() = default;

  static Formula always() { return Formula(Kind::all, {}); }
  static Formula never() { return Formula(Kind::any, {}); }
  static Formula of(Predicate p) {
    Formula f(Kind::predicate, {});
    f.predicate_ = std::move(p);
    return f;
  }
  static Formula all_of(std::vector<Formula> args) { return Formula(Kind::all, std::move(args)); }
  static Formula any_of(std::vector<Formula> args) { return Formula(Kind::any, std::move(args)); }
  static Formula negate(Formula f) { return Formula(Kind::negation, {std::move(f)}); }

  Kind kind() const noexcept { return kind_; }
  const Predicate& predicate() const noexcept { return predicate_; }
  const std::vector<Formula>& args() const noexcept { return args_; }

  bool is_true() const noexcept { return kind_ == Kind::all && args_.empty(); }

  void collect_vars(std::set<PatternVar>& out) const {
    if (kind_ == Kind::predicate) out.insert(predicate_.var);
    for (const Formula& a : args_) a.collect_vars(out);
  }

  friend bool operator==(const Formula&, const Formula&) = default;

 private:
  Formula(Kind k, std::vector<Formula> args) : kind_(k), args_(std::move(args)) {}

  Kind kind_ = Kind::all;
  Predicate predicate_;
  std::vector<Formula> args_;
};

// Node list order defines pattern-sibling order.
struct PatternTree {
  std::vector<PatternNode> nodes;
  PatternVar root;
  Formula formula;

  const PatternNode* find(PatternVar v) const {
    auto it = std::find_if(nodes.begin(), nodes.end(), [v](const PatternNode& n) { return n.var == v; });
    return it == nodes.end() ? nullptr : &*it;
  }

  const PatternNode& at(PatternVar v) const {
    const PatternNode* n = find(v);
    if (!n) throw LookupError("unknown pattern variable " + v.name());
    return *n;
  }

  std::vector<PatternVar> children(PatternVar v) const {
    std::vector<PatternVar> out;
    for (const PatternNode& n : nodes) {
      if (n.parent == v) out.push_back(n.var);
    }
    return out;
  }

  std::uint32_t slot_count() const {
    std::uint32_t m = 0;
    for (const PatternNode& n : nodes) m = std::max(m, n.var.index + 1);
    return m;
  }

  friend bool operator==(const PatternTree&, const PatternTree&) = default;
};

// One message per violated invariant; empty when the pattern is valid.
inline std::vector<std::string> validate_pattern(const PatternTree& pt) {
  std::vector<std::string> report;
  if (pt.nodes.empty()) {
    report.push_back("pattern has no nodes");
    return report;
  }
  std::map<PatternVar, const PatternNode*> by_var;
  for (const PatternNode& n : pt.nodes) {
    if (!by_var.emplace(n.var, &n).second) report.push_back("duplicate variable " + n.var.name());
  }

  std::size_t roots = 0;
  for (const PatternNode& n : pt.nodes) {
    if (!n.parent) {
      ++roots;
      if (n.var != pt.root) report.push_back(n.var.name() + " has no parent but is not the root");
      if (n.edge) report.push_back("root " + n.var.name() + " must not have an edge");
      if (n.computed) report.push_back("root " + n.var.name() + " cannot be computed");
      continue;
    }
    if (!by_var.count(*n.parent)) {
      report.push_back(n.var.name() + " has unknown parent " + n.parent->name());
    } else if (by_var.at(*n.parent)->computed) {
      report.push_back("computed node must be leaf: " + n.parent->name() + " has child " + n.var.name());
    }
    if (!n.edge) {
      report.push_back(n.var.name() + " has a parent but no edge");
    } else {
      const EdgeAnnotation& a = n.edge->annotation;
      if (a.mandatory == a.optional()) {
        report.push_back("edge annotation of " + n.var.name() + " disagrees: cardinality " +
                         (a.optional() ? "optional" : "mandatory") + " but marked " +
                         (a.mandatory ? "mandatory" : "optional"));
      }
    }
  }
  if (!by_var.count(pt.root)) report.push_back("root " + pt.root.name() + " is not a pattern node");
  if (roots != 1) report.push_back("pattern must have exactly one root, found " + std::to_string(roots));

  // Reachability from the root also rules out cycles.
  std::set<PatternVar> reached;
  if (by_var.count(pt.root)) {
    std::vector<PatternVar> stack{pt.root};
    while (!stack.empty()) {
      PatternVar v = stack.back();
      stack.pop_back();
      if (!reached.insert(v).second) continue;
      for (PatternVar c : pt.children(v)) stack.push_back(c);
    }
  }
  for (const auto& [v, n] : by_var) {
    if (!reached.count(v) && n->parent && by_var.count(*n->parent)) {
      report.push_back(v.name() + " is not reachable from the root");
    }
  }

  if (std::none_of(pt.nodes.begin(), pt.nodes.end(), [](const PatternNode& n) { return n.output; })) {
    report.push_back("no output node");
  }

  std::set<PatternVar> used;
  pt.formula.collect_vars(used);
  for (PatternVar v : used) {
    auto it = by_var.find(v);
    if (it == by_var.end()) {
      report.push_back("formula references undeclared " + v.name());
    } else if (it->second->computed) {
      report.push_back("formula references computed node " + v.name());
    }
  }
  return report;
}

namespace detail {

inline const char* cardinality_symbol(Cardinality c) {
  switch (c) {
    case Cardinality::one: return "-";
    case Cardinality::one_or_more: return "+";
    case Cardinality::zero_or_more: return "*";
    case Cardinality::zero_or_one: return "?";
  }
  return "-";
}

inline const char* comparator_name(Comparator c) {
  switch (c) {
    case Comparator::eq: return "eq";
    case Comparator::ne: return "ne";
    case Comparator::lt: return "lt";
    case Comparator::le: return "le";
    case Comparator::gt: return "gt";
    case Comparator::ge: return "ge";
    case Comparator::contains: return "contains";
  }
  return "eq";
}

inline const nlohmann::json& field(const nlohmann::json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + ": missing field '" + key + "'");
  return *it;
}

inline PatternVar var_field(const nlohmann::json& v, const std::string& where) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw ParseError(where + " must be a non-negative integer");
  }
  const auto i = v.get<std::uint64_t>();
  if (i > 1'000'000) throw ParseError(where + " is out of range");
  return PatternVar{static_cast<std::uint32_t>(i)};
}

inline bool bool_field(const nlohmann::json& obj, const char* key, bool fallback, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  if (!it->is_boolean()) throw ParseError(where + "." + key + " must be a boolean");
  return it->get<bool>();
}

inline Formula parse_formula(const nlohmann::json& j, const std::string& where) {
  if (j.is_boolean()) return j.get<bool>() ? Formula::always() : Formula::never();
  if (!j.is_object()) throw ParseError(where + " must be an object or boolean");
  const auto& op_j = field(j, "op", where);
  if (!op_j.is_string()) throw ParseError(where + ".op must be a string");
  const std::string op = op_j.get<std::string>();
  if (op == "and" || op == "or" || op == "not") {
    const auto& args_j = field(j, "args", where);
    if (!args_j.is_array()) throw ParseError(where + ".args must be an array");
    std::vector<Formula> args;
    for (std::size_t i = 0; i < args_j.size(); ++i) {
      args.push_back(parse_formula(args_j[i], where + ".args[" + std::to_string(i) + "]"));
    }
    if (op == "and") return Formula::all_of(std::move(args));
    if (op == "or") return Formula::any_of(std::move(args));
    if (args.size() != 1) throw ParseError(where + ".args must hold exactly one formula for 'not'");
    return Formula::negate(std::move(args.front()));
  }
  static const std::map<std::string, Comparator> kOps{
      {"eq", Comparator::eq}, {"ne", Comparator::ne}, {"lt", Comparator::lt},
      {"le", Comparator::le}, {"gt", Comparator::gt}, {"ge", Comparator::ge},
      {"contains", Comparator::contains}};
  auto it = kOps.find(op);
  if (it == kOps.end()) throw ParseError(where + ".op: unknown operator '" + op + "'");
  Predicate p;
  p.op = it->second;
  p.var = var_field(field(j, "var", where), where + ".var");
  if (auto a = j.find("accessor"); a != j.end()) {
    if (*a == "value") p.accessor = Accessor::value;
    else if (*a == "label") p.accessor = Accessor::label;
    else throw ParseError(where + ".accessor must be \"value\" or \"label\"");
  }
  const auto& c = field(j, "const", where);
  if (c.is_string()) p.constant = c.get<std::string>();
  else if (c.is_number()) p.constant = c.dump();
  else throw ParseError(where + ".const must be a string or number");
  return Formula::of(std::move(p));
}

inline nlohmann::json render_formula(const Formula& f) {
  using nlohmann::json;
  switch (f.kind()) {
    case Formula::Kind::predicate: {
      const Predicate& p = f.predicate();
      return json{{"op", comparator_name(p.op)},
                  {"var", p.var.index},
                  {"accessor", p.accessor == Accessor::value ? "value" : "label"},
                  {"const", p.constant}};
    }
    case Formula::Kind::all:
    case Formula::Kind::any: {
      const bool all = f.kind() == Formula::Kind::all;
      if (f.args().empty()) return json(all);
      json args = json::array();
      for (const Formula& a : f.args()) args.push_back(render_formula(a));
      return json{{"op", all ? "and" : "or"}, {"args", args}};
    }
    case Formula::Kind::negation:
      return json{{"op", "not"}, {"args", json::array({render_formula(f.args().front())})}};
  }
  return json(true);
}

}  // namespace detail

// Builds a pattern from its JSON form without validating it.
inline PatternTree pattern_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ParseError("pattern: top level must be an object");
  const auto& nodes_j = detail::field(doc, "nodes", "pattern");
  if (!nodes_j.is_array()) throw ParseError("pattern.nodes must be an array");
  PatternTree pt;
  std::optional<PatternVar> root;
  for (std::size_t i = 0; i < nodes_j.size(); ++i) {
    const std::string where = "pattern.nodes[" + std::to_string(i) + "]";
    const auto& nj = nodes_j[i];
    if (!nj.is_object()) throw ParseError(where + " must be an object");
    PatternNode n;
    n.var = detail::var_field(detail::field(nj, "var", where), where + ".var");
    if (auto l = nj.find("label"); l != nj.end() && !l->is_null()) {
      if (!l->is_string() || l->get<std::string>().empty()) throw ParseError(where + ".label must be a non-empty string or null");
      n.label = l->get<std::string>();
    }
    n.output = detail::bool_field(nj, "output", false, where);
    n.computed = detail::bool_field(nj, "computed", false, where);
    if (auto p = nj.find("parent"); p != nj.end() && !p->is_null()) {
      n.parent = detail::var_field(*p, where + ".parent");
    }
    if (auto e = nj.find("edge"); e != nj.end() && !e->is_null()) {
      if (!e->is_object()) throw ParseError(where + ".edge must be an object or null");
      const std::string ew = where + ".edge";
      PatternEdge edge;
      const auto& kind = detail::field(*e, "kind", ew);
      if (kind == "pc") edge.kind = EdgeKind::pc;
      else if (kind == "ad") edge.kind = EdgeKind::ad;
      else throw ParseError(ew + ".kind must be \"pc\" or \"ad\"");
      Cardinality card = Cardinality::one;
      if (auto c = e->find("card"); c != e->end() && !c->is_null()) {
        if (*c == "-") card = Cardinality::one;
        else if (*c == "+") card = Cardinality::one_or_more;
        else if (*c == "*") card = Cardinality::zero_or_more;
        else if (*c == "?") card = Cardinality::zero_or_one;
        else throw ParseError(ew + ".card must be one of \"-\", \"+\", \"*\", \"?\"");
      }
      edge.annotation = EdgeAnnotation::of(card, detail::bool_field(*e, "ordered", false, ew));
      edge.annotation.mandatory = detail::bool_field(*e, "mandatory", edge.annotation.mandatory, ew);
      n.edge = edge;
    }
    if (!n.parent && !root) root = n.var;
    pt.nodes.push_back(std::move(n));
  }
  pt.root = root.value_or(pt.nodes.empty() ? PatternVar{} : pt.nodes.front().var);
  auto f = doc.find("formula");
  pt.formula = (f == doc.end() || f->is_null()) ? Formula::always() : detail::parse_formula(*f, "pattern.formula");
  return pt;
}

// Parses and validates the pattern JSON format.
inline PatternTree parse_pattern(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("pattern: ") + e.what());
  }
  PatternTree pt = pattern_from_json(doc);
  if (auto report = validate_pattern(pt); !report.empty()) throw ValidationError(std::move(report));
  return pt;
}

inline PatternTree load_pattern(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LookupError("cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_pattern(text);
}

inline nlohmann::json pattern_to_json(const PatternTree& pt) {
  using nlohmann::json;
  json nodes = json::array();
  for (const PatternNode& n : pt.nodes) {
    json e = nullptr;
    if (n.edge) {
      e = json{{"kind", n.edge->kind == EdgeKind::pc ? "pc" : "ad"},
               {"card", detail::cardinality_symbol(n.edge->annotation.cardinality)},
               {"mandatory", n.edge->annotation.mandatory},
               {"ordered", n.edge->annotation.ordered}};
    }
    nodes.push_back(json{{"var", n.var.index},
                         {"label", n.label ? json(*n.label) : json(nullptr)},
                         {"output", n.output},
                         {"computed", n.computed},
                         {"parent", n.parent ? json(n.parent->index) : json(nullptr)},
                         {"edge", e}});
  }
  return json{{"nodes", nodes}, {"formula", detail::render_formula(pt.formula)}};
}

// Canonical JSON text: sorted keys, every optional field spelled out.
inline std::string render_pattern(const PatternTree& pt) { return pattern_to_json(pt).dump(2); }

namespace detail {

inline bool compare_text(std::string_view lhs, Comparator op, std::string_view rhs) {
  switch (op) {
    case Comparator::eq: return lhs == rhs;
    case Comparator::ne: return lhs != rhs;
    case Comparator::contains: return lhs.find(rhs) != std::string_view::npos;
    default: break;
  }
  std::strong_ordering ord = std::strong_ordering::equal;
  auto a = Decimal::parse(lhs);
  auto b = Decimal::parse(rhs);
  if (a && b) ord = *a <=> *b;
  else ord = lhs.compare(rhs) <=> 0;
  switch (op) {
    case Comparator::lt: return ord < 0;
    case Comparator::le: return ord <= 0;
    case Comparator::gt: return ord > 0;
    case Comparator::ge: return ord >= 0;
    default: return false;
  }
}

}  // namespace detail

// A predicate holds when some node bound to its variable satisfies it; a
// predicate over an unbound variable is false.
inline bool eval_formula(const Formula& f, const Binding& b, const DataTree& t) {
  switch (f.kind()) {
    case Formula::Kind::predicate: {
      const Predicate& p = f.predicate();
      for (NodeId n : b.nodes(p.var)) {
        const std::string_view subject =
            p.accessor == Accessor::value ? t.effective_value(n) : std::string_view(t.node(n).label);
        if (detail::compare_text(subject, p.op, p.constant)) return true;
      }
      return false;
    }
    case Formula::Kind::all:
      return std::all_of(f.args().begin(), f.args().end(),
                         [&](const Formula& a) { return eval_formula(a, b, t); });
    case Formula::Kind::any:
      return std::any_of(f.args().begin(), f.args().end(),
                         [&](const Formula& a) { return eval_formula(a, b, t); });
    case Formula::Kind::negation:
      return !eval_formula(f.args().front(), b, t);
  }
  return false;
}

}  // namespace xolap
