#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "xolap/decimal.hpp"
#include "xolap/error.hpp"
#include "xolap/pattern.hpp"
#include "xolap/xmltree.hpp"

namespace xolap {

enum class AggregateKind { sum, count, avg, min, max };

inline std::string_view to_string(AggregateKind k) {
  switch (k) {
    case AggregateKind::sum: return "sum";
    case AggregateKind::count: return "count";
    case AggregateKind::avg: return "avg";
    case AggregateKind::min: return "min";
    case AggregateKind::max: return "max";
  }
  return "sum";
}

inline std::optional<AggregateKind> parse_aggregate_kind(std::string_view s) {
  for (AggregateKind k : {AggregateKind::sum, AggregateKind::count, AggregateKind::avg, AggregateKind::min,
                          AggregateKind::max}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

struct RollupQuery {
  std::string fact_label;
  std::string hierarchy_root_label;
  std::string measure_label;
  std::string target_value;  // hierarchical element to aggregate to
  AggregateKind agg = AggregateKind::sum;

  void check() const {
    if (fact_label.empty() || hierarchy_root_label.empty() || measure_label.empty()) {
      throw InvariantError("rollup query labels must be non-empty");
    }
    if (target_value.empty()) throw InvariantError("rollup target value must be non-empty");
  }
};

// acc: running sum, or running extremum for min/max. count: facts folded so far.
struct AggregateState {
  Decimal acc;
  std::uint64_t count = 0;

  friend bool operator==(const AggregateState&, const AggregateState&) = default;
};

inline AggregateState aggregate_step(AggregateState state, Decimal measure, AggregateKind agg) {
  switch (agg) {
    case AggregateKind::sum:
    case AggregateKind::avg:
      state.acc = state.acc + measure;
      break;
    case AggregateKind::count:
      break;
    case AggregateKind::min:
      state.acc = state.count == 0 ? measure : std::min(state.acc, measure);
      break;
    case AggregateKind::max:
      state.acc = state.count == 0 ? measure : std::max(state.acc, measure);
      break;
  }
  ++state.count;
  return state;
}

inline AggregateState aggregate_step(AggregateState state, double measure, AggregateKind agg) {
  return aggregate_step(state, Decimal::from_double(measure), agg);
}

inline Decimal finalize(AggregateState state, AggregateKind agg) {
  switch (agg) {
    case AggregateKind::sum: return state.acc;
    case AggregateKind::count: return Decimal::from_integer(static_cast<std::int64_t>(state.count));
    default: break;
  }
  if (state.count == 0) {
    throw EmptyAggregateError(std::string(to_string(agg)) + " over zero facts is undefined");
  }
  if (agg == AggregateKind::avg) return state.acc.divided_by(state.count);
  return state.acc;
}

// $0 document root, $1 fact, $2 hierarchy root, $3 aggregate (computed),
// $4 fact count (computed), $5 most detailed level element, $6 any level
// below it (optional), $7 measure. Output nodes: $0, $2, $3, $5.
inline PatternTree make_rollup_pattern(const RollupQuery& q) {
  q.check();
  auto node = [](std::uint32_t var, std::optional<std::string> label, bool output, std::optional<std::uint32_t> parent,
                 EdgeKind kind = EdgeKind::pc, Cardinality card = Cardinality::one, bool computed = false) {
    PatternNode n;
    n.var = PatternVar{var};
    n.label = std::move(label);
    n.output = output;
    n.computed = computed;
    if (parent) {
      n.parent = PatternVar{*parent};
      n.edge = PatternEdge{kind, EdgeAnnotation::of(card)};
    }
    return n;
  };
  PatternTree pt;
  pt.root = PatternVar{0};
  pt.nodes = {
      node(0, std::nullopt, true, std::nullopt),
      node(1, q.fact_label, false, 0),
      node(2, q.hierarchy_root_label, true, 1),
      node(3, "Aggregate", true, 1, EdgeKind::pc, Cardinality::one, true),
      node(4, "Count", false, 1, EdgeKind::pc, Cardinality::one, true),
      node(5, std::nullopt, true, 2),
      node(6, std::nullopt, false, 5, EdgeKind::ad, Cardinality::zero_or_one),
      node(7, q.measure_label, false, 1),
  };
  auto eq = [&](std::uint32_t var) {
    return Formula::of(Predicate{PatternVar{var}, Accessor::value, Comparator::eq, q.target_value});
  };
  pt.formula = Formula::any_of({eq(5), eq(6)});
  return pt;
}

struct RollupResult {
  DataTree witness;
  Decimal value;
  std::uint64_t matched_facts = 0;
};

namespace detail {

inline Decimal fact_measure(const DataTree& t, NodeId fact, const std::string& measure_label) {
  for (NodeId c : t.node(fact).children) {
    if (t.node(c).label != measure_label) continue;
    if (auto v = Decimal::parse(t.effective_value(c))) return *v;
    throw DataError("fact " + t.path(fact) + ": measure '" + measure_label + "' is not numeric ('" +
                    std::string(t.effective_value(c)) + "')");
  }
  throw DataError("fact " + t.path(fact) + ": measure '" + measure_label + "' is missing");
}

inline std::vector<NodeId> element_children(const DataTree& t, NodeId n) {
  std::vector<NodeId> out;
  for (NodeId c : t.node(n).children) {
    if (!is_attribute_label(t.node(c).label)) out.push_back(c);
  }
  return out;
}

}  // namespace detail

// For every fact in document order: walk the level elements directly under
// each hierarchy container, and below each of them in preorder, until one
// carries the target value; the fact is then aggregated once.
inline RollupResult rollup(const DataTree& t, const RollupQuery& q) {
  q.check();
  AggregateState state;
  std::optional<std::string> matched_label;
  for (NodeId fact : t.preorder()) {
    if (t.node(fact).label != q.fact_label) continue;
    const Decimal measure = detail::fact_measure(t, fact, q.measure_label);
    bool stop = false;
    for (NodeId container : detail::element_children(t, fact)) {
      if (stop) break;
      if (t.node(container).label != q.hierarchy_root_label) continue;
      for (NodeId level : detail::element_children(t, container)) {
        if (stop) break;
        std::optional<NodeId> hit;
        if (t.effective_value(level) == q.target_value) {
          hit = level;
        } else {
          for (NodeId below : descendants(t, level)) {
            if (!is_attribute_label(t.node(below).label) && t.effective_value(below) == q.target_value) {
              hit = below;
              break;
            }
          }
        }
        if (hit) {
          state = aggregate_step(state, measure, q.agg);
          if (!matched_label) matched_label = t.node(*hit).label;
          stop = true;
        }
      }
    }
  }
  const Decimal value = finalize(state, q.agg);

  TreeBuilder out(t.node(t.root()).label);
  const NodeId hierarchy = out.add(out.root(), q.hierarchy_root_label);
  if (matched_label) out.add(hierarchy, *matched_label, q.target_value);
  const NodeId aggregate = out.add(out.root(), "Aggregate", value.to_string());
  out.add_attribute(aggregate, "Count", std::to_string(state.count));
  return RollupResult{out.build(), value, state.count};
}

struct RollupOracleLimits {
  std::size_t max_tree_nodes = 500;
};

// Reference rollup: a fact qualifies iff the target is among the values of
// all level elements inside its hierarchy containers.
inline Decimal rollup_oracle(const DataTree& t, const RollupQuery& q, const RollupOracleLimits& limits = {}) {
  q.check();
  if (t.size() > limits.max_tree_nodes) {
    throw OracleLimitError("rollup oracle refuses trees with more than " + std::to_string(limits.max_tree_nodes) +
                           " nodes (got " + std::to_string(t.size()) + ")");
  }
  std::vector<Decimal> picked;
  for (const DataNode& fact : t.nodes()) {
    if (fact.label != q.fact_label) continue;
    const Decimal measure = detail::fact_measure(t, fact.id, q.measure_label);
    std::set<std::string> reachable;
    std::vector<NodeId> stack;
    for (NodeId c : fact.children) {
      if (t.node(c).label == q.hierarchy_root_label) stack.push_back(c);
    }
    while (!stack.empty()) {
      const NodeId n = stack.back();
      stack.pop_back();
      for (NodeId c : t.node(n).children) {
        if (is_attribute_label(t.node(c).label)) continue;
        reachable.insert(std::string(t.effective_value(c)));
        stack.push_back(c);
      }
    }
    if (reachable.count(q.target_value)) picked.push_back(measure);
  }
  Decimal total;
  for (Decimal m : picked) total = total + m;
  switch (q.agg) {
    case AggregateKind::sum: return total;
    case AggregateKind::count: return Decimal::from_integer(static_cast<std::int64_t>(picked.size()));
    default: break;
  }
  if (picked.empty()) throw EmptyAggregateError(std::string(to_string(q.agg)) + " over zero facts is undefined");
  if (q.agg == AggregateKind::avg) return total.divided_by(picked.size());
  if (q.agg == AggregateKind::min) return *std::min_element(picked.begin(), picked.end());
  return *std::max_element(picked.begin(), picked.end());
}

}  // namespace xolap
