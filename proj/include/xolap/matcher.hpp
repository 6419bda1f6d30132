#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "xolap/binding.hpp"
#include "xolap/error.hpp"
#include "xolap/pattern.hpp"
#include "xolap/xmltree.hpp"

namespace xolap {

// Matching semantics shared by the engine and the oracle:
//  - "-" and "?" edges produce one binding per matched child (tuple semantics);
//    "?" leaves the child unbound only when no child embeds at all.
//  - "+" and "*" edges fold every matching child into one binding; every
//    variable below such an edge holds the set of nodes it matched. "*" leaves
//    the set empty when nothing embeds, "+" fails.
//  - Computed nodes are never bound.
//  - The formula is applied to the folded bindings.

namespace detail {

// Per-variable facts derived from a validated pattern.
struct PatternShape {
  explicit PatternShape(const PatternTree& pt) : pattern(&pt) {
    for (const PatternNode& n : pt.nodes) kids[n.var];
    for (const PatternNode& n : pt.nodes) {
      if (n.parent && !n.computed) kids[*n.parent].push_back(n.var);
    }
    std::vector<PatternVar> stack{pt.root};
    grouped[pt.root] = false;
    while (!stack.empty()) {
      const PatternVar v = stack.back();
      stack.pop_back();
      order.push_back(v);
      for (auto it = kids[v].rbegin(); it != kids[v].rend(); ++it) {
        grouped[*it] = grouped[v] || edge(*it).annotation.groups();
        stack.push_back(*it);
      }
    }
  }

  const PatternEdge& edge(PatternVar v) const { return *pattern->at(v).edge; }

  bool label_ok(PatternVar v, const DataTree& t, NodeId n) const {
    const auto& label = pattern->at(v).label;
    return !label || *label == t.node(n).label;
  }

  const PatternTree* pattern;
  std::map<PatternVar, std::vector<PatternVar>> kids;  // non-computed children, sibling order
  std::map<PatternVar, bool> grouped;                  // under some "+"/"*" edge
  std::vector<PatternVar> order;                       // non-computed vars, parents first
};

// Sorts each slot by document order, then orders bindings root variable
// first, then by variable index. Drops duplicates.
inline void normalize(const PatternTree& pt, const DataTree& t, std::vector<Binding>& bindings) {
  const std::uint32_t slots = pt.slot_count();
  auto rank = [&t](NodeId n) { return t.preorder_rank(n); };
  for (Binding& b : bindings) {
    for (std::uint32_t i = 0; i < slots; ++i) {
      auto& s = b.slot(PatternVar{i});
      std::sort(s.begin(), s.end(), [&](NodeId a, NodeId c) { return rank(a) < rank(c); });
      s.erase(std::unique(s.begin(), s.end()), s.end());
    }
  }
  std::vector<PatternVar> key_order{pt.root};
  for (std::uint32_t i = 0; i < slots; ++i) {
    if (PatternVar{i} != pt.root) key_order.push_back(PatternVar{i});
  }
  auto key = [&](const Binding& b) {
    std::vector<std::vector<std::size_t>> k;
    for (PatternVar v : key_order) {
      std::vector<std::size_t> ranks;
      for (NodeId n : b.nodes(v)) ranks.push_back(rank(n));
      k.push_back(std::move(ranks));
    }
    return k;
  };
  std::vector<std::pair<std::vector<std::vector<std::size_t>>, Binding>> keyed;
  keyed.reserve(bindings.size());
  for (Binding& b : bindings) keyed.emplace_back(key(b), std::move(b));
  std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  keyed.erase(std::unique(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first == b.first; }),
              keyed.end());
  bindings.clear();
  for (auto& [k, b] : keyed) bindings.push_back(std::move(b));
}

// Top-down backtracking over label-filtered candidate lists. Ancestor tests
// use preorder rank intervals.
class Matcher {
 public:
  Matcher(const PatternTree& pt, const DataTree& t) : pt_(pt), t_(t), shape_(pt), slots_(pt.slot_count()) {
    for (NodeId n : t.preorder()) by_label_[t.node(n).label].push_back(n);
  }

  std::vector<Binding> embed() {
    std::vector<Binding> out;
    for (NodeId n : t_.preorder()) {
      if (!shape_.label_ok(pt_.root, t_, n)) continue;
      auto frags = expand(pt_.root, n);
      std::move(frags.begin(), frags.end(), std::back_inserter(out));
    }
    normalize(pt_, t_, out);
    return out;
  }

 private:
  std::vector<NodeId> candidates(PatternVar child, NodeId at) const {
    const PatternEdge& e = shape_.edge(child);
    const auto& label = pt_.at(child).label;
    std::vector<NodeId> out;
    if (e.kind == EdgeKind::pc) {
      for (NodeId c : t_.node(at).children) {
        if (!label || *label == t_.node(c).label) out.push_back(c);
      }
      return out;
    }
    const std::size_t lo = t_.preorder_rank(at) + 1;
    const std::size_t hi = t_.preorder_rank(at) + t_.subtree_size(at);
    if (!label) {
      auto all = t_.preorder();
      return {all.begin() + static_cast<std::ptrdiff_t>(lo), all.begin() + static_cast<std::ptrdiff_t>(hi)};
    }
    auto it = by_label_.find(*label);
    if (it == by_label_.end()) return out;
    const auto& list = it->second;
    auto first = std::lower_bound(list.begin(), list.end(), lo,
                                  [this](NodeId n, std::size_t r) { return t_.preorder_rank(n) < r; });
    for (; first != list.end() && t_.preorder_rank(*first) < hi; ++first) out.push_back(*first);
    return out;
  }

  static void merge(Binding& into, const Binding& from) {
    for (std::uint32_t i = 0; i < from.slot_count(); ++i) {
      const auto src = from.nodes(PatternVar{i});
      if (src.empty()) continue;
      auto& dst = into.slot(PatternVar{i});
      dst.insert(dst.end(), src.begin(), src.end());
    }
  }

  // All bindings of var's pattern subtree with var mapped to n.
  std::vector<Binding> expand(PatternVar var, NodeId n) {
    Binding base(slots_);
    base.add(var, n);
    std::vector<Binding> results{std::move(base)};
    for (PatternVar child : shape_.kids.at(var)) {
      const EdgeAnnotation& a = shape_.edge(child).annotation;
      std::vector<Binding> options;
      if (a.groups()) {
        Binding folded(slots_);
        bool any = false;
        for (NodeId c : candidates(child, n)) any = collect(child, c, folded) || any;
        if (!any && !a.optional()) return {};
        options.push_back(std::move(folded));
      } else {
        for (NodeId c : candidates(child, n)) {
          auto sub = expand(child, c);
          std::move(sub.begin(), sub.end(), std::back_inserter(options));
        }
        if (options.empty()) {
          if (!a.optional()) return {};
          options.emplace_back(slots_);
        }
      }
      std::vector<Binding> next;
      next.reserve(results.size() * options.size());
      for (const Binding& r : results) {
        for (const Binding& o : options) {
          Binding m = r;
          merge(m, o);
          next.push_back(std::move(m));
        }
      }
      results = std::move(next);
    }
    return results;
  }

  // Folded mode: adds var := n and every node of var's subtree that takes part
  // in some embedding to acc. Returns false (acc untouched) if none exists.
  bool collect(PatternVar var, NodeId n, Binding& acc) {
    Binding local(slots_);
    local.add(var, n);
    for (PatternVar child : shape_.kids.at(var)) {
      bool found = false;
      for (NodeId c : candidates(child, n)) found = collect(child, c, local) || found;
      if (!found && !shape_.edge(child).annotation.optional()) return false;
    }
    merge(acc, local);
    return true;
  }

  const PatternTree& pt_;
  const DataTree& t_;
  PatternShape shape_;
  std::uint32_t slots_;
  std::unordered_map<std::string, std::vector<NodeId>> by_label_;
};

}  // namespace detail

// Structural matches only; the formula is ignored.
inline std::vector<Binding> embed(const PatternTree& pt, const DataTree& t) {
  return detail::Matcher(pt, t).embed();
}

// Embeddings whose binding satisfies the pattern formula.
inline std::vector<Binding> match(const PatternTree& pt, const DataTree& t) {
  std::vector<Binding> all = embed(pt, t);
  if (pt.formula.is_true()) return all;
  std::vector<Binding> out;
  for (Binding& b : all) {
    if (eval_formula(pt.formula, b, t)) out.push_back(std::move(b));
  }
  return out;
}

struct OracleLimits {
  std::size_t max_pattern_nodes = 8;
  std::size_t max_tree_nodes = 40;
  std::size_t max_tuples = 2'000'000;
};

// Reference matcher: enumerates every variable-to-node tuple (unbound
// included), keeps the structurally valid ones, removes unbound optional
// variables that could have been bound, folds "+"/"*" groups and filters by
// the formula. Shares no code with the engine beyond result normalization.
inline std::vector<Binding> match_oracle(const PatternTree& pt, const DataTree& t, const OracleLimits& limits = {}) {
  const detail::PatternShape shape(pt);
  const std::vector<PatternVar>& vars = shape.order;
  if (vars.size() > limits.max_pattern_nodes) {
    throw OracleLimitError("oracle refuses patterns with more than " + std::to_string(limits.max_pattern_nodes) +
                           " matched nodes (got " + std::to_string(vars.size()) + ")");
  }
  if (t.size() > limits.max_tree_nodes) {
    throw OracleLimitError("oracle refuses trees with more than " + std::to_string(limits.max_tree_nodes) +
                           " nodes (got " + std::to_string(t.size()) + ")");
  }
  const std::size_t k = vars.size();
  std::map<PatternVar, std::size_t> pos;
  for (std::size_t i = 0; i < k; ++i) pos[vars[i]] = i;
  std::vector<std::optional<std::size_t>> parent_pos(k);
  for (std::size_t i = 1; i < k; ++i) parent_pos[i] = pos.at(*pt.at(vars[i]).parent);

  auto related = [&t](EdgeKind kind, NodeId upper, NodeId lower) {
    std::optional<NodeId> p = t.parent(lower);
    if (kind == EdgeKind::pc) return p == upper;
    for (; p; p = t.parent(*p)) {
      if (*p == upper) return true;
    }
    return false;
  };

  using Tuple = std::vector<std::optional<NodeId>>;
  std::vector<Tuple> tuples;
  Tuple cur(k);
  auto enumerate = [&](auto&& self, std::size_t i) -> void {
    if (i == k) {
      if (tuples.size() >= limits.max_tuples) throw OracleLimitError("oracle tuple budget exhausted");
      tuples.push_back(cur);
      return;
    }
    const bool parent_unbound = i > 0 && !cur[*parent_pos[i]];
    const bool may_be_unbound = i > 0 && (parent_unbound || shape.edge(vars[i]).annotation.optional());
    if (may_be_unbound) {
      cur[i] = std::nullopt;
      self(self, i + 1);
    }
    if (parent_unbound) return;
    for (const DataNode& dn : t.nodes()) {
      if (!shape.label_ok(vars[i], t, dn.id)) continue;
      if (i > 0 && !related(shape.edge(vars[i]).kind, *cur[*parent_pos[i]], dn.id)) continue;
      cur[i] = dn.id;
      self(self, i + 1);
    }
    cur[i] = std::nullopt;
  };
  enumerate(enumerate, 0);

  // Maximality of unbound optional variables.
  std::vector<std::vector<bool>> inside(k, std::vector<bool>(k, false));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      for (std::optional<std::size_t> a = j; a; a = parent_pos[*a]) {
        if (*a == i) {
          inside[i][j] = true;
          break;
        }
      }
    }
  }
  auto outside_key = [&](const Tuple& tup, std::size_t c) {
    Tuple key;
    for (std::size_t j = 0; j < k; ++j) key.push_back(inside[c][j] ? std::nullopt : tup[j]);
    return key;
  };
  std::vector<bool> dropped(tuples.size(), false);
  for (std::size_t c = 1; c < k; ++c) {
    if (!shape.edge(vars[c]).annotation.optional()) continue;
    std::set<Tuple> has_bound;
    for (const Tuple& tup : tuples) {
      if (tup[c]) has_bound.insert(outside_key(tup, c));
    }
    for (std::size_t i = 0; i < tuples.size(); ++i) {
      const Tuple& tup = tuples[i];
      if (!tup[c] && tup[*parent_pos[c]] && has_bound.count(outside_key(tup, c))) dropped[i] = true;
    }
  }

  // Fold grouped variables over tuples sharing all ungrouped values.
  std::map<Tuple, Binding> groups;
  for (std::size_t i = 0; i < tuples.size(); ++i) {
    if (dropped[i]) continue;
    Tuple key;
    for (std::size_t j = 0; j < k; ++j) key.push_back(shape.grouped.at(vars[j]) ? std::nullopt : tuples[i][j]);
    auto [it, fresh] = groups.try_emplace(key, Binding(pt.slot_count()));
    for (std::size_t j = 0; j < k; ++j) {
      if (!tuples[i][j]) continue;
      auto& slot = it->second.slot(vars[j]);
      if (std::find(slot.begin(), slot.end(), *tuples[i][j]) == slot.end()) slot.push_back(*tuples[i][j]);
    }
  }

  std::vector<Binding> out;
  for (auto& [key, b] : groups) {
    if (eval_formula(pt.formula, b, t)) out.push_back(std::move(b));
  }
  detail::normalize(pt, t, out);
  return out;
}

namespace detail {

inline void check_binding(const PatternTree& pt, const detail::PatternShape& shape, const Binding& b,
                          const DataTree& t) {
  for (std::uint32_t i = 0; i < b.slot_count(); ++i) {
    const PatternVar v{i};
    const auto nodes = b.nodes(v);
    if (nodes.empty()) continue;
    const PatternNode* pn = pt.find(v);
    if (!pn) throw ConsistencyError("binding assigns " + v.name() + ", which the pattern does not declare");
    if (pn->computed) throw ConsistencyError("binding assigns computed node " + v.name());
    for (NodeId n : nodes) {
      if (!t.contains(n)) throw ConsistencyError("binding of " + v.name() + " names a node absent from the tree");
      if (!shape.label_ok(v, t, n)) throw ConsistencyError("binding of " + v.name() + " violates its label test");
    }
    if (!pn->parent) continue;
    const auto parents = b.nodes(*pn->parent);
    for (NodeId n : nodes) {
      const bool ok = std::any_of(parents.begin(), parents.end(), [&](NodeId p) {
        return pn->edge->kind == EdgeKind::pc ? t.parent(n) == p : t.is_proper_ancestor(p, n);
      });
      if (!ok) throw ConsistencyError("binding of " + v.name() + " breaks its edge to " + pn->parent->name());
    }
  }
  for (PatternVar v : shape.order) {
    if (v == pt.root || shape.grouped.at(v)) continue;
    const PatternNode& pn = pt.at(v);
    if (b.bound(*pn.parent) && !b.bound(v) && !pn.edge->annotation.optional()) {
      throw ConsistencyError("binding leaves mandatory " + v.name() + " unbound");
    }
  }
  if (!b.bound(pt.root)) throw ConsistencyError("binding leaves the pattern root unbound");
}

inline void copy_subtree(TreeBuilder& out, NodeId into, const DataTree& t, NodeId n) {
  for (NodeId c : t.node(n).children) {
    const DataNode& dn = t.node(c);
    copy_subtree(out, out.add(into, dn.label, dn.value), t, c);
  }
}

}  // namespace detail

// Witness tree: a synthetic root labeled like the pattern root ("witness" for
// a wildcard root), holding for each binding in order a copy of every bound
// output node. An output node nests under the copy of its nearest output
// pattern ancestor. Output nodes with no output pattern descendants carry
// their full data subtree; the others carry only their value and attributes.
// Bound attributes whose witness parent is not their own element go on a
// label-only copy of that element.
inline DataTree build_witness(const PatternTree& pt, const std::vector<Binding>& bindings, const DataTree& t) {
  const detail::PatternShape shape(pt);
  const PatternNode& root = pt.at(pt.root);
  TreeBuilder out(root.label.value_or("witness"));

  std::map<PatternVar, std::optional<PatternVar>> output_parent;
  std::map<PatternVar, bool> interior;
  std::map<PatternVar, std::size_t> pattern_rank;
  for (std::size_t i = 0; i < shape.order.size(); ++i) pattern_rank[shape.order[i]] = i;
  for (PatternVar v : shape.order) {
    if (v == pt.root) continue;
    std::optional<PatternVar> up = pt.at(v).parent;
    while (up && *up != pt.root && !pt.at(*up).output) up = pt.at(*up).parent;
    output_parent[v] = (up && *up != pt.root) ? up : std::nullopt;
    if (pt.at(v).output && output_parent[v]) interior[*output_parent[v]] = true;
  }

  std::map<NodeId, std::set<std::string>> attributes;  // names already on each witness node
  std::map<NodeId, NodeId> source;                      // witness copy -> data node
  std::map<std::pair<NodeId, NodeId>, NodeId> stubs;    // (witness parent, owner) -> stub

  struct Entry {
    PatternVar var;
    NodeId node;
    std::optional<std::size_t> parent;  // index into entries
  };

  for (const Binding& b : bindings) {
    detail::check_binding(pt, shape, b, t);
    std::vector<Entry> entries;
    std::map<std::pair<PatternVar, NodeId>, std::size_t> index;
    for (PatternVar v : shape.order) {
      if (v == pt.root || !pt.at(v).output) continue;
      for (NodeId n : b.nodes(v)) {
        std::optional<std::size_t> parent;
        if (auto up = output_parent.at(v)) {
          std::optional<NodeId> best;
          for (NodeId cand : b.nodes(*up)) {
            if (t.is_proper_ancestor(cand, n) && (!best || t.is_proper_ancestor(*best, cand))) best = cand;
          }
          if (best) parent = index.at({*up, *best});
        }
        index[{v, n}] = entries.size();
        entries.push_back({v, n, parent});
      }
    }
    auto sort_key = [&](std::size_t i) {
      const Entry& e = entries[i];
      const bool ordered = pt.at(e.var).edge->annotation.ordered;
      return std::make_tuple(ordered ? 0 : 1, ordered ? pattern_rank.at(e.var) : 0, t.preorder_rank(e.node),
                             e.var.index);
    };
    auto emit = [&](auto&& self, std::optional<std::size_t> parent, NodeId into) -> void {
      std::vector<std::size_t> kids;
      for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].parent == parent) kids.push_back(i);
      }
      std::sort(kids.begin(), kids.end(), [&](std::size_t a, std::size_t c) { return sort_key(a) < sort_key(c); });
      for (std::size_t i : kids) {
        const DataNode& dn = t.node(entries[i].node);
        if (is_attribute_label(dn.label)) {
          // An attribute sits on a copy of its own element: the witness parent
          // itself when that copies the owner, otherwise a label-only stub.
          const NodeId owner = *t.parent(dn.id);
          NodeId holder = into;
          auto src = source.find(into);
          if (src == source.end() || src->second != owner) {
            auto [stub, fresh] = stubs.try_emplace({into, owner}, into);
            if (fresh) stub->second = out.add(into, t.node(owner).label);
            holder = stub->second;
          }
          if (attributes[holder].insert(dn.label).second) out.add(holder, dn.label, dn.value);
          continue;
        }
        const NodeId copy = out.add(into, dn.label, dn.value);
        source[copy] = dn.id;
        if (interior.count(entries[i].var)) {
          for (NodeId c : dn.children) {
            if (!is_attribute_label(t.node(c).label)) continue;
            attributes[copy].insert(t.node(c).label);
            out.add(copy, t.node(c).label, t.node(c).value);
          }
          self(self, i, copy);
        } else {
          detail::copy_subtree(out, copy, t, entries[i].node);
        }
      }
    };
    emit(emit, std::nullopt, out.root());
  }
  return out.build();
}

// [{"$1": "/doc/book[1]", ...}, ...]; variables under "+"/"*" edges map to
// arrays, unbound variables to null, computed variables are omitted.
inline nlohmann::json bindings_to_json(const PatternTree& pt, const std::vector<Binding>& bindings,
                                       const DataTree& t) {
  using nlohmann::json;
  const detail::PatternShape shape(pt);
  std::vector<PatternVar> vars = shape.order;
  std::sort(vars.begin(), vars.end());
  json out = json::array();
  for (const Binding& b : bindings) {
    json row = json::object();
    for (PatternVar v : vars) {
      const auto nodes = b.nodes(v);
      if (shape.grouped.at(v)) {
        json arr = json::array();
        for (NodeId n : nodes) arr.push_back(t.path(n));
        row[v.name()] = arr;
      } else {
        row[v.name()] = nodes.empty() ? json(nullptr) : json(t.path(nodes.front()));
      }
    }
    out.push_back(row);
  }
  return out;
}

}  // namespace xolap
