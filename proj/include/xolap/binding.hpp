#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "xolap/xmltree.hpp"

namespace xolap {

// Pattern variable "$n".
struct PatternVar {
  std::uint32_t index = 0;

  std::string name() const { return "$" + std::to_string(index); }

  friend constexpr auto operator<=>(PatternVar, PatternVar) = default;
};

// Assignment of pattern variables to data nodes. A slot holds zero nodes
// (unbound: optional edge without a match, or a computed node), one node, or
// for variables under "+"/"*" edges the matched nodes in document order.
class Binding {
 public:
  Binding() = default;
  explicit Binding(std::size_t slots) : slots_(slots) {}

  std::size_t slot_count() const noexcept { return slots_.size(); }

  std::span<const NodeId> nodes(PatternVar v) const noexcept {
    if (v.index >= slots_.size()) return {};
    return slots_[v.index];
  }

  bool bound(PatternVar v) const noexcept { return !nodes(v).empty(); }

  void assign(PatternVar v, std::vector<NodeId> nodes) {
    grow(v);
    slots_[v.index] = std::move(nodes);
  }

  void add(PatternVar v, NodeId n) {
    grow(v);
    slots_[v.index].push_back(n);
  }

  std::vector<NodeId>& slot(PatternVar v) {
    grow(v);
    return slots_[v.index];
  }

  const std::vector<std::vector<NodeId>>& slots() const noexcept { return slots_; }

  friend bool operator==(const Binding&, const Binding&) = default;
  friend auto operator<=>(const Binding& a, const Binding& b) { return a.slots_ <=> b.slots_; }

 private:
  void grow(PatternVar v) {
    if (v.index >= slots_.size()) slots_.resize(v.index + 1);
  }

  std::vector<std::vector<NodeId>> slots_;
};

}  // namespace xolap
