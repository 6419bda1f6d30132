#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <iterator>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "xolap/error.hpp"

namespace xolap {

struct NodeId {
  std::uint32_t value = 0;

  friend constexpr auto operator<=>(NodeId, NodeId) = default;
};

// Element or attribute. Attributes are leaves labeled "@" + name.
struct DataNode {
  NodeId id;
  std::string label;
  std::optional<std::string> value;
  std::vector<NodeId> children;
};

inline bool is_attribute_label(std::string_view label) {
  return !label.empty() && label.front() == '@';
}

namespace detail {

inline bool is_name_start(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c == ':' || c >= 0x80;
}

inline bool is_name_char(unsigned char c) {
  return is_name_start(c) || (c >= '0' && c <= '9') || c == '-' || c == '.';
}

inline bool is_xml_name(std::string_view s) {
  if (s.empty() || !is_name_start(static_cast<unsigned char>(s.front()))) return false;
  return std::all_of(s.begin(), s.end(),
                     [](char c) { return is_name_char(static_cast<unsigned char>(c)); });
}

inline bool is_xml_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

inline std::string trim(std::string_view s) {
  while (!s.empty() && is_xml_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_xml_space(s.back())) s.remove_suffix(1);
  return std::string(s);
}

}  // namespace detail

// Immutable ordered labeled tree. Node identities are fixed at construction;
// trees produced by the parser and TreeBuilder number nodes densely in
// document order, but arbitrary id sets (e.g. subtree candidates) are allowed.
class DataTree {
 public:
  DataTree(NodeId root, std::vector<DataNode> nodes) : root_(root), nodes_(std::move(nodes)) {
    std::sort(nodes_.begin(), nodes_.end(),
              [](const DataNode& a, const DataNode& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < nodes_.size(); ++i) {
      if (nodes_[i - 1].id == nodes_[i].id) {
        throw InvariantError("duplicate node id " + std::to_string(nodes_[i].id.value));
      }
    }
    dense_ = std::all_of(nodes_.begin(), nodes_.end(), [this](const DataNode& n) {
      return n.id.value == static_cast<std::uint32_t>(&n - nodes_.data());
    });
    index();
  }

  NodeId root() const noexcept { return root_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Nodes ordered by id.
  std::span<const DataNode> nodes() const noexcept { return nodes_; }

  bool contains(NodeId id) const noexcept { return slot(id).has_value(); }

  const DataNode& node(NodeId id) const { return nodes_[at(id)]; }

  std::optional<NodeId> parent(NodeId id) const {
    const std::size_t p = parent_[at(id)];
    if (p == kNone) return std::nullopt;
    return nodes_[p].id;
  }

  // All nodes in document (pre)order.
  std::span<const NodeId> preorder() const noexcept { return preorder_; }

  std::size_t preorder_rank(NodeId id) const { return rank_[at(id)]; }

  // Number of nodes in the subtree rooted at id, id included.
  std::size_t subtree_size(NodeId id) const { return extent_[at(id)]; }

  bool is_proper_ancestor(NodeId ancestor, NodeId descendant) const {
    const std::size_t a = at(ancestor);
    const std::size_t d = at(descendant);
    return rank_[a] < rank_[d] && rank_[d] < rank_[a] + extent_[a];
  }

  std::size_t depth(NodeId id) const {
    std::size_t d = 0;
    for (std::size_t i = at(id); parent_[i] != kNone; i = parent_[i]) ++d;
    return d;
  }

  // Element text if present, otherwise the value of a "name" attribute,
  // otherwise empty. Level elements in hierarchies are commonly encoded as
  // <C1 name="Software"/>; this lets both encodings read the same way.
  std::string_view effective_value(NodeId id) const {
    const DataNode& n = node(id);
    if (n.value && !n.value->empty()) return *n.value;
    for (NodeId c : n.children) {
      const DataNode& child = node(c);
      if (child.label == "@name" && child.value) return *child.value;
    }
    return {};
  }

  std::optional<NodeId> attribute(NodeId id, std::string_view name) const {
    for (NodeId c : node(id).children) {
      const DataNode& child = node(c);
      if (is_attribute_label(child.label) && std::string_view(child.label).substr(1) == name) {
        return c;
      }
    }
    return std::nullopt;
  }

  // Absolute child-index path, e.g. "/doc/book[2]/title[1]" or ".../@x".
  std::string path(NodeId id) const {
    std::vector<std::string> steps;
    for (std::optional<NodeId> cur = id; cur; cur = parent(*cur)) {
      const DataNode& n = node(*cur);
      const std::optional<NodeId> p = parent(*cur);
      if (!p || is_attribute_label(n.label)) {
        steps.push_back(n.label);
        continue;
      }
      std::size_t k = 0;
      for (NodeId s : node(*p).children) {
        if (node(s).label == n.label) ++k;
        if (s == *cur) break;
      }
      steps.push_back(n.label + "[" + std::to_string(k) + "]");
    }
    std::string out;
    for (auto it = steps.rbegin(); it != steps.rend(); ++it) out += "/" + *it;
    return out;
  }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  std::optional<std::size_t> slot(NodeId id) const noexcept {
    if (dense_) {
      if (id.value < nodes_.size()) return id.value;
      return std::nullopt;
    }
    auto it = std::lower_bound(nodes_.begin(), nodes_.end(), id,
                               [](const DataNode& n, NodeId v) { return n.id < v; });
    if (it == nodes_.end() || it->id != id) return std::nullopt;
    return static_cast<std::size_t>(it - nodes_.begin());
  }

  std::size_t at(NodeId id) const {
    auto s = slot(id);
    if (!s) throw LookupError("unknown node id " + std::to_string(id.value));
    return *s;
  }

  void index() {
    const std::size_t n = nodes_.size();
    if (n == 0) throw InvariantError("tree has no nodes");
    if (!slot(root_)) throw InvariantError("root id not among nodes");
    parent_.assign(n, kNone);
    for (std::size_t i = 0; i < n; ++i) {
      const DataNode& dn = nodes_[i];
      if (dn.label.empty()) throw InvariantError("node " + std::to_string(dn.id.value) + " has empty label");
      const std::string_view name =
          is_attribute_label(dn.label) ? std::string_view(dn.label).substr(1) : std::string_view(dn.label);
      if (!detail::is_xml_name(name)) throw InvariantError("label '" + dn.label + "' is not an XML name");
      if (is_attribute_label(dn.label) && !dn.children.empty()) {
        throw InvariantError("attribute node '" + dn.label + "' has children");
      }
      std::unordered_set<std::string_view> attrs;
      for (NodeId c : dn.children) {
        auto s = slot(c);
        if (!s) throw InvariantError("child id " + std::to_string(c.value) + " does not exist");
        if (parent_[*s] != kNone) throw InvariantError("node " + std::to_string(c.value) + " has two parents");
        if (c == root_) throw InvariantError("root appears as a child");
        parent_[*s] = i;
        const std::string& cl = nodes_[*s].label;
        if (is_attribute_label(cl) && !attrs.insert(cl).second) {
          throw InvariantError("duplicate attribute '" + cl + "'");
        }
      }
    }
    if (is_attribute_label(node(root_).label)) throw InvariantError("root is an attribute");

    rank_.assign(n, 0);
    extent_.assign(n, 1);
    preorder_.clear();
    preorder_.reserve(n);
    std::vector<std::pair<std::size_t, std::size_t>> stack{{*slot(root_), 0}};
    rank_[stack.back().first] = 0;
    preorder_.push_back(root_);
    while (!stack.empty()) {
      auto& [i, next] = stack.back();
      if (next < nodes_[i].children.size()) {
        const std::size_t c = *slot(nodes_[i].children[next++]);
        rank_[c] = preorder_.size();
        preorder_.push_back(nodes_[c].id);
        stack.emplace_back(c, 0);
      } else {
        const std::size_t done = i;
        stack.pop_back();
        if (!stack.empty()) extent_[stack.back().first] += extent_[done];
      }
    }
    if (preorder_.size() != n) throw InvariantError("nodes unreachable from root (forest or cycle)");
  }

  NodeId root_;
  std::vector<DataNode> nodes_;
  bool dense_ = false;
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> rank_;
  std::vector<std::size_t> extent_;
  std::vector<NodeId> preorder_;
};

// Appends nodes with dense ids in creation order. Creating children in
// document order yields ids equal to preorder ranks.
class TreeBuilder {
 public:
  explicit TreeBuilder(std::string root_label, std::optional<std::string> value = std::nullopt) {
    nodes_.push_back(DataNode{NodeId{0}, std::move(root_label), std::move(value), {}});
  }

  NodeId root() const noexcept { return NodeId{0}; }

  NodeId add(NodeId parent, std::string label, std::optional<std::string> value = std::nullopt) {
    if (parent.value >= nodes_.size()) throw LookupError("unknown parent id " + std::to_string(parent.value));
    const NodeId id{static_cast<std::uint32_t>(nodes_.size())};
    nodes_.push_back(DataNode{id, std::move(label), std::move(value), {}});
    nodes_[parent.value].children.push_back(id);
    return id;
  }

  NodeId add_attribute(NodeId parent, std::string_view name, std::string value) {
    return add(parent, "@" + std::string(name), std::move(value));
  }

  void set_value(NodeId id, std::optional<std::string> value) {
    if (id.value >= nodes_.size()) throw LookupError("unknown node id " + std::to_string(id.value));
    nodes_[id.value].value = std::move(value);
  }

  DataTree build() const { return DataTree(NodeId{0}, nodes_); }

 private:
  std::vector<DataNode> nodes_;
};

namespace detail {

class XmlReader {
 public:
  explicit XmlReader(std::string_view in) : in_(in) {}

  DataTree run() {
    check_utf8();
    if (in_.substr(0, 3) == "\xEF\xBB\xBF") pos_ = 3;
    if (starts_with("<?xml") && pos_ + 5 < in_.size() && is_xml_space(in_[pos_ + 5])) declaration();
    misc();
    if (eof() || peek() != '<') fail("expected root element");
    builder_.reset();
    element(std::nullopt);
    misc();
    if (!eof()) fail("content after root element");
    return builder_->build();
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { fail_at(msg, pos_); }

  [[noreturn]] void fail_at(const std::string& msg, std::size_t at) const {
    auto [line, col] = locate(at);
    throw ParseError(msg, line, col);
  }

  [[noreturn]] void unsupported(const std::string& what) const {
    auto [line, col] = locate(pos_);
    throw UnsupportedConstructError(what, line, col);
  }

  std::pair<std::size_t, std::size_t> locate(std::size_t at) const {
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i < at && i < in_.size(); ++i) {
      if (in_[i] == '\n') {
        ++line;
        col = 1;
      } else if ((static_cast<unsigned char>(in_[i]) & 0xC0) != 0x80) {
        ++col;
      }
    }
    return {line, col};
  }

  void check_utf8() const {
    std::size_t i = 0;
    while (i < in_.size()) {
      const auto c = static_cast<unsigned char>(in_[i]);
      std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 0;
      if (len == 0 || i + len > in_.size()) fail_at("invalid UTF-8", i);
      for (std::size_t k = 1; k < len; ++k) {
        if ((static_cast<unsigned char>(in_[i + k]) & 0xC0) != 0x80) fail_at("invalid UTF-8", i);
      }
      i += len;
    }
  }

  bool eof() const { return pos_ >= in_.size(); }
  char peek() const { return in_[pos_]; }
  bool starts_with(std::string_view s) const { return in_.substr(pos_, s.size()) == s; }

  void expect(std::string_view s) {
    if (!starts_with(s)) fail("expected '" + std::string(s) + "'");
    pos_ += s.size();
  }

  void skip_space() {
    while (!eof() && is_xml_space(peek())) ++pos_;
  }

  std::string name() {
    const std::size_t start = pos_;
    if (eof() || !is_name_start(static_cast<unsigned char>(peek()))) fail("expected a name");
    while (!eof() && is_name_char(static_cast<unsigned char>(peek()))) ++pos_;
    return std::string(in_.substr(start, pos_ - start));
  }

  void declaration() {
    pos_ += 5;
    const std::size_t end = in_.find("?>", pos_);
    if (end == std::string_view::npos) fail("unterminated XML declaration");
    const std::string_view body = in_.substr(pos_, end - pos_);
    const std::size_t enc = body.find("encoding");
    if (enc != std::string_view::npos) {
      std::size_t q = body.find_first_of("\"'", enc);
      if (q != std::string_view::npos) {
        const std::size_t qe = body.find(body[q], q + 1);
        std::string e(body.substr(q + 1, qe == std::string_view::npos ? 0 : qe - q - 1));
        std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
        if (e != "utf-8" && e != "utf8") unsupported("encoding " + e);
      }
    }
    pos_ = end + 2;
  }

  void comment() {
    pos_ += 4;
    const std::size_t end = in_.find("-->", pos_);
    if (end == std::string_view::npos) fail("unterminated comment");
    pos_ = end + 3;
  }

  // Whitespace, comments; rejects DTDs and processing instructions.
  void misc() {
    for (;;) {
      skip_space();
      if (starts_with("<!--")) {
        comment();
      } else if (starts_with("<!DOCTYPE")) {
        unsupported("DTD");
      } else if (starts_with("<?")) {
        unsupported("processing instruction");
      } else {
        return;
      }
    }
  }

  void append_codepoint(std::string& out, std::uint32_t cp) {
    if (cp == 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) fail("invalid character reference");
    if (cp < 0x80) {
      out += static_cast<char>(cp);
    } else if (cp < 0x800) {
      out += static_cast<char>(0xC0 | (cp >> 6));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
      out += static_cast<char>(0xE0 | (cp >> 12));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
      out += static_cast<char>(0xF0 | (cp >> 18));
      out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    }
  }

  void reference(std::string& out) {
    const std::size_t start = pos_;
    const std::size_t end = in_.find(';', pos_);
    if (end == std::string_view::npos || end - pos_ > 12) fail("malformed entity reference");
    const std::string_view ent = in_.substr(pos_ + 1, end - pos_ - 1);
    pos_ = end + 1;
    if (ent == "lt") out += '<';
    else if (ent == "gt") out += '>';
    else if (ent == "amp") out += '&';
    else if (ent == "quot") out += '"';
    else if (ent == "apos") out += '\'';
    else if (ent.size() > 1 && ent[0] == '#') {
      const bool hex = ent[1] == 'x';
      const std::string_view digits = ent.substr(hex ? 2 : 1);
      if (digits.empty()) fail_at("malformed character reference", start);
      std::uint32_t cp = 0;
      for (char c : digits) {
        int d;
        if (c >= '0' && c <= '9') d = c - '0';
        else if (hex && c >= 'a' && c <= 'f') d = c - 'a' + 10;
        else if (hex && c >= 'A' && c <= 'F') d = c - 'A' + 10;
        else fail_at("malformed character reference", start);
        cp = cp * (hex ? 16 : 10) + static_cast<std::uint32_t>(d);
        if (cp > 0x10FFFF) fail_at("invalid character reference", start);
      }
      append_codepoint(out, cp);
    } else {
      fail_at("unknown entity '&" + std::string(ent) + ";'", start);
    }
  }

  std::string attribute_value() {
    if (eof() || (peek() != '"' && peek() != '\'')) fail("expected quoted attribute value");
    const char quote = in_[pos_++];
    std::string out;
    while (!eof() && peek() != quote) {
      const char c = peek();
      if (c == '<') fail("'<' in attribute value");
      if (c == '&') {
        reference(out);
      } else if (c == '\r' || c == '\n' || c == '\t') {
        out += ' ';
        pos_ += (c == '\r' && starts_with("\r\n")) ? 2 : 1;
      } else {
        out += c;
        ++pos_;
      }
    }
    if (eof()) fail("unterminated attribute value");
    ++pos_;
    return out;
  }

  void element(std::optional<NodeId> parent) {
    const std::size_t open_at = pos_;
    expect("<");
    const std::string label = name();
    NodeId self;
    if (!parent) {
      builder_.emplace(label);
      self = builder_->root();
    } else {
      self = builder_->add(*parent, label);
    }
    std::unordered_set<std::string> seen;
    for (;;) {
      const bool had_space = !eof() && is_xml_space(peek());
      skip_space();
      if (eof()) fail("unterminated start tag");
      if (starts_with("/>")) {
        pos_ += 2;
        return;
      }
      if (peek() == '>') {
        ++pos_;
        break;
      }
      if (!had_space) fail("expected whitespace before attribute");
      const std::size_t attr_at = pos_;
      const std::string attr = name();
      skip_space();
      expect("=");
      skip_space();
      std::string value = attribute_value();
      if (!seen.insert(attr).second) fail_at("duplicate attribute '" + attr + "'", attr_at);
      builder_->add_attribute(self, attr, std::move(value));
    }

    std::string text;
    for (;;) {
      if (eof()) fail_at("unclosed element <" + label + ">", open_at);
      const char c = peek();
      if (c == '<') {
        if (starts_with("</")) {
          pos_ += 2;
          const std::size_t close_at = pos_;
          const std::string closing = name();
          if (closing != label) fail_at("mismatched end tag </" + closing + ">, expected </" + label + ">", close_at);
          skip_space();
          expect(">");
          break;
        }
        if (starts_with("<!--")) {
          comment();
        } else if (starts_with("<![CDATA[")) {
          pos_ += 9;
          const std::size_t end = in_.find("]]>", pos_);
          if (end == std::string_view::npos) fail("unterminated CDATA section");
          text.append(in_.substr(pos_, end - pos_));
          pos_ = end + 3;
        } else if (starts_with("<?")) {
          unsupported("processing instruction");
        } else if (starts_with("<!DOCTYPE")) {
          unsupported("DTD");
        } else if (starts_with("<!")) {
          fail("unexpected markup declaration");
        } else {
          element(self);
        }
      } else if (c == '&') {
        reference(text);
      } else if (c == '\r') {
        text += '\n';
        pos_ += starts_with("\r\n") ? 2 : 1;
      } else {
        if (starts_with("]]>")) fail("']]>' in character data");
        text += c;
        ++pos_;
      }
    }
    std::string value = trim(text);
    if (!value.empty()) builder_->set_value(self, std::move(value));
  }

  std::string_view in_;
  std::size_t pos_ = 0;
  std::optional<TreeBuilder> builder_;
};

inline void escape(std::string& out, std::string_view s, bool in_attribute) {
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += in_attribute ? "&quot;" : "\""; break;
      case '\r': out += "&#13;"; break;
      case '\n': out += in_attribute ? "&#10;" : "\n"; break;
      case '\t': out += in_attribute ? "&#9;" : "\t"; break;
      default: out += c;
    }
  }
}

inline void write_node(std::string& out, const DataTree& t, NodeId id, std::size_t depth) {
  const DataNode& n = t.node(id);
  const std::string indent(2 * depth, ' ');
  out += indent + "<" + n.label;
  std::vector<NodeId> elements;
  for (NodeId c : n.children) {
    const DataNode& child = t.node(c);
    if (is_attribute_label(child.label)) {
      out += " " + child.label.substr(1) + "=\"";
      escape(out, child.value.value_or(""), true);
      out += "\"";
    } else {
      elements.push_back(c);
    }
  }
  const bool has_value = n.value && !n.value->empty();
  if (!has_value && elements.empty()) {
    out += "/>\n";
    return;
  }
  out += ">";
  if (has_value) escape(out, *n.value, false);
  if (elements.empty()) {
    out += "</" + n.label + ">\n";
    return;
  }
  out += "\n";
  for (NodeId c : elements) write_node(out, t, c, depth + 1);
  out += indent + "</" + n.label + ">\n";
}

}  // namespace detail

// Parses the supported XML subset: elements, attributes, character data,
// CDATA and comments. DTDs and processing instructions are rejected; an
// XML declaration is accepted if it does not name a non-UTF-8 encoding.
inline DataTree parse_document(std::string_view input) { return detail::XmlReader(input).run(); }

inline DataTree parse_document(std::istream& in) {
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_document(std::string_view(buf));
}

inline DataTree load_document(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LookupError("cannot open " + path);
  return parse_document(in);
}

// Indented XML; "@" leaves become attributes, a node value is emitted as the
// leading text of its element.
inline std::string serialize(const DataTree& tree) {
  std::string out;
  detail::write_node(out, tree, tree.root(), 0);
  return out;
}

// Proper descendants of n in document order.
inline std::vector<NodeId> descendants(const DataTree& tree, NodeId n) {
  const std::size_t rank = tree.preorder_rank(n);
  auto all = tree.preorder();
  return {all.begin() + static_cast<std::ptrdiff_t>(rank + 1),
          all.begin() + static_cast<std::ptrdiff_t>(rank + tree.subtree_size(n))};
}

// candidate's nodes are a subset of tree's and each of its edges is an edge of tree.
inline bool is_subtree(const DataTree& candidate, const DataTree& tree) {
  for (const DataNode& n : candidate.nodes()) {
    if (!tree.contains(n.id)) return false;
    for (NodeId c : n.children) {
      if (!tree.contains(c) || tree.parent(c) != n.id) return false;
    }
  }
  return true;
}

}  // namespace xolap
