#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "support/generators.hpp"
#include "xolap/xmltree.hpp"

namespace {

using namespace xolap;
using xolap::testing::fixture;
using xolap::testing::project;
using xolap::testing::read_file;

std::vector<std::string> child_labels(const DataTree& t, NodeId n) {
  std::vector<std::string> out;
  for (NodeId c : t.node(n).children) out.push_back(t.node(c).label);
  return out;
}

TEST(ParseDocument, NestedElementsWithText) {
  const DataTree t = parse_document("<doc><book><title>SQL</title></book></doc>");
  ASSERT_EQ(t.size(), 3u);
  EXPECT_EQ(t.node(t.root()).label, "doc");
  const NodeId book = t.node(t.root()).children.at(0);
  EXPECT_EQ(t.node(book).label, "book");
  const NodeId title = t.node(book).children.at(0);
  EXPECT_EQ(t.node(title).label, "title");
  EXPECT_EQ(t.node(title).value, "SQL");
}

TEST(ParseDocument, SingleEmptyElement) {
  const DataTree t = parse_document("<a/>");
  EXPECT_EQ(t.size(), 1u);
  EXPECT_EQ(t.node(t.root()).label, "a");
  EXPECT_FALSE(t.node(t.root()).value.has_value());
  EXPECT_TRUE(t.node(t.root()).children.empty());
}

TEST(ParseDocument, AttributesBecomeLeadingLeaves) {
  const DataTree t = parse_document(R"(<a x="1"><b/></a>)");
  EXPECT_EQ(child_labels(t, t.root()), (std::vector<std::string>{"@x", "b"}));
  EXPECT_EQ(t.node(t.node(t.root()).children[0]).value, "1");
  const DataTree again = parse_document(serialize(t));
  EXPECT_EQ(project(again), project(t));
}

TEST(ParseDocument, TextIsTrimmedConcatenation) {
  const DataTree t = parse_document("<a>\n  hello <!-- note --> world\n  <b/>  !\n</a>");
  EXPECT_EQ(t.node(t.root()).value, "hello  world\n    !");
}

TEST(ParseDocument, EntitiesCdataAndCharacterReferences) {
  const DataTree t = parse_document("<a t=\"&lt;&amp;&quot;\">x &gt; y <![CDATA[<raw>&]]> &#65;&#x263A;</a>");
  EXPECT_EQ(t.node(t.node(t.root()).children[0]).value, "<&\"");
  EXPECT_EQ(t.node(t.root()).value, "x > y <raw>& A\xE2\x98\xBA");
}

TEST(ParseDocument, NamespacePrefixKeptVerbatim) {
  const DataTree t = parse_document(R"(<x:a xmlns:x="urn:x"><x:b/></x:a>)");
  EXPECT_EQ(t.node(t.root()).label, "x:a");
  EXPECT_EQ(child_labels(t, t.root()), (std::vector<std::string>{"@xmlns:x", "x:b"}));
}

TEST(ParseDocument, AcceptsDeclarationAndBom) {
  EXPECT_NO_THROW(parse_document("\xEF\xBB\xBF<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<a/>"));
  EXPECT_NO_THROW(parse_document("<?xml version=\"1.0\"?><a/>"));
}

TEST(ParseDocument, MalformedInputReportsPosition) {
  try {
    parse_document("<a>\n  <b>\n</a>");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_EQ(e.column(), 3u);
    EXPECT_NE(std::string(e.what()).find("mismatched end tag"), std::string::npos);
  }
  for (const char* bad : {"", "<a>", "<a></b>", "<a x=1/>", "<a x='1' x='2'/>", "<a/><b/>", "<a>&bogus;</a>",
                          "<a b='<'/>", "<a>]]></a>", "text", "<a><!-- open</a>", "<a>\xC3</a>", "<1a/>"}) {
    EXPECT_THROW(parse_document(bad), ParseError) << bad;
  }
}

TEST(ParseDocument, RejectsUnsupportedConstructsByName) {
  auto construct_of = [](const char* doc) {
    try {
      parse_document(doc);
    } catch (const UnsupportedConstructError& e) {
      return e.construct();
    }
    return std::string("none");
  };
  EXPECT_EQ(construct_of("<!DOCTYPE a><a/>"), "DTD");
  EXPECT_EQ(construct_of("<?xml-stylesheet href='x'?><a/>"), "processing instruction");
  EXPECT_EQ(construct_of("<a><?php echo 1; ?></a>"), "processing instruction");
  EXPECT_EQ(construct_of("<?xml version='1.0' encoding='ISO-8859-1'?><a/>"), "encoding iso-8859-1");
}

TEST(Serialize, SingleNode) { EXPECT_EQ(serialize(parse_document("<a/>")), "<a/>\n"); }

TEST(Serialize, ValueBeforeChildren) {
  TreeBuilder b("a", "v");
  b.add(b.root(), "b");
  const DataTree t = b.build();
  const std::string xml = serialize(t);
  EXPECT_EQ(xml, "<a>v\n  <b/>\n</a>\n");
  EXPECT_EQ(project(parse_document(xml)), project(t));
}

TEST(Serialize, EscapesMarkup) {
  TreeBuilder b("a", "1 < 2 & 3");
  b.add_attribute(b.root(), "q", "say \"hi\"\n");
  const DataTree t = b.build();
  EXPECT_EQ(project(parse_document(serialize(t))), project(t));
}

TEST(Serialize, FixturesRoundTrip) {
  for (const char* name : {"books.xml", "sales.xml", "sales_simple.xml", "books.witness.xml"}) {
    const DataTree t = parse_document(read_file(fixture(name)));
    const std::string once = serialize(t);
    const DataTree back = parse_document(once);
    EXPECT_EQ(project(back), project(t)) << name;
    EXPECT_EQ(serialize(back), once) << name;
  }
}

TEST(Serialize, RandomTreesRoundTrip) {
  xolap::testing::Random r(7);
  for (int i = 0; i < 300; ++i) {
    const DataTree t = xolap::testing::random_tree(r, r.between(1, 60));
    EXPECT_EQ(project(parse_document(serialize(t))), project(t));
  }
}

TEST(DataTree, RejectsBrokenStructure) {
  auto node = [](std::uint32_t id, std::string label, std::vector<std::uint32_t> kids) {
    DataNode n{NodeId{id}, std::move(label), std::nullopt, {}};
    for (auto k : kids) n.children.push_back(NodeId{k});
    return n;
  };
  EXPECT_THROW(DataTree(NodeId{0}, {node(0, "a", {1, 1}), node(1, "b", {})}), InvariantError);
  EXPECT_THROW(DataTree(NodeId{0}, {node(0, "a", {1}), node(1, "b", {2}), node(2, "c", {1})}), InvariantError);
  EXPECT_THROW(DataTree(NodeId{0}, {node(0, "a", {5})}), InvariantError);
  EXPECT_THROW(DataTree(NodeId{0}, {node(0, "a", {}), node(1, "b", {})}), InvariantError);
  EXPECT_THROW(DataTree(NodeId{0}, {node(0, "", {})}), InvariantError);
  EXPECT_THROW(DataTree(NodeId{0}, {node(0, "a", {1}), node(1, "@x", {2}), node(2, "c", {})}), InvariantError);
  EXPECT_THROW(DataTree(NodeId{0}, {}), InvariantError);
  EXPECT_NO_THROW(DataTree(NodeId{7}, {node(7, "a", {3}), node(3, "b", {})}));
}

TEST(DataTree, EveryNonRootHasExactlyOneParent) {
  xolap::testing::Random r(11);
  for (int i = 0; i < 100; ++i) {
    const DataTree t = xolap::testing::random_tree(r, r.between(1, 50));
    std::vector<int> refs(t.size(), 0);
    for (const DataNode& n : t.nodes()) {
      for (NodeId c : n.children) ++refs[c.value];
    }
    for (const DataNode& n : t.nodes()) EXPECT_EQ(refs[n.id.value], n.id == t.root() ? 0 : 1);
  }
}

TEST(DataTree, PathsUseChildIndexes) {
  const DataTree t = parse_document(read_file(fixture("books.xml")));
  const NodeId second_book = t.node(t.root()).children[1];
  EXPECT_EQ(t.path(t.root()), "/doc");
  EXPECT_EQ(t.path(second_book), "/doc/book[2]");
  EXPECT_EQ(t.path(t.node(second_book).children[0]), "/doc/book[2]/title[1]");
  const DataTree a = parse_document(R"(<a x="1"><b/><c/><b/></a>)");
  EXPECT_EQ(a.path(a.node(a.root()).children[0]), "/a/@x");
  EXPECT_EQ(a.path(a.node(a.root()).children[3]), "/a/b[2]");
}

TEST(Descendants, LeafHasNone) {
  const DataTree t = parse_document("<a><b/></a>");
  EXPECT_TRUE(descendants(t, t.node(t.root()).children[0]).empty());
}

TEST(Descendants, ChainInOrder) {
  const DataTree t = parse_document("<a><b><c/></b></a>");
  const auto d = descendants(t, t.root());
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(t.node(d[0]).label, "b");
  EXPECT_EQ(t.node(d[1]).label, "c");
}

TEST(Descendants, UnknownNodeIsLookupError) {
  const DataTree t = parse_document("<a/>");
  EXPECT_THROW(descendants(t, NodeId{42}), LookupError);
}

// Transitive closure of the children relation, ordered by a plain recursive
// preorder walk.
std::vector<NodeId> closure(const DataTree& t, NodeId n) {
  std::vector<NodeId> out;
  for (NodeId c : t.node(n).children) {
    out.push_back(c);
    for (NodeId d : closure(t, c)) out.push_back(d);
  }
  return out;
}

TEST(Descendants, MatchesClosureOracle) {
  xolap::testing::Random r(3);
  for (int i = 0; i < 200; ++i) {
    const DataTree t = xolap::testing::random_tree(r, r.between(1, 40));
    EXPECT_EQ(descendants(t, t.root()).size(), t.size() - 1);
    for (const DataNode& n : t.nodes()) EXPECT_EQ(descendants(t, n.id), closure(t, n.id));
  }
}

TEST(IsSubtree, Reflexive) {
  const DataTree t = parse_document(read_file(fixture("books.xml")));
  EXPECT_TRUE(is_subtree(t, t));
}

DataTree extract(const DataTree& t, NodeId top) {
  std::vector<DataNode> nodes{t.node(top)};
  for (NodeId d : descendants(t, top)) nodes.push_back(t.node(d));
  return DataTree(top, nodes);
}

TEST(IsSubtree, BookSubtreeOfBooksDocument) {
  const DataTree t = parse_document(read_file(fixture("books.xml")));
  const NodeId book = t.node(t.root()).children[0];
  // The book with title, authors and editor only.
  std::vector<DataNode> nodes;
  DataNode b = t.node(book);
  b.children.resize(3);
  nodes.push_back(b);
  for (NodeId c : b.children) {
    nodes.push_back(t.node(c));
    for (NodeId d : descendants(t, c)) nodes.push_back(t.node(d));
  }
  EXPECT_TRUE(is_subtree(DataTree(book, nodes), t));
  EXPECT_TRUE(is_subtree(extract(t, book), t));
}

TEST(IsSubtree, FabricatedEdgeIsRejected) {
  const DataTree t = parse_document(read_file(fixture("books.xml")));
  const NodeId book = t.node(t.root()).children[0];
  const NodeId title = t.node(book).children[0];
  const NodeId author = descendants(t, t.node(book).children[1])[0];
  DataNode title_node = t.node(title);
  title_node.children = {author};
  DataNode author_node = t.node(author);
  std::vector<DataNode> nodes{title_node, author_node};
  for (NodeId d : descendants(t, author)) nodes.push_back(t.node(d));
  EXPECT_FALSE(is_subtree(DataTree(title, nodes), t));

  // Foreign node id.
  EXPECT_FALSE(is_subtree(DataTree(NodeId{999}, {DataNode{NodeId{999}, "x", std::nullopt, {}}}), t));
}

// Independent check: node-set inclusion plus edge-set inclusion.
TEST(IsSubtree, AgreesWithEdgeSetOracle) {
  xolap::testing::Random r(5);
  for (int i = 0; i < 200; ++i) {
    const DataTree t = xolap::testing::random_tree(r, r.between(2, 30));
    std::set<std::pair<std::uint32_t, std::uint32_t>> edges;
    for (const DataNode& n : t.nodes()) {
      for (NodeId c : n.children) edges.emplace(n.id.value, c.value);
    }
    const DataNode& top = t.nodes()[r.below(t.size())];
    if (is_attribute_label(top.label)) continue;
    DataTree candidate = extract(t, top.id);
    if (r.chance(0.5) && candidate.size() >= 2) {
      // Re-hang the last node under the top: only a real edge if it already was.
      std::vector<DataNode> nodes(candidate.nodes().begin(), candidate.nodes().end());
      const NodeId moved = candidate.preorder().back();
      for (DataNode& n : nodes) {
        std::erase(n.children, moved);
        if (n.id == top.id) n.children.push_back(moved);
      }
      candidate = DataTree(top.id, nodes);
    }
    bool expected = true;
    for (const DataNode& n : candidate.nodes()) {
      for (NodeId c : n.children) expected = expected && edges.count({n.id.value, c.value});
    }
    EXPECT_EQ(is_subtree(candidate, t), expected);
  }
}

TEST(EffectiveValue, FallsBackToNameAttribute) {
  const DataTree t = parse_document(R"(<r><C1 name="Software"/><C2 name="n">text</C2><x/></r>)");
  const auto& kids = t.node(t.root()).children;
  EXPECT_EQ(t.effective_value(kids[0]), "Software");
  EXPECT_EQ(t.effective_value(kids[1]), "text");
  EXPECT_EQ(t.effective_value(kids[2]), "");
}

}  // namespace
