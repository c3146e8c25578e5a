#include "doctest.h"
#include "lap/errors.hpp"
#include "lap/rng.hpp"
#include "lap/scfg.hpp"
#include "lap/sexpr.hpp"

using namespace lap;

TEST_SUITE_BEGIN("sexpr");

TEST_CASE("parse basic forms") {
  LogicalForm lf = parse_sexpr("(field parent john)");
  CHECK(lf.head == "field");
  REQUIRE(lf.children.size() == 2);
  CHECK(lf.children[0] == LogicalForm{"parent", {}});
  CHECK(lf.children[1] == LogicalForm{"john", {}});

  CHECK(parse_sexpr("john") == LogicalForm{"john", {}});

  LogicalForm nested = parse_sexpr("(field parent (field friend john))");
  CHECK(depth(nested) == 3);
  CHECK(nested.children[1].head == "field");

  // whitespace-insensitive between tokens
  CHECK(parse_sexpr("  ( field   parent\n john )") == lf);
}

TEST_CASE("parse errors") {
  CHECK_THROWS_AS(parse_sexpr("(field parent"), MalformedExpression);
  CHECK_THROWS_AS(parse_sexpr("(field) x"), MalformedExpression);
  CHECK_THROWS_AS(parse_sexpr("()"), MalformedExpression);
  CHECK_THROWS_AS(parse_sexpr(""), MalformedExpression);
  CHECK_THROWS_AS(parse_sexpr("john mary"), MalformedExpression);
  CHECK_THROWS_AS(parse_sexpr(")john"), MalformedExpression);
}

TEST_CASE("render canonical form") {
  LogicalForm lf{"field", {{"friend", {}}, {"john", {}}}};
  CHECK(render_sexpr(lf) == "(field friend john)");
  CHECK(render_sexpr(LogicalForm{"john", {}}) == "john");
}

TEST_CASE("round trip on sampled forms") {
  Grammar g = sample_person_grammar();
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    Example e = sample_example(g, rng, 4);
    std::string text = render_sexpr(e.logical_form);
    CHECK(parse_sexpr(text) == e.logical_form);
    CHECK(render_sexpr(parse_sexpr(text)) == text);
  }
}

TEST_CASE("tokenize with spans") {
  LogicalForm lf = parse_sexpr("(field parent john)");
  TokenSpan ts = tokenize_lf(lf);
  CHECK(ts.tokens == std::vector<std::string>{"(", "field", "parent", "john", ")"});
  CHECK(ts.node_spans.at(NodePath{}) == TokenRange{1, 5});
  CHECK(ts.node_spans.at(NodePath{0}) == TokenRange{3, 3});
  // the representation for the subtree john is just column 4
  CHECK(ts.node_spans.at(NodePath{1}) == TokenRange{4, 4});

  TokenSpan leaf = tokenize_lf(LogicalForm{"john", {}});
  CHECK(leaf.tokens == std::vector<std::string>{"john"});
  CHECK(leaf.node_spans.at(NodePath{}) == TokenRange{1, 1});

  // hand-counted: ( field parent ( field friend john ) )
  TokenSpan deep = tokenize_lf(parse_sexpr("(field parent (field friend john))"));
  CHECK(deep.tokens.size() == 9);
  CHECK(deep.node_spans.at(NodePath{1}) == TokenRange{4, 8});
}

TEST_CASE("span partition property") {
  Grammar g = sample_person_grammar();
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    Example e = sample_example(g, rng, 4);
    TokenSpan ts = tokenize_lf(e.logical_form);
    CHECK(ts.node_spans.at(NodePath{}) == TokenRange{1, int(ts.tokens.size())});
    for (const auto& [path, range] : ts.node_spans) {
      const LogicalForm& node = subtree_at(e.logical_form, path);
      if (node.is_leaf()) {
        CHECK(range.first == range.last);
        continue;
      }
      // node span = '(' + head + children spans + ')', contiguous
      int expect = range.first + 2;
      for (size_t c = 0; c < node.children.size(); ++c) {
        NodePath cp = path;
        cp.push_back(int(c));
        TokenRange cr = ts.node_spans.at(cp);
        CHECK(cr.first == expect);
        expect = cr.last + 1;
      }
      CHECK(expect == range.last);
    }
  }
}

TEST_CASE("lf_equal") {
  CHECK(lf_equal(parse_sexpr("(field parent john)"), parse_sexpr("(field parent john)")));
  CHECK_FALSE(lf_equal(parse_sexpr("(field parent john)"), parse_sexpr("(field friend john)")));
  // the exact-match metric example flows through parse and compare
  std::string s = "(field (relation parent) (person john))";
  CHECK(lf_equal(parse_sexpr(s), parse_sexpr(render_sexpr(parse_sexpr(s)))));
}

TEST_CASE("replace_subtree") {
  LogicalForm lf = parse_sexpr("(field friend john)");
  LogicalForm out = replace_subtree(lf, NodePath{1}, LogicalForm{"mary", {}});
  CHECK(render_sexpr(out) == "(field friend mary)");
  CHECK(render_sexpr(lf) == "(field friend john)");  // original untouched

  CHECK(replace_subtree(lf, NodePath{}, LogicalForm{"x", {}}) == LogicalForm{"x", {}});

  LogicalForm deep = parse_sexpr("(field parent (field friend john))");
  CHECK(render_sexpr(replace_subtree(deep, NodePath{1}, LogicalForm{"mary", {}})) ==
        "(field parent mary)");

  CHECK_THROWS_AS(replace_subtree(lf, NodePath{5}, lf), NodeNotFound);
}

TEST_CASE("replace_subtree token arithmetic") {
  Grammar g = sample_person_grammar();
  Rng rng(23);
  for (int i = 0; i < 100; ++i) {
    Example e = sample_example(g, rng, 4);
    Example sub = sample_example(g, rng, 3);
    TokenSpan ts = tokenize_lf(e.logical_form);
    // pick a deterministic node: last entry of span map
    NodePath at = ts.node_spans.rbegin()->first;
    TokenRange r = ts.node_spans.at(at);
    LogicalForm swapped = replace_subtree(e.logical_form, at, sub.logical_form);
    int expect = int(ts.tokens.size()) - (r.last - r.first + 1) +
                 int(tokenize_lf(sub.logical_form).tokens.size());
    CHECK(int(tokenize_lf(swapped).tokens.size()) == expect);
  }
}

TEST_CASE("depth") {
  CHECK(depth(parse_sexpr("john")) == 1);
  CHECK(depth(parse_sexpr("(field friend john)")) == 2);
  CHECK(depth(parse_sexpr("(field parent (field friend john))")) == 3);
}

TEST_SUITE_END();
