#include "lap/sexpr.hpp"

#include <algorithm>
#include <cctype>

#include "lap/errors.hpp"

namespace lap {

namespace {

bool valid_symbol(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (c == '(' || c == ')' || std::isspace(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

std::vector<std::string> lex(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == '(' || c == ')') {
      if (!cur.empty()) { out.push_back(cur); cur.clear(); }
      out.push_back(std::string(1, c));
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) { out.push_back(cur); cur.clear(); }
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

LogicalForm parse_tokens(const std::vector<std::string>& toks, size_t& pos) {
  if (pos >= toks.size()) throw MalformedExpression("unexpected end of input");
  const std::string& t = toks[pos];
  if (t == ")") throw MalformedExpression("unexpected ')'");
  if (t != "(") {
    ++pos;
    return LogicalForm{t, {}};
  }
  ++pos;  // consume '('
  if (pos >= toks.size() || toks[pos] == "(" || toks[pos] == ")")
    throw MalformedExpression("node requires a head symbol after '('");
  LogicalForm node{toks[pos], {}};
  ++pos;
  while (pos < toks.size() && toks[pos] != ")")
    node.children.push_back(parse_tokens(toks, pos));
  if (pos >= toks.size()) throw MalformedExpression("missing ')'");
  ++pos;  // consume ')'
  if (node.children.empty())
    throw MalformedExpression("node '" + node.head + "' has no children");
  return node;
}

void render_rec(const LogicalForm& lf, std::string& out) {
  if (lf.is_leaf()) {
    out += lf.head;
    return;
  }
  out += '(';
  out += lf.head;
  for (const auto& c : lf.children) {
    out += ' ';
    render_rec(c, out);
  }
  out += ')';
}

// Appends tokens for lf and records spans of lf and all descendants.
void tokenize_rec(const LogicalForm& lf, NodePath& path, TokenSpan& ts) {
  int first = int(ts.tokens.size()) + 1;
  if (lf.is_leaf()) {
    ts.tokens.push_back(lf.head);
  } else {
    ts.tokens.push_back("(");
    ts.tokens.push_back(lf.head);
    for (size_t i = 0; i < lf.children.size(); ++i) {
      path.push_back(int(i));
      tokenize_rec(lf.children[i], path, ts);
      path.pop_back();
    }
    ts.tokens.push_back(")");
  }
  ts.node_spans[path] = TokenRange{first, int(ts.tokens.size())};
}

}  // namespace

LogicalForm parse_sexpr(const std::string& text) {
  auto toks = lex(text);
  if (toks.empty()) throw MalformedExpression("empty input");
  size_t pos = 0;
  LogicalForm lf = parse_tokens(toks, pos);
  if (pos != toks.size())
    throw MalformedExpression("stray token '" + toks[pos] + "' after expression");
  return lf;
}

std::string render_sexpr(const LogicalForm& lf) {
  if (!valid_symbol(lf.head))
    throw MalformedExpression("invalid symbol '" + lf.head + "'");
  std::string out;
  render_rec(lf, out);
  return out;
}

TokenSpan tokenize_lf(const LogicalForm& lf) {
  TokenSpan ts;
  NodePath path;
  tokenize_rec(lf, path, ts);
  return ts;
}

int depth(const LogicalForm& lf) {
  int d = 0;
  for (const auto& c : lf.children) d = std::max(d, depth(c));
  return 1 + d;
}

const LogicalForm& subtree_at(const LogicalForm& root, const NodePath& at) {
  const LogicalForm* cur = &root;
  for (int idx : at) {
    if (idx < 0 || size_t(idx) >= cur->children.size())
      throw NodeNotFound("no child " + std::to_string(idx) + " under '" + cur->head + "'");
    cur = &cur->children[idx];
  }
  return *cur;
}

LogicalForm replace_subtree(const LogicalForm& root, const NodePath& at,
                            const LogicalForm& with) {
  if (at.empty()) return with;
  int idx = at.front();
  if (idx < 0 || size_t(idx) >= root.children.size())
    throw NodeNotFound("no child " + std::to_string(idx) + " under '" + root.head + "'");
  LogicalForm out = root;
  NodePath rest(at.begin() + 1, at.end());
  out.children[idx] = replace_subtree(root.children[idx], rest, with);
  return out;
}

}  // namespace lap
