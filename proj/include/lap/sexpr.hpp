#ifndef LAP_SEXPR_HPP
#define LAP_SEXPR_HPP

#include <map>
#include <string>
#include <vector>

namespace lap {

// A logical form is an s-expression tree of predicates. A node with no
// children is a leaf predicate; an inner node has a head predicate and at
// least one child. Values are immutable once built; editing operations
// return fresh trees.
struct LogicalForm {
  std::string head;
  std::vector<LogicalForm> children;

  bool is_leaf() const { return children.empty(); }

  bool operator==(const LogicalForm& other) const = default;
};

// Positional node identity: the list of child indices from the root.
// Stable across serialization, unlike object identity.
using NodePath = std::vector<int>;

struct TokenRange {
  int first = 0;  // 1-based, inclusive
  int last = 0;   // 1-based, inclusive

  bool operator==(const TokenRange&) const = default;
};

// Token sequence of a logical form (predicates plus parentheses, since
// parentheses are encoded too) and the contiguous token range of every node.
struct TokenSpan {
  std::vector<std::string> tokens;
  std::map<NodePath, TokenRange> node_spans;
};

LogicalForm parse_sexpr(const std::string& text);
std::string render_sexpr(const LogicalForm& lf);
TokenSpan tokenize_lf(const LogicalForm& lf);

inline bool lf_equal(const LogicalForm& a, const LogicalForm& b) { return a == b; }

// Depth: a leaf has depth 1, a node 1 + max child depth.
int depth(const LogicalForm& lf);

const LogicalForm& subtree_at(const LogicalForm& root, const NodePath& at);
LogicalForm replace_subtree(const LogicalForm& root, const NodePath& at,
                            const LogicalForm& with);

}  // namespace lap

#endif
