#ifndef LAP_SCFG_HPP
#define LAP_SCFG_HPP

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lap/rng.hpp"
#include "lap/sexpr.hpp"

namespace lap {

// --- Synchronous CFG -------------------------------------------------------
//
// A rule pairs a source right-hand side (utterance tokens, possibly with
// indexed nonterminals) with a target right-hand side (a logical-form
// template whose leaves may be indexed nonterminals). The same index set
// appears on both sides.

struct SourceTok {
  std::string text;  // terminal word, or nonterminal name
  int slot = -1;     // >= 0 for an indexed nonterminal (0-based slot)

  bool is_slot() const { return slot >= 0; }
  bool operator==(const SourceTok&) const = default;
};

// Target template tree. A leaf with slot >= 0 is a nonterminal hole; any
// other node carries a fixed predicate.
struct TargetNode {
  std::string head;
  int slot = -1;
  std::vector<TargetNode> children;

  bool is_slot() const { return slot >= 0; }
  bool operator==(const TargetNode&) const = default;
};

struct Rule {
  std::string id;
  std::string lhs;
  std::vector<SourceTok> source;
  TargetNode target;
  std::vector<std::string> slot_nts;  // nonterminal name per slot, in slot order

  int arity() const { return int(slot_nts.size()); }
  // Head symbol of the target template (constant root for terminal rules).
  const std::string& root_predicate() const { return target.head; }
};

struct Grammar {
  std::string name;
  std::string start;
  std::vector<Rule> rules;

  std::map<std::string, std::vector<int>> by_lhs;  // nonterminal -> rule indices
  std::map<std::string, int> by_id;                // rule id -> rule index

  const Rule& rule(const std::string& id) const;
  bool has_nonterminal(const std::string& nt) const { return by_lhs.count(nt) > 0; }
};

// Derivation: which rule produced each node. Children are ordered by the
// rule's slot index.
struct Derivation {
  std::string rule_id;
  std::vector<Derivation> children;

  bool operator==(const Derivation&) const = default;
};

struct Example {
  std::vector<std::string> utterance;
  LogicalForm logical_form;
  std::string domain;
  int depth = 0;
  Derivation derivation;

  std::string utterance_text() const;
  // Identity used by set membership and splits: (utterance, logical form).
  std::pair<std::string, std::string> pair_key() const;
};

// --- Grammar DSL ------------------------------------------------------------
//
// One rule per line:   ID: LHS -> source tokens | target s-expression
// Nonterminals are ALL-CAPS names with a trailing _k index that ties source
// and target occurrences together. `domain <name>` and `start <NT>` lines
// set grammar metadata. `#` starts a comment. Source terminals are
// lowercased on load.
Grammar load_grammar(const std::string& text);

// Parses extension rules (G') that may reference nonterminals produced by
// `base`. The returned grammar holds only the new rules.
Grammar load_grammar_extension(const std::string& text, const Grammar& base);

// Union of a base grammar and extension rules; rule ids must be disjoint.
Grammar merge_grammars(const Grammar& g_old, const Grammar& g_new);

std::string grammar_to_text(const Grammar& g);
uint64_t grammar_fingerprint(const Grammar& g);

// --- Generation -------------------------------------------------------------

// Replays a derivation and returns the (utterance, logical form) it yields.
Example replay_derivation(const Grammar& g, const Derivation& d);

// Samples an example from the start symbol. Recursion probability 0.5 per
// level bounds the expected depth; the depth budget is strict.
Example sample_example(const Grammar& g, uint64_t seed, int max_depth);
Example sample_example(const Grammar& g, Rng& rng, int max_depth);

// Samples an example whose derivation is rooted at the given rule (used for
// building memories; the utterance need not be a full sentence).
Example sample_rule_example(const Grammar& g, const Rule& r, Rng& rng, int max_depth);

// The smallest example rooted at a rule: minimal logical-form depth, ties
// broken by utterance length then lexicographically. Deterministic.
Example minimal_rule_example(const Grammar& g, const std::string& rule_id);

// Exhaustive depth-bounded domain from the start symbol, duplicate-free.
std::vector<Example> enumerate_domain(const Grammar& g, int max_depth,
                                      size_t cardinality_cap = 2000000);

// Membership oracle: true iff some derivation under g yields the example's
// utterance and logical form exactly (synchronized top-down matching).
bool contains(const Grammar& g, const Example& e);

// As `contains`, but returns one witnessing derivation from the start symbol.
std::optional<Derivation> find_derivation(const Grammar& g,
                                          const std::vector<std::string>& utterance,
                                          const LogicalForm& lf);

// --- Memory and dataset construction ----------------------------------------

// One exemplar per grammar rule; the exemplar's logical-form root predicate
// matches the rule target's root predicate. Order follows the grammar.
std::vector<std::pair<std::string, Example>> build_memory(
    const Grammar& g, const std::vector<Example>& pool);

struct DatasetConfig {
  int n_train = 2000;       // |D_old|
  int n_eval_old = 400;     // |E_old| (split into equal dev/test halves)
  int n_eval_new = 400;     // |E_new|
  int max_depth = 3;
  uint64_t seed = 13;
};

struct DatasetBundle {
  std::string domain;
  Grammar g_old;
  Grammar g_new;   // extension rules only
  Grammar g_all;   // merged
  std::vector<Example> d_old;
  std::vector<std::pair<std::string, Example>> m_old;        // rule id -> exemplar
  std::vector<std::pair<std::string, Example>> m_new_prime;  // one per G' rule
  std::vector<Example> e_old_dev, e_old_test;
  std::vector<Example> e_new_dev, e_new_test;

  // M_new = M_old ∪ M'_new, the extended memory used in one-shot evaluation.
  std::vector<std::pair<std::string, Example>> extended_memory() const;
};

DatasetBundle build_dataset(const Grammar& g_old, const Grammar& g_new_rules,
                            const DatasetConfig& cfg);

// --- Builtin grammars --------------------------------------------------------

// Six domains of discourse, each covering the get-field and set-field
// topics, with held-out extension rules (new relation, new entity, new
// set-field phrasing).
std::map<std::string, std::pair<Grammar, Grammar>> builtin_grammars();

// Small person grammar used by unit tests and the trace fixture.
Grammar sample_person_grammar();

const std::vector<std::string>& builtin_domain_names();

// Utterance tokenization for raw CLI input: lowercases and splits
// possessive "'s" into its own token.
std::vector<std::string> tokenize_utterance(const std::string& text);

}  // namespace lap

#endif
