#include "lap/scfg.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <sstream>
#include <tuple>

#include "lap/errors.hpp"

namespace lap {

namespace {

constexpr int kInf = std::numeric_limits<int>::max() / 4;

std::string lower(std::string s) {
  for (char& c : s) c = char(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

// Nonterminal reference: ALL-CAPS name with a trailing _<index>.
bool parse_nt_ref(const std::string& tok, std::string& name, int& index) {
  size_t us = tok.rfind('_');
  if (us == std::string::npos || us == 0 || us + 1 >= tok.size()) return false;
  for (size_t i = us + 1; i < tok.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(tok[i]))) return false;
  std::string base = tok.substr(0, us);
  if (!std::isupper(static_cast<unsigned char>(base[0]))) return false;
  for (char c : base)
    if (!(std::isupper(static_cast<unsigned char>(c)) ||
          std::isdigit(static_cast<unsigned char>(c)) || c == '_'))
      return false;
  name = base;
  index = std::stoi(tok.substr(us + 1));
  return index >= 1;
}

TargetNode target_from_lf(const LogicalForm& lf,
                          std::map<int, std::string>& slot_names) {
  TargetNode out;
  std::string nt;
  int idx = 0;
  if (lf.is_leaf() && parse_nt_ref(lf.head, nt, idx)) {
    out.slot = idx;  // 1-based until the rule is assembled
    out.head = "";
    slot_names[idx] = nt;
    return out;
  }
  if (parse_nt_ref(lf.head, nt, idx))
    throw GrammarParseError("nonterminal '" + lf.head + "' cannot be a node head");
  out.head = lf.head;
  for (const auto& c : lf.children)
    out.children.push_back(target_from_lf(c, slot_names));
  return out;
}

void renumber_slots(TargetNode& t) {
  if (t.slot >= 1) t.slot -= 1;
  for (auto& c : t.children) renumber_slots(c);
}

// Depth layout of a rule target: per-slot ancestor counts and the depth
// contributed by fixed leaves. depth(filled) = max(static, max_k o_k + d_k).
struct RuleLayout {
  std::vector<int> slot_offsets;
  int static_depth = 0;
};

void layout_rec(const TargetNode& t, int level, RuleLayout& out) {
  if (t.is_slot()) {
    out.slot_offsets[t.slot] = level;
    return;
  }
  if (t.children.empty()) {
    out.static_depth = std::max(out.static_depth, level + 1);
    return;
  }
  for (const auto& c : t.children) layout_rec(c, level + 1, out);
  out.static_depth = std::max(out.static_depth, level + 1);
}

RuleLayout rule_layout(const Rule& r) {
  RuleLayout out;
  out.slot_offsets.assign(r.slot_nts.size(), 0);
  layout_rec(r.target, 0, out);
  return out;
}

int filled_depth(const RuleLayout& lay, const std::vector<int>& child_depths) {
  int d = lay.static_depth;
  for (size_t k = 0; k < lay.slot_offsets.size(); ++k)
    d = std::max(d, lay.slot_offsets[k] + child_depths[k]);
  return d;
}

// Minimal achievable logical-form depth per nonterminal (fixpoint).
std::map<std::string, int> min_depths(const Grammar& g) {
  std::map<std::string, int> md;
  for (const auto& [nt, _] : g.by_lhs) md[nt] = kInf;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& r : g.rules) {
      RuleLayout lay = rule_layout(r);
      std::vector<int> cd;
      bool ok = true;
      for (const auto& nt : r.slot_nts) {
        int d = md.count(nt) ? md.at(nt) : kInf;
        if (d >= kInf) { ok = false; break; }
        cd.push_back(d);
      }
      if (!ok) continue;
      int d = filled_depth(lay, cd);
      if (d < md[r.lhs]) { md[r.lhs] = d; changed = true; }
    }
  }
  return md;
}

int rule_min_depth(const Rule& r, const std::map<std::string, int>& md) {
  RuleLayout lay = rule_layout(r);
  std::vector<int> cd;
  for (const auto& nt : r.slot_nts) {
    int d = md.count(nt) ? md.at(nt) : kInf;
    if (d >= kInf) return kInf;
    cd.push_back(d);
  }
  return filled_depth(lay, cd);
}

LogicalForm fill_template(const TargetNode& t, const std::vector<LogicalForm>& subs) {
  if (t.is_slot()) return subs[t.slot];
  LogicalForm out{t.head, {}};
  for (const auto& c : t.children) out.children.push_back(fill_template(c, subs));
  return out;
}

std::vector<std::string> fill_source(const Rule& r,
                                     const std::vector<std::vector<std::string>>& subs) {
  std::vector<std::string> out;
  for (const auto& tok : r.source) {
    if (tok.is_slot()) {
      const auto& sub = subs[tok.slot];
      out.insert(out.end(), sub.begin(), sub.end());
    } else {
      out.push_back(tok.text);
    }
  }
  return out;
}

}  // namespace

// --- Grammar basics ----------------------------------------------------------

const Rule& Grammar::rule(const std::string& id) const {
  auto it = by_id.find(id);
  if (it == by_id.end()) throw GrammarParseError("unknown rule id '" + id + "'");
  return rules[it->second];
}

std::string Example::utterance_text() const {
  std::string out;
  for (size_t i = 0; i < utterance.size(); ++i) {
    if (i) out += ' ';
    out += utterance[i];
  }
  return out;
}

std::pair<std::string, std::string> Example::pair_key() const {
  return {utterance_text(), render_sexpr(logical_form)};
}

// --- DSL ----------------------------------------------------------------------

namespace {

void index_grammar(Grammar& g) {
  g.by_lhs.clear();
  g.by_id.clear();
  for (size_t i = 0; i < g.rules.size(); ++i) {
    const Rule& r = g.rules[i];
    if (g.by_id.count(r.id))
      throw GrammarParseError("duplicate rule id '" + r.id + "'");
    g.by_id[r.id] = int(i);
    g.by_lhs[r.lhs].push_back(int(i));
  }
}

Rule parse_rule_line(const std::string& line) {
  size_t colon = line.find(':');
  if (colon == std::string::npos)
    throw GrammarParseError("expected 'id:' in rule line: " + line);
  Rule r;
  r.id = trim(line.substr(0, colon));
  if (r.id.empty()) throw GrammarParseError("empty rule id in line: " + line);

  std::string rest = line.substr(colon + 1);
  size_t arrow = rest.find("->");
  if (arrow == std::string::npos)
    throw GrammarParseError("expected '->' in rule line: " + line);
  r.lhs = trim(rest.substr(0, arrow));
  if (r.lhs.empty()) throw GrammarParseError("empty lhs in line: " + line);

  std::string rhs = rest.substr(arrow + 2);
  size_t bar = rhs.find('|');
  if (bar == std::string::npos)
    throw GrammarParseError("expected '|' between source and target: " + line);

  std::map<int, std::string> src_slots, tgt_slots;
  for (const auto& tok : split_ws(rhs.substr(0, bar))) {
    std::string nt;
    int idx = 0;
    if (parse_nt_ref(tok, nt, idx)) {
      if (src_slots.count(idx))
        throw GrammarParseError("duplicate source index _" + std::to_string(idx) +
                                " in rule " + r.id);
      src_slots[idx] = nt;
      r.source.push_back(SourceTok{nt, idx});
    } else {
      r.source.push_back(SourceTok{lower(tok), -1});
    }
  }
  if (r.source.empty())
    throw GrammarParseError("empty source side in rule " + r.id);

  LogicalForm tgt_lf = parse_sexpr(trim(rhs.substr(bar + 1)));
  r.target = target_from_lf(tgt_lf, tgt_slots);

  if (src_slots != tgt_slots)
    throw GrammarParseError("source/target nonterminal indices are not a bijection in rule " +
                            r.id);
  int k = 1;
  for (const auto& [idx, nt] : src_slots) {
    if (idx != k)
      throw GrammarParseError("nonterminal indices must be 1..k in rule " + r.id);
    r.slot_nts.push_back(nt);
    ++k;
  }
  if (r.target.is_slot())
    throw GrammarParseError("rule " + r.id +
                            " target is a bare nonterminal; it has no root predicate");
  renumber_slots(r.target);
  for (auto& tok : r.source)
    if (tok.is_slot()) tok.slot -= 1;
  return r;
}

Grammar parse_grammar_text(const std::string& text) {
  Grammar g;
  std::istringstream in(text);
  std::string raw;
  while (std::getline(in, raw)) {
    size_t hash = raw.find('#');
    if (hash != std::string::npos) raw = raw.substr(0, hash);
    std::string line = trim(raw);
    if (line.empty()) continue;
    if (line.rfind("domain ", 0) == 0) {
      g.name = trim(line.substr(7));
      continue;
    }
    if (line.rfind("start ", 0) == 0) {
      g.start = trim(line.substr(6));
      continue;
    }
    g.rules.push_back(parse_rule_line(line));
  }
  if (g.rules.empty()) throw GrammarParseError("grammar has no rules");
  if (g.start.empty()) g.start = g.rules.front().lhs;
  index_grammar(g);
  return g;
}

void validate_producible(const Grammar& g, const Grammar* base) {
  auto produced = [&](const std::string& nt) {
    return g.by_lhs.count(nt) > 0 || (base && base->by_lhs.count(nt) > 0);
  };
  for (const auto& r : g.rules)
    for (const auto& nt : r.slot_nts)
      if (!produced(nt))
        throw UnproducibleNonterminal("'" + nt + "' referenced by rule " + r.id +
                                      " has no producing rule");
  if (!produced(g.start))
    throw UnproducibleNonterminal("start symbol '" + g.start + "'");
}

}  // namespace

Grammar load_grammar(const std::string& text) {
  Grammar g = parse_grammar_text(text);
  validate_producible(g, nullptr);
  return g;
}

Grammar load_grammar_extension(const std::string& text, const Grammar& base) {
  Grammar g = parse_grammar_text(text);
  for (const auto& r : g.rules)
    if (base.by_id.count(r.id))
      throw GrammarParseError("extension rule id '" + r.id + "' already in base grammar");
  validate_producible(g, &base);
  return g;
}

Grammar merge_grammars(const Grammar& g_old, const Grammar& g_new) {
  Grammar g = g_old;
  for (const auto& r : g_new.rules) {
    if (g_old.by_id.count(r.id))
      throw GrammarParseError("rule id '" + r.id + "' present in both grammars");
    g.rules.push_back(r);
  }
  index_grammar(g);
  validate_producible(g, nullptr);
  return g;
}

namespace {

std::string target_to_text(const TargetNode& t, const std::vector<std::string>& slot_nts) {
  if (t.is_slot()) return slot_nts[t.slot] + "_" + std::to_string(t.slot + 1);
  if (t.children.empty()) return t.head;
  std::string out = "(" + t.head;
  for (const auto& c : t.children) out += " " + target_to_text(c, slot_nts);
  out += ")";
  return out;
}

}  // namespace

std::string grammar_to_text(const Grammar& g) {
  std::string out;
  if (!g.name.empty()) out += "domain " + g.name + "\n";
  out += "start " + g.start + "\n";
  for (const auto& r : g.rules) {
    out += r.id + ": " + r.lhs + " ->";
    for (const auto& tok : r.source) {
      out += ' ';
      out += tok.is_slot() ? tok.text + "_" + std::to_string(tok.slot + 1) : tok.text;
    }
    out += " | " + target_to_text(r.target, r.slot_nts) + "\n";
  }
  return out;
}

uint64_t grammar_fingerprint(const Grammar& g) { return fnv1a64(grammar_to_text(g)); }

// --- Generation ----------------------------------------------------------------

Example replay_derivation(const Grammar& g, const Derivation& d) {
  const Rule& r = g.rule(d.rule_id);
  if (int(d.children.size()) != r.arity())
    throw GrammarParseError("derivation for rule " + r.id + " has " +
                            std::to_string(d.children.size()) + " children, expected " +
                            std::to_string(r.arity()));
  std::vector<LogicalForm> sub_lfs;
  std::vector<std::vector<std::string>> sub_utts;
  for (int k = 0; k < r.arity(); ++k) {
    Example sub = replay_derivation(g, d.children[k]);
    sub_lfs.push_back(std::move(sub.logical_form));
    sub_utts.push_back(std::move(sub.utterance));
  }
  Example out;
  out.utterance = fill_source(r, sub_utts);
  out.logical_form = fill_template(r.target, sub_lfs);
  out.domain = g.name;
  out.depth = depth(out.logical_form);
  out.derivation = d;
  return out;
}

namespace {

Derivation sample_from_nt(const Grammar& g, const std::string& nt, Rng& rng,
                          int budget, const std::map<std::string, int>& md) {
  auto it = g.by_lhs.find(nt);
  if (it == g.by_lhs.end())
    throw UnproducibleNonterminal("'" + nt + "'");
  std::vector<int> recursive, terminal;
  for (int ri : it->second) {
    const Rule& r = g.rules[ri];
    if (rule_min_depth(r, md) > budget) continue;
    (r.arity() > 0 ? recursive : terminal).push_back(ri);
  }
  if (recursive.empty() && terminal.empty())
    throw DepthUnsatisfiable("no rule for '" + nt + "' fits depth budget " +
                             std::to_string(budget));
  const std::vector<int>* pick = nullptr;
  if (!recursive.empty() && !terminal.empty())
    pick = rng.bernoulli(0.5) ? &recursive : &terminal;
  else
    pick = recursive.empty() ? &terminal : &recursive;
  const Rule& r = g.rules[(*pick)[rng.uniform_index(pick->size())]];

  Derivation d{r.id, {}};
  RuleLayout lay = rule_layout(r);
  for (int k = 0; k < r.arity(); ++k)
    d.children.push_back(
        sample_from_nt(g, r.slot_nts[k], rng, budget - lay.slot_offsets[k], md));
  return d;
}

}  // namespace

Example sample_example(const Grammar& g, Rng& rng, int max_depth) {
  if (max_depth < 1) throw DepthUnsatisfiable("max_depth must be >= 1");
  auto md = min_depths(g);
  Derivation d = sample_from_nt(g, g.start, rng, max_depth, md);
  return replay_derivation(g, d);
}

Example sample_example(const Grammar& g, uint64_t seed, int max_depth) {
  Rng rng(seed);
  return sample_example(g, rng, max_depth);
}

Example sample_rule_example(const Grammar& g, const Rule& r, Rng& rng, int max_depth) {
  auto md = min_depths(g);
  if (rule_min_depth(r, md) > max_depth)
    throw DepthUnsatisfiable("rule " + r.id + " cannot fit depth " +
                             std::to_string(max_depth));
  Derivation d{r.id, {}};
  RuleLayout lay = rule_layout(r);
  for (int k = 0; k < r.arity(); ++k)
    d.children.push_back(
        sample_from_nt(g, r.slot_nts[k], rng, max_depth - lay.slot_offsets[k], md));
  return replay_derivation(g, d);
}

namespace {

struct MinimalBuilder {
  const Grammar& g;
  std::map<std::string, int> md;
  std::map<std::string, Example> memo;

  explicit MinimalBuilder(const Grammar& grammar) : g(grammar), md(min_depths(grammar)) {}

  static std::tuple<int, size_t, std::string, std::string> cost(const Example& e) {
    return {e.depth, e.utterance.size(), e.utterance_text(), render_sexpr(e.logical_form)};
  }

  Example for_rule(const Rule& r) {
    Derivation d{r.id, {}};
    for (int k = 0; k < r.arity(); ++k)
      d.children.push_back(for_nt(r.slot_nts[k]).derivation);
    return replay_derivation(g, d);
  }

  const Example& for_nt(const std::string& nt) {
    auto it = memo.find(nt);
    if (it != memo.end()) return it->second;
    auto rules_it = g.by_lhs.find(nt);
    if (rules_it == g.by_lhs.end() || md.at(nt) >= kInf)
      throw UnproducibleNonterminal("'" + nt + "'");
    std::optional<Example> best;
    for (int ri : rules_it->second) {
      const Rule& r = g.rules[ri];
      // Only minimal-depth rules participate; their slots have strictly
      // smaller minimal depth, so the recursion terminates.
      if (rule_min_depth(r, md) != md.at(nt)) continue;
      Example cand = for_rule(r);
      if (!best || cost(cand) < cost(*best)) best = std::move(cand);
    }
    return memo.emplace(nt, std::move(*best)).first->second;
  }
};

}  // namespace

Example minimal_rule_example(const Grammar& g, const std::string& rule_id) {
  MinimalBuilder b(g);
  return b.for_rule(g.rule(rule_id));
}

// --- Enumeration -----------------------------------------------------------------

namespace {

struct Enumerator {
  const Grammar& g;
  std::map<std::string, int> md;
  size_t cap;
  size_t produced = 0;
  // memo key: nonterminal + depth budget
  std::map<std::pair<std::string, int>, std::vector<Derivation>> memo;

  Enumerator(const Grammar& grammar, size_t cardinality_cap)
      : g(grammar), md(min_depths(grammar)), cap(cardinality_cap) {}

  void bump() {
    if (++produced > cap)
      throw BudgetExceeded("enumeration exceeds cap of " + std::to_string(cap));
  }

  const std::vector<Derivation>& enums(const std::string& nt, int budget) {
    auto key = std::make_pair(nt, budget);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    std::vector<Derivation> out;
    auto rules_it = g.by_lhs.find(nt);
    if (rules_it != g.by_lhs.end()) {
      for (int ri : rules_it->second) {
        const Rule& r = g.rules[ri];
        if (rule_min_depth(r, md) > budget) continue;
        RuleLayout lay = rule_layout(r);
        std::vector<Derivation> partial{Derivation{r.id, {}}};
        for (int k = 0; k < r.arity() && !partial.empty(); ++k) {
          const auto& subs = enums(r.slot_nts[k], budget - lay.slot_offsets[k]);
          std::vector<Derivation> next;
          for (const auto& p : partial)
            for (const auto& s : subs) {
              Derivation d = p;
              d.children.push_back(s);
              next.push_back(std::move(d));
            }
          partial = std::move(next);
        }
        for (auto& d : partial) {
          bump();
          out.push_back(std::move(d));
        }
      }
    }
    return memo.emplace(key, std::move(out)).first->second;
  }
};

}  // namespace

std::vector<Example> enumerate_domain(const Grammar& g, int max_depth,
                                      size_t cardinality_cap) {
  Enumerator en(g, cardinality_cap);
  const auto& derivs = en.enums(g.start, max_depth);
  std::vector<Example> out;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& d : derivs) {
    Example e = replay_derivation(g, d);
    if (seen.insert(e.pair_key()).second) out.push_back(std::move(e));
  }
  return out;
}

// --- Membership ---------------------------------------------------------------------

namespace {

struct Matcher {
  const Grammar& g;
  const std::vector<std::string>& words;
  std::map<std::string, std::optional<Derivation>> memo;

  Matcher(const Grammar& grammar, const std::vector<std::string>& utterance)
      : g(grammar), words(utterance) {}

  static std::string path_key(const NodePath& p) {
    std::string s;
    for (int i : p) {
      s += std::to_string(i);
      s += '.';
    }
    return s;
  }

  // Unify the rule target with the logical-form subtree; records the path of
  // the subtree bound to each slot.
  bool unify(const TargetNode& t, const LogicalForm& lf, NodePath& path,
             std::vector<NodePath>& binds) {
    if (t.is_slot()) {
      binds[t.slot] = path;
      return true;
    }
    if (t.head != lf.head) return false;
    if (t.children.size() != lf.children.size()) return false;
    for (size_t i = 0; i < t.children.size(); ++i) {
      path.push_back(int(i));
      bool ok = unify(t.children[i], lf.children[i], path, binds);
      path.pop_back();
      if (!ok) return false;
    }
    return true;
  }

  // Match source items [si..] of rule r against words [lo, hi).
  bool match_source(const Rule& r, const LogicalForm& root, const NodePath& at,
                    const std::vector<NodePath>& binds, size_t si, int lo, int hi,
                    std::vector<Derivation>& out_children) {
    if (si == r.source.size()) return lo == hi;
    const SourceTok& tok = r.source[si];
    if (!tok.is_slot()) {
      if (lo >= hi || words[lo] != tok.text) return false;
      return match_source(r, root, at, binds, si + 1, lo + 1, hi, out_children);
    }
    NodePath sub_path = at;
    sub_path.insert(sub_path.end(), binds[tok.slot].begin(), binds[tok.slot].end());
    for (int mid = lo + 1; mid <= hi; ++mid) {
      auto sub = match(r.slot_nts[tok.slot], lo, mid, sub_path);
      if (!sub) continue;
      if (match_source(r, root, at, binds, si + 1, mid, hi, out_children)) {
        out_children[tok.slot] = *sub;
        return true;
      }
    }
    return false;
  }

  const LogicalForm* root_lf = nullptr;

  std::optional<Derivation> match(const std::string& nt, int lo, int hi,
                                  const NodePath& at) {
    std::string key = nt + "|" + std::to_string(lo) + "|" + std::to_string(hi) + "|" +
                      path_key(at);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    memo[key] = std::nullopt;  // cycle guard; unary cycles are rejected upstream
    std::optional<Derivation> result;
    const LogicalForm& lf = subtree_at(*root_lf, at);
    auto rules_it = g.by_lhs.find(nt);
    if (rules_it != g.by_lhs.end()) {
      for (int ri : rules_it->second) {
        const Rule& r = g.rules[ri];
        std::vector<NodePath> binds(r.arity());
        NodePath scratch;
        if (!unify(r.target, lf, scratch, binds)) continue;
        std::vector<Derivation> children(r.arity());
        if (match_source(r, *root_lf, at, binds, 0, lo, hi, children)) {
          result = Derivation{r.id, std::move(children)};
          break;
        }
      }
    }
    memo[key] = result;
    return result;
  }
};

}  // namespace

std::optional<Derivation> find_derivation(const Grammar& g,
                                          const std::vector<std::string>& utterance,
                                          const LogicalForm& lf) {
  if (utterance.empty()) return std::nullopt;
  Matcher m(g, utterance);
  m.root_lf = &lf;
  return m.match(g.start, 0, int(utterance.size()), {});
}

bool contains(const Grammar& g, const Example& e) {
  return find_derivation(g, e.utterance, e.logical_form).has_value();
}

// --- Memory -----------------------------------------------------------------------

std::vector<std::pair<std::string, Example>> build_memory(
    const Grammar& g, const std::vector<Example>& pool) {
  std::vector<std::pair<std::string, Example>> out;
  for (const auto& r : g.rules) {
    const Example* best = nullptr;
    auto better = [](const Example& a, const Example& b) {
      auto ka = std::make_tuple(a.utterance.size(), a.utterance_text(),
                                render_sexpr(a.logical_form));
      auto kb = std::make_tuple(b.utterance.size(), b.utterance_text(),
                                render_sexpr(b.logical_form));
      return ka < kb;
    };
    for (const auto& e : pool) {
      if (e.derivation.rule_id != r.id) continue;
      if (!best || better(e, *best)) best = &e;
    }
    if (!best)
      throw UncoverableRule("no pool example with derivation rooted at rule " + r.id);
    const std::string& root = best->logical_form.head;
    if (root != r.root_predicate())
      throw UncoverableRule("exemplar root predicate '" + root + "' does not match rule " +
                            r.id + " target root '" + r.root_predicate() + "'");
    out.emplace_back(r.id, *best);
  }
  return out;
}

// --- Dataset -----------------------------------------------------------------------

std::vector<std::pair<std::string, Example>> DatasetBundle::extended_memory() const {
  auto out = m_old;
  out.insert(out.end(), m_new_prime.begin(), m_new_prime.end());
  return out;
}

DatasetBundle build_dataset(const Grammar& g_old, const Grammar& g_new_rules,
                            const DatasetConfig& cfg) {
  DatasetBundle b;
  b.domain = g_old.name;
  b.g_old = g_old;
  b.g_new = g_new_rules;
  b.g_all = g_new_rules.rules.empty() ? g_old : merge_grammars(g_old, g_new_rules);

  Rng rng(cfg.seed);
  Rng rng_train = rng.fork(1);
  Rng rng_eval_old = rng.fork(2);
  Rng rng_eval_new = rng.fork(3);
  Rng rng_split = rng.fork(4);

  // D_old: random draws from domain(G); duplicates allowed.
  for (int i = 0; i < cfg.n_train; ++i)
    b.d_old.push_back(sample_example(g_old, rng_train, cfg.max_depth));

  // Memory pool: the training draw plus one deterministic minimal example
  // per rule so every rule is covered.
  std::vector<Example> pool = b.d_old;
  for (const auto& r : g_old.rules)
    pool.push_back(minimal_rule_example(g_old, r.id));
  b.m_old = build_memory(g_old, pool);

  // One-shot exemplars: the minimal example rooted at each new rule.
  for (const auto& r : g_new_rules.rules)
    b.m_new_prime.emplace_back(r.id, minimal_rule_example(b.g_all, r.id));

  std::set<std::pair<std::string, std::string>> train_keys;
  for (const auto& e : b.d_old) train_keys.insert(e.pair_key());
  for (const auto& [_, e] : b.m_old) train_keys.insert(e.pair_key());

  // E_old: distinct pairs from domain(G) not seen in training material.
  std::vector<Example> e_old;
  {
    std::set<std::pair<std::string, std::string>> keys;
    long attempts = 0, limit = 2000L * std::max(cfg.n_eval_old, 1);
    while (int(e_old.size()) < cfg.n_eval_old && attempts++ < limit) {
      Example e = sample_example(g_old, rng_eval_old, cfg.max_depth);
      auto k = e.pair_key();
      if (train_keys.count(k) || keys.count(k)) continue;
      keys.insert(k);
      e_old.push_back(std::move(e));
    }
    if (int(e_old.size()) < cfg.n_eval_old)
      throw BudgetExceeded("domain too small for |E_old|=" + std::to_string(cfg.n_eval_old));
  }

  // E_new: distinct pairs in domain(G ∪ G') − domain(G), balanced across
  // depth buckets {2, 3} as far as the domain allows.
  std::vector<Example> e_new;
  if (!g_new_rules.rules.empty() && cfg.n_eval_new > 0) {
    std::set<std::pair<std::string, std::string>> keys;
    for (const auto& [_, e] : b.m_new_prime) keys.insert(e.pair_key());
    int want_d2 = cfg.n_eval_new / 2;
    int want_d3 = cfg.n_eval_new - want_d2;
    int have_d2 = 0, have_d3 = 0;
    std::vector<Example> spill;
    long attempts = 0, limit = 4000L * std::max(cfg.n_eval_new, 1);
    while (have_d2 + have_d3 < cfg.n_eval_new && attempts++ < limit) {
      Example e = sample_example(b.g_all, rng_eval_new, cfg.max_depth);
      auto k = e.pair_key();
      if (keys.count(k)) continue;
      if (contains(g_old, e)) continue;
      keys.insert(k);
      bool is_d2 = e.depth <= 2;
      if (is_d2 && have_d2 < want_d2) { ++have_d2; e_new.push_back(std::move(e)); }
      else if (!is_d2 && have_d3 < want_d3) { ++have_d3; e_new.push_back(std::move(e)); }
      else spill.push_back(std::move(e));
    }
    for (auto& e : spill) {
      if (have_d2 + have_d3 >= cfg.n_eval_new) break;
      ++(e.depth <= 2 ? have_d2 : have_d3);
      e_new.push_back(std::move(e));
    }
    if (int(e_new.size()) < cfg.n_eval_new)
      throw InsufficientNovelExamples(
          "could only draw " + std::to_string(e_new.size()) + " of " +
          std::to_string(cfg.n_eval_new) + " novel examples");
  }

  // Split halves deterministically, keeping depth buckets balanced.
  auto split_halves = [&](std::vector<Example>& src, std::vector<Example>& dev,
                          std::vector<Example>& test) {
    std::vector<Example> d2, d3;
    for (auto& e : src) (e.depth <= 2 ? d2 : d3).push_back(std::move(e));
    rng_split.shuffle(d2);
    rng_split.shuffle(d3);
    bool to_dev = true;
    auto deal = [&](std::vector<Example>& bucket) {
      for (auto& e : bucket) {
        (to_dev ? dev : test).push_back(std::move(e));
        to_dev = !to_dev;
      }
    };
    deal(d2);
    deal(d3);
  };
  split_halves(e_old, b.e_old_dev, b.e_old_test);
  split_halves(e_new, b.e_new_dev, b.e_new_test);
  return b;
}

std::vector<std::string> tokenize_utterance(const std::string& text) {
  std::vector<std::string> out;
  for (std::string tok : split_ws(text)) {
    tok = lower(tok);
    if (tok.size() > 2 && tok.compare(tok.size() - 2, 2, "'s") == 0) {
      out.push_back(tok.substr(0, tok.size() - 2));
      out.push_back("'s");
    } else {
      out.push_back(tok);
    }
  }
  return out;
}

}  // namespace lap
