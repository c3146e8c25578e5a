#include <map>
#include <set>

#include "doctest.h"
#include "lap/errors.hpp"
#include "lap/rng.hpp"
#include "lap/scfg.hpp"
#include "lap/sexpr.hpp"

using namespace lap;

namespace {

// Independent counting oracle: number of derivations from a nonterminal with
// logical-form depth <= d, computed arithmetically over the rule layouts.
struct CountOracle {
  const Grammar& g;
  std::map<std::pair<std::string, int>, long> memo;

  struct Layout {
    std::vector<int> offsets;
    int static_depth = 0;
  };

  static void walk(const TargetNode& t, int level, Layout& lay) {
    if (t.is_slot()) {
      lay.offsets[t.slot] = level;
      return;
    }
    if (t.children.empty()) {
      lay.static_depth = std::max(lay.static_depth, level + 1);
      return;
    }
    for (const auto& c : t.children) walk(c, level + 1, lay);
    lay.static_depth = std::max(lay.static_depth, level + 1);
  }

  long count(const std::string& nt, int d) {
    if (d < 1) return 0;
    auto key = std::make_pair(nt, d);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    long total = 0;
    auto rules = g.by_lhs.find(nt);
    if (rules != g.by_lhs.end()) {
      for (int ri : rules->second) {
        const Rule& r = g.rules[ri];
        Layout lay;
        lay.offsets.assign(r.slot_nts.size(), 0);
        walk(r.target, 0, lay);
        if (lay.static_depth > d) continue;
        long prod = 1;
        for (size_t k = 0; k < r.slot_nts.size() && prod > 0; ++k)
          prod *= count(r.slot_nts[k], d - lay.offsets[k]);
        total += prod;
      }
    }
    memo[key] = total;
    return total;
  }
};

Example make_example(const Grammar& g, const std::string& utt, const std::string& lf) {
  Example e;
  e.utterance = tokenize_utterance(utt);
  e.logical_form = parse_sexpr(lf);
  e.domain = g.name;
  e.depth = depth(e.logical_form);
  return e;
}

}  // namespace

TEST_SUITE_BEGIN("scfg");

TEST_CASE("grammar dsl") {
  Grammar g = load_grammar(R"(
domain toy
start FIELD
g1: FIELD -> PSN_2 's PSN_REL_1 | (field PSN_REL_1 PSN_2)
g2: PSN -> John | (person john)
g3: PSN_REL -> parents | parent
)");
  CHECK(g.name == "toy");
  CHECK(g.rules.size() == 3);
  const Rule& g1 = g.rule("g1");
  CHECK(g1.lhs == "FIELD");
  CHECK(g1.slot_nts == std::vector<std::string>{"PSN_REL", "PSN"});
  CHECK(g1.root_predicate() == "field");
  // source terminals lowercased, slots resolved
  CHECK(g.rule("g2").source[0].text == "john");
  CHECK(g.rule("g2").root_predicate() == "person");

  Derivation d{"g1", {{"g3", {}}, {"g2", {}}}};
  Example e = replay_derivation(g, d);
  CHECK(e.utterance_text() == "john 's parents");
  CHECK(render_sexpr(e.logical_form) == "(field parent (person john))");
  CHECK(e.depth == 3);
}

TEST_CASE("grammar dsl errors") {
  CHECK_THROWS_AS(load_grammar("g1: A -> x | x\ng1: A -> y | y\n"), GrammarParseError);
  CHECK_THROWS_AS(load_grammar("g1: A -> B_1 | B_1\n"), GrammarParseError);  // bare slot target
  CHECK_THROWS_AS(load_grammar("g1: A -> B_1 x | (f B_1)\ng2: C -> y | y\n"),
                  UnproducibleNonterminal);
  CHECK_THROWS_AS(load_grammar("g1: A -> B_1 | (f B_2)\ng2: B -> y | y\n"),
                  GrammarParseError);  // index sets differ
  CHECK_THROWS_AS(load_grammar(""), GrammarParseError);
}

TEST_CASE("sample_example determinism and membership") {
  Grammar g = sample_person_grammar();
  Example a = sample_example(g, 42, 3);
  Example b = sample_example(g, 42, 3);
  CHECK(a.pair_key() == b.pair_key());
  CHECK(a.derivation == b.derivation);
  CHECK(a.depth <= 3);
  CHECK(contains(g, a));

  // replay identity
  Example r = replay_derivation(g, a.derivation);
  CHECK(r.pair_key() == a.pair_key());

  // single-terminal-rule grammar yields its pair regardless of seed
  Grammar tiny = load_grammar("t1: X -> John | john\n");
  for (uint64_t seed : {1, 2, 3}) {
    Example e = sample_example(tiny, seed, 3);
    CHECK(e.utterance_text() == "john");
    CHECK(render_sexpr(e.logical_form) == "john");
  }
}

TEST_CASE("sampled space covers the appendix pair") {
  Grammar g = sample_person_grammar();
  // "John 's parents" -> (field parent john) must be producible
  Example target = make_example(g, "John's parents", "(field parent john)");
  CHECK(contains(g, target));
  bool seen = false;
  Rng rng(5);
  for (int i = 0; i < 2000 && !seen; ++i)
    seen = sample_example(g, rng, 3).pair_key() == target.pair_key();
  CHECK(seen);
}

TEST_CASE("enumerate_domain matches the counting oracle") {
  Grammar g = sample_person_grammar();
  CountOracle oracle{g, {}};
  auto d3 = enumerate_domain(g, 3);
  CHECK(long(d3.size()) == oracle.count(g.start, 3));
  CHECK(d3.size() == 72);
  auto d2 = enumerate_domain(g, 2);
  CHECK(long(d2.size()) == oracle.count(g.start, 2));

  std::set<std::pair<std::string, std::string>> keys;
  for (const auto& e : d3) {
    CHECK(keys.insert(e.pair_key()).second);  // duplicate-free
    CHECK(e.depth <= 3);
    Example r = replay_derivation(g, e.derivation);
    CHECK(r.pair_key() == e.pair_key());
  }
  // Table-1 pairs
  CHECK(keys.count({"friends of john", "(field friend john)"}));
  CHECK(keys.count({"parents of mary 's friends", "(field parent (field friend mary))"}));

  // depth-1 enumeration of a grammar with terminal start rules: exactly those pairs
  Grammar tiny = load_grammar(R"(
t1: X -> John | john
t2: X -> Mary | mary
t3: X -> X_1 and X_2 | (pair X_1 X_2)
)");
  auto d1 = enumerate_domain(tiny, 1);
  REQUIRE(d1.size() == 2);
  CHECK(d1[0].utterance_text() == "john");
  CHECK(d1[1].utterance_text() == "mary");

  CHECK_THROWS_AS(enumerate_domain(g, 3, 10), BudgetExceeded);
}

TEST_CASE("contains agrees with enumeration") {
  Grammar g = sample_person_grammar();
  for (const auto& e : enumerate_domain(g, 3)) CHECK(contains(g, e));

  CHECK_FALSE(contains(g, make_example(g, "friends of john", "(field enemy john)")));
  CHECK_FALSE(contains(g, make_example(g, "enemies of john", "(field friend john)")));
  CHECK_FALSE(contains(g, make_example(g, "friends of john", "(field friend mary)")));
  CHECK_FALSE(contains(g, make_example(g, "john friends", "(field friend john)")));
}

TEST_CASE("build_memory picks root-predicate-matching exemplars") {
  Grammar g = sample_person_grammar();
  std::vector<Example> pool;
  Rng rng(3);
  for (const auto& r : g.rules)
    for (int i = 0; i < 5; ++i) pool.push_back(sample_rule_example(g, r, rng, 3));

  auto memory = build_memory(g, pool);
  REQUIRE(memory.size() == g.rules.size());
  for (size_t i = 0; i < memory.size(); ++i) {
    const auto& [rule_id, ex] = memory[i];
    CHECK(rule_id == g.rules[i].id);
    CHECK(ex.logical_form.head == g.rules[i].root_predicate());
    CHECK(ex.derivation.rule_id == rule_id);
  }
  // the FIELD-style rule gets a field-rooted exemplar, the entity rule its own pair
  const auto& poss = memory[0].second;
  CHECK(poss.logical_form.head == "field");
  auto john = std::find_if(memory.begin(), memory.end(),
                           [](const auto& p) { return p.first == "s_john"; });
  REQUIRE(john != memory.end());
  CHECK(render_sexpr(john->second.logical_form) == "john");

  // pool missing a rule
  std::vector<Example> partial(pool.begin(), pool.begin() + 2);
  CHECK_THROWS_AS(build_memory(g, partial), UncoverableRule);
}

TEST_CASE("minimal_rule_example is deterministic and minimal") {
  Grammar g = sample_person_grammar();
  Example a = minimal_rule_example(g, "s_get_poss");
  Example b = minimal_rule_example(g, "s_get_poss");
  CHECK(a.pair_key() == b.pair_key());
  CHECK(a.depth == 2);
  CHECK(a.logical_form.head == "field");
  CHECK(minimal_rule_example(g, "s_john").utterance_text() == "john");
}

TEST_CASE("build_dataset invariants") {
  auto grammars = builtin_grammars();
  const auto& [g_old, g_new] = grammars.at("person");
  DatasetConfig cfg;
  cfg.n_train = 120;
  cfg.n_eval_old = 40;
  cfg.n_eval_new = 40;
  cfg.seed = 17;
  DatasetBundle b = build_dataset(g_old, g_new, cfg);

  CHECK(b.m_old.size() == g_old.rules.size());
  CHECK(b.m_new_prime.size() == g_new.rules.size());
  CHECK(b.d_old.size() == 120);
  CHECK(b.e_old_dev.size() + b.e_old_test.size() == 40);
  CHECK(int(b.e_old_dev.size()) - int(b.e_old_test.size()) <= 1);
  CHECK(b.e_new_dev.size() + b.e_new_test.size() == 40);

  for (const auto& e : b.d_old) CHECK(contains(g_old, e));
  std::set<std::pair<std::string, std::string>> dev_keys;
  for (const auto& e : b.e_new_dev) dev_keys.insert(e.pair_key());
  for (const auto& e : b.e_new_test) CHECK_FALSE(dev_keys.count(e.pair_key()));

  auto check_new = [&](const std::vector<Example>& es) {
    for (const auto& e : es) {
      CHECK_FALSE(contains(g_old, e));
      CHECK(contains(b.g_all, e));
    }
  };
  check_new(b.e_new_dev);
  check_new(b.e_new_test);

  // determinism
  DatasetBundle b2 = build_dataset(g_old, g_new, cfg);
  CHECK(b2.d_old.size() == b.d_old.size());
  for (size_t i = 0; i < b.d_old.size(); ++i)
    CHECK(b2.d_old[i].pair_key() == b.d_old[i].pair_key());
  for (size_t i = 0; i < b.e_new_test.size(); ++i)
    CHECK(b2.e_new_test[i].pair_key() == b.e_new_test[i].pair_key());

  // empty extension: no novel examples requested
  Grammar empty_ext;
  DatasetConfig cfg2 = cfg;
  cfg2.n_eval_new = 0;
  DatasetBundle b3 = build_dataset(g_old, empty_ext, cfg2);
  CHECK(b3.m_new_prime.empty());
  CHECK(b3.e_new_dev.empty());
  CHECK(b3.e_new_test.empty());
}

TEST_CASE("builtin grammars cover six domains with disjoint extensions") {
  auto grammars = builtin_grammars();
  CHECK(grammars.size() == 6);
  for (const auto& name : builtin_domain_names()) {
    REQUIRE(grammars.count(name));
    const auto& [g_old, g_new] = grammars.at(name);
    CHECK(g_new.rules.size() == 3);
    // id and source/target disjointness
    std::set<std::string> old_ids, old_bodies;
    for (const auto& r : g_old.rules) {
      old_ids.insert(r.id);
      std::string body;
      for (const auto& t : r.source) body += t.text + " ";
      old_bodies.insert(body + "|" + render_sexpr(LogicalForm{r.root_predicate(), {}}));
    }
    for (const auto& r : g_new.rules) {
      CHECK_FALSE(old_ids.count(r.id));
      Grammar merged = merge_grammars(g_old, g_new);
      Example one = minimal_rule_example(merged, r.id);
      CHECK_FALSE(contains(g_old, one));
    }
  }

  // the set-field topic produces the documented sentence shape
  const auto& person = grammars.at("person").first;
  Example setex = make_example(person, "set the address of john to the address of mary",
                               "(setfield address john (field address mary))");
  CHECK(contains(person, setex));
}

TEST_CASE("tokenize_utterance splits possessives and lowercases") {
  CHECK(tokenize_utterance("John's Parents") ==
        std::vector<std::string>{"john", "'s", "parents"});
  CHECK(tokenize_utterance("friends of John") ==
        std::vector<std::string>{"friends", "of", "john"});
  CHECK(tokenize_utterance("'s") == std::vector<std::string>{"'s"});
}

TEST_SUITE_END();
