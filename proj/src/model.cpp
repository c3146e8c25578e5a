#include "lap/model.hpp"

#include <algorithm>
#include <cmath>

#include "lap/errors.hpp"

namespace lap {

void init_model_params(ParamStore& store, const ModelConfig& cfg) {
  Rng rng(cfg.init_seed);
  EncoderConfig enc{cfg.d_emb, cfg.d_h};
  init_encoder_params(store, "enc_utt", enc, rng);
  init_encoder_params(store, "enc_lf", enc, rng);
  init_paren_embeddings(store, cfg.d_emb, rng);

  int d = cfg.col_dim();
  for (const char* name : {"W1", "W2", "Wp", "W3"}) {
    Param& w = store.create(name, {d, d});
    fill_uniform(w.value, rng, -0.01, 0.01);
  }

  int f_in = 4 * d + 1;
  Param& fw = store.create("f.W", {cfg.f_hidden, f_in});
  fill_uniform(fw.value, rng, -1.0 / std::sqrt(double(f_in)), 1.0 / std::sqrt(double(f_in)));
  store.create("f.b", {cfg.f_hidden});
  store.create("f.out_w", {cfg.f_hidden});  // zero: untrained retrieval is uniform
  store.create("f.out_b", {1});

  store.create("g.w", {7 * d + 2});  // zero: untrained attention is flat 0.5
  store.create("g.b", {1});
  store.create("h.w", {4 * d + 1});  // zero: untrained p_fail is exactly 0.5
  store.create("h.b", {1});

  Param& sentinel = store.create("y_root", {d});
  fill_uniform(sentinel.value, rng, -0.1, 0.1);
}

// --- Memory ----------------------------------------------------------------------

void EncodedMemory::rebuild(const ModelConfig& cfg, ParamStore& store,
                            const EmbeddingTable& table,
                            const std::vector<std::pair<std::string, Example>>& memory) {
  EncoderConfig enc{cfg.d_emb, cfg.d_h};
  entries.clear();
  max_lf_depth = 1;
  for (const auto& [rule_id, ex] : memory) {
    MemoryEntry e;
    e.rule_id = rule_id;
    e.example = ex;
    e.span = tokenize_lf(ex.logical_form);
    e.x = encode_sequence_values(store, "enc_utt", table, enc, ex.utterance);
    e.y = encode_sequence_values(store, "enc_lf", table, enc, e.span.tokens);
    e.key = Tensor::zeros({cfg.col_dim()});
    for (const Tensor& col : e.x.cols)
      for (int i = 0; i < col.size(); ++i) e.key[i] += col[i];
    if (cfg.key_pool_mean)
      for (double& v : e.key.data) v /= double(e.x.cols.size());
    max_lf_depth = std::max(max_lf_depth, depth(ex.logical_form));
    entries.push_back(std::move(e));
  }
}

int EncodedMemory::index_of_rule(const std::string& rule_id) const {
  for (size_t i = 0; i < entries.size(); ++i)
    if (entries[i].rule_id == rule_id) return int(i);
  return -1;
}

BoundMemory::BoundMemory(Graph& g, const EncodedMemory& mem, ParamStore& store,
                         const EmbeddingTable& table, const ModelConfig& cfg,
                         bool keys_in_graph, bool y_in_graph)
    : g_(&g),
      mem_(&mem),
      store_(&store),
      table_(&table),
      cfg_(cfg),
      keys_in_graph_(keys_in_graph),
      y_in_graph_(y_in_graph),
      y_(mem.size()) {}

const std::vector<Graph::Id>& BoundMemory::keys() {
  if (!keys_.empty() || mem_->entries.empty()) return keys_;
  EncoderConfig enc{cfg_.d_emb, cfg_.d_h};
  for (const auto& e : mem_->entries) {
    if (keys_in_graph_) {
      EncodedSeq seq = encode_sequence(*g_, *store_, "enc_utt", *table_, enc, e.example.utterance);
      Graph::Id pooled = cfg_.key_pool_mean ? g_->mean_cols(seq.cols)
                                            : g_->lincomb(seq.cols, g_->constant_vec(std::vector<double>(
                                                  seq.cols.size(), 1.0)));
      keys_.push_back(pooled);
    } else {
      keys_.push_back(g_->constant(e.key));
    }
  }
  return keys_;
}

const std::vector<Graph::Id>& BoundMemory::y_cols(int entry) {
  auto& cached = y_[size_t(entry)];
  if (!cached.empty()) return cached;
  const MemoryEntry& e = mem_->entries[size_t(entry)];
  if (y_in_graph_) {
    EncoderConfig enc{cfg_.d_emb, cfg_.d_h};
    EncodedSeq seq = encode_sequence(*g_, *store_, "enc_lf", *table_, enc, e.span.tokens);
    cached = seq.cols;
  } else {
    for (const Tensor& col : e.y.cols) cached.push_back(g_->constant(col));
  }
  return cached;
}

// --- Core operations -----------------------------------------------------------------

Graph::Id attention_pool(Graph& g, const std::vector<Graph::Id>& cols, Graph::Id w) {
  Graph::Id pooled = g.lincomb(cols, w);
  Graph::Id total = g.sum(w);
  if (g.value(total)[0] > 1.0) pooled = g.div_by_scalar(pooled, total);
  return pooled;
}

LookupScores lookup_scores(Graph& g, const ModelConfig& cfg, ParamStore& store,
                           BoundMemory& mem, const std::vector<Graph::Id>& x_cols,
                           Graph::Id w_attn) {
  (void)cfg;
  const auto& keys = mem.keys();
  if (keys.empty()) throw EmptyMemory("lookup over an empty memory");
  Graph::Id query = attention_pool(g, x_cols, w_attn);
  Graph::Id w1q = g.matvec_t(g.param(store, "W1"), query);  // x'ᵀW1·k = (W1ᵀx')·k

  Graph::Id fW = g.param(store, "f.W");
  Graph::Id fb = g.param(store, "f.b");
  Graph::Id fow = g.param(store, "f.out_w");
  Graph::Id fob = g.param(store, "f.out_b");

  std::vector<Graph::Id> energies;
  energies.reserve(keys.size());
  for (Graph::Id key : keys) {
    Graph::Id feats =
        g.concat({query, key, g.mul(query, key), g.absdiff(query, key), g.dot(w1q, key)});
    Graph::Id hidden = g.relu(g.affine(fW, feats, fb));
    energies.push_back(g.add(g.dot(fow, hidden), fob));
  }
  LookupScores out;
  out.dist = g.softmax(g.pack(energies));
  const Tensor& d = g.value(out.dist);
  out.argmax = 0;
  for (int i = 1; i < d.size(); ++i)
    if (d[i] > d[out.argmax]) out.argmax = i;
  return out;
}

Graph::Id align(Graph& g, const ModelConfig& cfg, ParamStore& store,
                const std::vector<Graph::Id>& x_cols, const std::vector<Graph::Id>& y_cols,
                const TokenRange& span, std::optional<Graph::Id> y_parent,
                Graph::Id w_parent) {
  (void)cfg;
  if (span.first > span.last || span.first < 1 || size_t(span.last) > y_cols.size())
    throw SpanEmpty("span [" + std::to_string(span.first) + "," +
                    std::to_string(span.last) + "] of " + std::to_string(y_cols.size()) +
                    " columns");
  Graph::Id yp = y_parent ? *y_parent : g.param(store, "y_root");
  Graph::Id w2 = g.param(store, "W2");
  Graph::Id wp = g.param(store, "Wp");
  Graph::Id gw = g.param(store, "g.w");
  Graph::Id gb = g.param(store, "g.b");

  Graph::Id wp_yp = g.matvec(wp, yp);
  std::vector<Graph::Id> w2_yj;
  for (int j = span.first - 1; j < span.last; ++j)
    w2_yj.push_back(g.matvec(w2, y_cols[size_t(j)]));

  std::vector<Graph::Id> weights;
  weights.reserve(x_cols.size());
  for (Graph::Id xi : x_cols) {
    Graph::Id xi_yp = g.mul(xi, yp);
    Graph::Id xi_yp_d = g.absdiff(xi, yp);
    Graph::Id bil_p = g.dot(xi, wp_yp);
    std::vector<Graph::Id> scores;
    for (int j = span.first - 1; j < span.last; ++j) {
      Graph::Id yj = y_cols[size_t(j)];
      Graph::Id feats = g.concat({xi, yj, yp, g.mul(xi, yj), xi_yp, g.absdiff(xi, yj),
                                  xi_yp_d, g.dot(xi, w2_yj[size_t(j - (span.first - 1))]),
                                  bil_p});
      scores.push_back(g.sigmoid(g.add(g.dot(gw, feats), gb)));
    }
    weights.push_back(g.max_reduce(g.pack(scores)));
  }
  return g.mul(g.pack(weights), g.sqrt_(w_parent));
}

Graph::Id discriminate(Graph& g, const ModelConfig& cfg, ParamStore& store,
                       Graph::Id x_pooled, const std::vector<Graph::Id>& y_cols,
                       const TokenRange& span) {
  if (span.first > span.last || span.first < 1 || size_t(span.last) > y_cols.size())
    throw SpanEmpty("span [" + std::to_string(span.first) + "," +
                    std::to_string(span.last) + "]");
  std::vector<Graph::Id> cols(y_cols.begin() + (span.first - 1), y_cols.begin() + span.last);
  Graph::Id y = cfg.subtree_pool_sum
                    ? g.lincomb(cols, g.constant_vec(std::vector<double>(cols.size(), 1.0)))
                    : g.mean_cols(cols);
  Graph::Id w3y = g.matvec(g.param(store, "W3"), y);
  Graph::Id feats = g.concat({x_pooled, y, g.mul(x_pooled, y), g.absdiff(x_pooled, y),
                              g.dot(x_pooled, w3y)});
  Graph::Id d = g.add(g.dot(g.param(store, "h.w"), feats), g.param(store, "h.b"));
  return g.sigmoid(d);
}

// --- Gold bookkeeping -------------------------------------------------------------------

GoldNode gold_root(const Example& ex) {
  return GoldNode{&ex.logical_form, &ex.derivation, nullptr, nullptr};
}

GoldNode gold_child(const Grammar& g, const GoldNode& parent, int c) {
  if (!parent.lf || size_t(c) >= parent.lf->children.size())
    throw NodeNotFound("gold child " + std::to_string(c));
  const TargetNode* tc = nullptr;
  const Derivation* owner = nullptr;
  if (parent.deriv) {
    const Rule& r = g.rule(parent.deriv->rule_id);
    tc = &r.target.children[size_t(c)];
    owner = parent.deriv;
  } else {
    tc = &parent.tmpl->children[size_t(c)];
    owner = parent.owner;
  }
  const LogicalForm* lf = &parent.lf->children[size_t(c)];
  if (tc->is_slot()) return GoldNode{lf, &owner->children[size_t(tc->slot)], nullptr, nullptr};
  return GoldNode{lf, nullptr, tc, owner};
}

bool oracle_replace(const LogicalForm& current, const GoldNode& gold) {
  return current.head != gold.lf->head ||
         current.children.size() != gold.lf->children.size();
}

// --- Engine -----------------------------------------------------------------------------

namespace {

struct Engine {
  const ModelConfig& cfg;
  ParamStore* store = nullptr;
  const EmbeddingTable* table = nullptr;
  const EncodedMemory* memory = nullptr;
  const Grammar* grammar = nullptr;
  const ParseOptions& opts;
  Trace* trace = nullptr;

  Graph g;
  std::optional<BoundMemory> bound;
  std::vector<Graph::Id> x_cols;
  int cap = 0;

  bool nn() const { return opts.use_nn; }

  void emit_lookup(int chosen, Graph::Id dist, bool have_dist) {
    if (!trace) return;
    TraceEvent ev;
    ev.type = "lookup";
    ev.chosen = chosen;
    ev.rule_id = memory->entries[size_t(chosen)].rule_id;
    if (have_dist) ev.distribution = g.value(dist).data;
    trace->events.push_back(std::move(ev));
  }

  void emit_decide(const NodePath& path, double p_fail, bool replace,
                   const std::vector<double>& attn) {
    if (!trace) return;
    TraceEvent ev;
    ev.type = "decide";
    ev.path = path;
    ev.p_fail = p_fail;
    ev.replace = replace;
    ev.attention = attn;
    trace->events.push_back(std::move(ev));
  }

  LogicalForm look_up_and_adapt(Graph::Id w, const std::optional<GoldNode>& gold,
                                const NodePath& path, int rec_depth) {
    if (rec_depth >= cap)
      throw RecursionLimitExceeded("look-up recursion exceeded " + std::to_string(cap));

    int chosen = -1;
    Graph::Id dist = -1;
    bool have_dist = false;
    if (opts.mode == ParseMode::Oracle) {
      if (!gold || !gold->deriv)
        throw MemoryRuleMissing("oracle lookup needs a derivation-rooted gold node at " +
                                render_sexpr(gold && gold->lf ? *gold->lf : LogicalForm{"?", {}}));
      chosen = memory->index_of_rule(gold->deriv->rule_id);
      if (chosen < 0)
        throw MemoryRuleMissing("no memory entry for rule " + gold->deriv->rule_id);
      if (nn()) {
        LookupScores s = lookup_scores(g, cfg, *store, *bound, x_cols, w);
        dist = s.dist;
        have_dist = true;
      }
    } else {
      LookupScores s = lookup_scores(g, cfg, *store, *bound, x_cols, w);
      chosen = s.argmax;
      dist = s.dist;
      have_dist = true;
    }
    emit_lookup(chosen, dist, have_dist);

    const MemoryEntry& entry = memory->entries[size_t(chosen)];
    const LogicalForm& tree = entry.example.logical_form;
    LogicalForm out{tree.head, {}};
    for (size_t c = 0; c < tree.children.size(); ++c) {
      std::optional<GoldNode> child_gold;
      if (opts.mode != ParseMode::Learned && gold && gold->lf &&
          c < gold->lf->children.size())
        child_gold = gold_child(*grammar, *gold, int(c));
      NodePath child_path = path;
      child_path.push_back(int(c));
      out.children.push_back(
          adapt(chosen, NodePath{int(c)}, w, child_gold, child_path, rec_depth));
    }
    return out;
  }

  LogicalForm adapt(int entry_idx, const NodePath& local, Graph::Id w_parent,
                    const std::optional<GoldNode>& gold, const NodePath& path,
                    int rec_depth) {
    const MemoryEntry& entry = memory->entries[size_t(entry_idx)];
    const LogicalForm& cur = subtree_at(entry.example.logical_form, local);
    TokenRange span = entry.span.node_spans.at(local);

    Graph::Id w = -1;
    double p_fail = -1.0;
    std::vector<double> attn;
    if (nn()) {
      NodePath parent_local(local.begin(), local.end() - 1);
      TokenRange parent_span = entry.span.node_spans.at(parent_local);
      const auto& ycols = bound->y_cols(entry_idx);
      // parent is an inner node; its head column sits after the '('
      Graph::Id yp = ycols[size_t(parent_span.first)];
      w = align(g, cfg, *store, x_cols, ycols, span, yp, w_parent);
      Graph::Id pooled = attention_pool(g, x_cols, w);
      Graph::Id p = discriminate(g, cfg, *store, pooled, ycols, span);
      p_fail = g.value(p)[0];
      attn = g.value(w).data;
    }

    bool replace = false;
    if (opts.mode == ParseMode::Learned) {
      replace = p_fail > 0.5;
    } else {
      replace = gold.has_value() && oracle_replace(cur, *gold);
    }
    emit_decide(path, p_fail, replace, attn);

    if (replace) return look_up_and_adapt(w, gold, path, rec_depth + 1);

    LogicalForm out{cur.head, {}};
    for (size_t c = 0; c < cur.children.size(); ++c) {
      std::optional<GoldNode> child_gold;
      if (opts.mode != ParseMode::Learned && gold && gold->lf &&
          c < gold->lf->children.size())
        child_gold = gold_child(*grammar, *gold, int(c));
      NodePath child_local = local;
      child_local.push_back(int(c));
      NodePath child_path = path;
      child_path.push_back(int(c));
      out.children.push_back(
          adapt(entry_idx, child_local, w, child_gold, child_path, rec_depth));
    }
    return out;
  }
};

}  // namespace

Parser::Parser(const ModelConfig& cfg, ParamStore* store, const EmbeddingTable* table,
               const EncodedMemory* memory, const Grammar* grammar)
    : cfg_(cfg), store_(store), table_(table), memory_(memory), grammar_(grammar) {}

LogicalForm Parser::parse(const std::vector<std::string>& utterance,
                          const ParseOptions& opts, const Example* gold,
                          Trace* trace) const {
  if (memory_ == nullptr || memory_->entries.empty())
    throw EmptyMemory("parse requires a non-empty memory");
  if (utterance.empty()) throw EmptyInput("empty utterance");
  if (opts.mode != ParseMode::Learned && gold == nullptr)
    throw Error("oracle parse modes need the gold example");

  Engine eng{cfg_, store_, table_, memory_, grammar_, opts, trace, {}, {}, {}, 0};
  eng.cap = std::max(1, cfg_.recursion_cap_multiplier * memory_->max_lf_depth);

  if (opts.use_nn) {
    EncoderConfig enc{cfg_.d_emb, cfg_.d_h};
    eng.bound.emplace(eng.g, *memory_, *store_, *table_, cfg_, false, false);
    eng.x_cols = encode_utterance(eng.g, *store_, *table_, enc, utterance).cols;
  }
  Graph::Id w0 = -1;
  if (opts.use_nn)
    w0 = eng.g.constant_vec(std::vector<double>(utterance.size(), 1.0));

  std::optional<GoldNode> root;
  if (opts.mode != ParseMode::Learned) root = gold_root(*gold);

  try {
    LogicalForm out = eng.look_up_and_adapt(w0, root, {}, 0);
    if (trace) trace->output = render_sexpr(out);
    return out;
  } catch (const RecursionLimitExceeded& e) {
    throw ParseFailure(e.what());
  }
}

}  // namespace lap
