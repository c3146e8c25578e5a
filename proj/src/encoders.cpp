#include "lap/encoders.hpp"

#include <fstream>
#include <sstream>

#include "lap/errors.hpp"

namespace lap {

Tensor EmbeddingTable::lookup(const std::string& word) const {
  auto it = vocab.find(word);
  if (it != vocab.end()) {
    Tensor out = Tensor::zeros({dim});
    const double* row = &vectors.data[size_t(it->second) * dim];
    std::copy(row, row + dim, out.data.begin());
    return out;
  }
  // deterministic fallback: same unseen word, same vector
  Rng rng(fnv1a64(word) ^ oov_seed);
  Tensor out = Tensor::zeros({dim});
  fill_uniform(out, rng, -0.5, 0.5);
  return out;
}

EmbeddingTable load_word_vectors(const std::string& path, int dim) {
  if (dim <= 0) throw DimensionMismatch("embedding dim must be positive");
  std::ifstream in(path);
  if (!in) throw FileUnreadable("cannot open word vectors at " + path);
  EmbeddingTable table;
  table.dim = dim;
  std::vector<double> rows;
  std::string line;
  bool any_content = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    any_content = true;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    std::vector<double> vals;
    double v;
    while (ls >> v) vals.push_back(v);
    if (word.empty() || int(vals.size()) != dim || table.vocab.count(word)) {
      ++table.skipped_lines;
      continue;
    }
    table.vocab[word] = int(rows.size() / size_t(dim));
    rows.insert(rows.end(), vals.begin(), vals.end());
  }
  if (any_content && table.vocab.empty())
    throw DimensionMismatch("no line in " + path + " has " + std::to_string(dim) +
                            " values");
  table.vectors = Tensor({int(table.vocab.size()), dim}, std::move(rows));
  return table;
}

EmbeddingTable hash_only_table(int dim) {
  EmbeddingTable table;
  table.dim = dim;
  table.vectors = Tensor({0, dim}, {});
  return table;
}

void init_encoder_params(ParamStore& store, const std::string& prefix,
                         const EncoderConfig& cfg, Rng& rng) {
  double a = 1.0 / std::sqrt(double(cfg.d_h));
  for (const char* dir : {"fwd", "bck"}) {
    std::string base = prefix + "." + dir;
    Param& wx = store.create(base + ".W_x", {4 * cfg.d_h, cfg.d_emb});
    Param& wh = store.create(base + ".W_h", {4 * cfg.d_h, cfg.d_h});
    Param& b = store.create(base + ".b", {4 * cfg.d_h});
    fill_uniform(wx.value, rng, -a, a);
    fill_uniform(wh.value, rng, -a, a);
    for (int i = cfg.d_h; i < 2 * cfg.d_h; ++i) b.value[i] = 1.0;  // forget gate
  }
}

void init_paren_embeddings(ParamStore& store, int d_emb, Rng& rng) {
  Param& lp = store.create("emb.lparen", {d_emb});
  Param& rp = store.create("emb.rparen", {d_emb});
  fill_uniform(lp.value, rng, -0.5, 0.5);
  fill_uniform(rp.value, rng, -0.5, 0.5);
}

namespace {

Graph::Id token_embedding(Graph& g, ParamStore& store, const EmbeddingTable& table,
                          const std::string& token) {
  if (token == "(") return g.param(store, "emb.lparen");
  if (token == ")") return g.param(store, "emb.rparen");
  return g.constant(table.lookup(token));
}

std::vector<Graph::Id> run_direction(Graph& g, ParamStore& store, const std::string& base,
                                     const std::vector<Graph::Id>& embs, int d_h) {
  LstmRefs refs{g.param(store, base + ".W_x"), g.param(store, base + ".W_h"),
                g.param(store, base + ".b")};
  Graph::Id h = g.constant(Tensor::zeros({d_h}));
  Graph::Id c = g.constant(Tensor::zeros({d_h}));
  std::vector<Graph::Id> states;
  states.reserve(embs.size());
  for (Graph::Id x : embs) {
    auto [h2, c2] = lstm_step(g, refs, x, h, c);
    h = h2;
    c = c2;
    states.push_back(h);
  }
  return states;
}

}  // namespace

EncodedSeq encode_sequence(Graph& g, ParamStore& store, const std::string& prefix,
                           const EmbeddingTable& table, const EncoderConfig& cfg,
                           const std::vector<std::string>& tokens) {
  if (tokens.empty()) throw EmptyInput("cannot encode an empty sequence");
  std::vector<Graph::Id> embs;
  embs.reserve(tokens.size());
  for (const auto& t : tokens) embs.push_back(token_embedding(g, store, table, t));

  auto fwd = run_direction(g, store, prefix + ".fwd", embs, cfg.d_h);
  std::vector<Graph::Id> rev_embs(embs.rbegin(), embs.rend());
  auto bck = run_direction(g, store, prefix + ".bck", rev_embs, cfg.d_h);

  EncodedSeq out;
  out.tokens = tokens;
  size_t T = tokens.size();
  for (size_t i = 0; i < T; ++i)
    out.cols.push_back(g.concat({fwd[i], bck[T - 1 - i]}));
  return out;
}

EncodedSeq encode_utterance(Graph& g, ParamStore& store, const EmbeddingTable& table,
                            const EncoderConfig& cfg, const std::vector<std::string>& words) {
  return encode_sequence(g, store, "enc_utt", table, cfg, words);
}

EncodedSeq encode_logical_form(Graph& g, ParamStore& store, const EmbeddingTable& table,
                               const EncoderConfig& cfg, const LogicalForm& lf) {
  return encode_sequence(g, store, "enc_lf", table, cfg, tokenize_lf(lf).tokens);
}

EncodedSeqValues encode_sequence_values(ParamStore& store, const std::string& prefix,
                                        const EmbeddingTable& table, const EncoderConfig& cfg,
                                        const std::vector<std::string>& tokens) {
  Graph g;
  EncodedSeq seq = encode_sequence(g, store, prefix, table, cfg, tokens);
  EncodedSeqValues out;
  out.tokens = seq.tokens;
  for (Graph::Id c : seq.cols) out.cols.push_back(g.value(c));
  return out;
}

}  // namespace lap
