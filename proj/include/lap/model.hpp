#ifndef LAP_MODEL_HPP
#define LAP_MODEL_HPP

#include <optional>
#include <string>
#include <vector>

#include "lap/encoders.hpp"
#include "lap/nn.hpp"
#include "lap/scfg.hpp"
#include "lap/sexpr.hpp"

namespace lap {

struct ModelConfig {
  int d_emb = 50;
  int d_h = 64;        // encoder hidden size per direction
  int f_hidden = 128;  // hidden layer of the retrieval MLP
  // The paper pairs a Σ formula with the word "mean" in two places; both
  // poolings are exposed. Keys default to mean, subtree pooling to the
  // literal Σ.
  bool key_pool_mean = true;
  bool subtree_pool_sum = true;
  int recursion_cap_multiplier = 3;
  uint64_t init_seed = 13;

  int col_dim() const { return 2 * d_h; }
};

// Creates every learned weight: both encoders, parenthesis embeddings, the
// bilinear forms W1/W2/Wp/W3, the retrieval MLP f, the aligner g, the
// discriminator h, and the root-parent sentinel. The output layers of f, g
// and h start at zero so an untrained model scores uniformly.
void init_model_params(ParamStore& store, const ModelConfig& cfg);

// --- Memory -------------------------------------------------------------------

struct MemoryEntry {
  std::string rule_id;
  Example example;
  TokenSpan span;               // spans of example.logical_form tokens
  EncodedSeqValues x, y;        // cached encodings
  Tensor key;                   // pooled utterance representation
};

class EncodedMemory {
 public:
  std::vector<MemoryEntry> entries;
  int max_lf_depth = 1;

  void rebuild(const ModelConfig& cfg, ParamStore& store, const EmbeddingTable& table,
               const std::vector<std::pair<std::string, Example>>& memory);
  int index_of_rule(const std::string& rule_id) const;
  size_t size() const { return entries.size(); }
};

// Per-graph view of the memory. Keys and exemplar encodings can either be
// wrapped as constants from the cache or re-encoded in-graph so gradients
// reach the encoders.
class BoundMemory {
 public:
  BoundMemory(Graph& g, const EncodedMemory& mem, ParamStore& store,
              const EmbeddingTable& table, const ModelConfig& cfg, bool keys_in_graph,
              bool y_in_graph);

  const std::vector<Graph::Id>& keys();
  const std::vector<Graph::Id>& y_cols(int entry);
  const EncodedMemory& encoded() const { return *mem_; }

 private:
  Graph* g_;
  const EncodedMemory* mem_;
  ParamStore* store_;
  const EmbeddingTable* table_;
  ModelConfig cfg_;
  bool keys_in_graph_, y_in_graph_;
  std::vector<Graph::Id> keys_;
  std::vector<std::vector<Graph::Id>> y_;
};

// --- Core operations ------------------------------------------------------------

// Pool sequence columns with attention weights; divides by Σw when Σw > 1.
Graph::Id attention_pool(Graph& g, const std::vector<Graph::Id>& cols, Graph::Id w);

struct LookupScores {
  Graph::Id dist;  // softmax over memory entries
  int argmax = -1;
};

// Retrieval distribution over the memory given query columns and attention.
LookupScores lookup_scores(Graph& g, const ModelConfig& cfg, ParamStore& store,
                           BoundMemory& mem, const std::vector<Graph::Id>& x_cols,
                           Graph::Id w_attn);

// Aligner: w_i = max_{j in span} σ(s_ij), then refined by sqrt of the parent
// attention. `y_parent` is the parent predicate column; pass nullopt for a
// root subtree to use the trainable sentinel.
Graph::Id align(Graph& g, const ModelConfig& cfg, ParamStore& store,
                const std::vector<Graph::Id>& x_cols, const std::vector<Graph::Id>& y_cols,
                const TokenRange& span, std::optional<Graph::Id> y_parent,
                Graph::Id w_parent);

// Discriminator: probability that the subtree fails to match the pooled
// utterance representation.
Graph::Id discriminate(Graph& g, const ModelConfig& cfg, ParamStore& store,
                       Graph::Id x_pooled, const std::vector<Graph::Id>& y_cols,
                       const TokenRange& span);

// --- Gold-node bookkeeping --------------------------------------------------------
//
// A gold subtree paired with the derivation node that produced it; nodes
// inside a rule's fixed template carry the template position instead.
struct GoldNode {
  const LogicalForm* lf = nullptr;
  const Derivation* deriv = nullptr;   // set when this node is a derivation root
  const TargetNode* tmpl = nullptr;    // set for template-internal nodes
  const Derivation* owner = nullptr;   // derivation owning `tmpl`
};

GoldNode gold_root(const Example& ex);
GoldNode gold_child(const Grammar& g, const GoldNode& parent, int c);

// Keep iff the current subtree agrees with the gold node on root predicate
// and arity; divergence means replace-and-retrieve.
bool oracle_replace(const LogicalForm& current, const GoldNode& gold);

// --- Parse engine --------------------------------------------------------------------

enum class ParseMode { Learned, Oracle, OracleDiscrim };

struct TraceEvent {
  std::string type;  // "lookup" or "decide"
  // lookup fields
  int chosen = -1;
  std::string rule_id;
  std::vector<double> distribution;
  // decide fields
  NodePath path;
  double p_fail = -1.0;  // < 0 when the model was not evaluated
  bool replace = false;
  std::vector<double> attention;
};

struct Trace {
  std::vector<TraceEvent> events;
  std::string output;
};

struct ParseOptions {
  ParseMode mode = ParseMode::Learned;
  bool use_nn = true;  // false: pure structural oracle replay, no parameters touched
};

class Parser {
 public:
  Parser(const ModelConfig& cfg, ParamStore* store, const EmbeddingTable* table,
         const EncodedMemory* memory, const Grammar* grammar);

  // Oracle modes need the gold example (with derivation) to steer decisions.
  LogicalForm parse(const std::vector<std::string>& utterance, const ParseOptions& opts,
                    const Example* gold = nullptr, Trace* trace = nullptr) const;

 private:
  ModelConfig cfg_;
  ParamStore* store_;
  const EmbeddingTable* table_;
  const EncodedMemory* memory_;
  const Grammar* grammar_;
};

}  // namespace lap

#endif
