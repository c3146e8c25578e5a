#ifndef LAP_ENCODERS_HPP
#define LAP_ENCODERS_HPP

#include <string>
#include <vector>

#include "lap/nn.hpp"
#include "lap/sexpr.hpp"

namespace lap {

// Word-vector table with a deterministic hash fallback, so unknown words and
// predicates from one-shot rules still get stable vectors.
struct EmbeddingTable {
  std::map<std::string, int> vocab;
  Tensor vectors;  // [|V|, dim]
  int dim = 0;
  uint64_t oov_seed = 0x1fa77ULL;
  bool trainable = false;
  int skipped_lines = 0;

  Tensor lookup(const std::string& word) const;
  bool has(const std::string& word) const { return vocab.count(word) > 0; }
};

// File of lines `word v1 ... v_dim`. Malformed lines are counted and
// skipped; a file that yields no rows at all is a dimension mismatch.
EmbeddingTable load_word_vectors(const std::string& path, int dim);

// Table with an empty vocabulary; every token goes through the hash fallback.
EmbeddingTable hash_only_table(int dim);

struct EncoderConfig {
  int d_emb = 50;
  int d_h = 64;  // per direction; columns are 2*d_h
};

// Creates `<prefix>.fwd.*` / `<prefix>.bck.*` LSTM weights. Uniform
// ±1/sqrt(d_h) init with forget-gate bias +1.
void init_encoder_params(ParamStore& store, const std::string& prefix,
                         const EncoderConfig& cfg, Rng& rng);

// Creates the two dedicated parenthesis embeddings (word-vector files rarely
// carry parentheses, and these stay trainable either way).
void init_paren_embeddings(ParamStore& store, int d_emb, Rng& rng);

// Sequence encoding bound to a graph: column i is [h_fwd_i ; h_bck_{T-i+1}].
struct EncodedSeq {
  std::vector<std::string> tokens;
  std::vector<Graph::Id> cols;
};

// Value-only encoding (used to cache memory entries between refreshes).
struct EncodedSeqValues {
  std::vector<std::string> tokens;
  std::vector<Tensor> cols;
};

EncodedSeq encode_sequence(Graph& g, ParamStore& store, const std::string& prefix,
                           const EmbeddingTable& table, const EncoderConfig& cfg,
                           const std::vector<std::string>& tokens);

EncodedSeq encode_utterance(Graph& g, ParamStore& store, const EmbeddingTable& table,
                            const EncoderConfig& cfg, const std::vector<std::string>& words);

EncodedSeq encode_logical_form(Graph& g, ParamStore& store, const EmbeddingTable& table,
                               const EncoderConfig& cfg, const LogicalForm& lf);

EncodedSeqValues encode_sequence_values(ParamStore& store, const std::string& prefix,
                                        const EmbeddingTable& table, const EncoderConfig& cfg,
                                        const std::vector<std::string>& tokens);

}  // namespace lap

#endif
