#ifndef SPANLINE_REPRLAYER_H_
#define SPANLINE_REPRLAYER_H_

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "spanline/ad.h"
#include "spanline/corpus.h"
#include "spanline/ctxstore.h"

namespace spanline {

struct RepresentationConfig {
  int d_ctx = 3072;  // four concatenated encoder layers of 768 each
  int d_char_in = 50;
  std::vector<int> kernel_sizes = {3, 4};
  std::vector<int> filters_per_kernel = {128, 128};
  int d_pos = 100;
  int max_char_len = 15;
  bool use_contextual = true;
  bool use_char = true;
  bool use_pos = true;
  int static_dim = 300;

  int d_char_out() const;
  int context_dim() const { return use_contextual ? d_ctx : static_dim; }
  int word_dim() const;
  void validate() const;
};

// Id-encoded question ready for the forward pass. Index arrays may be padded
// beyond n (batch padding); the model only ever reads the first n entries.
struct EncodedQuestion {
  std::string id;
  int n = 0;  // valid token count after truncation
  std::vector<int> word_ids;
  std::vector<int> pos_ids;
  std::vector<std::vector<int>> char_ids;  // per token, length max_char_len
  std::vector<SpanAnnotation> gold;        // training targets within [0, n)
  std::vector<SpanAnnotation> full_gold;   // untruncated gold for evaluation
  Mat ctx;                                 // [n x d_ctx] when contextual
  int padded_len() const { return static_cast<int>(word_ids.size()); }
};

// Chars are right-truncated to max_char_len and padded with the PAD id.
std::vector<int> encode_chars(const Token& t, const Vocabularies& vocabs,
                              int max_char_len);

EncodedQuestion encode_question(const AnnotatedQuestion& q,
                                const Vocabularies& vocabs,
                                const RepresentationConfig& cfg,
                                const ContextualStore* store, int max_seq_len,
                                std::vector<std::string>* warnings = nullptr);

// Pads every id array in the batch with PAD entries up to the longest
// member's length. The valid length n is the mask: the forward pass reads
// only the first n positions, so padding never changes a question's loss.
void pad_batch(const std::vector<EncodedQuestion*>& batch, int max_char_len);

// Per-word feature assembly: contextual (or trainable static) embeddings,
// charCNN features, and POS-tag embeddings, concatenated per switches.
class ReprLayer {
 public:
  ReprLayer(ad::ParameterStore& params, RepresentationConfig cfg,
            const Vocabularies& vocabs, std::mt19937& rng);
  // Binds to already-registered parameters (checkpoint load).
  ReprLayer(ad::ParameterStore& params, RepresentationConfig cfg,
            const Vocabularies& vocabs);

  // 1D convolutions over the padded char-embedding sequence, one block per
  // kernel size, each max-pooled over positions, then concatenated.
  ad::Expr embed_chars(ad::Graph& g, const std::vector<int>& char_ids) const;
  ad::Expr embed_chars(ad::Graph& g, const Token& t,
                       const Vocabularies& vocabs) const;
  ad::Expr embed_pos(ad::Graph& g, int pos_id) const;

  // [n x word_dim] feature matrix for the first q.n tokens.
  ad::Expr represent(ad::Graph& g, const EncodedQuestion& q) const;

  const RepresentationConfig& config() const { return cfg_; }

  // Initializes the static word table from a vector file where forms match;
  // rows stay trainable either way. Returns the number of initialized rows.
  int init_static_table(const StaticVectors& sv, const Vocabularies& vocabs);

 private:
  RepresentationConfig cfg_;
  ad::ParameterStore* params_;
};

}  // namespace spanline

#endif  // SPANLINE_REPRLAYER_H_
