#ifndef SPANLINE_MODEL_H_
#define SPANLINE_MODEL_H_

#include <memory>
#include <optional>
#include <random>

#include "spanline/config.h"
#include "spanline/corpus.h"
#include "spanline/encoder.h"
#include "spanline/reprlayer.h"
#include "spanline/seqlabel.h"
#include "spanline/spanhead.h"

namespace spanline {

// Representation layer, optional stacked BiLSTM, and the configured head,
// sharing one ParameterStore. Forward passes are read-only over parameters
// and may run concurrently; updates require exclusive access.
class Model {
 public:
  // Fresh model with seeded initialization.
  Model(const RunConfig& cfg, const LabelSet& labels,
        const Vocabularies& vocabs);
  // Binds to parameters already present in `params` (checkpoint load).
  Model(const RunConfig& cfg, const LabelSet& labels,
        const Vocabularies& vocabs, std::unique_ptr<ad::ParameterStore> params);

  ad::ParameterStore& params() { return *params_; }
  const ad::ParameterStore& params() const { return *params_; }

  // Encoder output fed to the heads: BiLSTM states, or the raw word
  // representations when the BiLSTM is ablated.
  ad::Expr encode(ad::Graph& g, const EncodedQuestion& q, bool train_mode,
                  std::mt19937* dropout_rng) const;

  ad::Expr loss(ad::Graph& g, const EncodedQuestion& q, bool train_mode,
                std::mt19937* dropout_rng) const;

  std::vector<SpanPrediction> predict(const EncodedQuestion& q) const;
  ScoreTensor score(const EncodedQuestion& q) const;  // biaffine head only

  const RunConfig& config() const { return cfg_; }
  const LabelSet& labels() const { return *labels_; }
  const Vocabularies& vocabs() const { return vocabs_; }
  const ReprLayer& repr_layer() const { return *repr_; }
  ReprLayer& repr_layer() { return *repr_; }
  const Encoder* encoder() const { return encoder_.get(); }
  const BiaffineHead* biaffine() const { return biaffine_.get(); }
  int encoder_out_dim() const;

 private:
  void build(bool fresh);

  RunConfig cfg_;
  const LabelSet* labels_;
  Vocabularies vocabs_;
  std::unique_ptr<ad::ParameterStore> params_;
  std::unique_ptr<ReprLayer> repr_;
  std::unique_ptr<Encoder> encoder_;
  std::unique_ptr<TagSet> tags_;
  std::unique_ptr<BiaffineHead> biaffine_;
  std::unique_ptr<SoftmaxTagHead> softmax_head_;
  std::unique_ptr<CrfHead> crf_head_;
};

}  // namespace spanline

#endif  // SPANLINE_MODEL_H_
