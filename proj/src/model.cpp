#include "spanline/model.h"

namespace spanline {

Model::Model(const RunConfig& cfg, const LabelSet& labels,
             const Vocabularies& vocabs)
    : cfg_(cfg),
      labels_(&labels),
      vocabs_(vocabs),
      params_(std::make_unique<ad::ParameterStore>()) {
  build(/*fresh=*/true);
}

Model::Model(const RunConfig& cfg, const LabelSet& labels,
             const Vocabularies& vocabs,
             std::unique_ptr<ad::ParameterStore> params)
    : cfg_(cfg), labels_(&labels), vocabs_(vocabs), params_(std::move(params)) {
  build(/*fresh=*/false);
}

int Model::encoder_out_dim() const {
  return cfg_.use_bilstm ? encoder_->out_dim() : cfg_.repr().word_dim();
}

void Model::build(bool fresh) {
  cfg_.validate();
  std::mt19937 rng(static_cast<std::mt19937::result_type>(cfg_.seed));
  const RepresentationConfig rc = cfg_.repr();
  const int d_enc = cfg_.use_bilstm ? 2 * cfg_.encoder_hidden : rc.word_dim();
  tags_ = std::make_unique<TagSet>(*labels_);
  if (fresh) {
    repr_ = std::make_unique<ReprLayer>(*params_, rc, vocabs_, rng);
    if (cfg_.use_bilstm)
      encoder_ = std::make_unique<Encoder>(*params_, cfg_.enc(), rc.word_dim(),
                                           rng);
    switch (cfg_.head) {
      case HeadKind::kBiaffine:
        biaffine_ = std::make_unique<BiaffineHead>(*params_, d_enc, *labels_,
                                                   cfg_.span_head(), rng);
        break;
      case HeadKind::kSeqSoftmax:
        softmax_head_ =
            std::make_unique<SoftmaxTagHead>(*params_, d_enc, *tags_, rng);
        break;
      case HeadKind::kSeqCrf:
        crf_head_ = std::make_unique<CrfHead>(*params_, d_enc, *tags_, rng);
        break;
    }
  } else {
    repr_ = std::make_unique<ReprLayer>(*params_, rc, vocabs_);
    if (cfg_.use_bilstm)
      encoder_ =
          std::make_unique<Encoder>(*params_, cfg_.enc(), rc.word_dim());
    switch (cfg_.head) {
      case HeadKind::kBiaffine:
        biaffine_ = std::make_unique<BiaffineHead>(*params_, d_enc, *labels_,
                                                   cfg_.span_head());
        break;
      case HeadKind::kSeqSoftmax:
        softmax_head_ =
            std::make_unique<SoftmaxTagHead>(*params_, d_enc, *tags_);
        break;
      case HeadKind::kSeqCrf:
        crf_head_ = std::make_unique<CrfHead>(*params_, d_enc, *tags_);
        break;
    }
  }
}

ad::Expr Model::encode(ad::Graph& g, const EncodedQuestion& q, bool train_mode,
                       std::mt19937* dropout_rng) const {
  ad::Expr X = repr_->represent(g, q);
  if (!cfg_.use_bilstm) return X;
  return encoder_->encode(g, X, train_mode, dropout_rng);
}

ad::Expr Model::loss(ad::Graph& g, const EncodedQuestion& q, bool train_mode,
                     std::mt19937* dropout_rng) const {
  ad::Expr Y = encode(g, q, train_mode, dropout_rng);
  switch (cfg_.head) {
    case HeadKind::kBiaffine: {
      auto scores = biaffine_->score_pairs(g, Y);
      return biaffine_->span_loss(g, scores, q.gold);
    }
    case HeadKind::kSeqSoftmax:
      return softmax_head_->loss(g, Y, tags_->tags_from_spans(q.gold, q.n));
    case HeadKind::kSeqCrf:
      return crf_head_->loss(g, Y, tags_->tags_from_spans(q.gold, q.n));
  }
  throw Error("invalid head kind");
}

std::vector<SpanPrediction> Model::predict(const EncodedQuestion& q) const {
  ad::Graph g;
  ad::Expr Y = encode(g, q, /*train_mode=*/false, nullptr);
  switch (cfg_.head) {
    case HeadKind::kBiaffine: {
      auto scores = biaffine_->score_pairs(g, Y);
      return decode_spans(biaffine_->score_tensor(g, scores), q.n, *labels_);
    }
    case HeadKind::kSeqSoftmax:
      return softmax_head_->decode(
          g.value(softmax_head_->emissions(g, Y)));
    case HeadKind::kSeqCrf:
      return crf_head_->decode(g.value(crf_head_->emissions(g, Y)));
  }
  throw Error("invalid head kind");
}

ScoreTensor Model::score(const EncodedQuestion& q) const {
  if (cfg_.head != HeadKind::kBiaffine)
    throw Error("score tensors exist only for the biaffine head");
  ad::Graph g;
  ad::Expr Y = encode(g, q, /*train_mode=*/false, nullptr);
  auto scores = biaffine_->score_pairs(g, Y);
  return biaffine_->score_tensor(g, scores);
}

}  // namespace spanline
