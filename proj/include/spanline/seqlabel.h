#ifndef SPANLINE_SEQLABEL_H_
#define SPANLINE_SEQLABEL_H_

#include <random>
#include <string>
#include <vector>

#include "spanline/ad.h"
#include "spanline/corpus.h"
#include "spanline/spanhead.h"

namespace spanline {

// BIO tags over the label set: O plus B-L/I-L per label, T = 2*labels + 1.
class TagSet {
 public:
  explicit TagSet(const LabelSet& labels);

  int size() const { return 2 * labels_->num_labels() + 1; }
  int o_id() const { return 0; }
  int b_id(int label) const { return 1 + 2 * label; }
  int i_id(int label) const { return 2 + 2 * label; }

  std::string name(int tag) const;
  int id(const std::string& tag) const;

  std::vector<int> gold_tags(const AnnotatedQuestion& q) const;
  std::vector<int> tags_from_spans(const std::vector<SpanAnnotation>& spans,
                                   int n) const;
  std::vector<SpanAnnotation> spans_from_tags(
      const std::vector<int>& tags) const;

  const LabelSet& labels() const { return *labels_; }

 private:
  const LabelSet* labels_;
};

// Per-token softmax over BIO tags; decoding is the per-token argmax.
class SoftmaxTagHead {
 public:
  SoftmaxTagHead(ad::ParameterStore& params, int in_dim, const TagSet& tags,
                 std::mt19937& rng);
  SoftmaxTagHead(ad::ParameterStore& params, int in_dim, const TagSet& tags);

  ad::Expr emissions(ad::Graph& g, ad::Expr Y) const;  // [n x T]
  ad::Expr loss(ad::Graph& g, ad::Expr Y,
                const std::vector<int>& gold_tags) const;
  std::vector<SpanPrediction> decode(const Mat& emissions) const;

 private:
  ad::ParameterStore* params_;
  const TagSet* tags_;
  int in_dim_;
};

// Linear-chain CRF over BIO tags: emission projection, transition matrix,
// and start/end transition vectors. No transition constraints; stray I tags
// are repaired at span conversion.
class CrfHead {
 public:
  CrfHead(ad::ParameterStore& params, int in_dim, const TagSet& tags,
          std::mt19937& rng);
  CrfHead(ad::ParameterStore& params, int in_dim, const TagSet& tags);

  ad::Expr emissions(ad::Graph& g, ad::Expr Y) const;  // [n x T]

  // score(tags) - logZ with logZ by the forward algorithm in log space.
  ad::Expr log_likelihood(ad::Graph& g, ad::Expr emissions,
                          const std::vector<int>& gold_tags) const;
  ad::Expr loss(ad::Graph& g, ad::Expr Y,
                const std::vector<int>& gold_tags) const;

  // Max-score path; ties break toward the lower tag id.
  std::vector<int> viterbi(const Mat& emissions) const;
  std::vector<SpanPrediction> decode(const Mat& emissions) const;

  // Path score under current parameters (used by tests and tie-breaking).
  double path_score(const Mat& emissions, const std::vector<int>& tags) const;

 private:
  ad::ParameterStore* params_;
  const TagSet* tags_;
  int in_dim_;
};

}  // namespace spanline

#endif  // SPANLINE_SEQLABEL_H_
