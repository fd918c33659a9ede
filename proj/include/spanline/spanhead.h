#ifndef SPANLINE_SPANHEAD_H_
#define SPANLINE_SPANHEAD_H_

#include <random>
#include <string>
#include <vector>

#include "spanline/ad.h"
#include "spanline/corpus.h"

namespace spanline {

// A decoded candidate: closed word interval, non-Null label, and the
// softmax probability of that label.
struct SpanPrediction {
  int start = 0;
  int end = 0;
  int label = 0;
  double score = 0.0;

  SpanAnnotation annotation() const { return {start, end, label}; }
};

struct QuestionPrediction {
  std::string id;
  std::vector<SpanPrediction> spans;
};

// Prediction output file: JSON-lines
//   {"id": str, "spans": [{"start", "end", "label", "score"}]}.
void write_predictions(const std::vector<QuestionPrediction>& preds,
                       const LabelSet& labels, const std::string& path);
std::vector<QuestionPrediction> read_predictions(const std::string& path,
                                                 const LabelSet& labels);

// Raw pair scores r_{i,j} for one question; entries with i > j are masked
// out of both loss and decoding.
struct ScoreTensor {
  int n = 0;
  int c = 0;
  std::vector<Mat> score;  // per class: [n x n], score[k](i, j) = r_{i,j}(k)

  double at(int i, int j, int k) const { return score[static_cast<std::size_t>(k)](i, j); }
};

struct SpanHeadConfig {
  int ffn_dim = 300;  // d: hidden and output width of both FFNs
  double null_weight = 1.0;
  bool linear_ffn = false;  // identity-style FFN without the nonlinearity
};

class BiaffineHead {
 public:
  BiaffineHead(ad::ParameterStore& params, int in_dim, const LabelSet& labels,
               SpanHeadConfig cfg, std::mt19937& rng);
  BiaffineHead(ad::ParameterStore& params, int in_dim, const LabelSet& labels,
               SpanHeadConfig cfg);

  // Two independent single-hidden-layer projections of the encoder output.
  std::pair<ad::Expr, ad::Expr> ffn_project(ad::Graph& g, ad::Expr Y) const;

  // r = g_s^T U g_e + W (g_s ⊕ g_e) + b for a single pair -> [1 x c].
  ad::Expr biaffine_score(ad::Graph& g, ad::Expr g_s, ad::Expr g_e) const;

  // Scores for every candidate pair i <= j, flattened in pair order.
  struct PairScores {
    int n = 0;
    ad::Expr logits;          // [P x c], P = n(n+1)/2
    std::vector<int> starts;  // i of pair p
    std::vector<int> ends;    // j of pair p
  };
  PairScores score_pairs(ad::Graph& g, ad::Expr Y) const;

  // Mean cross-entropy over all valid candidates; gold pairs take the span
  // label, everything else Null. null_weight re-weights Null candidates.
  ad::Expr span_loss(ad::Graph& g, const PairScores& scores,
                     const std::vector<SpanAnnotation>& gold) const;

  ScoreTensor score_tensor(const ad::Graph& g, const PairScores& scores) const;

  int num_classes() const { return labels_->num_classes(); }
  const SpanHeadConfig& config() const { return cfg_; }

 private:
  void bind(ad::ParameterStore& params, int in_dim, std::mt19937* rng);
  ad::Expr ffn(ad::Graph& g, ad::Expr Y, const std::string& prefix) const;

  ad::ParameterStore* params_ = nullptr;
  const LabelSet* labels_ = nullptr;
  SpanHeadConfig cfg_;
  int in_dim_ = 0;
};

// Numerically stable softmax of a raw score vector.
Eigen::VectorXd span_distribution(const Eigen::VectorXd& r);

// Per-pair argmax, Null filtered, then probability-ranked greedy selection
// of non-overlapping spans. Ties order by probability desc, then smaller
// start, smaller end, label id.
std::vector<SpanPrediction> decode_spans(const ScoreTensor& R, int n,
                                         const LabelSet& labels);

}  // namespace spanline

#endif  // SPANLINE_SPANHEAD_H_
