#include "spanline/seqlabel.h"

#include <algorithm>
#include <cmath>

namespace spanline {

TagSet::TagSet(const LabelSet& labels) : labels_(&labels) {}

std::string TagSet::name(int tag) const {
  if (tag == 0) return "O";
  if (tag < 0 || tag >= size())
    throw Error("tag id out of range: " + std::to_string(tag));
  const int label = (tag - 1) / 2;
  return (tag % 2 == 1 ? "B-" : "I-") + labels_->name(label);
}

int TagSet::id(const std::string& tag) const {
  if (tag == "O") return 0;
  if (tag.size() < 3 || (tag[0] != 'B' && tag[0] != 'I') || tag[1] != '-')
    throw Error("unknown tag string: '" + tag + "'");
  const std::string label = tag.substr(2);
  if (!labels_->contains(label) || label == "Null")
    throw Error("unknown tag string: '" + tag + "'");
  const int l = labels_->id(label);
  return tag[0] == 'B' ? b_id(l) : i_id(l);
}

std::vector<int> TagSet::gold_tags(const AnnotatedQuestion& q) const {
  return tags_from_spans(q.spans, q.size());
}

std::vector<int> TagSet::tags_from_spans(
    const std::vector<SpanAnnotation>& spans, int n) const {
  std::vector<int> tags(static_cast<std::size_t>(n), o_id());
  for (const SpanAnnotation& s : spans) {
    if (s.start < 0 || s.end >= n || s.end < s.start)
      throw Error("span out of bounds for BIO encoding");
    tags[static_cast<std::size_t>(s.start)] = b_id(s.label);
    for (int t = s.start + 1; t <= s.end; ++t)
      tags[static_cast<std::size_t>(t)] = i_id(s.label);
  }
  return tags;
}

std::vector<SpanAnnotation> TagSet::spans_from_tags(
    const std::vector<int>& tags) const {
  std::vector<std::string> names;
  names.reserve(tags.size());
  for (int t : tags) names.push_back(name(t));
  return bio_to_spans(names, *labels_);
}

SoftmaxTagHead::SoftmaxTagHead(ad::ParameterStore& params, int in_dim,
                               const TagSet& tags, std::mt19937& rng)
    : params_(&params), tags_(&tags), in_dim_(in_dim) {
  const double r = std::sqrt(1.0 / static_cast<double>(in_dim));
  params.add("seq_softmax.E", tags.size(), in_dim, -r, r, rng);
  params.add_zeros("seq_softmax.b", 1, tags.size());
}

SoftmaxTagHead::SoftmaxTagHead(ad::ParameterStore& params, int in_dim,
                               const TagSet& tags)
    : params_(&params), tags_(&tags), in_dim_(in_dim) {
  params.get("seq_softmax.E");
  params.get("seq_softmax.b");
}

ad::Expr SoftmaxTagHead::emissions(ad::Graph& g, ad::Expr Y) const {
  return g.add_row(g.matmul_nt(Y, g.param(params_->get("seq_softmax.E"))),
                   g.param(params_->get("seq_softmax.b")));
}

ad::Expr SoftmaxTagHead::loss(ad::Graph& g, ad::Expr Y,
                              const std::vector<int>& gold_tags) const {
  if (static_cast<int>(gold_tags.size()) != g.value(Y).rows())
    throw Error("tag count " + std::to_string(gold_tags.size()) +
                " does not match sequence length " +
                std::to_string(g.value(Y).rows()));
  return g.mean_all(g.softmax_ce(emissions(g, Y), gold_tags));
}

std::vector<SpanPrediction> SoftmaxTagHead::decode(const Mat& emissions) const {
  const int n = static_cast<int>(emissions.rows());
  std::vector<int> tags(static_cast<std::size_t>(n));
  std::vector<double> logp(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) {
    Eigen::VectorXd p = span_distribution(emissions.row(t).transpose());
    int best = 0;
    for (int k = 1; k < p.size(); ++k)
      if (p(k) > p(best)) best = k;
    tags[static_cast<std::size_t>(t)] = best;
    logp[static_cast<std::size_t>(t)] = std::log(p(best));
  }
  std::vector<SpanPrediction> out;
  for (const SpanAnnotation& s : tags_->spans_from_tags(tags)) {
    double sum = 0.0;
    for (int t = s.start; t <= s.end; ++t)
      sum += logp[static_cast<std::size_t>(t)];
    out.push_back(
        {s.start, s.end, s.label,
         std::exp(sum / static_cast<double>(s.end - s.start + 1))});
  }
  return out;
}

CrfHead::CrfHead(ad::ParameterStore& params, int in_dim, const TagSet& tags,
                 std::mt19937& rng)
    : params_(&params), tags_(&tags), in_dim_(in_dim) {
  const double r = std::sqrt(1.0 / static_cast<double>(in_dim));
  const int T = tags.size();
  params.add("seq_crf.E", T, in_dim, -r, r, rng);
  params.add_zeros("seq_crf.b", 1, T);
  const double tr = std::sqrt(1.0 / static_cast<double>(T));
  params.add("seq_crf.A", T, T, -tr, tr, rng);
  params.add("seq_crf.start", 1, T, -tr, tr, rng);
  params.add("seq_crf.end", 1, T, -tr, tr, rng);
}

CrfHead::CrfHead(ad::ParameterStore& params, int in_dim, const TagSet& tags)
    : params_(&params), tags_(&tags), in_dim_(in_dim) {
  for (const char* n : {"seq_crf.E", "seq_crf.b", "seq_crf.A",
                        "seq_crf.start", "seq_crf.end"})
    params.get(n);
}

ad::Expr CrfHead::emissions(ad::Graph& g, ad::Expr Y) const {
  return g.add_row(g.matmul_nt(Y, g.param(params_->get("seq_crf.E"))),
                   g.param(params_->get("seq_crf.b")));
}

ad::Expr CrfHead::log_likelihood(ad::Graph& g, ad::Expr emissions,
                                 const std::vector<int>& gold_tags) const {
  const Mat& E = g.value(emissions);
  const int n = static_cast<int>(E.rows());
  const int T = tags_->size();
  if (n < 1) throw Error("CRF requires at least one position");
  if (E.cols() != T)
    throw Error("emission matrix has " + std::to_string(E.cols()) +
                " columns, tag set has " + std::to_string(T));
  if (static_cast<int>(gold_tags.size()) != n)
    throw Error("gold tag count does not match sequence length");
  for (int t : gold_tags)
    if (t < 0 || t >= T) throw Error("invalid tag id: " + std::to_string(t));

  ad::Expr A = g.param(params_->get("seq_crf.A"));
  ad::Expr start = g.param(params_->get("seq_crf.start"));
  ad::Expr end = g.param(params_->get("seq_crf.end"));

  // Gold path score.
  std::vector<int> rows(gold_tags.size());
  for (std::size_t t = 0; t < gold_tags.size(); ++t)
    rows[t] = static_cast<int>(t);
  std::vector<ad::Expr> terms;
  terms.push_back(g.sum_all(g.pick_many(emissions, rows, gold_tags)));
  terms.push_back(g.pick(start, 0, gold_tags.front()));
  terms.push_back(g.pick(end, 0, gold_tags.back()));
  if (n > 1) {
    std::vector<int> from(gold_tags.begin(), gold_tags.end() - 1);
    std::vector<int> to(gold_tags.begin() + 1, gold_tags.end());
    terms.push_back(g.sum_all(g.pick_many(A, from, to)));
  }
  ad::Expr gold_score = g.add(terms);

  // Forward algorithm in log space.
  ad::Expr alpha = g.add(start, g.slice_rows(emissions, 0, 1));  // [1 x T]
  for (int t = 1; t < n; ++t) {
    ad::Expr scores = g.add_col(A, g.transpose(alpha));  // A(i,j) + alpha(i)
    alpha = g.add(g.col_logsumexp(scores), g.slice_rows(emissions, t, 1));
  }
  ad::Expr log_z = g.logsumexp_row(g.add(alpha, end));
  return g.sub(gold_score, log_z);
}

ad::Expr CrfHead::loss(ad::Graph& g, ad::Expr Y,
                       const std::vector<int>& gold_tags) const {
  return g.scalar_mul(log_likelihood(g, emissions(g, Y), gold_tags), -1.0);
}

double CrfHead::path_score(const Mat& emissions,
                           const std::vector<int>& tags) const {
  const Mat& A = params_->get("seq_crf.A").value;
  const Mat& start = params_->get("seq_crf.start").value;
  const Mat& end = params_->get("seq_crf.end").value;
  double score = start(0, tags.front()) + end(0, tags.back());
  for (std::size_t t = 0; t < tags.size(); ++t)
    score += emissions(static_cast<int>(t), tags[t]);
  for (std::size_t t = 0; t + 1 < tags.size(); ++t)
    score += A(tags[t], tags[t + 1]);
  return score;
}

std::vector<int> CrfHead::viterbi(const Mat& emissions) const {
  const int n = static_cast<int>(emissions.rows());
  const int T = tags_->size();
  if (n < 1) throw Error("CRF requires at least one position");
  if (emissions.cols() != T)
    throw Error("emission matrix has " + std::to_string(emissions.cols()) +
                " columns, tag set has " + std::to_string(T));
  const Mat& A = params_->get("seq_crf.A").value;
  const Mat& start = params_->get("seq_crf.start").value;
  const Mat& end = params_->get("seq_crf.end").value;

  Mat delta(n, T);
  Eigen::MatrixXi back(n, T);
  for (int j = 0; j < T; ++j) delta(0, j) = start(0, j) + emissions(0, j);
  for (int t = 1; t < n; ++t)
    for (int j = 0; j < T; ++j) {
      int best = 0;
      double best_score = delta(t - 1, 0) + A(0, j);
      for (int i = 1; i < T; ++i) {
        const double s = delta(t - 1, i) + A(i, j);
        if (s > best_score) {
          best_score = s;
          best = i;
        }
      }
      delta(t, j) = best_score + emissions(t, j);
      back(t, j) = best;
    }
  int last = 0;
  double best_final = delta(n - 1, 0) + end(0, 0);
  for (int j = 1; j < T; ++j) {
    const double s = delta(n - 1, j) + end(0, j);
    if (s > best_final) {
      best_final = s;
      last = j;
    }
  }
  std::vector<int> tags(static_cast<std::size_t>(n));
  tags[static_cast<std::size_t>(n - 1)] = last;
  for (int t = n - 1; t > 0; --t)
    tags[static_cast<std::size_t>(t - 1)] =
        back(t, tags[static_cast<std::size_t>(t)]);
  return tags;
}

std::vector<SpanPrediction> CrfHead::decode(const Mat& emissions) const {
  std::vector<SpanPrediction> out;
  // Viterbi yields an unnormalized path, not per-span probabilities.
  for (const SpanAnnotation& s : tags_->spans_from_tags(viterbi(emissions)))
    out.push_back({s.start, s.end, s.label, 1.0});
  return out;
}

}  // namespace spanline
