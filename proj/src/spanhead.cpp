#include "spanline/spanhead.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace spanline {

using nlohmann::json;

void write_predictions(const std::vector<QuestionPrediction>& preds,
                       const LabelSet& labels, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write predictions file: " + path);
  for (const QuestionPrediction& qp : preds) {
    json spans = json::array();
    for (const SpanPrediction& s : qp.spans)
      spans.push_back({{"start", s.start},
                       {"end", s.end},
                       {"label", labels.name(s.label)},
                       {"score", s.score}});
    out << json{{"id", qp.id}, {"spans", spans}}.dump() << "\n";
  }
}

std::vector<QuestionPrediction> read_predictions(const std::string& path,
                                                 const LabelSet& labels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open predictions file: " + path);
  std::vector<QuestionPrediction> preds;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      QuestionPrediction qp;
      qp.id = j.at("id").get<std::string>();
      for (const json& sj : j.at("spans")) {
        SpanPrediction s;
        s.start = sj.at("start").get<int>();
        s.end = sj.at("end").get<int>();
        s.label = labels.id(sj.at("label").get<std::string>());
        s.score = sj.value("score", 1.0);
        qp.spans.push_back(s);
      }
      preds.push_back(std::move(qp));
    } catch (const json::exception& e) {
      throw Error("predictions line " + std::to_string(line_no) + ": " +
                  e.what());
    }
  }
  return preds;
}

BiaffineHead::BiaffineHead(ad::ParameterStore& params, int in_dim,
                           const LabelSet& labels, SpanHeadConfig cfg,
                           std::mt19937& rng)
    : params_(&params), labels_(&labels), cfg_(cfg), in_dim_(in_dim) {
  bind(params, in_dim, &rng);
}

BiaffineHead::BiaffineHead(ad::ParameterStore& params, int in_dim,
                           const LabelSet& labels, SpanHeadConfig cfg)
    : params_(&params), labels_(&labels), cfg_(cfg), in_dim_(in_dim) {
  bind(params, in_dim, nullptr);
}

void BiaffineHead::bind(ad::ParameterStore& params, int in_dim,
                        std::mt19937* rng) {
  if (cfg_.ffn_dim <= 0) throw Error("FFN dimension must be positive");
  const int d = cfg_.ffn_dim;
  const int c = labels_->num_classes();
  const double r1 = std::sqrt(1.0 / static_cast<double>(in_dim));
  const double r2 = std::sqrt(1.0 / static_cast<double>(d));
  auto reg = [&](const std::string& name, int rows, int cols, double r) {
    if (rng != nullptr)
      params.add(name, rows, cols, -r, r, *rng);
    else
      params.get(name);
  };
  for (const char* side : {"start", "end"}) {
    const std::string p = std::string("spanhead.ffn_") + side;
    reg(p + ".W1", d, in_dim, r1);
    reg(p + ".b1", 1, d, 0.0);
    reg(p + ".W2", d, d, r2);
    reg(p + ".b2", 1, d, 0.0);
  }
  // U is a d x c x d tensor stored as [d x c*d] with one d-wide block per
  // class; W is [c x 2d]; b is [1 x c].
  reg("spanhead.U", d, c * d, r2);
  reg("spanhead.W", c, 2 * d, r2);
  reg("spanhead.b", 1, c, 0.0);
}

ad::Expr BiaffineHead::ffn(ad::Graph& g, ad::Expr Y,
                           const std::string& prefix) const {
  ad::Expr hidden = g.add_row(
      g.matmul_nt(Y, g.param(params_->get(prefix + ".W1"))),
      g.param(params_->get(prefix + ".b1")));
  if (!cfg_.linear_ffn) hidden = g.tanh(hidden);
  return g.add_row(g.matmul_nt(hidden, g.param(params_->get(prefix + ".W2"))),
                   g.param(params_->get(prefix + ".b2")));
}

std::pair<ad::Expr, ad::Expr> BiaffineHead::ffn_project(ad::Graph& g,
                                                        ad::Expr Y) const {
  if (g.value(Y).cols() != in_dim_)
    throw Error("ffn_project: input has " +
                std::to_string(g.value(Y).cols()) + " columns, expected " +
                std::to_string(in_dim_));
  return {ffn(g, Y, "spanhead.ffn_start"), ffn(g, Y, "spanhead.ffn_end")};
}

ad::Expr BiaffineHead::biaffine_score(ad::Graph& g, ad::Expr g_s,
                                      ad::Expr g_e) const {
  const int d = cfg_.ffn_dim;
  const int c = labels_->num_classes();
  if (g.value(g_s).rows() != 1 || g.value(g_s).cols() != d ||
      g.value(g_e).rows() != 1 || g.value(g_e).cols() != d)
    throw Error("biaffine_score expects [1 x d] inputs");
  ad::Expr U = g.param(params_->get("spanhead.U"));
  ad::Expr W = g.param(params_->get("spanhead.W"));
  ad::Expr b = g.param(params_->get("spanhead.b"));
  // bilinear term per class: g_s U_k g_e^T
  ad::Expr p1 = g.matmul(g_s, U);  // [1 x c*d]
  std::vector<ad::Expr> bilin;
  for (int k = 0; k < c; ++k)
    bilin.push_back(g.matmul_nt(g.slice_cols(p1, k * d, d), g_e));  // [1 x 1]
  ad::Expr lin = g.matmul_nt(g.concat_cols({g_s, g_e}), W);  // [1 x c]
  return g.add(g.concat_cols(bilin), lin, b);
}

BiaffineHead::PairScores BiaffineHead::score_pairs(ad::Graph& g,
                                                   ad::Expr Y) const {
  const int n = static_cast<int>(g.value(Y).rows());
  if (n < 1) throw Error("score_pairs: empty input");
  const int d = cfg_.ffn_dim;
  const int c = labels_->num_classes();
  auto [G_s, G_e] = ffn_project(g, Y);

  PairScores ps;
  ps.n = n;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      ps.starts.push_back(i);
      ps.ends.push_back(j);
    }

  ad::Expr U = g.param(params_->get("spanhead.U"));
  ad::Expr W = g.param(params_->get("spanhead.W"));
  ad::Expr b = g.param(params_->get("spanhead.b"));
  ad::Expr p1 = g.matmul(G_s, U);  // [n x c*d]
  std::vector<ad::Expr> cols;
  for (int k = 0; k < c; ++k) {
    ad::Expr m_k = g.matmul_nt(g.slice_cols(p1, k * d, d), G_e);  // [n x n]
    cols.push_back(g.pick_many(m_k, ps.starts, ps.ends));         // [P x 1]
  }
  ad::Expr bilin = g.concat_cols(cols);  // [P x c]
  ad::Expr a_s = g.matmul_nt(G_s, g.slice_cols(W, 0, d));  // [n x c]
  ad::Expr a_e = g.matmul_nt(G_e, g.slice_cols(W, d, d));  // [n x c]
  ps.logits = g.add_row(
      g.add(bilin, g.gather(a_s, ps.starts), g.gather(a_e, ps.ends)), b);
  return ps;
}

ad::Expr BiaffineHead::span_loss(ad::Graph& g, const PairScores& scores,
                                 const std::vector<SpanAnnotation>& gold) const {
  const int null_id = labels_->null_id();
  const std::size_t pairs = scores.starts.size();
  std::vector<int> targets(pairs, null_id);
  for (const SpanAnnotation& s : gold) {
    if (s.start < 0 || s.end >= scores.n || s.end < s.start)
      throw Error("gold span (" + std::to_string(s.start) + ", " +
                  std::to_string(s.end) + ") out of bounds for n = " +
                  std::to_string(scores.n));
    // pair index of (i, j): i rows of decreasing length precede it
    const std::size_t p = static_cast<std::size_t>(
        s.start * scores.n - s.start * (s.start - 1) / 2 +
        (s.end - s.start));
    targets[p] = s.label;
  }
  ad::Expr ce = g.softmax_ce(scores.logits, targets);  // [P x 1]
  if (cfg_.null_weight == 1.0) return g.mean_all(ce);
  Mat w(static_cast<int>(pairs), 1);
  double total = 0.0;
  for (std::size_t p = 0; p < pairs; ++p) {
    w(static_cast<int>(p), 0) =
        targets[p] == null_id ? cfg_.null_weight : 1.0;
    total += w(static_cast<int>(p), 0);
  }
  return g.scalar_mul(g.sum_all(g.cmult(ce, g.input(std::move(w)))),
                      1.0 / total);
}

ScoreTensor BiaffineHead::score_tensor(const ad::Graph& g,
                                       const PairScores& scores) const {
  const int c = labels_->num_classes();
  ScoreTensor R;
  R.n = scores.n;
  R.c = c;
  R.score.assign(static_cast<std::size_t>(c), Mat::Zero(scores.n, scores.n));
  const Mat& logits = g.value(scores.logits);
  for (std::size_t p = 0; p < scores.starts.size(); ++p)
    for (int k = 0; k < c; ++k)
      R.score[static_cast<std::size_t>(k)](scores.starts[p], scores.ends[p]) =
          logits(static_cast<int>(p), k);
  return R;
}

Eigen::VectorXd span_distribution(const Eigen::VectorXd& r) {
  if (r.size() == 0) throw Error("span_distribution: empty score vector");
  const double m = r.maxCoeff();
  Eigen::VectorXd e = (r.array() - m).exp();
  return e / e.sum();
}

std::vector<SpanPrediction> decode_spans(const ScoreTensor& R, int n,
                                         const LabelSet& labels) {
  if (R.c != labels.num_classes())
    throw Error("score tensor classes disagree with label set");
  if (n > R.n) throw Error("decode_spans: n exceeds score tensor size");
  std::vector<SpanPrediction> candidates;
  Eigen::VectorXd r(R.c);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      for (int k = 0; k < R.c; ++k) r(k) = R.at(i, j, k);
      Eigen::VectorXd s = span_distribution(r);
      int best = 0;
      for (int k = 1; k < R.c; ++k)
        if (s(k) > s(best)) best = k;
      if (labels.is_null(best)) continue;
      candidates.push_back({i, j, best, s(best)});
    }
  std::sort(candidates.begin(), candidates.end(),
            [](const SpanPrediction& a, const SpanPrediction& b) {
              if (a.score != b.score) return a.score > b.score;
              if (a.start != b.start) return a.start < b.start;
              if (a.end != b.end) return a.end < b.end;
              return a.label < b.label;
            });
  std::vector<SpanPrediction> accepted;
  for (const SpanPrediction& cand : candidates) {
    bool clash = false;
    for (const SpanPrediction& acc : accepted)
      if (cand.annotation().overlaps(acc.annotation())) {
        clash = true;
        break;
      }
    if (!clash) accepted.push_back(cand);
  }
  std::sort(accepted.begin(), accepted.end(),
            [](const SpanPrediction& a, const SpanPrediction& b) {
              return a.annotation() < b.annotation();
            });
  return accepted;
}

}  // namespace spanline
