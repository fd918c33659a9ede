#include <doctest.h>

#include <random>
#include <set>

#include "spanline/metrics.h"
#include "spanline/synthetic.h"

using namespace spanline;

namespace {

const LabelSet& L() { return LabelSet::standard(); }

SpanIndex one(const std::string& id, std::vector<SpanAnnotation> spans) {
  SpanIndex idx;
  idx[id] = std::move(spans);
  return idx;
}

}  // namespace

TEST_CASE("prf formulas and degenerate conventions") {
  Prf c{3, 1, 2};
  CHECK(c.precision() == doctest::Approx(75.0));
  CHECK(c.recall() == doctest::Approx(60.0));
  CHECK(c.f1() == doctest::Approx(66.6666666).epsilon(1e-6));
  CHECK(Prf{0, 0, 5}.precision() == 100.0);  // no predictions
  CHECK(Prf{0, 3, 0}.recall() == 100.0);     // no gold
  CHECK(Prf{0, 0, 0}.f1() == doctest::Approx(100.0));
  CHECK(Prf{0, 1, 1}.f1() == 0.0);
}

TEST_CASE("score_spans counts exact matches only") {
  const int tv = L().id("TV"), qt = L().id("QT");
  SpanIndex gold = one("q1", {{0, 1, tv}, {3, 3, qt}});
  SpanIndex pred = one("q1", {{0, 1, tv}, {3, 4, qt}});
  EvalReport r = score_spans(gold, pred, L());
  CHECK(r.overall.tp == 1);
  CHECK(r.overall.fp == 1);
  CHECK(r.overall.fn == 1);
  REQUIRE(r.rows.size() == 2);
  CHECK(r.rows[0].label == "QT");  // label-set order
  CHECK(r.rows[1].label == "TV");
  CHECK(r.rows[1].counts.tp == 1);

  // identical predictions give perfect scores
  EvalReport perfect = score_spans(gold, gold, L());
  CHECK(perfect.overall.f1() == doctest::Approx(100.0));
  CHECK(perfect.errors.type1 == 0);

  // duplicate predictions collapse before scoring
  SpanIndex dup = one("q1", {{0, 1, tv}, {0, 1, tv}, {3, 3, qt}});
  EvalReport r2 = score_spans(gold, dup, L());
  CHECK(r2.overall.tp == 2);
  CHECK(r2.overall.fp == 0);

  SpanIndex missing_q;
  CHECK_THROWS_AS(score_spans(gold, missing_q, L()), Error);
}

TEST_CASE("count identities hold on random instances") {
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> label(0, L().num_labels() - 1);
  for (int iter = 0; iter < 100; ++iter) {
    SpanIndex gold, pred;
    long n_gold = 0, n_pred = 0;
    for (int q = 0; q < 4; ++q) {
      const std::string id = "q" + std::to_string(q);
      std::set<SpanAnnotation> gset, pset;
      for (int s = 0; s < 4; ++s) {
        const int start = static_cast<int>(rng() % 6);
        const int len = static_cast<int>(rng() % 3);
        if (rng() % 2) gset.insert({start, start + len, label(rng)});
        const int start2 = static_cast<int>(rng() % 6);
        if (rng() % 2) pset.insert({start2, start2 + len, label(rng)});
      }
      gold[id] = {gset.begin(), gset.end()};
      pred[id] = {pset.begin(), pset.end()};
      n_gold += static_cast<long>(gset.size());
      n_pred += static_cast<long>(pset.size());
    }
    EvalReport r = score_spans(gold, pred, L());
    CHECK(r.overall.tp + r.overall.fn == n_gold);
    CHECK(r.overall.tp + r.overall.fp == n_pred);

    // brute-force tp: per question, exact triple matches
    long tp = 0;
    for (const auto& [id, gs] : gold)
      for (const SpanAnnotation& g : gs)
        for (const SpanAnnotation& p : pred[id])
          if (g == p) ++tp;
    CHECK(r.overall.tp == tp);

    // error categories partition the non-exact spans
    const auto cases = classify_errors(gold, pred, L());
    long covered_gold = 0, covered_pred = 0;
    for (const auto& e : cases) {
      if (e.gold) ++covered_gold;
      if (e.pred) ++covered_pred;
    }
    CHECK(covered_gold == n_gold - tp);
    CHECK(covered_pred == n_pred - tp);
  }
}

TEST_CASE("micro scores are invariant to question partitioning") {
  const int tv = L().id("TV"), a = L().id("A");
  SpanIndex gold_joined = one("q", {{0, 1, tv}, {5, 6, a}});
  SpanIndex pred_joined = one("q", {{0, 1, tv}, {5, 5, a}});
  SpanIndex gold_split, pred_split;
  gold_split["q-left"] = {{0, 1, tv}};
  gold_split["q-right"] = {{5, 6, a}};
  pred_split["q-left"] = {{0, 1, tv}};
  pred_split["q-right"] = {{5, 5, a}};
  EvalReport j = score_spans(gold_joined, pred_joined, L());
  EvalReport s = score_spans(gold_split, pred_split, L());
  CHECK(j.overall.tp == s.overall.tp);
  CHECK(j.overall.fp == s.overall.fp);
  CHECK(j.overall.fn == s.overall.fn);
}

TEST_CASE("classify_errors reproduces the four reference scenarios") {
  const int a = L().id("A"), if4 = L().id("IF4");
  const int ano = L().id("ANO"), tp_label = L().id("TP");

  // longer segment, same label
  auto longer = classify_errors(one("q", {{2, 5, a}}), one("q", {{2, 6, a}}), L());
  REQUIRE(longer.size() == 1);
  CHECK(longer[0].category == ErrorCategory::kType1);

  // shorter segment, same label
  auto shorter = classify_errors(one("q", {{2, 5, a}}), one("q", {{3, 5, a}}), L());
  REQUIRE(shorter.size() == 1);
  CHECK(shorter[0].category == ErrorCategory::kType1);

  // TP predicted for an ANO gold with exact boundaries
  auto swap1 = classify_errors(one("q", {{2, 5, ano}}),
                               one("q", {{2, 5, tp_label}}), L());
  REQUIRE(swap1.size() == 1);
  CHECK(swap1[0].category == ErrorCategory::kType2);

  // IF4 predicted for an A gold with exact boundaries
  auto swap2 = classify_errors(one("q", {{2, 5, a}}), one("q", {{2, 5, if4}}), L());
  REQUIRE(swap2.size() == 1);
  CHECK(swap2[0].category == ErrorCategory::kType2);

  // no gold: spurious; no pred: missed
  auto spurious = classify_errors(one("q", {}), one("q", {{0, 1, a}}), L());
  REQUIRE(spurious.size() == 1);
  CHECK(spurious[0].category == ErrorCategory::kSpurious);
  CHECK(!spurious[0].gold.has_value());
  auto missed = classify_errors(one("q", {{0, 1, a}}), one("q", {}), L());
  REQUIRE(missed.size() == 1);
  CHECK(missed[0].category == ErrorCategory::kMissed);

  // overlapping but different label and bounds: spurious + missed
  auto cross = classify_errors(one("q", {{0, 2, a}}), one("q", {{1, 3, if4}}), L());
  CHECK(cross.size() == 2);
  std::set<ErrorCategory> cats;
  for (const auto& e : cross) cats.insert(e.category);
  CHECK(cats.count(ErrorCategory::kSpurious) == 1);
  CHECK(cats.count(ErrorCategory::kMissed) == 1);
}

TEST_CASE("greedy overlap pairing prefers the larger overlap") {
  const int a = L().id("A");
  // gold (0,5); preds (0,4) and (5,5): the 5-wide overlap pairs first
  auto cases = classify_errors(one("q", {{0, 5, a}}),
                               one("q", {{0, 4, a}, {5, 5, a}}), L());
  REQUIRE(cases.size() == 2);
  CHECK(cases[0].category == ErrorCategory::kType1);
  CHECK(cases[0].pred->end == 4);
  CHECK(cases[1].category == ErrorCategory::kSpurious);
}

TEST_CASE("report rendering") {
  const int qt = L().id("QT");
  EvalReport r = score_spans(one("q", {{0, 1, qt}, {3, 4, qt}}),
                             one("q", {{0, 1, qt}, {3, 3, qt}}), L());
  const std::string text = render_report(r, ReportFormat::kText);
  // single QT row plus Overall, in the reference column order
  CHECK(text.find("Type") != std::string::npos);
  CHECK(text.find("Prec.(%)") != std::string::npos);
  CHECK(text.find("Rec.(%)") != std::string::npos);
  CHECK(text.find("F1(%)") != std::string::npos);
  CHECK(text.find("QT") != std::string::npos);
  CHECK(text.find("Overall") != std::string::npos);
  CHECK(text.find("TV") == std::string::npos);
  CHECK(text.find("Type") < text.find("Prec.(%)"));
  CHECK(text.find("Prec.(%)") < text.find("Rec.(%)"));
  CHECK(text.find("Rec.(%)") < text.find("F1(%)"));

  // two-decimal rendering of the acceptance arithmetic
  EvalReport fixed;
  fixed.overall = {3, 1, 2};
  fixed.rows.push_back({"QT", {3, 1, 2}});
  const std::string csv = render_report(fixed, ReportFormat::kCsv);
  CHECK(csv.find("75.00") != std::string::npos);
  CHECK(csv.find("60.00") != std::string::npos);
  CHECK(csv.find("66.67") != std::string::npos);

  // JSON round-trip preserves counts and derived scores
  EvalReport again = EvalReport::from_json(r.to_json());
  REQUIRE(again.rows.size() == r.rows.size());
  CHECK(again.rows[0].label == r.rows[0].label);
  CHECK(again.rows[0].counts.tp == r.rows[0].counts.tp);
  CHECK(again.overall.fp == r.overall.fp);
  CHECK(again.errors.type1 == r.errors.type1);

  CHECK_THROWS_AS(report_format_from_string("yaml"), Error);
}

TEST_CASE("error cases serialize to jsonl") {
  const int a = L().id("A");
  auto cases = classify_errors(one("q", {{0, 2, a}}), one("q", {{0, 3, a}}), L());
  const std::string jsonl = error_cases_to_jsonl(cases, L());
  CHECK(jsonl.find("TYPE1") != std::string::npos);
  CHECK(jsonl.find("\"id\":\"q\"") != std::string::npos);
}

TEST_CASE("pooled fold counts equal concatenated scoring") {
  std::mt19937 rng(9);
  std::uniform_int_distribution<int> label(0, L().num_labels() - 1);
  std::vector<EvalReport> folds;
  SpanIndex all_gold, all_pred;
  for (int f = 0; f < 3; ++f) {
    SpanIndex gold, pred;
    for (int q = 0; q < 3; ++q) {
      const std::string id = "f" + std::to_string(f) + "-q" + std::to_string(q);
      std::set<SpanAnnotation> gs, ps;
      for (int s = 0; s < 3; ++s) {
        const int st = static_cast<int>(rng() % 5);
        if (rng() % 2) gs.insert({st, st + 1, label(rng)});
        const int st2 = static_cast<int>(rng() % 5);
        if (rng() % 2) ps.insert({st2, st2 + 1, label(rng)});
      }
      gold[id] = {gs.begin(), gs.end()};
      pred[id] = {ps.begin(), ps.end()};
      all_gold[id] = gold[id];
      all_pred[id] = pred[id];
    }
    folds.push_back(score_spans(gold, pred, L()));
  }
  EvalReport pooled = pool_reports(folds, L());
  EvalReport concat = score_spans(all_gold, all_pred, L());
  CHECK(pooled.overall.tp == concat.overall.tp);
  CHECK(pooled.overall.fp == concat.overall.fp);
  CHECK(pooled.overall.fn == concat.overall.fn);
  REQUIRE(pooled.rows.size() == concat.rows.size());
  for (std::size_t i = 0; i < pooled.rows.size(); ++i) {
    CHECK(pooled.rows[i].label == concat.rows[i].label);
    CHECK(pooled.rows[i].counts.tp == concat.rows[i].counts.tp);
  }
}
