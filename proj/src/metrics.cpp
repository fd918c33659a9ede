#include "spanline/metrics.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

namespace spanline {

using nlohmann::json;

double Prf::precision() const {
  return tp + fp == 0 ? 100.0
                      : 100.0 * static_cast<double>(tp) /
                            static_cast<double>(tp + fp);
}

double Prf::recall() const {
  return tp + fn == 0 ? 100.0
                      : 100.0 * static_cast<double>(tp) /
                            static_cast<double>(tp + fn);
}

double Prf::f1() const {
  const double p = precision(), r = recall();
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

std::string to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::kType1: return "TYPE1";
    case ErrorCategory::kType2: return "TYPE2";
    case ErrorCategory::kSpurious: return "SPURIOUS";
    case ErrorCategory::kMissed: return "MISSED";
  }
  throw Error("invalid error category");
}

namespace {

void check_same_ids(const SpanIndex& gold, const SpanIndex& pred) {
  if (gold.size() != pred.size())
    throw Error("gold and prediction question sets differ in size (" +
                std::to_string(gold.size()) + " vs " +
                std::to_string(pred.size()) + ")");
  for (const auto& [id, _] : gold)
    if (pred.count(id) == 0)
      throw Error("no predictions for question " + id);
}

std::vector<SpanAnnotation> dedup(std::vector<SpanAnnotation> spans) {
  std::sort(spans.begin(), spans.end());
  spans.erase(std::unique(spans.begin(), spans.end()), spans.end());
  return spans;
}

int overlap_size(const SpanAnnotation& a, const SpanAnnotation& b) {
  const int lo = std::max(a.start, b.start);
  const int hi = std::min(a.end, b.end);
  return hi < lo ? 0 : hi - lo + 1;
}

}  // namespace

EvalReport score_spans(const SpanIndex& gold, const SpanIndex& pred,
                       const LabelSet& labels) {
  check_same_ids(gold, pred);
  std::vector<Prf> by_label(static_cast<std::size_t>(labels.num_labels()));
  for (const auto& [id, gold_spans_raw] : gold) {
    const std::vector<SpanAnnotation> gold_spans = dedup(gold_spans_raw);
    const std::vector<SpanAnnotation> pred_spans = dedup(pred.at(id));
    std::set<SpanAnnotation> gold_set(gold_spans.begin(), gold_spans.end());
    for (const SpanAnnotation& p : pred_spans) {
      auto& c = by_label[static_cast<std::size_t>(p.label)];
      if (gold_set.count(p) > 0)
        ++c.tp;
      else
        ++c.fp;
    }
    std::set<SpanAnnotation> pred_set(pred_spans.begin(), pred_spans.end());
    for (const SpanAnnotation& s : gold_spans)
      if (pred_set.count(s) == 0)
        ++by_label[static_cast<std::size_t>(s.label)].fn;
  }
  EvalReport report;
  for (int l = 0; l < labels.num_labels(); ++l) {
    const Prf& c = by_label[static_cast<std::size_t>(l)];
    if (c.tp + c.fp + c.fn == 0) continue;
    report.rows.push_back({labels.name(l), c});
    report.overall.tp += c.tp;
    report.overall.fp += c.fp;
    report.overall.fn += c.fn;
  }
  for (const ErrorCase& e : classify_errors(gold, pred, labels)) {
    switch (e.category) {
      case ErrorCategory::kType1: ++report.errors.type1; break;
      case ErrorCategory::kType2: ++report.errors.type2; break;
      case ErrorCategory::kSpurious: ++report.errors.spurious; break;
      case ErrorCategory::kMissed: ++report.errors.missed; break;
    }
  }
  return report;
}

std::vector<ErrorCase> classify_errors(const SpanIndex& gold,
                                       const SpanIndex& pred,
                                       const LabelSet& labels) {
  (void)labels;
  check_same_ids(gold, pred);
  std::vector<ErrorCase> cases;
  for (const auto& [id, gold_spans_raw] : gold) {
    const std::vector<SpanAnnotation> gold_spans = dedup(gold_spans_raw);
    const std::vector<SpanAnnotation> pred_spans = dedup(pred.at(id));

    // Exact matches are true positives, not error cases.
    std::set<SpanAnnotation> gold_set(gold_spans.begin(), gold_spans.end());
    std::set<SpanAnnotation> pred_set(pred_spans.begin(), pred_spans.end());
    std::vector<SpanAnnotation> g_rest, p_rest;
    for (const SpanAnnotation& s : gold_spans)
      if (pred_set.count(s) == 0) g_rest.push_back(s);
    for (const SpanAnnotation& p : pred_spans)
      if (gold_set.count(p) == 0) p_rest.push_back(p);

    // Candidate pairs eligible for the two error types, by overlap size.
    struct Pair {
      int overlap;
      std::size_t g, p;
      ErrorCategory cat;
    };
    std::vector<Pair> pairs;
    for (std::size_t gi = 0; gi < g_rest.size(); ++gi)
      for (std::size_t pi = 0; pi < p_rest.size(); ++pi) {
        const SpanAnnotation& gs = g_rest[gi];
        const SpanAnnotation& ps = p_rest[pi];
        const int ov = overlap_size(gs, ps);
        if (ov == 0) continue;
        const bool same_bounds = gs.start == ps.start && gs.end == ps.end;
        if (same_bounds && gs.label != ps.label)
          pairs.push_back({ov, gi, pi, ErrorCategory::kType2});
        else if (!same_bounds && gs.label == ps.label)
          pairs.push_back({ov, gi, pi, ErrorCategory::kType1});
        // different label AND different bounds -> SPURIOUS + MISSED
      }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
      if (a.overlap != b.overlap) return a.overlap > b.overlap;
      if (a.g != b.g) return a.g < b.g;
      return a.p < b.p;
    });
    std::vector<bool> g_used(g_rest.size(), false), p_used(p_rest.size(), false);
    for (const Pair& pr : pairs) {
      if (g_used[pr.g] || p_used[pr.p]) continue;
      g_used[pr.g] = true;
      p_used[pr.p] = true;
      cases.push_back({id, g_rest[pr.g], p_rest[pr.p], pr.cat});
    }
    for (std::size_t pi = 0; pi < p_rest.size(); ++pi)
      if (!p_used[pi])
        cases.push_back({id, std::nullopt, p_rest[pi],
                         ErrorCategory::kSpurious});
    for (std::size_t gi = 0; gi < g_rest.size(); ++gi)
      if (!g_used[gi])
        cases.push_back({id, g_rest[gi], std::nullopt,
                         ErrorCategory::kMissed});
  }
  return cases;
}

namespace {

json prf_to_json(const Prf& c) {
  return json{{"tp", c.tp},
              {"fp", c.fp},
              {"fn", c.fn},
              {"precision", c.precision()},
              {"recall", c.recall()},
              {"f1", c.f1()}};
}

Prf prf_from_json(const json& j) {
  Prf c;
  c.tp = j.at("tp").get<long>();
  c.fp = j.at("fp").get<long>();
  c.fn = j.at("fn").get<long>();
  return c;
}

std::string pct(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << v;
  return os.str();
}

}  // namespace

std::string EvalReport::to_json() const {
  json rows_json = json::array();
  for (const Row& r : rows) {
    json rj = prf_to_json(r.counts);
    rj["label"] = r.label;
    rows_json.push_back(rj);
  }
  json j;
  j["rows"] = rows_json;
  j["overall"] = prf_to_json(overall);
  j["errors"] = {{"type1", errors.type1},
                 {"type2", errors.type2},
                 {"spurious", errors.spurious},
                 {"missed", errors.missed}};
  return j.dump(2);
}

EvalReport EvalReport::from_json(const std::string& text) {
  EvalReport report;
  json j = json::parse(text);
  for (const json& rj : j.at("rows"))
    report.rows.push_back(
        {rj.at("label").get<std::string>(), prf_from_json(rj)});
  report.overall = prf_from_json(j.at("overall"));
  const json& e = j.at("errors");
  report.errors.type1 = e.at("type1").get<long>();
  report.errors.type2 = e.at("type2").get<long>();
  report.errors.spurious = e.at("spurious").get<long>();
  report.errors.missed = e.at("missed").get<long>();
  return report;
}

ReportFormat report_format_from_string(const std::string& name) {
  if (name == "text") return ReportFormat::kText;
  if (name == "json") return ReportFormat::kJson;
  if (name == "csv") return ReportFormat::kCsv;
  throw Error("unknown report format: '" + name + "'");
}

std::string render_report(const EvalReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::kJson:
      return report.to_json() + "\n";
    case ReportFormat::kCsv: {
      std::ostringstream os;
      os << "type,precision,recall,f1,tp,fp,fn\n";
      auto row = [&](const std::string& label, const Prf& c) {
        os << label << ',' << pct(c.precision()) << ',' << pct(c.recall())
           << ',' << pct(c.f1()) << ',' << c.tp << ',' << c.fp << ',' << c.fn
           << '\n';
      };
      for (const EvalReport::Row& r : report.rows) row(r.label, r.counts);
      row("Overall", report.overall);
      return os.str();
    }
    case ReportFormat::kText: {
      std::ostringstream os;
      os << std::left << std::setw(10) << "Type" << std::right
         << std::setw(10) << "Prec.(%)" << std::setw(10) << "Rec.(%)"
         << std::setw(10) << "F1(%)" << "\n";
      auto row = [&](const std::string& label, const Prf& c) {
        os << std::left << std::setw(10) << label << std::right
           << std::setw(10) << pct(c.precision()) << std::setw(10)
           << pct(c.recall()) << std::setw(10) << pct(c.f1()) << "\n";
      };
      for (const EvalReport::Row& r : report.rows) row(r.label, r.counts);
      row("Overall", report.overall);
      os << "\nErrors: type1=" << report.errors.type1
         << " type2=" << report.errors.type2
         << " spurious=" << report.errors.spurious
         << " missed=" << report.errors.missed << "\n";
      return os.str();
    }
  }
  throw Error("unknown report format");
}

std::string error_cases_to_jsonl(const std::vector<ErrorCase>& cases,
                                 const LabelSet& labels) {
  auto span_json = [&](const SpanAnnotation& s) {
    return json{{"start", s.start},
                {"end", s.end},
                {"label", labels.name(s.label)}};
  };
  std::string out;
  for (const ErrorCase& e : cases) {
    json j;
    j["id"] = e.question_id;
    j["category"] = to_string(e.category);
    j["gold"] = e.gold ? span_json(*e.gold) : json(nullptr);
    j["pred"] = e.pred ? span_json(*e.pred) : json(nullptr);
    out += j.dump();
    out += '\n';
  }
  return out;
}

EvalReport pool_reports(const std::vector<EvalReport>& folds,
                        const LabelSet& labels) {
  EvalReport pooled;
  std::map<std::string, Prf> by_label;
  for (const EvalReport& r : folds) {
    for (const EvalReport::Row& row : r.rows) {
      Prf& c = by_label[row.label];
      c.tp += row.counts.tp;
      c.fp += row.counts.fp;
      c.fn += row.counts.fn;
    }
    pooled.overall.tp += r.overall.tp;
    pooled.overall.fp += r.overall.fp;
    pooled.overall.fn += r.overall.fn;
    pooled.errors.type1 += r.errors.type1;
    pooled.errors.type2 += r.errors.type2;
    pooled.errors.spurious += r.errors.spurious;
    pooled.errors.missed += r.errors.missed;
  }
  for (int l = 0; l < labels.num_labels(); ++l) {
    auto it = by_label.find(labels.name(l));
    if (it != by_label.end()) pooled.rows.push_back({it->first, it->second});
  }
  return pooled;
}

}  // namespace spanline
