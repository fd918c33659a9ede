#ifndef SPANLINE_METRICS_H_
#define SPANLINE_METRICS_H_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spanline/corpus.h"

namespace spanline {

// Exact-match precision/recall/F1 in percent. Empty denominators resolve to
// P = 100 (no predictions) and R = 100 (no gold); F1 = 0 when P + R = 0.
struct Prf {
  long tp = 0;
  long fp = 0;
  long fn = 0;
  double precision() const;
  double recall() const;
  double f1() const;
};

struct EvalReport {
  struct Row {
    std::string label;
    Prf counts;
  };
  std::vector<Row> rows;  // labels with any support, in label-set order
  Prf overall;            // micro: pooled counts
  struct ErrorBreakdown {
    long type1 = 0;    // boundary mismatch, same label
    long type2 = 0;    // exact boundaries, wrong label
    long spurious = 0; // prediction with no counterpart
    long missed = 0;   // gold with no counterpart
  } errors;

  std::string to_json() const;
  static EvalReport from_json(const std::string& text);
};

enum class ErrorCategory { kType1, kType2, kSpurious, kMissed };
std::string to_string(ErrorCategory c);

struct ErrorCase {
  std::string question_id;
  std::optional<SpanAnnotation> gold;
  std::optional<SpanAnnotation> pred;
  ErrorCategory category = ErrorCategory::kSpurious;
};

// Gold/predicted span sets keyed by question id. Predictions are
// deduplicated per question before scoring.
using SpanIndex = std::map<std::string, std::vector<SpanAnnotation>>;

EvalReport score_spans(const SpanIndex& gold, const SpanIndex& pred,
                       const LabelSet& labels);

// Non-exact-match golds and predictions, each in at most one case, paired
// greedily by overlap size. Boundary overlaps with a different label fall
// to SPURIOUS + MISSED.
std::vector<ErrorCase> classify_errors(const SpanIndex& gold,
                                       const SpanIndex& pred,
                                       const LabelSet& labels);

enum class ReportFormat { kText, kJson, kCsv };
ReportFormat report_format_from_string(const std::string& name);
std::string render_report(const EvalReport& report, ReportFormat format);

std::string error_cases_to_jsonl(const std::vector<ErrorCase>& cases,
                                 const LabelSet& labels);

// Sums per-label counts across fold reports; percentages derive from the
// pooled counts (micro-average over folds).
EvalReport pool_reports(const std::vector<EvalReport>& folds,
                        const LabelSet& labels);

}  // namespace spanline

#endif  // SPANLINE_METRICS_H_
