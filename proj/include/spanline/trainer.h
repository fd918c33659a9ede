#ifndef SPANLINE_TRAINER_H_
#define SPANLINE_TRAINER_H_

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "spanline/ctxstore.h"
#include "spanline/metrics.h"
#include "spanline/model.h"

namespace spanline {

// Decoupled weight decay Adam. step() consumes Parameter::grad and leaves it
// untouched; callers zero gradients between steps.
class AdamW {
 public:
  AdamW(ad::ParameterStore& params, double lr, double beta1, double beta2,
        double eps, double weight_decay, double grad_clip = 0.0);

  void step();
  int steps_taken() const { return t_; }

 private:
  ad::ParameterStore* params_;
  double lr_, beta1_, beta2_, eps_, weight_decay_, grad_clip_;
  int t_ = 0;
  std::vector<Mat> m_;
  std::vector<Mat> v_;
};

struct TrainStats {
  int best_epoch = -1;       // 1-based; -1 when no epoch improved
  double best_val_f1 = -1.0;
  std::vector<double> epoch_loss;
  std::vector<double> epoch_val_f1;
  int dropped_spans = 0;  // gold spans lost to max_seq_len truncation
};

// Mini-batch training with per-epoch validation; on return the model holds
// the parameters of the epoch with the highest validation micro-F1.
TrainStats train(Model& model, const Corpus& train_set, const Corpus& val_set,
                 const ContextualStore* store, std::ostream* log = nullptr);

std::vector<QuestionPrediction> predict_corpus(const Model& model,
                                               const Corpus& corpus,
                                               const ContextualStore* store);

// Exact-match scoring of model decoding against the untruncated gold spans.
EvalReport evaluate_model(const Model& model, const Corpus& test,
                          const ContextualStore* store);

SpanIndex gold_index(const Corpus& corpus);
SpanIndex prediction_index(const std::vector<QuestionPrediction>& preds);

// Checkpoint directory: manifest.json + vocab JSON files + one raw
// little-endian float32 blob per named parameter. Saving canonicalizes the
// in-memory parameters to float32 precision so that a reload reproduces the
// exact same forward outputs.
void save_checkpoint(Model& model, const std::string& dir, int epoch,
                     double val_f1);

struct LoadedModel {
  std::unique_ptr<LabelSet> labels;
  std::unique_ptr<Model> model;
  int epoch = 0;
  double val_f1 = 0.0;
};
LoadedModel load_checkpoint(const std::string& dir);

// The seven ablation configurations: the full model, the two
// sequence-labeling reformulations, and one component removal each.
struct AblationRow {
  std::string component;
  std::string modification;
  RunConfig config;
  EvalReport report;
};
std::vector<RunConfig> ablation_configs(const RunConfig& base);
std::vector<std::pair<std::string, std::string>> ablation_names();

std::vector<AblationRow> run_ablation(const RunConfig& base,
                                      const LabelSet& labels,
                                      const Corpus& train_set,
                                      const Corpus& val_set,
                                      const Corpus& test_set,
                                      const ContextualStore* store,
                                      std::ostream* log = nullptr);

}  // namespace spanline

#endif  // SPANLINE_TRAINER_H_
