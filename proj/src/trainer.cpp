#include "spanline/trainer.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <set>
#include <thread>

#include <json.hpp>

namespace spanline {

namespace fs = std::filesystem;
using nlohmann::json;

AdamW::AdamW(ad::ParameterStore& params, double lr, double beta1, double beta2,
             double eps, double weight_decay, double grad_clip)
    : params_(&params),
      lr_(lr),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps),
      weight_decay_(weight_decay),
      grad_clip_(grad_clip) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Mat& v = params.at(i).value;
    m_.push_back(Mat::Zero(v.rows(), v.cols()));
    v_.push_back(Mat::Zero(v.rows(), v.cols()));
  }
}

void AdamW::step() {
  ++t_;
  double scale = 1.0;
  if (grad_clip_ > 0.0) {
    double sq = 0.0;
    for (std::size_t i = 0; i < params_->size(); ++i)
      sq += params_->at(i).grad.squaredNorm();
    const double norm = std::sqrt(sq);
    if (norm > grad_clip_) scale = grad_clip_ / norm;
  }
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (std::size_t i = 0; i < params_->size(); ++i) {
    ad::Parameter& p = params_->at(i);
    const Mat g = scale * p.grad;
    // decoupled weight decay, applied before the adaptive update
    if (weight_decay_ != 0.0) p.value *= 1.0 - lr_ * weight_decay_;
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
    p.value.array() -= lr_ * (m_[i].array() / bc1) /
                       ((v_[i].array() / bc2).sqrt() + eps_);
  }
}

namespace {

std::vector<EncodedQuestion> encode_corpus(const Model& model,
                                           const Corpus& corpus,
                                           const ContextualStore* store,
                                           std::vector<std::string>* warnings) {
  std::vector<EncodedQuestion> out;
  out.reserve(corpus.size());
  for (const AnnotatedQuestion& q : corpus)
    out.push_back(encode_question(q, model.vocabs(), model.config().repr(),
                                  store, model.config().max_seq_len,
                                  warnings));
  return out;
}

double micro_f1(const Model& model,
                const std::vector<EncodedQuestion>& questions) {
  Prf counts;
  for (const EncodedQuestion& q : questions) {
    std::vector<SpanAnnotation> pred;
    for (const SpanPrediction& p : model.predict(q))
      pred.push_back(p.annotation());
    std::sort(pred.begin(), pred.end());
    pred.erase(std::unique(pred.begin(), pred.end()), pred.end());
    std::set<SpanAnnotation> gold(q.full_gold.begin(), q.full_gold.end());
    for (const SpanAnnotation& p : pred) {
      if (gold.count(p) > 0)
        ++counts.tp;
      else
        ++counts.fp;
    }
    std::set<SpanAnnotation> pred_set(pred.begin(), pred.end());
    for (const SpanAnnotation& s : gold)
      if (pred_set.count(s) == 0) ++counts.fn;
  }
  return counts.f1();
}

}  // namespace

TrainStats train(Model& model, const Corpus& train_set, const Corpus& val_set,
                 const ContextualStore* store, std::ostream* log) {
  const RunConfig& cfg = model.config();
  if (train_set.empty()) throw Error("training set is empty");
  if (val_set.empty()) throw Error("validation set is empty");

  std::vector<std::string> warnings;
  std::vector<EncodedQuestion> train_qs =
      encode_corpus(model, train_set, store, &warnings);
  std::vector<EncodedQuestion> val_qs =
      encode_corpus(model, val_set, store, &warnings);
  if (log != nullptr)
    for (const std::string& w : warnings) *log << "[warn] " << w << "\n";

  TrainStats stats;
  stats.dropped_spans = static_cast<int>(warnings.size());

  AdamW opt(model.params(), cfg.lr, cfg.adam_beta1, cfg.adam_beta2,
            cfg.adam_eps, cfg.weight_decay, cfg.grad_clip);
  std::mt19937 shuffle_rng(
      static_cast<std::mt19937::result_type>(cfg.seed * 2654435761u + 1));
  std::mt19937 dropout_rng(
      static_cast<std::mt19937::result_type>(cfg.seed * 40503u + 7));

  std::vector<std::size_t> order(train_qs.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<Mat> best_values;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(
          order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const double inv_batch = 1.0 / static_cast<double>(stop - start);
      std::vector<EncodedQuestion*> batch;
      for (std::size_t idx = start; idx < stop; ++idx)
        batch.push_back(&train_qs[order[idx]]);
      pad_batch(batch, cfg.max_char_len);
      model.params().zero_grads();
      double batch_loss = 0.0;

      if (cfg.threads <= 1 || stop - start <= 1) {
        for (std::size_t idx = start; idx < stop; ++idx) {
          const EncodedQuestion& q = train_qs[order[idx]];
          // dropout masks must be drawn in a fixed order for determinism
          ad::Graph g;
          ad::Expr loss = model.loss(g, q, true, &dropout_rng);
          ad::Expr scaled = g.scalar_mul(loss, inv_batch);
          g.backward(scaled);
          g.accumulate_param_grads();
          batch_loss += g.scalar(loss);
        }
      } else {
        const int workers =
            std::min<int>(cfg.threads, static_cast<int>(stop - start));
        // Per-question dropout streams seeded up front so mask draws do not
        // race; per-worker gradient buffers are reduced in worker order.
        std::vector<std::uint32_t> mask_seeds(stop - start);
        for (auto& s : mask_seeds)
          s = static_cast<std::uint32_t>(dropout_rng());
        std::vector<std::vector<Mat>> buffers(
            static_cast<std::size_t>(workers));
        std::vector<double> losses(static_cast<std::size_t>(workers), 0.0);
        auto& ps = model.params();
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) {
          pool.emplace_back([&, w]() {
            auto& buf = buffers[static_cast<std::size_t>(w)];
            buf.reserve(ps.size());
            for (std::size_t i = 0; i < ps.size(); ++i)
              buf.push_back(Mat::Zero(ps.at(i).value.rows(),
                                      ps.at(i).value.cols()));
            for (std::size_t idx = start + static_cast<std::size_t>(w);
                 idx < stop; idx += static_cast<std::size_t>(workers)) {
              const EncodedQuestion& q = train_qs[order[idx]];
              std::mt19937 mask_rng(mask_seeds[idx - start]);
              ad::Graph g;
              ad::Expr loss = model.loss(g, q, true, &mask_rng);
              ad::Expr scaled = g.scalar_mul(loss, inv_batch);
              g.backward(scaled);
              g.collect_param_grads(buf);
              losses[static_cast<std::size_t>(w)] += g.scalar(loss);
            }
          });
        }
        for (auto& t : pool) t.join();
        for (int w = 0; w < workers; ++w)
          for (std::size_t i = 0; i < ps.size(); ++i)
            ps.at(i).grad += buffers[static_cast<std::size_t>(w)][i];
        for (double l : losses) batch_loss += l;
      }

      if (!std::isfinite(batch_loss))
        throw Error("non-finite loss at epoch " + std::to_string(epoch));
      opt.step();
      epoch_loss += batch_loss * inv_batch;
      ++batches;
    }
    epoch_loss /= static_cast<double>(batches);
    const double f1 = micro_f1(model, val_qs);
    stats.epoch_loss.push_back(epoch_loss);
    stats.epoch_val_f1.push_back(f1);
    if (f1 > stats.best_val_f1) {
      stats.best_val_f1 = f1;
      stats.best_epoch = epoch;
      best_values.clear();
      for (std::size_t i = 0; i < model.params().size(); ++i)
        best_values.push_back(model.params().at(i).value);
    }
    if (log != nullptr)
      *log << "epoch " << epoch << "/" << cfg.epochs << " loss " << epoch_loss
           << " val_f1 " << f1 << "\n";
  }
  if (!best_values.empty())
    for (std::size_t i = 0; i < model.params().size(); ++i)
      model.params().at(i).value = best_values[i];
  return stats;
}

std::vector<QuestionPrediction> predict_corpus(const Model& model,
                                               const Corpus& corpus,
                                               const ContextualStore* store) {
  std::vector<QuestionPrediction> preds;
  preds.reserve(corpus.size());
  for (const AnnotatedQuestion& q : corpus) {
    EncodedQuestion enc =
        encode_question(q, model.vocabs(), model.config().repr(), store,
                        model.config().max_seq_len);
    preds.push_back({q.id, model.predict(enc)});
  }
  return preds;
}

SpanIndex gold_index(const Corpus& corpus) {
  SpanIndex idx;
  for (const AnnotatedQuestion& q : corpus) idx[q.id] = q.spans;
  return idx;
}

SpanIndex prediction_index(const std::vector<QuestionPrediction>& preds) {
  SpanIndex idx;
  for (const QuestionPrediction& qp : preds) {
    auto& spans = idx[qp.id];
    for (const SpanPrediction& s : qp.spans) spans.push_back(s.annotation());
  }
  return idx;
}

EvalReport evaluate_model(const Model& model, const Corpus& test,
                          const ContextualStore* store) {
  return score_spans(gold_index(test),
                     prediction_index(predict_corpus(model, test, store)),
                     model.labels());
}

namespace {

Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
to_float(const Mat& m) {
  return m.cast<float>();
}

}  // namespace

void save_checkpoint(Model& model, const std::string& dir, int epoch,
                     double val_f1) {
  if (!model.params().all_finite())
    throw Error("refusing to checkpoint non-finite parameters");
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = "spanline-checkpoint/1";
  manifest["epoch"] = epoch;
  manifest["val_f1"] = val_f1;
  manifest["config"] = json::object();
  for (const auto& [k, v] : model.config().to_map()) manifest["config"][k] = v;
  manifest["labels"] = model.labels().labels();

  json vocab_files;
  vocab_files["words"] = "vocab_words.json";
  vocab_files["chars"] = "vocab_chars.json";
  vocab_files["pos"] = "vocab_pos.json";
  manifest["vocab_files"] = vocab_files;
  {
    std::ofstream f(fs::path(dir) / "vocab_words.json");
    f << json(model.vocabs().words()).dump() << "\n";
  }
  {
    std::vector<std::uint32_t> cps;
    for (char32_t c : model.vocabs().chars())
      cps.push_back(static_cast<std::uint32_t>(c));
    std::ofstream f(fs::path(dir) / "vocab_chars.json");
    f << json(cps).dump() << "\n";
  }
  {
    std::ofstream f(fs::path(dir) / "vocab_pos.json");
    f << json(model.vocabs().pos_tags()).dump() << "\n";
  }

  json params = json::array();
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    ad::Parameter& p = model.params().at(i);
    const std::string file = "p" + std::to_string(i) + ".bin";
    params.push_back({{"name", p.name},
                      {"rows", static_cast<int>(p.value.rows())},
                      {"cols", static_cast<int>(p.value.cols())},
                      {"file", file}});
    const auto f32 = to_float(p.value);
    // canonicalize live parameters to the stored precision
    p.value = f32.cast<double>();
    std::ofstream out(fs::path(dir) / file, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint blob " + file);
    out.write(reinterpret_cast<const char*>(f32.data()),
              static_cast<std::streamsize>(
                  static_cast<std::size_t>(f32.size()) * sizeof(float)));
  }
  manifest["params"] = params;
  std::ofstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw Error("cannot write checkpoint manifest in " + dir);
  mf << manifest.dump(2) << "\n";
}

LoadedModel load_checkpoint(const std::string& dir) {
  std::ifstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw Error("cannot open checkpoint manifest in " + dir);
  json manifest = json::parse(mf);
  if (manifest.value("format", "") != "spanline-checkpoint/1")
    throw Error("unrecognized checkpoint format in " + dir);

  std::map<std::string, std::string> kv;
  for (const auto& [k, v] : manifest.at("config").items())
    kv[k] = v.get<std::string>();
  RunConfig cfg = RunConfig::from_map(kv);

  LoadedModel out;
  out.labels = std::make_unique<LabelSet>(
      manifest.at("labels").get<std::vector<std::string>>());
  out.epoch = manifest.at("epoch").get<int>();
  out.val_f1 = manifest.at("val_f1").get<double>();

  Vocabularies vocabs = Vocabularies::with_reserved();
  {
    std::ifstream f(fs::path(dir) /
                    manifest.at("vocab_files").at("words").get<std::string>());
    if (!f) throw Error("missing vocab file in checkpoint " + dir);
    const auto words = json::parse(f).get<std::vector<std::string>>();
    for (std::size_t i = 2; i < words.size(); ++i) vocabs.add_word(words[i]);
  }
  {
    std::ifstream f(fs::path(dir) /
                    manifest.at("vocab_files").at("chars").get<std::string>());
    if (!f) throw Error("missing vocab file in checkpoint " + dir);
    const auto cps = json::parse(f).get<std::vector<std::uint32_t>>();
    for (std::size_t i = 2; i < cps.size(); ++i)
      vocabs.add_char(static_cast<char32_t>(cps[i]));
  }
  {
    std::ifstream f(fs::path(dir) /
                    manifest.at("vocab_files").at("pos").get<std::string>());
    if (!f) throw Error("missing vocab file in checkpoint " + dir);
    const auto tags = json::parse(f).get<std::vector<std::string>>();
    for (std::size_t i = 2; i < tags.size(); ++i) vocabs.add_pos(tags[i]);
  }

  auto store = std::make_unique<ad::ParameterStore>();
  for (const json& pj : manifest.at("params")) {
    const int rows = pj.at("rows").get<int>();
    const int cols = pj.at("cols").get<int>();
    std::ifstream in(fs::path(dir) / pj.at("file").get<std::string>(),
                     std::ios::binary);
    if (!in)
      throw Error("missing checkpoint blob " +
                  pj.at("file").get<std::string>());
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> f32(
        rows, cols);
    in.read(reinterpret_cast<char*>(f32.data()),
            static_cast<std::streamsize>(static_cast<std::size_t>(f32.size()) *
                                         sizeof(float)));
    if (!in)
      throw Error("truncated checkpoint blob " +
                  pj.at("file").get<std::string>());
    store->add_value(pj.at("name").get<std::string>(), f32.cast<double>());
  }
  if (!store->all_finite())
    throw Error("checkpoint " + dir + " contains non-finite parameters");
  out.model = std::make_unique<Model>(cfg, *out.labels, vocabs,
                                      std::move(store));
  return out;
}

std::vector<std::pair<std::string, std::string>> ablation_names() {
  return {{"Full", "None"},
          {"Biaffine classifier", "Seq. labeling, CRF"},
          {"Biaffine classifier", "Seq. labeling, Softmax"},
          {"POS-tag embeddings", "Removal"},
          {"Character features", "Removal"},
          {"BiLSTM", "Removal"},
          {"PhoBERT", "Fasttext"}};
}

std::vector<RunConfig> ablation_configs(const RunConfig& base) {
  std::vector<RunConfig> configs;
  RunConfig full = base;
  full.head = HeadKind::kBiaffine;
  full.embedding = EmbeddingSource::kContextual;
  full.use_pos = full.use_char = full.use_bilstm = true;
  configs.push_back(full);

  RunConfig crf = full;
  crf.head = HeadKind::kSeqCrf;
  configs.push_back(crf);

  RunConfig softmax = full;
  softmax.head = HeadKind::kSeqSoftmax;
  configs.push_back(softmax);

  RunConfig no_pos = full;
  no_pos.use_pos = false;
  configs.push_back(no_pos);

  RunConfig no_char = full;
  no_char.use_char = false;
  configs.push_back(no_char);

  RunConfig no_bilstm = full;
  no_bilstm.use_bilstm = false;
  configs.push_back(no_bilstm);

  RunConfig fasttext = full;
  fasttext.embedding = EmbeddingSource::kStatic;
  configs.push_back(fasttext);
  return configs;
}

std::vector<AblationRow> run_ablation(const RunConfig& base,
                                      const LabelSet& labels,
                                      const Corpus& train_set,
                                      const Corpus& val_set,
                                      const Corpus& test_set,
                                      const ContextualStore* store,
                                      std::ostream* log) {
  const auto names = ablation_names();
  const auto configs = ablation_configs(base);
  Corpus vocab_source = train_set;
  vocab_source.insert(vocab_source.end(), val_set.begin(), val_set.end());
  const Vocabularies vocabs = build_vocabs(vocab_source);

  std::vector<AblationRow> rows;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    if (log != nullptr)
      *log << "[ablate] " << names[i].first << " / " << names[i].second
           << "\n";
    Model model(configs[i], labels, vocabs);
    const ContextualStore* s =
        configs[i].embedding == EmbeddingSource::kContextual ? store : nullptr;
    train(model, train_set, val_set, s, log);
    AblationRow row;
    row.component = names[i].first;
    row.modification = names[i].second;
    row.config = configs[i];
    row.report = evaluate_model(model, test_set, s);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace spanline
