// spanline: span extraction over annotated questions.
//
// Verbs: extract-ctx, train, eval, predict, ablate, analyze-errors, cv.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "spanline/config.h"
#include "spanline/ctxstore.h"
#include "spanline/metrics.h"
#include "spanline/synthetic.h"
#include "spanline/trainer.h"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace spanline;

namespace {

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path + " for checksumming");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1)
    throw Error("cannot initialize SHA-256");
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    if (in.gcount() > 0)
      EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i)
    hex << std::hex << std::setw(2) << std::setfill('0')
        << static_cast<int>(digest[i]);
  return hex.str();
}

// Resolved options shared by the training-style verbs.
struct CommonOpts {
  std::string config_path;
  std::vector<std::string> sets;  // raw key=value pairs
  std::optional<std::uint64_t> seed;
  std::optional<double> lr;
  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::optional<int> threads;
  std::optional<std::string> head;
  std::optional<std::string> embedding;
  std::optional<int> k;
  bool smoke = false;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_smoke = false) {
  cmd->add_option("--config", o.config_path,
                  "key = value config file (or a run manifest)");
  cmd->add_option("--set", o.sets, "override a single config key (key=value)")
      ->take_all();
  cmd->add_option("--seed", o.seed, "run seed");
  cmd->add_option("--lr", o.lr, "learning rate");
  cmd->add_option("--epochs", o.epochs, "training epochs");
  cmd->add_option("--batch-size", o.batch_size, "mini-batch size");
  cmd->add_option("--threads", o.threads, "batch workers");
  cmd->add_option("--head", o.head, "biaffine | seq_softmax | seq_crf");
  cmd->add_option("--embedding", o.embedding, "contextual | static");
  cmd->add_option("--k", o.k, "cross-validation fold count");
  if (with_smoke)
    cmd->add_flag("--smoke", o.smoke, "single-epoch smoke run");
}

// Precedence: defaults < SPANLINE_SEED < config file < --set < typed flags.
RunConfig resolve_config(const CommonOpts& o) {
  RunConfig cfg;
  if (const char* env = std::getenv("SPANLINE_SEED")) {
    try {
      cfg.seed = std::stoull(env);
    } catch (const std::exception&) {
      throw Error("SPANLINE_SEED is not an integer: " + std::string(env));
    }
  }
  if (!o.config_path.empty()) cfg.apply(read_config_file(o.config_path));
  std::map<std::string, std::string> sets;
  for (const std::string& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw Error("--set expects key=value, got '" + kv + "'");
    sets[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  cfg.apply(sets);
  if (o.seed) cfg.seed = *o.seed;
  if (o.lr) cfg.lr = *o.lr;
  if (o.epochs) cfg.epochs = *o.epochs;
  if (o.batch_size) cfg.batch_size = *o.batch_size;
  if (o.threads) cfg.threads = *o.threads;
  if (o.head) cfg.head = head_from_string(*o.head);
  if (o.embedding) cfg.embedding = embedding_from_string(*o.embedding);
  if (o.k) cfg.cv_k = *o.k;
  if (o.smoke) cfg.epochs = 1;
  cfg.validate();
  return cfg;
}

void write_manifest(const fs::path& where, const std::string& verb,
                    const RunConfig& cfg,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
  json m;
  m["verb"] = verb;
  m["seed"] = cfg.seed;
  m["config"] = json::object();
  for (const auto& [k, v] : cfg.to_map()) m["config"][k] = v;
  m["inputs"] = json::object();
  for (const std::string& p : inputs) m["inputs"][p] = sha256_file(p);
  m["outputs"] = outputs;
  fs::create_directories(where.parent_path().empty() ? "."
                                                     : where.parent_path());
  std::ofstream out(where);
  if (!out) throw Error("cannot write manifest " + where.string());
  out << m.dump(2) << "\n";
}

struct Inputs {
  Corpus corpus;
  std::optional<ContextualStore> store;
  const ContextualStore* store_ptr(const RunConfig& cfg) const {
    if (cfg.embedding != EmbeddingSource::kContextual) return nullptr;
    if (!store)
      throw Error("config uses contextual embeddings; pass --ctx STORE_DIR");
    return &*store;
  }
};

Corpus subset(const Corpus& corpus, const std::vector<std::string>& ids) {
  std::set<std::string> want(ids.begin(), ids.end());
  Corpus out;
  for (const AnnotatedQuestion& q : corpus)
    if (want.count(q.id) > 0) out.push_back(q);
  return out;
}

struct SplitResult {
  Corpus train, val;
};

SplitResult split_train_val(const Corpus& corpus, const RunConfig& cfg) {
  std::vector<std::string> ids;
  for (const AnnotatedQuestion& q : corpus) ids.push_back(q.id);
  TrainValSplit split =
      train_validation_split(ids, cfg.seed, cfg.val_fraction);
  return {subset(corpus, split.train_ids), subset(corpus, split.val_ids)};
}

Vocabularies vocabs_for(const Corpus& train, const Corpus& val) {
  Corpus both = train;
  both.insert(both.end(), val.begin(), val.end());
  return build_vocabs(both);
}

int run_train(const CommonOpts& opts, const std::string& corpus_path,
              const std::string& val_path, const std::string& ctx_dir,
              const std::string& vectors_path, const std::string& out_dir) {
  RunConfig cfg = resolve_config(opts);
  const LabelSet& labels = LabelSet::standard();
  Corpus corpus = load_corpus(corpus_path, labels);
  Corpus train_set, val_set;
  std::vector<std::string> inputs = {corpus_path};
  if (val_path.empty()) {
    SplitResult split = split_train_val(corpus, cfg);
    train_set = std::move(split.train);
    val_set = std::move(split.val);
  } else {
    train_set = std::move(corpus);
    val_set = load_corpus(val_path, labels);
    inputs.push_back(val_path);
  }
  std::optional<ContextualStore> store;
  const ContextualStore* store_ptr = nullptr;
  if (cfg.embedding == EmbeddingSource::kContextual) {
    if (ctx_dir.empty())
      throw Error("config uses contextual embeddings; pass --ctx STORE_DIR");
    store = ContextualStore::load(ctx_dir);
    store_ptr = &*store;
  }

  Model model(cfg, labels, vocabs_for(train_set, val_set));
  if (!vectors_path.empty()) {
    if (cfg.embedding != EmbeddingSource::kStatic)
      throw Error("--static-vectors requires embedding = static");
    const int hit = model.repr_layer().init_static_table(
        load_static_vectors(vectors_path), model.vocabs());
    std::cout << "initialized " << hit << " static vectors\n";
    inputs.push_back(vectors_path);
  }

  TrainStats stats = train(model, train_set, val_set, store_ptr, &std::cout);
  const fs::path ckpt_dir = fs::path(out_dir) / "checkpoint";
  save_checkpoint(model, ckpt_dir.string(), stats.best_epoch,
                  stats.best_val_f1);
  write_manifest(fs::path(out_dir) / "run_manifest.json", "train", cfg,
                 inputs, {ckpt_dir.string()});
  std::cout << "best epoch " << stats.best_epoch << " val_f1 "
            << stats.best_val_f1 << "\ncheckpoint: " << ckpt_dir.string()
            << "\n";
  return 0;
}

int run_eval(const std::string& ckpt_dir, const std::string& corpus_path,
             const std::string& ctx_dir, const std::string& gold_path,
             const std::string& pred_path, const std::string& format_name,
             const std::string& out_path) {
  const ReportFormat format = report_format_from_string(format_name);
  EvalReport report;
  RunConfig cfg;
  std::vector<std::string> inputs;
  if (!pred_path.empty()) {
    if (gold_path.empty())
      throw Error("--pred requires --gold GOLD_CORPUS");
    const LabelSet& labels = LabelSet::standard();
    SpanIndex gold = gold_index(load_corpus(gold_path, labels));
    SpanIndex pred;
    for (const auto& [id, spans] : gold) pred[id] = {};
    for (const QuestionPrediction& qp : read_predictions(pred_path, labels)) {
      auto& dst = pred[qp.id];
      for (const SpanPrediction& s : qp.spans) dst.push_back(s.annotation());
    }
    report = score_spans(gold, pred, labels);
    inputs = {gold_path, pred_path};
  } else {
    if (ckpt_dir.empty() || corpus_path.empty())
      throw Error("eval needs either --ckpt and --corpus, or --gold and --pred");
    LoadedModel loaded = load_checkpoint(ckpt_dir);
    cfg = loaded.model->config();
    Corpus test = load_corpus(corpus_path, *loaded.labels);
    std::optional<ContextualStore> store;
    const ContextualStore* store_ptr = nullptr;
    if (cfg.embedding == EmbeddingSource::kContextual) {
      if (ctx_dir.empty())
        throw Error("checkpoint uses contextual embeddings; pass --ctx");
      store = ContextualStore::load(ctx_dir);
      store_ptr = &*store;
    }
    report = evaluate_model(*loaded.model, test, store_ptr);
    inputs = {corpus_path};
  }
  const std::string rendered = render_report(report, format);
  if (out_path.empty()) {
    std::cout << rendered;
  } else {
    std::ofstream out(out_path);
    if (!out) throw Error("cannot write report to " + out_path);
    out << rendered;
    write_manifest(out_path + ".manifest.json", "eval", cfg, inputs,
                   {out_path});
    std::cout << "report: " << out_path << "\n";
  }
  return 0;
}

int run_predict(const std::string& ckpt_dir, const std::string& corpus_path,
                const std::string& ctx_dir, const std::string& out_path) {
  LoadedModel loaded = load_checkpoint(ckpt_dir);
  const RunConfig& cfg = loaded.model->config();
  Corpus corpus = load_corpus(corpus_path, *loaded.labels);
  std::optional<ContextualStore> store;
  const ContextualStore* store_ptr = nullptr;
  if (cfg.embedding == EmbeddingSource::kContextual) {
    if (ctx_dir.empty())
      throw Error("checkpoint uses contextual embeddings; pass --ctx");
    store = ContextualStore::load(ctx_dir);
    store_ptr = &*store;
  }
  write_predictions(predict_corpus(*loaded.model, corpus, store_ptr),
                    *loaded.labels, out_path);
  write_manifest(out_path + ".manifest.json", "predict", cfg, {corpus_path},
                 {out_path});
  std::cout << "predictions: " << out_path << "\n";
  return 0;
}

int run_ablate(const CommonOpts& opts, const std::string& corpus_path,
               const std::string& val_path, const std::string& test_path,
               const std::string& ctx_dir, const std::string& out_dir) {
  RunConfig cfg = resolve_config(opts);
  const LabelSet& labels = LabelSet::standard();
  Corpus corpus = load_corpus(corpus_path, labels);
  std::vector<std::string> inputs = {corpus_path};
  Corpus train_set, val_set, test_set;
  if (val_path.empty()) {
    SplitResult split = split_train_val(corpus, cfg);
    train_set = std::move(split.train);
    val_set = std::move(split.val);
  } else {
    train_set = std::move(corpus);
    val_set = load_corpus(val_path, labels);
    inputs.push_back(val_path);
  }
  if (test_path.empty()) {
    test_set = val_set;  // smoke runs score on the validation split
  } else {
    test_set = load_corpus(test_path, labels);
    inputs.push_back(test_path);
  }
  std::optional<ContextualStore> store;
  const ContextualStore* store_ptr = nullptr;
  if (!ctx_dir.empty()) {
    store = ContextualStore::load(ctx_dir);
    store_ptr = &*store;
  }

  const auto rows =
      run_ablation(cfg, labels, train_set, val_set, test_set, store_ptr,
                   &std::cout);
  fs::create_directories(out_dir);
  json out = json::array();
  std::ostringstream table;
  table << std::left << std::setw(22) << "Component" << std::setw(26)
        << "Modification" << std::right << std::setw(10) << "Prec.(%)"
        << std::setw(10) << "Rec.(%)" << std::setw(10) << "F1(%)" << "\n";
  for (const AblationRow& row : rows) {
    json rj;
    rj["component"] = row.component;
    rj["modification"] = row.modification;
    rj["config"] = json::object();
    for (const auto& [k, v] : row.config.to_map()) rj["config"][k] = v;
    rj["report"] = json::parse(row.report.to_json());
    out.push_back(rj);
    const Prf& o = row.report.overall;
    std::ostringstream p, r, f;
    p << std::fixed << std::setprecision(2) << o.precision();
    r << std::fixed << std::setprecision(2) << o.recall();
    f << std::fixed << std::setprecision(2) << o.f1();
    table << std::left << std::setw(22) << row.component << std::setw(26)
          << row.modification << std::right << std::setw(10) << p.str()
          << std::setw(10) << r.str() << std::setw(10) << f.str() << "\n";
  }
  {
    std::ofstream jf(fs::path(out_dir) / "ablation.json");
    jf << out.dump(2) << "\n";
  }
  {
    std::ofstream tf(fs::path(out_dir) / "ablation.txt");
    tf << table.str();
  }
  std::cout << table.str();
  write_manifest(fs::path(out_dir) / "run_manifest.json", "ablate", cfg,
                 inputs,
                 {(fs::path(out_dir) / "ablation.json").string(),
                  (fs::path(out_dir) / "ablation.txt").string()});
  return 0;
}

int run_analyze_errors(const std::string& gold_path,
                       const std::string& pred_path,
                       const std::string& out_path) {
  const LabelSet& labels = LabelSet::standard();
  SpanIndex gold = gold_index(load_corpus(gold_path, labels));
  SpanIndex pred;
  for (const auto& [id, spans] : gold) pred[id] = {};
  for (const QuestionPrediction& qp : read_predictions(pred_path, labels)) {
    auto& dst = pred[qp.id];
    for (const SpanPrediction& s : qp.spans) dst.push_back(s.annotation());
  }
  const auto cases = classify_errors(gold, pred, labels);
  long t1 = 0, t2 = 0, sp = 0, mi = 0;
  for (const ErrorCase& e : cases) {
    switch (e.category) {
      case ErrorCategory::kType1: ++t1; break;
      case ErrorCategory::kType2: ++t2; break;
      case ErrorCategory::kSpurious: ++sp; break;
      case ErrorCategory::kMissed: ++mi; break;
    }
  }
  const std::string jsonl = error_cases_to_jsonl(cases, labels);
  if (out_path.empty()) {
    std::cout << jsonl;
  } else {
    std::ofstream out(out_path);
    if (!out) throw Error("cannot write " + out_path);
    out << jsonl;
    std::cout << "error cases: " << out_path << "\n";
  }
  std::cout << "type1 (incorrect segments): " << t1
            << "\ntype2 (incorrect information types): " << t2
            << "\nspurious: " << sp << "\nmissed: " << mi << "\n";
  return 0;
}

int run_cv(const CommonOpts& opts, const std::string& corpus_path,
           const std::string& ctx_dir, const std::string& out_dir) {
  RunConfig cfg = resolve_config(opts);
  const LabelSet& labels = LabelSet::standard();
  Corpus corpus = load_corpus(corpus_path, labels);
  std::optional<ContextualStore> store;
  const ContextualStore* store_ptr = nullptr;
  if (cfg.embedding == EmbeddingSource::kContextual) {
    if (ctx_dir.empty())
      throw Error("config uses contextual embeddings; pass --ctx STORE_DIR");
    store = ContextualStore::load(ctx_dir);
    store_ptr = &*store;
  }
  FoldPlan plan = make_folds(corpus, cfg.cv_k, cfg.seed);
  fs::create_directories(out_dir);
  {
    std::ofstream pf(fs::path(out_dir) / "folds.json");
    pf << plan.to_json() << "\n";
  }
  std::vector<EvalReport> fold_reports;
  std::vector<std::string> outputs;
  for (int f = 0; f < plan.k; ++f) {
    const std::vector<std::string> test_ids = plan.fold_ids(f);
    Corpus test_set = subset(corpus, test_ids);
    std::vector<std::string> rest_ids;
    for (const AnnotatedQuestion& q : corpus)
      if (plan.assignments.at(q.id) != f) rest_ids.push_back(q.id);
    TrainValSplit split =
        train_validation_split(rest_ids, cfg.seed, cfg.val_fraction);
    Corpus train_set = subset(corpus, split.train_ids);
    Corpus val_set = subset(corpus, split.val_ids);

    std::cout << "fold " << f << ": train " << train_set.size() << " val "
              << val_set.size() << " test " << test_set.size() << "\n";
    Model model(cfg, labels, vocabs_for(train_set, val_set));
    train(model, train_set, val_set, store_ptr, &std::cout);
    EvalReport report = evaluate_model(model, test_set, store_ptr);
    fold_reports.push_back(report);

    const fs::path fold_dir = fs::path(out_dir) / ("fold" + std::to_string(f));
    save_checkpoint(model, (fold_dir / "checkpoint").string(), cfg.epochs,
                    report.overall.f1());
    std::ofstream rf(fold_dir / "report.json");
    rf << report.to_json() << "\n";
    outputs.push_back((fold_dir / "report.json").string());
  }
  EvalReport pooled = pool_reports(fold_reports, labels);
  {
    std::ofstream pf(fs::path(out_dir) / "pooled_report.json");
    pf << pooled.to_json() << "\n";
    std::ofstream tf(fs::path(out_dir) / "pooled_report.txt");
    tf << render_report(pooled, ReportFormat::kText);
  }
  outputs.push_back((fs::path(out_dir) / "pooled_report.json").string());
  write_manifest(fs::path(out_dir) / "run_manifest.json", "cv", cfg,
                 {corpus_path}, outputs);
  std::cout << render_report(pooled, ReportFormat::kText);
  return 0;
}

int run_extract_ctx(const std::string& corpus_path, const std::string& out_dir,
                    const std::string& layers, const std::string& backend,
                    int dim, std::uint64_t seed) {
  const LabelSet& labels = LabelSet::standard();
  Corpus corpus = load_corpus(corpus_path, labels);
  ContextualStore store;
  if (backend == "hashed") {
    store = make_hashed_store(corpus, dim, seed);
  } else if (backend.rfind("command:", 0) == 0) {
    const std::string cmd = backend.substr(8);
    const fs::path req = fs::path(out_dir) / "requests.jsonl";
    const fs::path resp = fs::path(out_dir) / "responses.jsonl";
    fs::create_directories(out_dir);
    {
      std::ofstream rf(req);
      for (const AnnotatedQuestion& q : corpus) {
        json tokens = json::array();
        for (const Token& t : q.tokens) tokens.push_back(t.form);
        rf << json{{"id", q.id}, {"tokens", tokens}, {"layers", layers}}
                  .dump()
           << "\n";
      }
    }
    const std::string shell =
        cmd + " < " + req.string() + " > " + resp.string();
    if (std::system(shell.c_str()) != 0)
      throw Error("extraction backend failed: " + shell);
    std::ifstream in(resp);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json j = json::parse(line);
      const auto vecs = j.at("vectors").get<std::vector<std::vector<float>>>();
      if (vecs.empty()) throw Error("backend returned no vectors for " +
                                    j.at("id").get<std::string>());
      MatF m(static_cast<int>(vecs.size()), static_cast<int>(vecs[0].size()));
      for (std::size_t r = 0; r < vecs.size(); ++r)
        for (std::size_t c = 0; c < vecs[r].size(); ++c)
          m(static_cast<int>(r), static_cast<int>(c)) = vecs[r][c];
      store.put(j.at("id").get<std::string>(), std::move(m));
    }
    fs::remove(req);
    fs::remove(resp);
  } else {
    throw Error("unknown backend '" + backend +
                "' (expected hashed or command:CMD)");
  }
  store.save(out_dir);
  std::cout << "stored " << store.size() << " questions, dim " << store.dim()
            << " in " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"span extraction toolkit for annotated questions"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  CommonOpts opts;
  std::string corpus_path, val_path, test_path, gold_path, pred_path;
  std::string ctx_dir, ckpt_dir, out_path, vectors_path;
  std::string format_name = "text";
  std::string layers = "9,10,11,12";
  std::string backend = "hashed";
  int dim = 3072;
  std::uint64_t extract_seed = 42;
  std::string synth_out;
  int synth_count = 64;

  CLI::App* train_cmd = app.add_subcommand("train", "train a model");
  add_common(train_cmd, opts);
  train_cmd->add_option("--corpus", corpus_path, "training corpus (JSON-lines)")
      ->required();
  train_cmd->add_option("--val", val_path,
                        "validation corpus (default: 10% split)");
  train_cmd->add_option("--ctx", ctx_dir, "contextual embedding store");
  train_cmd->add_option("--static-vectors", vectors_path,
                        "text vector file for the static table");
  train_cmd->add_option("--out", out_path, "output directory")->required();

  CLI::App* eval_cmd = app.add_subcommand("eval", "score a model or file");
  eval_cmd->add_option("--ckpt", ckpt_dir, "checkpoint directory");
  eval_cmd->add_option("--corpus", corpus_path, "test corpus");
  eval_cmd->add_option("--ctx", ctx_dir, "contextual embedding store");
  eval_cmd->add_option("--gold", gold_path, "gold corpus (with --pred)");
  eval_cmd->add_option("--pred", pred_path, "predictions JSON-lines");
  eval_cmd->add_option("--format", format_name, "text | json | csv");
  eval_cmd->add_option("--out", out_path, "report file (default stdout)");

  CLI::App* predict_cmd = app.add_subcommand("predict", "decode a corpus");
  predict_cmd->add_option("--ckpt", ckpt_dir, "checkpoint directory")
      ->required();
  predict_cmd->add_option("--corpus", corpus_path, "input corpus")->required();
  predict_cmd->add_option("--ctx", ctx_dir, "contextual embedding store");
  predict_cmd->add_option("--out", out_path, "predictions file")->required();

  CLI::App* ablate_cmd = app.add_subcommand("ablate", "run the ablation grid");
  add_common(ablate_cmd, opts, /*with_smoke=*/true);
  ablate_cmd->add_option("--corpus", corpus_path, "training corpus")
      ->required();
  ablate_cmd->add_option("--val", val_path, "validation corpus");
  ablate_cmd->add_option("--test", test_path, "test corpus");
  ablate_cmd->add_option("--ctx", ctx_dir, "contextual embedding store");
  ablate_cmd->add_option("--out", out_path, "output directory")->required();

  CLI::App* errors_cmd =
      app.add_subcommand("analyze-errors", "categorize prediction errors");
  errors_cmd->add_option("--gold", gold_path, "gold corpus")->required();
  errors_cmd->add_option("--pred", pred_path, "predictions JSON-lines")
      ->required();
  errors_cmd->add_option("--out", out_path, "error cases file");

  CLI::App* cv_cmd = app.add_subcommand("cv", "cross-validation protocol");
  add_common(cv_cmd, opts);
  cv_cmd->add_option("--corpus", corpus_path, "full corpus")->required();
  cv_cmd->add_option("--ctx", ctx_dir, "contextual embedding store");
  cv_cmd->add_option("--out", out_path, "output directory")->required();

  CLI::App* extract_cmd =
      app.add_subcommand("extract-ctx", "build a contextual embedding store");
  extract_cmd->add_option("--corpus", corpus_path, "corpus to embed")
      ->required();
  extract_cmd->add_option("--out", out_path, "store directory")->required();
  extract_cmd->add_option("--layers", layers, "encoder layers to concatenate");
  extract_cmd->add_option("--backend", backend,
                          "hashed | command:CMD (JSON-lines stdin/stdout)");
  extract_cmd->add_option("--dim", dim, "vector width (hashed backend)");
  extract_cmd->add_option("--seed", extract_seed, "hash seed");

  CLI::App* synth_cmd = app.add_subcommand(
      "synth", "write a synthetic templated corpus (for smoke tests)");
  synth_cmd->add_option("--out", synth_out, "corpus file")->required();
  synth_cmd->add_option("--count", synth_count, "question count");
  synth_cmd->add_option("--seed", extract_seed, "generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (train_cmd->parsed())
      return run_train(opts, corpus_path, val_path, ctx_dir, vectors_path,
                       out_path);
    if (eval_cmd->parsed())
      return run_eval(ckpt_dir, corpus_path, ctx_dir, gold_path, pred_path,
                      format_name, out_path);
    if (predict_cmd->parsed())
      return run_predict(ckpt_dir, corpus_path, ctx_dir, out_path);
    if (ablate_cmd->parsed())
      return run_ablate(opts, corpus_path, val_path, test_path, ctx_dir,
                        out_path);
    if (errors_cmd->parsed())
      return run_analyze_errors(gold_path, pred_path, out_path);
    if (cv_cmd->parsed()) return run_cv(opts, corpus_path, ctx_dir, out_path);
    if (extract_cmd->parsed())
      return run_extract_ctx(corpus_path, out_path, layers, backend, dim,
                             extract_seed);
    if (synth_cmd->parsed()) {
      save_corpus(make_synthetic_corpus(synth_count, extract_seed),
                  LabelSet::standard(), synth_out);
      std::cout << "wrote " << synth_count << " questions to " << synth_out
                << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
