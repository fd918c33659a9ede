#include <doctest.h>

#include <fstream>
#include <random>

#include "spanline/reprlayer.h"
#include "spanline/synthetic.h"
#include "test_util.h"

using namespace spanline;
using testutil::grad_check;

namespace {

RepresentationConfig toy_cfg() {
  RepresentationConfig cfg;
  cfg.d_ctx = 6;
  cfg.d_char_in = 3;
  cfg.kernel_sizes = {2, 3};
  cfg.filters_per_kernel = {2, 2};
  cfg.d_pos = 4;
  cfg.max_char_len = 5;
  cfg.static_dim = 5;
  return cfg;
}

Corpus tiny_corpus() {
  return parse_corpus(
      R"({"id": "q1", "tokens": [{"form": "ab", "pos": "N"}, {"form": "abcdefgh", "pos": "V"}, {"form": "ba", "pos": "N"}], "spans": []})"
      "\n",
      LabelSet::standard());
}

}  // namespace

TEST_CASE("config invariants") {
  RepresentationConfig cfg;
  CHECK(cfg.d_char_out() == 256);
  CHECK(cfg.word_dim() == 3072 + 256 + 100);
  cfg.use_contextual = false;
  CHECK(cfg.word_dim() == 300 + 256 + 100);
  cfg.use_char = false;
  cfg.use_pos = false;
  CHECK(cfg.word_dim() == 300);
  cfg = toy_cfg();
  cfg.kernel_sizes = {9};
  cfg.filters_per_kernel = {2};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = toy_cfg();
  cfg.filters_per_kernel = {2};
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("charCNN output is zero under zero filters and 256-wide by default") {
  Corpus corpus = tiny_corpus();
  Vocabularies vocabs = build_vocabs(corpus);
  std::mt19937 rng(1);

  ad::ParameterStore ps;
  RepresentationConfig cfg;  // paper dims
  cfg.use_contextual = true;
  ReprLayer layer(ps, cfg, vocabs, rng);
  ps.get("repr.char_conv3.W").value.setZero();
  ps.get("repr.char_conv3.b").value.setZero();
  ps.get("repr.char_conv4.W").value.setZero();
  ps.get("repr.char_conv4.b").value.setZero();
  for (const Token& t : corpus[0].tokens) {
    ad::Graph g;
    const Mat& v = g.value(layer.embed_chars(g, t, vocabs));
    CHECK(v.rows() == 1);
    CHECK(v.cols() == 256);  // any word length
    CHECK(v.norm() == 0.0);
  }
}

TEST_CASE("charCNN matches a sliding-window dot-product oracle") {
  Corpus corpus = tiny_corpus();
  Vocabularies vocabs = build_vocabs(corpus);
  std::mt19937 rng(2);
  RepresentationConfig cfg = toy_cfg();
  cfg.kernel_sizes = {3};
  cfg.filters_per_kernel = {1};  // single filter, kernel 3
  ad::ParameterStore ps;
  ReprLayer layer(ps, cfg, vocabs, rng);

  const Token& t = corpus[0].tokens[1];
  ad::Graph g;
  const double got = g.value(layer.embed_chars(g, t, vocabs))(0, 0);

  // oracle: max over positions of the window/filter dot product plus bias
  const Mat& table = ps.get("repr.char_table").value;
  const Mat& W = ps.get("repr.char_conv3.W").value;
  const double b = ps.get("repr.char_conv3.b").value(0, 0);
  std::vector<int> ids = encode_chars(t, vocabs, cfg.max_char_len);
  double best = -1e300;
  for (int pos = 0; pos + 3 <= cfg.max_char_len; ++pos) {
    double dot = b;
    for (int o = 0; o < 3; ++o)
      for (int c = 0; c < cfg.d_char_in; ++c)
        dot += table(ids[static_cast<std::size_t>(pos + o)], c) *
               W(o * cfg.d_char_in + c, 0);
    best = std::max(best, dot);
  }
  CHECK(got == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("charCNN is permutation-sensitive with an asymmetric filter") {
  Corpus corpus = tiny_corpus();
  Vocabularies vocabs = build_vocabs(corpus);
  std::mt19937 rng(3);
  RepresentationConfig cfg = toy_cfg();
  ad::ParameterStore ps;
  ReprLayer layer(ps, cfg, vocabs, rng);

  Token fwd = Token::make("ab", "N");
  Token rev = Token::make("ba", "N");
  ad::Graph g;
  const Mat a = g.value(layer.embed_chars(g, fwd, vocabs));
  const Mat b = g.value(layer.embed_chars(g, rev, vocabs));
  CHECK((a - b).norm() > 1e-8);
}

TEST_CASE("pos embeddings: init range, determinism, row isolation") {
  Corpus corpus = tiny_corpus();
  Vocabularies vocabs = build_vocabs(corpus);
  std::mt19937 rng(4);
  RepresentationConfig cfg;
  cfg.d_pos = 100;
  ad::ParameterStore ps;
  ReprLayer layer(ps, cfg, vocabs, rng);

  const Mat& table = ps.get("repr.pos_table").value;
  const double bound = std::sqrt(3.0 / 100.0);
  CHECK(table.maxCoeff() < bound);
  CHECK(table.minCoeff() > -bound);

  const int n_id = vocabs.pos_id("N");
  const int v_id = vocabs.pos_id("V");
  ad::Graph g;
  const Mat a = g.value(layer.embed_pos(g, n_id));
  const Mat b = g.value(layer.embed_pos(g, n_id));
  CHECK((a - b).norm() == 0.0);

  // gradient of a loss touching N leaves V's row untouched
  ps.zero_grads();
  ad::Graph g2;
  ad::Expr loss = g2.sum_all(layer.embed_pos(g2, n_id));
  g2.backward(loss);
  g2.accumulate_param_grads();
  const Mat& grad = ps.get("repr.pos_table").grad;
  CHECK(grad.row(n_id).sum() == doctest::Approx(100.0));
  CHECK(grad.row(v_id).norm() == 0.0);
}

TEST_CASE("lookup_contextual validates ids and shapes") {
  Corpus corpus = tiny_corpus();
  ContextualStore store(4);
  MatF m(3, 4);
  m.setConstant(0.5f);
  store.put("q1", m);
  Mat got = lookup_contextual(corpus[0], store);
  CHECK(got.rows() == 3);
  CHECK(got(1, 2) == doctest::Approx(0.5));

  AnnotatedQuestion q2 = corpus[0];
  q2.id = "q2";
  CHECK_THROWS_WITH_AS(lookup_contextual(q2, store),
                       doctest::Contains("missing contextual embeddings for q2"),
                       Error);
  MatF bad(2, 4);
  bad.setZero();
  ContextualStore store2(4);
  store2.put("q1", bad);
  CHECK_THROWS_WITH_AS(lookup_contextual(corpus[0], store2),
                       doctest::Contains("rows"), Error);
}

TEST_CASE("contextual store files round-trip") {
  Corpus corpus = make_synthetic_corpus(5, 8);
  ContextualStore store = make_hashed_store(corpus, 12, 42);
  const std::string dir = "build_test_ctxstore";
  store.save(dir);
  ContextualStore again = ContextualStore::load(dir);
  CHECK(again.dim() == 12);
  CHECK(again.size() == store.size());
  for (const AnnotatedQuestion& q : corpus) {
    CHECK((again.get(q.id) - store.get(q.id)).norm() == 0.0f);
    CHECK(again.get(q.id).rows() == q.size());
  }
  // identical hash inputs give identical vectors
  ContextualStore redo = make_hashed_store(corpus, 12, 42);
  for (const AnnotatedQuestion& q : corpus)
    CHECK((redo.get(q.id) - store.get(q.id)).norm() == 0.0f);
}

TEST_CASE("represent concatenates the enabled features") {
  Corpus corpus = tiny_corpus();
  Vocabularies vocabs = build_vocabs(corpus);
  RepresentationConfig cfg = toy_cfg();

  auto encoded = [&](const RepresentationConfig& c,
                     const ContextualStore* store) {
    return encode_question(corpus[0], vocabs, c, store, 60);
  };

  ContextualStore store = make_hashed_store(corpus, cfg.d_ctx, 7);

  std::mt19937 rng(5);
  ad::ParameterStore ps;
  ReprLayer layer(ps, cfg, vocabs, rng);
  ad::Graph g;
  const Mat full = g.value(layer.represent(g, encoded(cfg, &store)));
  CHECK(full.rows() == 3);
  CHECK(full.cols() == cfg.d_ctx + cfg.d_char_out() + cfg.d_pos);

  // same seed, pos disabled: the remaining slices are unchanged
  RepresentationConfig no_pos = cfg;
  no_pos.use_pos = false;
  std::mt19937 rng2(5);
  ad::ParameterStore ps2;
  ReprLayer layer2(ps2, no_pos, vocabs, rng2);
  ad::Graph g2;
  const Mat trimmed = g2.value(layer2.represent(g2, encoded(no_pos, &store)));
  CHECK(trimmed.cols() == cfg.d_ctx + cfg.d_char_out());
  CHECK((full.leftCols(trimmed.cols()) - trimmed).norm() == 0.0);

  // static fallback widths match the ablation arithmetic
  RepresentationConfig st = cfg;
  st.use_contextual = false;
  std::mt19937 rng3(5);
  ad::ParameterStore ps3;
  ReprLayer layer3(ps3, st, vocabs, rng3);
  ad::Graph g3;
  const Mat stat = g3.value(layer3.represent(g3, encoded(st, nullptr)));
  CHECK(stat.cols() == st.static_dim + cfg.d_char_out() + cfg.d_pos);
  CHECK(stat.allFinite());
}

TEST_CASE("default dims produce the documented 3428-wide representation") {
  RepresentationConfig cfg;
  CHECK(cfg.word_dim() == 3428);
  RepresentationConfig st;
  st.use_contextual = false;
  CHECK(st.word_dim() == 656);
}

TEST_CASE("representation gradients match finite differences") {
  Corpus corpus = tiny_corpus();
  Vocabularies vocabs = build_vocabs(corpus);
  RepresentationConfig cfg = toy_cfg();
  cfg.use_contextual = false;  // include the static table
  std::mt19937 rng(6);
  ad::ParameterStore ps;
  ReprLayer layer(ps, cfg, vocabs, rng);
  EncodedQuestion q = encode_question(corpus[0], vocabs, cfg, nullptr, 60);

  std::mt19937 mix_rng(7);
  const Mat mix = testutil::random_matrix(3, cfg.word_dim(), mix_rng);
  auto build = [&](ad::Graph& g) {
    return g.sum_all(g.cmult(layer.represent(g, q), g.input(mix)));
  };
  std::vector<std::string> names = {
      "repr.char_table", "repr.char_conv2.W", "repr.char_conv2.b",
      "repr.char_conv3.W", "repr.char_conv3.b", "repr.pos_table",
      "repr.word_table"};
  CHECK(grad_check(ps, names, build) < 1e-6);
}

TEST_CASE("static vector file initializes matching rows") {
  Corpus corpus = tiny_corpus();
  Vocabularies vocabs = build_vocabs(corpus);
  RepresentationConfig cfg = toy_cfg();
  cfg.use_contextual = false;
  std::mt19937 rng(8);
  ad::ParameterStore ps;
  ReprLayer layer(ps, cfg, vocabs, rng);

  const std::string path = "build_test_vectors.txt";
  {
    std::ofstream out(path);
    out << "ab 1 2 3 4 5\n";
    out << "unseen 9 9 9 9 9\n";
  }
  CHECK(layer.init_static_table(load_static_vectors(path), vocabs) == 1);
  const Mat& table = ps.get("repr.word_table").value;
  CHECK(table(vocabs.word_id("ab"), 0) == 1.0);
  CHECK(table(vocabs.word_id("ab"), 4) == 5.0);
}
