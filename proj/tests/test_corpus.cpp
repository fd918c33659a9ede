#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "spanline/corpus.h"
#include "spanline/synthetic.h"

using namespace spanline;

namespace {

const LabelSet& L() { return LabelSet::standard(); }

std::string line(const std::string& tokens, const std::string& spans) {
  return R"({"id": "q1", "tokens": [)" + tokens + R"(], "spans": [)" + spans +
         "]}";
}

std::string tok(const std::string& form) {
  return R"({"form": ")" + form + R"(", "pos": "N"})";
}

std::string five_tokens() {
  return tok("a") + "," + tok("b") + "," + tok("c") + "," + tok("d") + "," +
         tok("e");
}

// Random flat span set over n tokens.
std::vector<SpanAnnotation> random_spans(int n, std::mt19937& rng) {
  std::vector<SpanAnnotation> spans;
  std::uniform_int_distribution<int> len_dist(1, 3);
  std::uniform_int_distribution<int> gap_dist(0, 2);
  std::uniform_int_distribution<int> label_dist(0, L().num_labels() - 1);
  std::uniform_int_distribution<int> keep(0, 1);
  int pos = gap_dist(rng);
  while (pos < n) {
    const int end = std::min(n - 1, pos + len_dist(rng) - 1);
    if (keep(rng) == 1) spans.push_back({pos, end, label_dist(rng)});
    pos = end + 1 + gap_dist(rng);
  }
  return spans;
}

}  // namespace

TEST_CASE("label set layout") {
  CHECK(L().num_labels() == 16);
  CHECK(L().num_classes() == 17);
  CHECK(L().null_id() == 16);
  CHECK(L().name(16) == "Null");
  CHECK(L().id("TV") == 14);
  CHECK(L().id("Null") == 16);
  CHECK(L().name(0) == "A");
  CHECK_THROWS_AS(L().id("bogus"), Error);
  CHECK_THROWS_AS(LabelSet({"A", "A"}), Error);
  CHECK_THROWS_AS(LabelSet({"Null"}), Error);
}

TEST_CASE("utf8 decomposition") {
  Token t = Token::make("xe_máy", "N");
  CHECK(t.chars.size() == 6);  // x e _ m á y
  CHECK(t.chars[4] == U'á');
  CHECK_THROWS_AS(decode_utf8("\xff"), Error);
  CHECK_THROWS_AS(decode_utf8("\xc3"), Error);  // truncated sequence
}

TEST_CASE("load_corpus parses a simple record") {
  Corpus c = parse_corpus(
      line(five_tokens(), R"({"start": 0, "end": 1, "label": "TV"})"), L());
  REQUIRE(c.size() == 1);
  CHECK(c[0].size() == 5);
  REQUIRE(c[0].spans.size() == 1);
  CHECK(c[0].spans[0] == SpanAnnotation{0, 1, L().id("TV")});
}

TEST_CASE("load_corpus rejects invalid records") {
  CHECK_THROWS_WITH_AS(
      parse_corpus(line(five_tokens(),
                        R"({"start": 3, "end": 2, "label": "QT"})"),
                   L()),
      doctest::Contains("end < start"), Error);
  CHECK_THROWS_WITH_AS(
      parse_corpus(line(five_tokens(),
                        R"({"start": 0, "end": 9, "label": "QT"})"),
                   L()),
      doctest::Contains("out of bounds"), Error);
  CHECK_THROWS_WITH_AS(
      parse_corpus(
          line(five_tokens(),
               R"({"start": 0, "end": 2, "label": "TV"}, )"
               R"({"start": 2, "end": 3, "label": "QT"})"),
          L()),
      doctest::Contains("overlapping"), Error);
  CHECK_THROWS_WITH_AS(
      parse_corpus(line(five_tokens(),
                        R"({"start": 0, "end": 1, "label": "XX"})"),
                   L()),
      doctest::Contains("unknown label"), Error);
  CHECK_THROWS_WITH_AS(parse_corpus("not json\n", L()),
                       doctest::Contains("line 1"), Error);
  CHECK_THROWS_WITH_AS(
      parse_corpus(line(five_tokens(), "") + "\n{broken\n", L()),
      doctest::Contains("line 2"), Error);
}

TEST_CASE("corpus serialization round-trips") {
  Corpus corpus = make_synthetic_corpus(40, 123);
  Corpus again = parse_corpus(corpus_to_jsonl(corpus, L()), L());
  REQUIRE(again.size() == corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    CHECK(again[i].id == corpus[i].id);
    REQUIRE(again[i].tokens.size() == corpus[i].tokens.size());
    for (std::size_t t = 0; t < corpus[i].tokens.size(); ++t) {
      CHECK(again[i].tokens[t].form == corpus[i].tokens[t].form);
      CHECK(again[i].tokens[t].pos == corpus[i].tokens[t].pos);
      CHECK(again[i].tokens[t].chars == corpus[i].tokens[t].chars);
    }
    CHECK(again[i].spans == corpus[i].spans);
  }
}

TEST_CASE("spans_to_bio basic scheme") {
  AnnotatedQuestion q;
  q.id = "q";
  for (int i = 0; i < 5; ++i) q.tokens.push_back(Token::make("w", "N"));
  q.spans = {{0, 1, L().id("TV")}, {3, 3, L().id("QT")}};
  CHECK(spans_to_bio(q, L()) ==
        std::vector<std::string>{"B-TV", "I-TV", "O", "B-QT", "O"});
  q.spans.clear();
  q.tokens.resize(3);
  CHECK(spans_to_bio(q, L()) == std::vector<std::string>{"O", "O", "O"});
}

TEST_CASE("bio_to_spans decodes and repairs") {
  auto spans = bio_to_spans({"B-TV", "I-TV", "O", "B-QT", "O"}, L());
  CHECK(spans == std::vector<SpanAnnotation>{{0, 1, L().id("TV")},
                                             {3, 3, L().id("QT")}});
  CHECK(bio_to_spans({"I-A", "I-A"}, L()) ==
        std::vector<SpanAnnotation>{{0, 1, L().id("A")}});
  CHECK(bio_to_spans({"O", "O"}, L()).empty());
  // label switch inside an I run starts a new span
  CHECK(bio_to_spans({"B-TV", "I-QT"}, L()) ==
        std::vector<SpanAnnotation>{{0, 0, L().id("TV")},
                                    {1, 1, L().id("QT")}});
  // adjacent B tags of the same label stay separate spans
  CHECK(bio_to_spans({"B-A", "B-A"}, L()) ==
        std::vector<SpanAnnotation>{{0, 0, L().id("A")},
                                    {1, 1, L().id("A")}});
  CHECK_THROWS_AS(bio_to_spans({"Q-TV"}, L()), Error);
  CHECK_THROWS_AS(bio_to_spans({"B-XX"}, L()), Error);
  CHECK_THROWS_AS(bio_to_spans({"B-Null"}, L()), Error);
}

TEST_CASE("bio round-trip on randomized flat annotations") {
  std::mt19937 rng(99);
  for (int iter = 0; iter < 300; ++iter) {
    const int n = 1 + static_cast<int>(rng() % 12);
    AnnotatedQuestion q;
    q.id = "r";
    for (int i = 0; i < n; ++i) q.tokens.push_back(Token::make("w", "N"));
    q.spans = random_spans(n, rng);
    CHECK(bio_to_spans(spans_to_bio(q, L()), L()) == q.spans);
  }
}

TEST_CASE("make_folds partitions the corpus") {
  Corpus corpus = make_synthetic_corpus(10, 7);
  FoldPlan plan = make_folds(corpus, 5, 42);
  CHECK(plan.k == 5);
  std::set<std::string> seen;
  for (int f = 0; f < 5; ++f) {
    auto ids = plan.fold_ids(f);
    CHECK(ids.size() == 2);
    for (const auto& id : ids) CHECK(seen.insert(id).second);
  }
  CHECK(seen.size() == corpus.size());

  FoldPlan plan2 = make_folds(corpus, 5, 42);
  CHECK(plan.assignments == plan2.assignments);
  FoldPlan other = make_folds(corpus, 5, 43);
  CHECK(other.assignments != plan.assignments);

  CHECK_THROWS_AS(make_folds(corpus, 1, 42), Error);
  CHECK_THROWS_AS(make_folds(corpus, 11, 42), Error);
}

TEST_CASE("fold union covers random corpus sizes") {
  std::mt19937 rng(5);
  for (int iter = 0; iter < 20; ++iter) {
    const int n = 4 + static_cast<int>(rng() % 40);
    const int k = 2 + static_cast<int>(rng() % 5);
    if (k > n) continue;
    Corpus corpus = make_synthetic_corpus(n, iter);
    FoldPlan plan = make_folds(corpus, k, rng());
    std::set<std::string> all;
    std::size_t min_size = corpus.size(), max_size = 0;
    for (int f = 0; f < k; ++f) {
      const auto ids = plan.fold_ids(f);
      min_size = std::min(min_size, ids.size());
      max_size = std::max(max_size, ids.size());
      all.insert(ids.begin(), ids.end());
    }
    CHECK(all.size() == corpus.size());
    CHECK(max_size - min_size <= 1);
  }
}

TEST_CASE("fold plan serialization round-trips") {
  Corpus corpus = make_synthetic_corpus(7, 1);
  FoldPlan plan = make_folds(corpus, 3, 9);
  FoldPlan again = FoldPlan::from_json(plan.to_json());
  CHECK(again.k == plan.k);
  CHECK(again.assignments == plan.assignments);
}

TEST_CASE("train/validation split reserves about ten percent") {
  std::vector<std::string> ids;
  for (int i = 0; i < 40; ++i) ids.push_back("q" + std::to_string(i));
  TrainValSplit split = train_validation_split(ids, 11);
  CHECK(split.val_ids.size() == 4);
  CHECK(split.train_ids.size() == 36);
  TrainValSplit again = train_validation_split(ids, 11);
  CHECK(again.val_ids == split.val_ids);
  std::set<std::string> all(split.train_ids.begin(), split.train_ids.end());
  all.insert(split.val_ids.begin(), split.val_ids.end());
  CHECK(all.size() == ids.size());
  // tiny corpora still get a non-empty validation set
  TrainValSplit tiny = train_validation_split({"a", "b"}, 3);
  CHECK(tiny.val_ids.size() == 1);
  CHECK(tiny.train_ids.size() == 1);
}

TEST_CASE("build_vocabs assigns dense ids with reserved entries") {
  Corpus c = parse_corpus(line(tok("a") + "," + tok("b"), ""), L());
  Vocabularies v = build_vocabs(c);
  CHECK(v.word_count() == 4);  // pad, unk, a, b
  CHECK(v.word_id("a") == 2);
  CHECK(v.word_id("b") == 3);
  CHECK(v.word_id("zzz") == Vocabularies::kUnk);
  CHECK(v.pos_id("N") == 2);
  CHECK(v.char_id(U'a') >= 2);
  CHECK_THROWS_AS(build_vocabs(Corpus{}), Error);
}

TEST_CASE("vocabulary ids are a bijection onto 0..n-1") {
  Corpus corpus = make_synthetic_corpus(30, 17);
  Vocabularies v = build_vocabs(corpus);
  std::set<int> ids;
  for (const auto& w : v.words()) ids.insert(v.word_id(w));
  CHECK(static_cast<int>(ids.size()) == v.word_count());
  CHECK(*ids.begin() == 0);
  CHECK(*ids.rbegin() == v.word_count() - 1);
  std::set<int> cids;
  for (char32_t c : v.chars()) cids.insert(v.char_id(c));
  CHECK(static_cast<int>(cids.size()) == v.char_count());
}
