#ifndef SPANLINE_CORPUS_H_
#define SPANLINE_CORPUS_H_

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "spanline/ad.h"

namespace spanline {

// Decodes UTF-8 into code points; throws Error on malformed input.
std::vector<char32_t> decode_utf8(const std::string& s);

// The 16 information-type labels plus the reserved Null class. Label ids are
// dense in listed order; Null always takes the last id (num_labels()).
class LabelSet {
 public:
  explicit LabelSet(std::vector<std::string> labels);
  static const LabelSet& standard();

  int num_labels() const { return static_cast<int>(labels_.size()); }
  int num_classes() const { return num_labels() + 1; }
  int null_id() const { return num_labels(); }
  bool is_null(int id) const { return id == null_id(); }

  // Throws on unknown label names. Null is addressable by name as well.
  int id(const std::string& name) const;
  bool contains(const std::string& name) const;
  const std::string& name(int id) const;
  const std::vector<std::string>& labels() const { return labels_; }

  bool operator==(const LabelSet& o) const { return labels_ == o.labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, int> index_;
};

struct Token {
  std::string form;
  std::string pos;
  std::vector<char32_t> chars;  // code points of form

  static Token make(std::string form, std::string pos);
};

// Closed word-index interval [start, end] carrying a non-Null label id.
struct SpanAnnotation {
  int start = 0;
  int end = 0;
  int label = 0;

  bool overlaps(const SpanAnnotation& o) const {
    return start <= o.end && o.start <= end;
  }
  friend bool operator==(const SpanAnnotation& a, const SpanAnnotation& b) {
    return a.start == b.start && a.end == b.end && a.label == b.label;
  }
  friend bool operator<(const SpanAnnotation& a, const SpanAnnotation& b) {
    if (a.start != b.start) return a.start < b.start;
    if (a.end != b.end) return a.end < b.end;
    return a.label < b.label;
  }
};

struct AnnotatedQuestion {
  std::string id;
  std::vector<Token> tokens;
  std::vector<SpanAnnotation> spans;  // sorted by start, pairwise disjoint

  int size() const { return static_cast<int>(tokens.size()); }
  // Enforces the gold invariants; throws Error naming the question id.
  void validate(const LabelSet& labels) const;
};

using Corpus = std::vector<AnnotatedQuestion>;

// JSON-lines corpus file:
//   {"id": str, "tokens": [{"form": str, "pos": str}],
//    "spans": [{"start": int, "end": int, "label": str}]}
Corpus load_corpus(const std::string& path, const LabelSet& labels);
Corpus parse_corpus(const std::string& text, const LabelSet& labels);
void save_corpus(const Corpus& corpus, const LabelSet& labels,
                 const std::string& path);
std::string corpus_to_jsonl(const Corpus& corpus, const LabelSet& labels);

// BIO tag strings for the sequence-labeling baselines. Tokens outside every
// span get "O"; a span (s, e, L) yields B-L at s and I-L at s+1..e.
std::vector<std::string> spans_to_bio(const AnnotatedQuestion& q,
                                      const LabelSet& labels);
// Lenient inverse: a stray I-L (no open span of label L) starts a new span.
std::vector<SpanAnnotation> bio_to_spans(const std::vector<std::string>& tags,
                                         const LabelSet& labels);

// Deterministic k-fold partition; fold sizes differ by at most one.
struct FoldPlan {
  int k = 0;
  std::map<std::string, int> assignments;  // question id -> fold

  std::vector<std::string> fold_ids(int fold) const;
  std::string to_json() const;
  static FoldPlan from_json(const std::string& text);
};

FoldPlan make_folds(const Corpus& corpus, int k, std::uint64_t seed);

// Shuffles ids with the run seed and reserves val_fraction (at least one
// question) for validation.
struct TrainValSplit {
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
};
TrainValSplit train_validation_split(const std::vector<std::string>& ids,
                                     std::uint64_t seed,
                                     double val_fraction = 0.1);

// Word/char/POS id maps with PAD=0 and UNK=1; unseen items map to UNK.
class Vocabularies {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  int word_id(const std::string& form) const;
  int char_id(char32_t c) const;
  int pos_id(const std::string& tag) const;

  int word_count() const { return static_cast<int>(words_.size()); }
  int char_count() const { return static_cast<int>(chars_.size()); }
  int pos_count() const { return static_cast<int>(pos_.size()); }

  const std::vector<std::string>& words() const { return words_; }
  const std::vector<char32_t>& chars() const { return chars_; }
  const std::vector<std::string>& pos_tags() const { return pos_; }

  int add_word(const std::string& form);
  int add_char(char32_t c);
  int add_pos(const std::string& tag);

  static Vocabularies with_reserved();

 private:
  std::vector<std::string> words_;
  std::vector<char32_t> chars_;
  std::vector<std::string> pos_;
  std::unordered_map<std::string, int> word_index_;
  std::unordered_map<char32_t, int> char_index_;
  std::unordered_map<std::string, int> pos_index_;
};

Vocabularies build_vocabs(const Corpus& corpus);

}  // namespace spanline

#endif  // SPANLINE_CORPUS_H_
