#include "spanline/corpus.h"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

namespace spanline {

using nlohmann::json;

std::vector<char32_t> decode_utf8(const std::string& s) {
  std::vector<char32_t> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const unsigned char b0 = static_cast<unsigned char>(s[i]);
    char32_t cp = 0;
    std::size_t len = 0;
    if (b0 < 0x80) {
      cp = b0;
      len = 1;
    } else if ((b0 & 0xE0) == 0xC0) {
      cp = b0 & 0x1F;
      len = 2;
    } else if ((b0 & 0xF0) == 0xE0) {
      cp = b0 & 0x0F;
      len = 3;
    } else if ((b0 & 0xF8) == 0xF0) {
      cp = b0 & 0x07;
      len = 4;
    } else {
      throw Error("invalid UTF-8 byte at offset " + std::to_string(i));
    }
    if (i + len > s.size())
      throw Error("truncated UTF-8 sequence at offset " + std::to_string(i));
    for (std::size_t k = 1; k < len; ++k) {
      const unsigned char b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xC0) != 0x80)
        throw Error("invalid UTF-8 continuation at offset " +
                    std::to_string(i + k));
      cp = (cp << 6) | (b & 0x3F);
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

LabelSet::LabelSet(std::vector<std::string> labels)
    : labels_(std::move(labels)) {
  if (labels_.empty()) throw Error("label set must not be empty");
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == "Null")
      throw Error("Null is reserved and cannot be listed as a label");
    if (!index_.emplace(labels_[i], static_cast<int>(i)).second)
      throw Error("duplicate label: " + labels_[i]);
  }
  index_.emplace("Null", null_id());
}

const LabelSet& LabelSet::standard() {
  static const LabelSet s({"A", "AC", "ANO", "DL", "IF1", "IF2", "IF3", "IF4",
                           "L", "QT", "SP", "TI", "TL", "TP", "TV", "V"});
  return s;
}

int LabelSet::id(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("unknown label: " + name);
  return it->second;
}

bool LabelSet::contains(const std::string& name) const {
  return index_.count(name) > 0;
}

const std::string& LabelSet::name(int id) const {
  static const std::string kNull = "Null";
  if (id == null_id()) return kNull;
  if (id < 0 || id > null_id())
    throw Error("label id out of range: " + std::to_string(id));
  return labels_[static_cast<std::size_t>(id)];
}

Token Token::make(std::string form, std::string pos) {
  Token t;
  t.chars = decode_utf8(form);
  t.form = std::move(form);
  t.pos = std::move(pos);
  return t;
}

void AnnotatedQuestion::validate(const LabelSet& labels) const {
  if (id.empty()) throw Error("question with empty id");
  for (const Token& t : tokens)
    if (t.form.empty())
      throw Error("question " + id + ": empty token form");
  const int n = size();
  for (const SpanAnnotation& s : spans) {
    if (s.end < s.start)
      throw Error("question " + id + ": end < start in span (" +
                  std::to_string(s.start) + ", " + std::to_string(s.end) +
                  ")");
    if (s.start < 0 || s.end >= n)
      throw Error("question " + id + ": span (" + std::to_string(s.start) +
                  ", " + std::to_string(s.end) + ") out of bounds for " +
                  std::to_string(n) + " tokens");
    if (s.label < 0 || s.label >= labels.num_labels())
      throw Error("question " + id + ": invalid label id " +
                  std::to_string(s.label));
  }
  for (std::size_t i = 0; i + 1 < spans.size(); ++i) {
    if (spans[i + 1].start < spans[i].start)
      throw Error("question " + id + ": spans not sorted by start");
    if (spans[i].overlaps(spans[i + 1]))
      throw Error("question " + id + ": overlapping gold spans (" +
                  std::to_string(spans[i].start) + ", " +
                  std::to_string(spans[i].end) + ") and (" +
                  std::to_string(spans[i + 1].start) + ", " +
                  std::to_string(spans[i + 1].end) + ")");
  }
}

namespace {

AnnotatedQuestion question_from_json(const json& j, const LabelSet& labels) {
  AnnotatedQuestion q;
  q.id = j.at("id").get<std::string>();
  for (const json& tj : j.at("tokens"))
    q.tokens.push_back(Token::make(tj.at("form").get<std::string>(),
                                   tj.at("pos").get<std::string>()));
  if (j.contains("spans")) {
    for (const json& sj : j.at("spans")) {
      SpanAnnotation s;
      s.start = sj.at("start").get<int>();
      s.end = sj.at("end").get<int>();
      const std::string label = sj.at("label").get<std::string>();
      if (!labels.contains(label) || label == "Null")
        throw Error("question " + q.id + ": unknown label '" + label + "'");
      s.label = labels.id(label);
      q.spans.push_back(s);
    }
  }
  std::sort(q.spans.begin(), q.spans.end());
  q.validate(labels);
  return q;
}

json question_to_json(const AnnotatedQuestion& q, const LabelSet& labels) {
  json tokens = json::array();
  for (const Token& t : q.tokens)
    tokens.push_back({{"form", t.form}, {"pos", t.pos}});
  json spans = json::array();
  for (const SpanAnnotation& s : q.spans)
    spans.push_back({{"start", s.start},
                     {"end", s.end},
                     {"label", labels.name(s.label)}});
  return json{{"id", q.id}, {"tokens", tokens}, {"spans", spans}};
}

}  // namespace

Corpus parse_corpus(const std::string& text, const LabelSet& labels) {
  Corpus corpus;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error("line " + std::to_string(line_no) +
                  ": malformed JSON record: " + e.what());
    }
    try {
      corpus.push_back(question_from_json(j, labels));
    } catch (const json::exception& e) {
      throw Error("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return corpus;
}

Corpus load_corpus(const std::string& path, const LabelSet& labels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open corpus file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_corpus(buf.str(), labels);
}

std::string corpus_to_jsonl(const Corpus& corpus, const LabelSet& labels) {
  std::string out;
  for (const AnnotatedQuestion& q : corpus) {
    out += question_to_json(q, labels).dump();
    out += '\n';
  }
  return out;
}

void save_corpus(const Corpus& corpus, const LabelSet& labels,
                 const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write corpus file: " + path);
  out << corpus_to_jsonl(corpus, labels);
}

std::vector<std::string> spans_to_bio(const AnnotatedQuestion& q,
                                      const LabelSet& labels) {
  std::vector<std::string> tags(static_cast<std::size_t>(q.size()), "O");
  std::vector<SpanAnnotation> spans = q.spans;
  std::sort(spans.begin(), spans.end());
  for (std::size_t i = 0; i + 1 < spans.size(); ++i)
    if (spans[i].overlaps(spans[i + 1]))
      throw Error("question " + q.id +
                  ": overlapping spans cannot be BIO-encoded");
  for (const SpanAnnotation& s : spans) {
    if (s.end >= q.size())
      throw Error("question " + q.id + ": span out of bounds");
    const std::string& name = labels.name(s.label);
    tags[static_cast<std::size_t>(s.start)] = "B-" + name;
    for (int t = s.start + 1; t <= s.end; ++t)
      tags[static_cast<std::size_t>(t)] = "I-" + name;
  }
  return tags;
}

std::vector<SpanAnnotation> bio_to_spans(const std::vector<std::string>& tags,
                                         const LabelSet& labels) {
  std::vector<SpanAnnotation> spans;
  int open_label = -1;
  int open_start = -1;
  auto close = [&](int end) {
    if (open_label >= 0)
      spans.push_back({open_start, end, open_label});
    open_label = -1;
  };
  for (int i = 0; i < static_cast<int>(tags.size()); ++i) {
    const std::string& tag = tags[static_cast<std::size_t>(i)];
    if (tag == "O") {
      close(i - 1);
      continue;
    }
    if (tag.size() < 3 || (tag[0] != 'B' && tag[0] != 'I') || tag[1] != '-')
      throw Error("unknown tag string: '" + tag + "'");
    const std::string name = tag.substr(2);
    if (!labels.contains(name) || name == "Null")
      throw Error("unknown tag string: '" + tag + "'");
    const int label = labels.id(name);
    if (tag[0] == 'B' || label != open_label) {
      close(i - 1);
      open_label = label;
      open_start = i;
    }
  }
  close(static_cast<int>(tags.size()) - 1);
  return spans;
}

std::vector<std::string> FoldPlan::fold_ids(int fold) const {
  std::vector<std::string> out;
  for (const auto& [id, f] : assignments)
    if (f == fold) out.push_back(id);
  return out;
}

std::string FoldPlan::to_json() const {
  json j;
  j["k"] = k;
  j["assignments"] = json::object();
  for (const auto& [id, f] : assignments) j["assignments"][id] = f;
  return j.dump(2);
}

FoldPlan FoldPlan::from_json(const std::string& text) {
  FoldPlan plan;
  json j = json::parse(text);
  plan.k = j.at("k").get<int>();
  for (const auto& [id, f] : j.at("assignments").items())
    plan.assignments[id] = f.get<int>();
  return plan;
}

FoldPlan make_folds(const Corpus& corpus, int k, std::uint64_t seed) {
  if (k < 2) throw Error("fold count must be at least 2");
  if (static_cast<std::size_t>(k) > corpus.size())
    throw Error("fold count " + std::to_string(k) + " exceeds corpus size " +
                std::to_string(corpus.size()));
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937 rng(static_cast<std::mt19937::result_type>(seed));
  std::shuffle(order.begin(), order.end(), rng);
  FoldPlan plan;
  plan.k = k;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const AnnotatedQuestion& q = corpus[order[i]];
    if (plan.assignments.count(q.id) > 0)
      throw Error("duplicate question id: " + q.id);
    plan.assignments[q.id] = static_cast<int>(i % static_cast<std::size_t>(k));
  }
  return plan;
}

TrainValSplit train_validation_split(const std::vector<std::string>& ids,
                                     std::uint64_t seed, double val_fraction) {
  if (ids.empty()) throw Error("cannot split an empty id list");
  if (val_fraction <= 0.0 || val_fraction >= 1.0)
    throw Error("val_fraction must be in (0, 1)");
  std::vector<std::string> shuffled = ids;
  std::mt19937 rng(static_cast<std::mt19937::result_type>(seed ^ 0x9e3779b9u));
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  std::size_t n_val = static_cast<std::size_t>(
      static_cast<double>(shuffled.size()) * val_fraction);
  n_val = std::max<std::size_t>(1, n_val);
  if (n_val >= shuffled.size()) n_val = shuffled.size() - 1;
  TrainValSplit split;
  split.val_ids.assign(shuffled.begin(),
                       shuffled.begin() + static_cast<std::ptrdiff_t>(n_val));
  split.train_ids.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(n_val),
                         shuffled.end());
  return split;
}

Vocabularies Vocabularies::with_reserved() {
  Vocabularies v;
  v.words_ = {"<pad>", "<unk>"};
  v.word_index_ = {{"<pad>", 0}, {"<unk>", 1}};
  v.chars_ = {U'\0', U'\1'};  // placeholders for PAD / UNK
  v.char_index_ = {{U'\0', 0}, {U'\1', 1}};
  v.pos_ = {"<pad>", "<unk>"};
  v.pos_index_ = {{"<pad>", 0}, {"<unk>", 1}};
  return v;
}

int Vocabularies::word_id(const std::string& form) const {
  auto it = word_index_.find(form);
  return it == word_index_.end() ? kUnk : it->second;
}

int Vocabularies::char_id(char32_t c) const {
  auto it = char_index_.find(c);
  return it == char_index_.end() ? kUnk : it->second;
}

int Vocabularies::pos_id(const std::string& tag) const {
  auto it = pos_index_.find(tag);
  return it == pos_index_.end() ? kUnk : it->second;
}

int Vocabularies::add_word(const std::string& form) {
  auto it = word_index_.find(form);
  if (it != word_index_.end()) return it->second;
  const int id = word_count();
  words_.push_back(form);
  word_index_[form] = id;
  return id;
}

int Vocabularies::add_char(char32_t c) {
  auto it = char_index_.find(c);
  if (it != char_index_.end()) return it->second;
  const int id = char_count();
  chars_.push_back(c);
  char_index_[c] = id;
  return id;
}

int Vocabularies::add_pos(const std::string& tag) {
  auto it = pos_index_.find(tag);
  if (it != pos_index_.end()) return it->second;
  const int id = pos_count();
  pos_.push_back(tag);
  pos_index_[tag] = id;
  return id;
}

Vocabularies build_vocabs(const Corpus& corpus) {
  if (corpus.empty()) throw Error("cannot build vocabularies from an empty corpus");
  Vocabularies v = Vocabularies::with_reserved();
  for (const AnnotatedQuestion& q : corpus) {
    for (const Token& t : q.tokens) {
      v.add_word(t.form);
      v.add_pos(t.pos);
      for (char32_t c : t.chars) v.add_char(c);
    }
  }
  return v;
}

}  // namespace spanline
