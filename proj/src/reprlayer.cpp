#include "spanline/reprlayer.h"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace spanline {

int RepresentationConfig::d_char_out() const {
  return std::accumulate(filters_per_kernel.begin(), filters_per_kernel.end(),
                         0);
}

int RepresentationConfig::word_dim() const {
  int d = context_dim();
  if (use_char) d += d_char_out();
  if (use_pos) d += d_pos;
  return d;
}

void RepresentationConfig::validate() const {
  if (kernel_sizes.size() != filters_per_kernel.size())
    throw Error("kernel_sizes and filters_per_kernel must align");
  if (kernel_sizes.empty() && use_char)
    throw Error("charCNN enabled with no kernels");
  if (d_ctx <= 0 || d_char_in <= 0 || d_pos <= 0 || static_dim <= 0 ||
      max_char_len <= 0)
    throw Error("representation dimensions must be positive");
  for (std::size_t i = 0; i < kernel_sizes.size(); ++i) {
    if (kernel_sizes[i] <= 0 || filters_per_kernel[i] <= 0)
      throw Error("kernel sizes and filter counts must be positive");
    if (kernel_sizes[i] > max_char_len)
      throw Error("kernel size " + std::to_string(kernel_sizes[i]) +
                  " exceeds max_char_len " + std::to_string(max_char_len));
  }
}

std::vector<int> encode_chars(const Token& t, const Vocabularies& vocabs,
                              int max_char_len) {
  std::vector<int> ids(static_cast<std::size_t>(max_char_len),
                       Vocabularies::kPad);
  const int n = std::min<int>(max_char_len, static_cast<int>(t.chars.size()));
  for (int i = 0; i < n; ++i)
    ids[static_cast<std::size_t>(i)] =
        vocabs.char_id(t.chars[static_cast<std::size_t>(i)]);
  return ids;
}

EncodedQuestion encode_question(const AnnotatedQuestion& q,
                                const Vocabularies& vocabs,
                                const RepresentationConfig& cfg,
                                const ContextualStore* store, int max_seq_len,
                                std::vector<std::string>* warnings) {
  EncodedQuestion e;
  e.id = q.id;
  e.n = std::min<int>(q.size(), max_seq_len);
  e.full_gold = q.spans;
  for (int i = 0; i < e.n; ++i) {
    const Token& t = q.tokens[static_cast<std::size_t>(i)];
    e.word_ids.push_back(vocabs.word_id(t.form));
    e.pos_ids.push_back(vocabs.pos_id(t.pos));
    e.char_ids.push_back(encode_chars(t, vocabs, cfg.max_char_len));
  }
  for (const SpanAnnotation& s : q.spans) {
    if (s.end < e.n) {
      e.gold.push_back(s);
    } else if (warnings != nullptr) {
      warnings->push_back("question " + q.id + ": span (" +
                          std::to_string(s.start) + ", " +
                          std::to_string(s.end) +
                          ") dropped by truncation to " +
                          std::to_string(e.n) + " words");
    }
  }
  if (cfg.use_contextual) {
    if (store == nullptr)
      throw Error("contextual embeddings enabled but no store provided");
    e.ctx = lookup_contextual(q, *store).topRows(e.n);
  }
  return e;
}

void pad_batch(const std::vector<EncodedQuestion*>& batch, int max_char_len) {
  int longest = 0;
  for (const EncodedQuestion* q : batch)
    longest = std::max(longest, q->padded_len());
  const std::vector<int> pad_chars(static_cast<std::size_t>(max_char_len),
                                   Vocabularies::kPad);
  for (EncodedQuestion* q : batch) {
    while (q->padded_len() < longest) {
      q->word_ids.push_back(Vocabularies::kPad);
      q->pos_ids.push_back(Vocabularies::kPad);
      q->char_ids.push_back(pad_chars);
    }
  }
}

namespace {

double emb_range(int dim) { return std::sqrt(3.0 / static_cast<double>(dim)); }

}  // namespace

ReprLayer::ReprLayer(ad::ParameterStore& params, RepresentationConfig cfg,
                     const Vocabularies& vocabs, std::mt19937& rng)
    : cfg_(std::move(cfg)), params_(&params) {
  cfg_.validate();
  if (cfg_.use_char) {
    const double cr = emb_range(cfg_.d_char_in);
    params.add("repr.char_table", vocabs.char_count(), cfg_.d_char_in, -cr, cr,
               rng);
    for (std::size_t k = 0; k < cfg_.kernel_sizes.size(); ++k) {
      const int ks = cfg_.kernel_sizes[k];
      const int nf = cfg_.filters_per_kernel[k];
      const int fan_in = ks * cfg_.d_char_in;
      const double fr = std::sqrt(1.0 / static_cast<double>(fan_in));
      params.add("repr.char_conv" + std::to_string(ks) + ".W", fan_in, nf, -fr,
                 fr, rng);
      params.add_zeros("repr.char_conv" + std::to_string(ks) + ".b", 1, nf);
    }
  }
  if (cfg_.use_pos) {
    const double pr = emb_range(cfg_.d_pos);
    params.add("repr.pos_table", vocabs.pos_count(), cfg_.d_pos, -pr, pr, rng);
  }
  if (!cfg_.use_contextual) {
    const double wr = emb_range(cfg_.static_dim);
    params.add("repr.word_table", vocabs.word_count(), cfg_.static_dim, -wr,
               wr, rng);
  }
}

ReprLayer::ReprLayer(ad::ParameterStore& params, RepresentationConfig cfg,
                     const Vocabularies& vocabs)
    : cfg_(std::move(cfg)), params_(&params) {
  cfg_.validate();
  (void)vocabs;
  if (cfg_.use_char) {
    params.get("repr.char_table");
    for (int ks : cfg_.kernel_sizes) {
      params.get("repr.char_conv" + std::to_string(ks) + ".W");
      params.get("repr.char_conv" + std::to_string(ks) + ".b");
    }
  }
  if (cfg_.use_pos) params.get("repr.pos_table");
  if (!cfg_.use_contextual) params.get("repr.word_table");
}

ad::Expr ReprLayer::embed_chars(ad::Graph& g,
                                const std::vector<int>& char_ids) const {
  if (!cfg_.use_char) throw Error("char features are disabled");
  if (static_cast<int>(char_ids.size()) != cfg_.max_char_len)
    throw Error("expected " + std::to_string(cfg_.max_char_len) +
                " char ids, got " + std::to_string(char_ids.size()));
  ad::Expr table = g.param(params_->get("repr.char_table"));
  ad::Expr emb = g.gather(table, char_ids);  // [max_char_len x d_char_in]
  std::vector<ad::Expr> pooled;
  for (std::size_t k = 0; k < cfg_.kernel_sizes.size(); ++k) {
    const int ks = cfg_.kernel_sizes[k];
    const int windows = cfg_.max_char_len - ks + 1;
    std::vector<ad::Expr> offsets;
    for (int o = 0; o < ks; ++o)
      offsets.push_back(g.slice_rows(emb, o, windows));
    ad::Expr win = g.concat_cols(offsets);  // [windows x ks*d_char_in]
    ad::Expr conv = g.add_row(
        g.matmul(win,
                 g.param(params_->get("repr.char_conv" + std::to_string(ks) +
                                      ".W"))),
        g.param(params_->get("repr.char_conv" + std::to_string(ks) + ".b")));
    pooled.push_back(g.col_max(conv));  // [1 x n_filters]
  }
  return pooled.size() == 1 ? pooled[0] : g.concat_cols(pooled);
}

ad::Expr ReprLayer::embed_chars(ad::Graph& g, const Token& t,
                                const Vocabularies& vocabs) const {
  return embed_chars(g, encode_chars(t, vocabs, cfg_.max_char_len));
}

ad::Expr ReprLayer::embed_pos(ad::Graph& g, int pos_id) const {
  if (!cfg_.use_pos) throw Error("POS features are disabled");
  return g.gather(g.param(params_->get("repr.pos_table")), {pos_id});
}

ad::Expr ReprLayer::represent(ad::Graph& g, const EncodedQuestion& q) const {
  if (q.n < 1) throw Error("cannot represent an empty question");
  std::vector<ad::Expr> parts;
  if (cfg_.use_contextual) {
    if (q.ctx.rows() != q.n || q.ctx.cols() != cfg_.d_ctx)
      throw Error("question " + q.id + ": contextual matrix is [" +
                  std::to_string(q.ctx.rows()) + " x " +
                  std::to_string(q.ctx.cols()) + "], expected [" +
                  std::to_string(q.n) + " x " + std::to_string(cfg_.d_ctx) +
                  "]");
    parts.push_back(g.input(q.ctx));
  } else {
    parts.push_back(
        g.gather(g.param(params_->get("repr.word_table")),
                 std::vector<int>(q.word_ids.begin(), q.word_ids.begin() + q.n)));
  }
  if (cfg_.use_char) {
    std::vector<ad::Expr> rows;
    for (int i = 0; i < q.n; ++i)
      rows.push_back(embed_chars(g, q.char_ids[static_cast<std::size_t>(i)]));
    parts.push_back(q.n == 1 ? rows[0] : g.concat_rows(rows));
  }
  if (cfg_.use_pos) {
    parts.push_back(
        g.gather(g.param(params_->get("repr.pos_table")),
                 std::vector<int>(q.pos_ids.begin(), q.pos_ids.begin() + q.n)));
  }
  return parts.size() == 1 ? parts[0] : g.concat_cols(parts);
}

int ReprLayer::init_static_table(const StaticVectors& sv,
                                 const Vocabularies& vocabs) {
  if (cfg_.use_contextual)
    throw Error("static table is only present when contextual is off");
  if (sv.dim != cfg_.static_dim)
    throw Error("static vector file has dimension " + std::to_string(sv.dim) +
                ", config expects " + std::to_string(cfg_.static_dim));
  ad::Parameter& table = params_->get("repr.word_table");
  int hit = 0;
  const auto& words = vocabs.words();
  for (std::size_t i = 0; i < words.size(); ++i) {
    auto it = sv.vectors.find(words[i]);
    if (it == sv.vectors.end()) continue;
    for (int c = 0; c < sv.dim; ++c)
      table.value(static_cast<int>(i), c) =
          static_cast<double>(it->second[static_cast<std::size_t>(c)]);
    ++hit;
  }
  return hit;
}

}  // namespace spanline
