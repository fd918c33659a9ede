#ifndef SPANLINE_CTXSTORE_H_
#define SPANLINE_CTXSTORE_H_

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "spanline/corpus.h"

namespace spanline {

using MatF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic,
                           Eigen::RowMajor>;

// Precomputed contextual word embeddings keyed by question id. Values are
// float32 on disk (manifest.json + vectors.bin) and in memory; the trainable
// core consumes them read-only in double precision.
class ContextualStore {
 public:
  ContextualStore() = default;
  explicit ContextualStore(int dim) : dim_(dim) {}

  int dim() const { return dim_; }
  bool has(const std::string& id) const { return entries_.count(id) > 0; }
  std::size_t size() const { return entries_.size(); }
  const MatF& get(const std::string& id) const;
  void put(const std::string& id, MatF m);

  void save(const std::string& dir) const;
  static ContextualStore load(const std::string& dir);

 private:
  int dim_ = 0;
  std::map<std::string, MatF> entries_;
};

// Returns the stored [n x d_ctx] matrix for q as doubles. Errors on a
// missing id or a row count that disagrees with the token count.
Mat lookup_contextual(const AnnotatedQuestion& q, const ContextualStore& store);

// Static word vectors in the text format "word v1 ... vD", one per line.
struct StaticVectors {
  int dim = 0;
  std::unordered_map<std::string, std::vector<float>> vectors;
};
StaticVectors load_static_vectors(const std::string& path);

// Deterministic hash-based pseudo-contextual vectors for offline pipelines
// and tests: each word's vector mixes hash streams of itself and its
// immediate neighbors, so values depend on sentence context.
ContextualStore make_hashed_store(const Corpus& corpus, int dim,
                                  std::uint64_t seed);

}  // namespace spanline

#endif  // SPANLINE_CTXSTORE_H_
