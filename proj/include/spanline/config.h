#ifndef SPANLINE_CONFIG_H_
#define SPANLINE_CONFIG_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "spanline/encoder.h"
#include "spanline/reprlayer.h"
#include "spanline/spanhead.h"

namespace spanline {

enum class HeadKind { kBiaffine, kSeqSoftmax, kSeqCrf };
std::string to_string(HeadKind head);
HeadKind head_from_string(const std::string& name);

enum class EmbeddingSource { kContextual, kStatic };
std::string to_string(EmbeddingSource source);
EmbeddingSource embedding_from_string(const std::string& name);

// Every knob of a run: architecture, feature switches, and training
// hyperparameters. Defaults follow the reference setup.
struct RunConfig {
  std::uint64_t seed = 42;
  int batch_size = 64;
  int epochs = 30;
  double lr = 5e-5;
  double weight_decay = 1e-8;
  double adam_eps = 1e-8;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double grad_clip = 0.0;  // 0 disables
  int max_seq_len = 60;
  int max_char_len = 15;
  double dropout = 0.3;
  double val_fraction = 0.1;
  int threads = 1;
  HeadKind head = HeadKind::kBiaffine;
  EmbeddingSource embedding = EmbeddingSource::kContextual;
  bool use_pos = true;
  bool use_char = true;
  bool use_bilstm = true;
  double null_weight = 1.0;

  int repr_d_ctx = 3072;
  int repr_d_char_in = 50;
  std::vector<int> repr_kernels = {3, 4};
  std::vector<int> repr_filters = {128, 128};
  int repr_d_pos = 100;
  int repr_static_dim = 300;

  int encoder_hidden = 256;
  int encoder_layers = 2;
  bool encoder_output_projection = false;

  int ffn_dim = 300;
  int cv_k = 5;

  RepresentationConfig repr() const;
  EncoderConfig enc() const;
  SpanHeadConfig span_head() const;
  void validate() const;

  std::map<std::string, std::string> to_map() const;
  static RunConfig from_map(const std::map<std::string, std::string>& kv);
  void apply(const std::map<std::string, std::string>& kv);
};

// Flat "key = value" file; '#' starts a comment. A run manifest JSON (with a
// top-level "config" object) is accepted as well, so any emitted manifest
// can reproduce its run.
std::map<std::string, std::string> read_config_file(const std::string& path);
std::map<std::string, std::string> parse_config_text(const std::string& text);

}  // namespace spanline

#endif  // SPANLINE_CONFIG_H_
