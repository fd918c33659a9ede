#ifndef SPANLINE_ENCODER_H_
#define SPANLINE_ENCODER_H_

#include <random>
#include <string>
#include <utility>

#include "spanline/ad.h"

namespace spanline {

struct EncoderConfig {
  int hidden = 256;  // per direction
  int layers = 2;
  double dropout = 0.3;  // between stacked layers, train mode only
  bool output_projection = false;  // literal y_t = sigmoid(W_y h_t + b_y)

  void validate() const;
};

// One LSTM direction: input, forget, and output gates plus the memory cell,
//   i_t = sigmoid(W_i x_t + V_i h_{t-1} + b_i)        (f_t, o_t likewise)
//   c_t = f_t * c_{t-1} + i_t * tanh(W_c x_t + V_c h_{t-1} + b_c)
//   h_t = o_t * tanh(c_t)
class LstmCell {
 public:
  LstmCell(ad::ParameterStore& params, const std::string& prefix, int in_dim,
           int hidden, std::mt19937& rng);
  LstmCell(ad::ParameterStore& params, const std::string& prefix, int in_dim,
           int hidden);  // binds to already-registered parameters

  // x_t [1 x in_dim], h_prev/c_prev [1 x hidden] -> (h_t, c_t).
  std::pair<ad::Expr, ad::Expr> step(ad::Graph& g, ad::Expr x_t,
                                     ad::Expr h_prev, ad::Expr c_prev) const;

  int hidden() const { return hidden_; }
  int in_dim() const { return in_dim_; }

 private:
  ad::ParameterStore* params_;
  std::string prefix_;
  int in_dim_;
  int hidden_;
};

// Stacked bidirectional LSTM. Each layer runs one pass left-to-right and one
// right-to-left from zero initial states and concatenates the per-position
// states; the next layer consumes the previous layer's output.
class Encoder {
 public:
  Encoder(ad::ParameterStore& params, EncoderConfig cfg, int in_dim,
          std::mt19937& rng);
  Encoder(ad::ParameterStore& params, EncoderConfig cfg, int in_dim);

  // X [n x in_dim] -> [n x 2*hidden]. Dropout masks are drawn from
  // dropout_rng between layers only when train_mode is set.
  ad::Expr encode(ad::Graph& g, ad::Expr X, bool train_mode,
                  std::mt19937* dropout_rng) const;

  int out_dim() const { return 2 * cfg_.hidden; }
  const EncoderConfig& config() const { return cfg_; }

 private:
  void bind(ad::ParameterStore& params, std::mt19937* rng);

  ad::ParameterStore* params_ = nullptr;
  EncoderConfig cfg_;
  int in_dim_;
  std::vector<LstmCell> cells_;  // layer-major: l0.fwd, l0.bwd, l1.fwd, ...
};

// Inverted dropout mask: entries are 0 with probability rate, else
// 1/(1 - rate), so expectations match eval mode.
Mat dropout_mask(int rows, int cols, double rate, std::mt19937& rng);

}  // namespace spanline

#endif  // SPANLINE_ENCODER_H_
