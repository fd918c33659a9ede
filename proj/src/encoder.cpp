#include "spanline/encoder.h"

#include <cmath>

namespace spanline {

void EncoderConfig::validate() const {
  if (hidden <= 0) throw Error("encoder hidden size must be positive");
  if (layers < 1) throw Error("encoder needs at least one layer");
  if (dropout < 0.0 || dropout >= 1.0)
    throw Error("dropout must lie in [0, 1)");
}

namespace {
const char* kGates[] = {"i", "f", "o", "c"};
}

LstmCell::LstmCell(ad::ParameterStore& params, const std::string& prefix,
                   int in_dim, int hidden, std::mt19937& rng)
    : params_(&params), prefix_(prefix), in_dim_(in_dim), hidden_(hidden) {
  const double r = std::sqrt(1.0 / static_cast<double>(hidden));
  for (const char* gate : kGates) {
    params.add(prefix_ + ".W_" + gate, hidden, in_dim, -r, r, rng);
    params.add(prefix_ + ".V_" + gate, hidden, hidden, -r, r, rng);
    params.add(prefix_ + ".b_" + gate, 1, hidden, -r, r, rng);
  }
}

LstmCell::LstmCell(ad::ParameterStore& params, const std::string& prefix,
                   int in_dim, int hidden)
    : params_(&params), prefix_(prefix), in_dim_(in_dim), hidden_(hidden) {
  for (const char* gate : kGates) {
    params.get(prefix_ + ".W_" + gate);
    params.get(prefix_ + ".V_" + gate);
    params.get(prefix_ + ".b_" + gate);
  }
}

std::pair<ad::Expr, ad::Expr> LstmCell::step(ad::Graph& g, ad::Expr x_t,
                                             ad::Expr h_prev,
                                             ad::Expr c_prev) const {
  auto gate_input = [&](const char* gate) {
    // x_t [1 x d] * W^T [d x h] + h_prev [1 x h] * V^T [h x h] + b [1 x h]
    return g.add(
        g.matmul_nt(x_t, g.param(params_->get(prefix_ + ".W_" + gate))),
        g.matmul_nt(h_prev, g.param(params_->get(prefix_ + ".V_" + gate))),
        g.param(params_->get(prefix_ + ".b_" + gate)));
  };
  ad::Expr i = g.sigmoid(gate_input("i"));
  ad::Expr f = g.sigmoid(gate_input("f"));
  ad::Expr o = g.sigmoid(gate_input("o"));
  ad::Expr c_tilde = g.tanh(gate_input("c"));
  ad::Expr c_t = g.add(g.cmult(f, c_prev), g.cmult(i, c_tilde));
  ad::Expr h_t = g.cmult(o, g.tanh(c_t));
  return {h_t, c_t};
}

Mat dropout_mask(int rows, int cols, double rate, std::mt19937& rng) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  const double keep = 1.0 - rate;
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      m(r, c) = dist(rng) < rate ? 0.0 : 1.0 / keep;
  return m;
}

Encoder::Encoder(ad::ParameterStore& params, EncoderConfig cfg, int in_dim,
                 std::mt19937& rng)
    : params_(&params), cfg_(cfg), in_dim_(in_dim) {
  cfg_.validate();
  bind(params, &rng);
}

Encoder::Encoder(ad::ParameterStore& params, EncoderConfig cfg, int in_dim)
    : params_(&params), cfg_(cfg), in_dim_(in_dim) {
  cfg_.validate();
  bind(params, nullptr);
}

void Encoder::bind(ad::ParameterStore& params, std::mt19937* rng) {
  for (int l = 0; l < cfg_.layers; ++l) {
    const int d_in = l == 0 ? in_dim_ : 2 * cfg_.hidden;
    for (const char* dir : {"fwd", "bwd"}) {
      const std::string prefix =
          "encoder.l" + std::to_string(l) + "." + dir;
      if (rng != nullptr)
        cells_.emplace_back(params, prefix, d_in, cfg_.hidden, *rng);
      else
        cells_.emplace_back(params, prefix, d_in, cfg_.hidden);
    }
  }
  if (cfg_.output_projection) {
    const int d = 2 * cfg_.hidden;
    const double r = std::sqrt(1.0 / static_cast<double>(cfg_.hidden));
    if (rng != nullptr) {
      params.add("encoder.W_y", d, d, -r, r, *rng);
      params.add("encoder.b_y", 1, d, -r, r, *rng);
    } else {
      params.get("encoder.W_y");
      params.get("encoder.b_y");
    }
  }
}

ad::Expr Encoder::encode(ad::Graph& g, ad::Expr X, bool train_mode,
                         std::mt19937* dropout_rng) const {
  const int n = static_cast<int>(g.value(X).rows());
  if (n < 1) throw Error("cannot encode an empty sequence");
  ad::Expr layer_in = X;
  for (int l = 0; l < cfg_.layers; ++l) {
    const LstmCell& fwd = cells_[static_cast<std::size_t>(2 * l)];
    const LstmCell& bwd = cells_[static_cast<std::size_t>(2 * l + 1)];
    ad::Expr h0 = g.input(Mat::Zero(1, cfg_.hidden));
    ad::Expr c0 = g.input(Mat::Zero(1, cfg_.hidden));

    std::vector<ad::Expr> h_fwd(static_cast<std::size_t>(n));
    ad::Expr h = h0, c = c0;
    for (int t = 0; t < n; ++t) {
      auto [h_t, c_t] = fwd.step(g, g.slice_rows(layer_in, t, 1), h, c);
      h = h_t;
      c = c_t;
      h_fwd[static_cast<std::size_t>(t)] = h_t;
    }
    std::vector<ad::Expr> h_bwd(static_cast<std::size_t>(n));
    h = h0;
    c = c0;
    for (int t = n - 1; t >= 0; --t) {
      auto [h_t, c_t] = bwd.step(g, g.slice_rows(layer_in, t, 1), h, c);
      h = h_t;
      c = c_t;
      h_bwd[static_cast<std::size_t>(t)] = h_t;
    }
    std::vector<ad::Expr> rows(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t)
      rows[static_cast<std::size_t>(t)] =
          g.concat_cols({h_fwd[static_cast<std::size_t>(t)],
                         h_bwd[static_cast<std::size_t>(t)]});
    ad::Expr out = n == 1 ? rows[0] : g.concat_rows(rows);
    if (train_mode && cfg_.dropout > 0.0 && l + 1 < cfg_.layers) {
      if (dropout_rng == nullptr)
        throw Error("train mode dropout requires an RNG");
      out = g.cmult(out, g.input(dropout_mask(n, 2 * cfg_.hidden,
                                              cfg_.dropout, *dropout_rng)));
    }
    layer_in = out;
  }
  if (cfg_.output_projection) {
    layer_in = g.sigmoid(
        g.add_row(g.matmul_nt(layer_in, g.param(params_->get("encoder.W_y"))),
                  g.param(params_->get("encoder.b_y"))));
  }
  return layer_in;
}

}  // namespace spanline
