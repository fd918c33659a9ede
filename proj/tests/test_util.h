#ifndef SPANLINE_TESTS_TEST_UTIL_H_
#define SPANLINE_TESTS_TEST_UTIL_H_

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "spanline/ad.h"

namespace spanline::testutil {

inline Mat random_matrix(int rows, int cols, std::mt19937& rng,
                         double scale = 1.0) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = dist(rng);
  return m;
}

// Central finite differences against reverse-mode gradients for every
// element of the named parameters. `build` must construct the scalar loss
// on the given tape from the current parameter values.
inline double grad_check(ad::ParameterStore& ps,
                         const std::vector<std::string>& names,
                         const std::function<ad::Expr(ad::Graph&)>& build,
                         double h = 1e-5) {
  ps.zero_grads();
  {
    ad::Graph g;
    ad::Expr loss = build(g);
    g.backward(loss);
    g.accumulate_param_grads();
  }
  auto eval = [&]() {
    ad::Graph g;
    return g.scalar(build(g));
  };
  double worst = 0.0;
  for (const std::string& name : names) {
    ad::Parameter& p = ps.get(name);
    for (int r = 0; r < p.value.rows(); ++r)
      for (int c = 0; c < p.value.cols(); ++c) {
        const double saved = p.value(r, c);
        p.value(r, c) = saved + h;
        const double up = eval();
        p.value(r, c) = saved - h;
        const double down = eval();
        p.value(r, c) = saved;
        const double fd = (up - down) / (2.0 * h);
        const double an = p.grad(r, c);
        const double rel =
            std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)});
        worst = std::max(worst, rel);
      }
  }
  return worst;
}

}  // namespace spanline::testutil

#endif  // SPANLINE_TESTS_TEST_UTIL_H_
