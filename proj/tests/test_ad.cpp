#include <doctest.h>

#include <random>

#include "spanline/ad.h"
#include "test_util.h"

using namespace spanline;
using testutil::grad_check;
using testutil::random_matrix;

TEST_CASE("parameter store rejects duplicates and unknown names") {
  ad::ParameterStore ps;
  ps.add_zeros("a", 2, 3);
  CHECK_THROWS_AS(ps.add_zeros("a", 1, 1), Error);
  CHECK_THROWS_AS(ps.get("missing"), Error);
  CHECK(ps.get("a").value.rows() == 2);
  CHECK(ps.size() == 1);
}

TEST_CASE("forward values match Eigen") {
  std::mt19937 rng(7);
  ad::Graph g;
  Mat a = random_matrix(3, 4, rng);
  Mat b = random_matrix(4, 2, rng);
  ad::Expr ea = g.input(a);
  ad::Expr eb = g.input(b);
  CHECK((g.value(g.matmul(ea, eb)) - a * b).norm() == doctest::Approx(0.0));
  Mat c = random_matrix(5, 4, rng);
  CHECK((g.value(g.matmul_nt(ea, g.input(c))) - a * c.transpose()).norm() ==
        doctest::Approx(0.0));
  CHECK((g.value(g.transpose(ea)) - a.transpose()).norm() ==
        doctest::Approx(0.0));
  CHECK(g.value(g.sum_all(ea))(0, 0) == doctest::Approx(a.sum()));
  CHECK(g.value(g.mean_all(ea))(0, 0) == doctest::Approx(a.mean()));
}

TEST_CASE("shape mismatches throw") {
  ad::Graph g;
  ad::Expr a = g.input(Mat::Zero(2, 3));
  ad::Expr b = g.input(Mat::Zero(2, 3));
  CHECK_THROWS_AS(g.matmul(a, b), Error);
  CHECK_THROWS_AS(g.add(a, g.input(Mat::Zero(3, 2))), Error);
  CHECK_THROWS_AS(g.cmult(a, g.input(Mat::Zero(2, 2))), Error);
  CHECK_THROWS_AS(g.add_row(a, g.input(Mat::Zero(1, 2))), Error);
  CHECK_THROWS_AS(g.slice_cols(a, 2, 2), Error);
  CHECK_THROWS_AS(g.backward(a), Error);  // non-scalar root
}

TEST_CASE("col_max picks the first maximal row") {
  ad::Graph g;
  Mat m(3, 2);
  m << 1.0, 5.0, 3.0, 5.0, 3.0, 2.0;
  ad::Expr e = g.col_max(g.input(m));
  CHECK(g.value(e)(0, 0) == 3.0);
  CHECK(g.value(e)(0, 1) == 5.0);
  // gradient flows to row 1 (first max of column 0) and row 0 (column 1)
  ad::Expr loss = g.sum_all(e);
  g.backward(loss);
}

TEST_CASE("softmax cross-entropy matches manual computation") {
  ad::Graph g;
  Mat logits(2, 3);
  logits << 1.0, 2.0, 3.0, 0.0, 0.0, 0.0;
  ad::Expr ce = g.softmax_ce(g.input(logits), {2, 1});
  const double lse0 = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0));
  CHECK(g.value(ce)(0, 0) == doctest::Approx(lse0 - 3.0));
  CHECK(g.value(ce)(1, 0) == doctest::Approx(std::log(3.0)));
  CHECK_THROWS_AS(g.softmax_ce(g.input(logits), {0}), Error);
  CHECK_THROWS_AS(g.softmax_ce(g.input(logits), {0, 9}), Error);
}

TEST_CASE("logsumexp is stable for large magnitudes") {
  ad::Graph g;
  Mat big(1, 2);
  big << 1000.0, 1000.0;
  CHECK(g.value(g.logsumexp_row(g.input(big)))(0, 0) ==
        doctest::Approx(1000.0 + std::log(2.0)));
}

TEST_CASE("gradients of every op match finite differences") {
  std::mt19937 rng(11);
  ad::ParameterStore ps;
  ps.add("a", 3, 4, -1.0, 1.0, rng);
  ps.add("b", 4, 3, -1.0, 1.0, rng);
  ps.add("c", 3, 4, -1.0, 1.0, rng);
  ps.add("row", 1, 4, -1.0, 1.0, rng);
  ps.add("col", 3, 1, -1.0, 1.0, rng);
  const Mat mix = random_matrix(3, 3, rng);
  const std::vector<std::string> names = {"a", "b", "c", "row", "col"};

  auto check = [&](const std::function<ad::Expr(ad::Graph&)>& build) {
    CHECK(grad_check(ps, names, build) < 1e-7);
  };

  check([&](ad::Graph& g) {
    return g.sum_all(
        g.cmult(g.matmul(g.param(ps.get("a")), g.param(ps.get("b"))),
                g.input(mix)));
  });
  check([&](ad::Graph& g) {
    return g.sum_all(g.matmul_nt(g.param(ps.get("a")), g.param(ps.get("c"))));
  });
  check([&](ad::Graph& g) {
    return g.sum_all(g.sigmoid(
        g.add(g.param(ps.get("a")), g.scalar_mul(g.param(ps.get("c")), 2.0))));
  });
  check([&](ad::Graph& g) {
    return g.sum_all(
        g.tanh(g.cmult(g.param(ps.get("a")), g.param(ps.get("c")))));
  });
  check([&](ad::Graph& g) {
    return g.sum_all(g.add_row(g.param(ps.get("a")), g.param(ps.get("row"))));
  });
  check([&](ad::Graph& g) {
    return g.sum_all(g.add_col(g.param(ps.get("a")), g.param(ps.get("col"))));
  });
  check([&](ad::Graph& g) {
    return g.sum_all(g.concat_cols(
        {g.param(ps.get("a")), g.transpose(g.param(ps.get("b")))}));
  });
  check([&](ad::Graph& g) {
    return g.sum_all(g.concat_rows(
        {g.slice_rows(g.param(ps.get("a")), 0, 2),
         g.slice_rows(g.param(ps.get("c")), 1, 2)}));
  });
  check([&](ad::Graph& g) {
    return g.sum_all(g.slice_cols(g.param(ps.get("a")), 1, 2));
  });
  check([&](ad::Graph& g) {
    return g.sum_all(g.col_logsumexp(g.param(ps.get("a"))));
  });
  check([&](ad::Graph& g) {
    return g.mean_all(
        g.softmax_ce(g.param(ps.get("a")), std::vector<int>{0, 3, 1}));
  });
  check([&](ad::Graph& g) {
    return g.sum_all(g.gather(g.param(ps.get("a")), {2, 0, 2}));
  });
  check([&](ad::Graph& g) {
    return g.sum_all(g.pick_many(g.param(ps.get("a")), {0, 2, 2}, {3, 1, 1}));
  });
  // col_max: nudge away from ties so the subgradient is unique
  check([&](ad::Graph& g) {
    return g.sum_all(g.col_max(g.param(ps.get("a"))));
  });
}

TEST_CASE("gradient accumulates across reuse of one node") {
  std::mt19937 rng(3);
  ad::ParameterStore ps;
  ps.add("w", 2, 2, -1.0, 1.0, rng);
  auto build = [&](ad::Graph& g) {
    ad::Expr w = g.param(ps.get("w"));
    return g.sum_all(g.cmult(w, w));  // d/dw = 2w
  };
  CHECK(grad_check(ps, {"w"}, build) < 1e-8);
  ps.zero_grads();
  ad::Graph g;
  ad::Expr loss = build(g);
  g.backward(loss);
  g.accumulate_param_grads();
  CHECK((ps.get("w").grad - 2.0 * ps.get("w").value).norm() ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("collect_param_grads fills slot-aligned buffers") {
  std::mt19937 rng(5);
  ad::ParameterStore ps;
  ps.add("x", 2, 2, -1.0, 1.0, rng);
  ps.add("y", 1, 2, -1.0, 1.0, rng);
  ad::Graph g;
  ad::Expr loss =
      g.sum_all(g.add_row(g.param(ps.get("x")), g.param(ps.get("y"))));
  g.backward(loss);
  std::vector<Mat> sink;
  sink.push_back(Mat::Zero(2, 2));
  sink.push_back(Mat::Zero(1, 2));
  g.collect_param_grads(sink);
  CHECK(sink[0].sum() == doctest::Approx(4.0));
  CHECK(sink[1].sum() == doctest::Approx(4.0));
  CHECK(ps.get("x").grad.norm() == 0.0);  // store untouched
}
