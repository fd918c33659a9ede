#include "spanline/ad.h"

#include <cmath>
#include <utility>

namespace spanline::ad {

namespace {

std::string shape_str(const Mat& m) {
  return "[" + std::to_string(m.rows()) + " x " + std::to_string(m.cols()) +
         "]";
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Mat uniform_matrix(int rows, int cols, double lo, double hi,
                   std::mt19937& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = dist(rng);
  return m;
}

Parameter& ParameterStore::add(const std::string& name, int rows, int cols,
                               double lo, double hi, std::mt19937& rng) {
  return add_value(name, uniform_matrix(rows, cols, lo, hi, rng));
}

Parameter& ParameterStore::add_zeros(const std::string& name, int rows,
                                     int cols) {
  return add_value(name, Mat::Zero(rows, cols));
}

Parameter& ParameterStore::add_value(const std::string& name, Mat value) {
  if (index_.count(name) > 0)
    throw Error("duplicate parameter name: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->slot = items_.size();
  p->grad = Mat::Zero(value.rows(), value.cols());
  p->value = std::move(value);
  index_[name] = items_.size();
  items_.push_back(std::move(p));
  return *items_.back();
}

Parameter& ParameterStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("unknown parameter: " + name);
  return *items_[it->second];
}

const Parameter& ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("unknown parameter: " + name);
  return *items_[it->second];
}

void ParameterStore::zero_grads() {
  for (auto& p : items_) p->zero_grad();
}

std::size_t ParameterStore::value_count() const {
  std::size_t n = 0;
  for (const auto& p : items_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

bool ParameterStore::all_finite() const {
  for (const auto& p : items_)
    if (!p->value.allFinite()) return false;
  return true;
}

int Graph::check(Expr e) const {
  if (e.graph != this || e.id < 0 ||
      e.id >= static_cast<int>(nodes_.size()))
    throw Error("expression does not belong to this graph");
  return e.id;
}

int Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Expr Graph::input(Mat v) {
  Node n;
  n.op = Op::kInput;
  n.value = std::move(v);
  return {this, push(std::move(n))};
}

Expr Graph::param(Parameter& p) {
  Node n;
  n.op = Op::kParam;
  n.p = &p;
  return {this, push(std::move(n))};
}

Expr Graph::gather(Expr table, std::vector<int> rows) {
  const int t = check(table);
  const Mat& T = val(t);
  Node n;
  n.op = Op::kGather;
  n.args = {t};
  n.value.resize(static_cast<int>(rows.size()), T.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= T.rows())
      throw Error("gather: row " + std::to_string(rows[i]) +
                  " out of range for table " + shape_str(T));
    n.value.row(static_cast<int>(i)) = T.row(rows[i]);
  }
  n.idx_a = std::move(rows);
  return {this, push(std::move(n))};
}

Expr Graph::pick_many(Expr a, std::vector<int> rows, std::vector<int> cols) {
  const int i = check(a);
  const Mat& A = val(i);
  if (rows.size() != cols.size())
    throw Error("pick_many: row/col index count mismatch");
  Node n;
  n.op = Op::kPickMany;
  n.args = {i};
  n.value.resize(static_cast<int>(rows.size()), 1);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] < 0 || rows[k] >= A.rows() || cols[k] < 0 ||
        cols[k] >= A.cols())
      throw Error("pick_many: index (" + std::to_string(rows[k]) + "," +
                  std::to_string(cols[k]) + ") out of range for " +
                  shape_str(A));
    n.value(static_cast<int>(k), 0) = A(rows[k], cols[k]);
  }
  n.idx_a = std::move(rows);
  n.idx_b = std::move(cols);
  return {this, push(std::move(n))};
}

Expr Graph::pick(Expr a, int r, int c) {
  return pick_many(a, {r}, {c});
}

Expr Graph::matmul(Expr a, Expr b) {
  const int i = check(a), j = check(b);
  const Mat& A = val(i);
  const Mat& B = val(j);
  if (A.cols() != B.rows())
    throw Error("matmul: shape mismatch " + shape_str(A) + " * " +
                shape_str(B));
  Node n;
  n.op = Op::kMatMul;
  n.args = {i, j};
  n.value = A * B;
  return {this, push(std::move(n))};
}

Expr Graph::matmul_nt(Expr a, Expr b) {
  const int i = check(a), j = check(b);
  const Mat& A = val(i);
  const Mat& B = val(j);
  if (A.cols() != B.cols())
    throw Error("matmul_nt: shape mismatch " + shape_str(A) + " * " +
                shape_str(B) + "^T");
  Node n;
  n.op = Op::kMatMulNT;
  n.args = {i, j};
  n.value = A * B.transpose();
  return {this, push(std::move(n))};
}

Expr Graph::transpose(Expr a) {
  const int i = check(a);
  Node n;
  n.op = Op::kTranspose;
  n.args = {i};
  n.value = val(i).transpose();
  return {this, push(std::move(n))};
}

Expr Graph::add(std::vector<Expr> xs) {
  if (xs.empty()) throw Error("add: no operands");
  Node n;
  n.op = Op::kAdd;
  for (Expr& e : xs) n.args.push_back(check(e));
  n.value = val(n.args[0]);
  for (std::size_t k = 1; k < n.args.size(); ++k) {
    const Mat& X = val(n.args[k]);
    if (X.rows() != n.value.rows() || X.cols() != n.value.cols())
      throw Error("add: shape mismatch " + shape_str(n.value) + " + " +
                  shape_str(X));
    n.value += X;
  }
  return {this, push(std::move(n))};
}

Expr Graph::add(Expr a, Expr b) { return add(std::vector<Expr>{a, b}); }
Expr Graph::add(Expr a, Expr b, Expr c) {
  return add(std::vector<Expr>{a, b, c});
}

Expr Graph::add_row(Expr a, Expr row) {
  const int i = check(a), j = check(row);
  const Mat& A = val(i);
  const Mat& R = val(j);
  if (R.rows() != 1 || R.cols() != A.cols())
    throw Error("add_row: expected [1 x " + std::to_string(A.cols()) +
                "], got " + shape_str(R));
  Node n;
  n.op = Op::kAddRow;
  n.args = {i, j};
  n.value = A;
  n.value.rowwise() += R.row(0);
  return {this, push(std::move(n))};
}

Expr Graph::add_col(Expr a, Expr col) {
  const int i = check(a), j = check(col);
  const Mat& A = val(i);
  const Mat& C = val(j);
  if (C.cols() != 1 || C.rows() != A.rows())
    throw Error("add_col: expected [" + std::to_string(A.rows()) +
                " x 1], got " + shape_str(C));
  Node n;
  n.op = Op::kAddCol;
  n.args = {i, j};
  n.value = A;
  n.value.colwise() += C.col(0);
  return {this, push(std::move(n))};
}

Expr Graph::scalar_mul(Expr a, double s) {
  const int i = check(a);
  Node n;
  n.op = Op::kScalarMul;
  n.args = {i};
  n.s = s;
  n.value = val(i) * s;
  return {this, push(std::move(n))};
}

Expr Graph::sub(Expr a, Expr b) { return add(a, scalar_mul(b, -1.0)); }

Expr Graph::sigmoid(Expr a) {
  const int i = check(a);
  Node n;
  n.op = Op::kSigmoid;
  n.args = {i};
  n.value = val(i).unaryExpr([](double x) { return stable_sigmoid(x); });
  return {this, push(std::move(n))};
}

Expr Graph::tanh(Expr a) {
  const int i = check(a);
  Node n;
  n.op = Op::kTanh;
  n.args = {i};
  n.value = val(i).unaryExpr([](double x) { return std::tanh(x); });
  return {this, push(std::move(n))};
}

Expr Graph::cmult(Expr a, Expr b) {
  const int i = check(a), j = check(b);
  const Mat& A = val(i);
  const Mat& B = val(j);
  if (A.rows() != B.rows() || A.cols() != B.cols())
    throw Error("cmult: shape mismatch " + shape_str(A) + " vs " +
                shape_str(B));
  Node n;
  n.op = Op::kCMult;
  n.args = {i, j};
  n.value = A.cwiseProduct(B);
  return {this, push(std::move(n))};
}

Expr Graph::concat_cols(std::vector<Expr> xs) {
  if (xs.empty()) throw Error("concat_cols: no operands");
  Node n;
  n.op = Op::kConcatCols;
  int rows = -1, cols = 0;
  for (Expr& e : xs) {
    const int i = check(e);
    n.args.push_back(i);
    const Mat& X = val(i);
    if (rows < 0) rows = static_cast<int>(X.rows());
    if (X.rows() != rows)
      throw Error("concat_cols: row mismatch " + shape_str(X));
    cols += static_cast<int>(X.cols());
  }
  n.value.resize(rows, cols);
  int off = 0;
  for (int i : n.args) {
    const Mat& X = val(i);
    n.value.middleCols(off, X.cols()) = X;
    off += static_cast<int>(X.cols());
  }
  return {this, push(std::move(n))};
}

Expr Graph::concat_rows(std::vector<Expr> xs) {
  if (xs.empty()) throw Error("concat_rows: no operands");
  Node n;
  n.op = Op::kConcatRows;
  int cols = -1, rows = 0;
  for (Expr& e : xs) {
    const int i = check(e);
    n.args.push_back(i);
    const Mat& X = val(i);
    if (cols < 0) cols = static_cast<int>(X.cols());
    if (X.cols() != cols)
      throw Error("concat_rows: col mismatch " + shape_str(X));
    rows += static_cast<int>(X.rows());
  }
  n.value.resize(rows, cols);
  int off = 0;
  for (int i : n.args) {
    const Mat& X = val(i);
    n.value.middleRows(off, X.rows()) = X;
    off += static_cast<int>(X.rows());
  }
  return {this, push(std::move(n))};
}

Expr Graph::slice_cols(Expr a, int begin, int len) {
  const int i = check(a);
  const Mat& A = val(i);
  if (begin < 0 || len < 0 || begin + len > A.cols())
    throw Error("slice_cols: [" + std::to_string(begin) + ", " +
                std::to_string(begin + len) + ") out of range for " +
                shape_str(A));
  Node n;
  n.op = Op::kSliceCols;
  n.args = {i};
  n.a = begin;
  n.b = len;
  n.value = A.middleCols(begin, len);
  return {this, push(std::move(n))};
}

Expr Graph::slice_rows(Expr a, int begin, int len) {
  const int i = check(a);
  const Mat& A = val(i);
  if (begin < 0 || len < 0 || begin + len > A.rows())
    throw Error("slice_rows: [" + std::to_string(begin) + ", " +
                std::to_string(begin + len) + ") out of range for " +
                shape_str(A));
  Node n;
  n.op = Op::kSliceRows;
  n.args = {i};
  n.a = begin;
  n.b = len;
  n.value = A.middleRows(begin, len);
  return {this, push(std::move(n))};
}

Expr Graph::col_max(Expr a) {
  const int i = check(a);
  const Mat& A = val(i);
  if (A.rows() == 0) throw Error("col_max: empty input");
  Node n;
  n.op = Op::kColMax;
  n.args = {i};
  n.value.resize(1, A.cols());
  n.cache.resize(1, A.cols());
  for (int c = 0; c < A.cols(); ++c) {
    int best = 0;
    for (int r = 1; r < A.rows(); ++r)
      if (A(r, c) > A(best, c)) best = r;
    n.value(0, c) = A(best, c);
    n.cache(0, c) = best;
  }
  return {this, push(std::move(n))};
}

Expr Graph::col_logsumexp(Expr a) {
  const int i = check(a);
  const Mat& A = val(i);
  if (A.rows() == 0) throw Error("col_logsumexp: empty input");
  Node n;
  n.op = Op::kColLogSumExp;
  n.args = {i};
  n.value.resize(1, A.cols());
  for (int c = 0; c < A.cols(); ++c) {
    const double m = A.col(c).maxCoeff();
    double s = 0.0;
    for (int r = 0; r < A.rows(); ++r) s += std::exp(A(r, c) - m);
    n.value(0, c) = m + std::log(s);
  }
  return {this, push(std::move(n))};
}

Expr Graph::logsumexp_row(Expr a) {
  return col_logsumexp(transpose(a));
}

Expr Graph::sum_all(Expr a) {
  const int i = check(a);
  Node n;
  n.op = Op::kSumAll;
  n.args = {i};
  n.value = Mat::Constant(1, 1, val(i).sum());
  return {this, push(std::move(n))};
}

Expr Graph::mean_all(Expr a) {
  const int i = check(a);
  const auto sz = val(i).size();
  if (sz == 0) throw Error("mean_all: empty input");
  return scalar_mul(sum_all(a), 1.0 / static_cast<double>(sz));
}

Expr Graph::softmax_ce(Expr logits, std::vector<int> targets) {
  const int i = check(logits);
  const Mat& L = val(i);
  if (static_cast<int>(targets.size()) != L.rows())
    throw Error("softmax_ce: " + std::to_string(targets.size()) +
                " targets for " + std::to_string(L.rows()) + " rows");
  Node n;
  n.op = Op::kSoftmaxCE;
  n.args = {i};
  n.value.resize(L.rows(), 1);
  n.cache.resize(L.rows(), L.cols());
  for (int r = 0; r < L.rows(); ++r) {
    const int t = targets[static_cast<std::size_t>(r)];
    if (t < 0 || t >= L.cols())
      throw Error("softmax_ce: target " + std::to_string(t) +
                  " out of range for " + std::to_string(L.cols()) +
                  " classes");
    const double m = L.row(r).maxCoeff();
    double s = 0.0;
    for (int c = 0; c < L.cols(); ++c) s += std::exp(L(r, c) - m);
    const double lse = m + std::log(s);
    for (int c = 0; c < L.cols(); ++c)
      n.cache(r, c) = std::exp(L(r, c) - lse);
    n.value(r, 0) = lse - L(r, t);
  }
  n.idx_a = std::move(targets);
  return {this, push(std::move(n))};
}

const Mat& Graph::value(Expr e) const { return val(check(e)); }

const Mat& Graph::grad(Expr e) const {
  const Node& n = nodes_[check(e)];
  if (n.grad.size() == 0)
    throw Error("grad: node received no gradient (run backward first)");
  return n.grad;
}

double Graph::scalar(Expr e) const {
  const Mat& v = val(check(e));
  if (v.rows() != 1 || v.cols() != 1)
    throw Error("scalar: value is " + shape_str(v) + ", expected [1 x 1]");
  return v(0, 0);
}

Mat& Graph::ensure_grad(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) {
    const Mat& v = val(id);
    n.grad = Mat::Zero(v.rows(), v.cols());
  }
  return n.grad;
}

void Graph::backward(Expr root) {
  const int r = check(root);
  {
    const Mat& v = val(r);
    if (v.rows() != 1 || v.cols() != 1)
      throw Error("backward: root is " + shape_str(v) + ", expected [1 x 1]");
  }
  ensure_grad(r)(0, 0) += 1.0;

  for (int id = r; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) continue;  // unreachable from root
    const Mat& G = n.grad;
    switch (n.op) {
      case Op::kInput:
      case Op::kParam:
        break;
      case Op::kGather: {
        Mat& dT = ensure_grad(n.args[0]);
        for (std::size_t k = 0; k < n.idx_a.size(); ++k)
          dT.row(n.idx_a[k]) += G.row(static_cast<int>(k));
        break;
      }
      case Op::kPickMany: {
        Mat& dA = ensure_grad(n.args[0]);
        for (std::size_t k = 0; k < n.idx_a.size(); ++k)
          dA(n.idx_a[k], n.idx_b[k]) += G(static_cast<int>(k), 0);
        break;
      }
      case Op::kMatMul: {
        const Mat& A = val(n.args[0]);
        const Mat& B = val(n.args[1]);
        ensure_grad(n.args[0]).noalias() += G * B.transpose();
        ensure_grad(n.args[1]).noalias() += A.transpose() * G;
        break;
      }
      case Op::kMatMulNT: {
        const Mat& A = val(n.args[0]);
        const Mat& B = val(n.args[1]);
        ensure_grad(n.args[0]).noalias() += G * B;
        ensure_grad(n.args[1]).noalias() += G.transpose() * A;
        break;
      }
      case Op::kAdd:
        for (int a : n.args) ensure_grad(a) += G;
        break;
      case Op::kAddRow:
        ensure_grad(n.args[0]) += G;
        ensure_grad(n.args[1]).row(0) += G.colwise().sum();
        break;
      case Op::kAddCol:
        ensure_grad(n.args[0]) += G;
        ensure_grad(n.args[1]).col(0) += G.rowwise().sum();
        break;
      case Op::kScalarMul:
        ensure_grad(n.args[0]) += n.s * G;
        break;
      case Op::kSigmoid: {
        const Mat& y = n.value;
        ensure_grad(n.args[0]).array() +=
            G.array() * y.array() * (1.0 - y.array());
        break;
      }
      case Op::kTanh: {
        const Mat& y = n.value;
        ensure_grad(n.args[0]).array() +=
            G.array() * (1.0 - y.array().square());
        break;
      }
      case Op::kCMult: {
        const Mat& A = val(n.args[0]);
        const Mat& B = val(n.args[1]);
        ensure_grad(n.args[0]).array() += G.array() * B.array();
        ensure_grad(n.args[1]).array() += G.array() * A.array();
        break;
      }
      case Op::kConcatCols: {
        int off = 0;
        for (int a : n.args) {
          const int w = static_cast<int>(val(a).cols());
          ensure_grad(a) += G.middleCols(off, w);
          off += w;
        }
        break;
      }
      case Op::kConcatRows: {
        int off = 0;
        for (int a : n.args) {
          const int h = static_cast<int>(val(a).rows());
          ensure_grad(a) += G.middleRows(off, h);
          off += h;
        }
        break;
      }
      case Op::kSliceCols:
        ensure_grad(n.args[0]).middleCols(n.a, n.b) += G;
        break;
      case Op::kSliceRows:
        ensure_grad(n.args[0]).middleRows(n.a, n.b) += G;
        break;
      case Op::kTranspose:
        ensure_grad(n.args[0]) += G.transpose();
        break;
      case Op::kColMax: {
        Mat& dA = ensure_grad(n.args[0]);
        for (int c = 0; c < n.value.cols(); ++c)
          dA(static_cast<int>(n.cache(0, c)), c) += G(0, c);
        break;
      }
      case Op::kColLogSumExp: {
        const Mat& A = val(n.args[0]);
        Mat& dA = ensure_grad(n.args[0]);
        for (int c = 0; c < A.cols(); ++c)
          for (int rr = 0; rr < A.rows(); ++rr)
            dA(rr, c) += G(0, c) * std::exp(A(rr, c) - n.value(0, c));
        break;
      }
      case Op::kSumAll:
        ensure_grad(n.args[0]).array() += G(0, 0);
        break;
      case Op::kSoftmaxCE: {
        Mat& dL = ensure_grad(n.args[0]);
        for (int rr = 0; rr < n.cache.rows(); ++rr) {
          dL.row(rr) += G(rr, 0) * n.cache.row(rr);
          dL(rr, n.idx_a[static_cast<std::size_t>(rr)]) -= G(rr, 0);
        }
        break;
      }
    }
  }
}

void Graph::accumulate_param_grads() {
  for (Node& n : nodes_)
    if (n.op == Op::kParam && n.grad.size() != 0) n.p->grad += n.grad;
}

void Graph::collect_param_grads(std::vector<Mat>& sink) const {
  for (const Node& n : nodes_)
    if (n.op == Op::kParam && n.grad.size() != 0) {
      if (n.p->slot >= sink.size())
        throw Error("gradient sink smaller than parameter store");
      sink[n.p->slot] += n.grad;
    }
}

}  // namespace spanline::ad
