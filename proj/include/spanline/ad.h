#ifndef SPANLINE_AD_H_
#define SPANLINE_AD_H_

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace spanline {

using Mat = Eigen::MatrixXd;

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

namespace ad {

// A named trainable tensor. Gradients accumulate into `grad`, which has the
// same shape as `value` and is owned by the ParameterStore.
struct Parameter {
  std::string name;
  std::size_t slot = 0;  // registration index within the owning store
  Mat value;
  Mat grad;

  void zero_grad() { grad.setZero(); }
};

// Registry of all trainable tensors of a model. Registration order is stable
// and defines the checkpoint layout and the optimizer slot order.
class ParameterStore {
 public:
  Parameter& add(const std::string& name, int rows, int cols, double lo,
                 double hi, std::mt19937& rng);
  Parameter& add_zeros(const std::string& name, int rows, int cols);
  Parameter& add_value(const std::string& name, Mat value);

  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) > 0; }

  std::size_t size() const { return items_.size(); }
  Parameter& at(std::size_t i) { return *items_[i]; }
  const Parameter& at(std::size_t i) const { return *items_[i]; }

  void zero_grads();
  std::size_t value_count() const;
  bool all_finite() const;

 private:
  std::vector<std::unique_ptr<Parameter>> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class Op : std::uint8_t {
  kInput,
  kParam,
  kGather,
  kPickMany,
  kMatMul,
  kMatMulNT,
  kAdd,
  kAddRow,
  kAddCol,
  kScalarMul,
  kSigmoid,
  kTanh,
  kCMult,
  kConcatCols,
  kConcatRows,
  kSliceCols,
  kSliceRows,
  kTranspose,
  kColMax,
  kColLogSumExp,
  kSumAll,
  kSoftmaxCE,
};

class Graph;

struct Expr {
  Graph* graph = nullptr;
  int id = -1;
  bool valid() const { return graph != nullptr && id >= 0; }
};

// Reverse-mode tape over dense double matrices. Nodes are appended in
// topological order; backward() walks the tape from the root down.
// A Graph is single-use per forward/backward pass and not thread-safe;
// concurrent passes must each own their Graph.
class Graph {
 public:
  Expr input(Mat v);
  Expr param(Parameter& p);

  // Row gather: out.row(i) = table.row(rows[i]). Used for embedding lookups.
  Expr gather(Expr table, std::vector<int> rows);
  // Element gather: out(i, 0) = a(rows[i], cols[i]).
  Expr pick_many(Expr a, std::vector<int> rows, std::vector<int> cols);
  Expr pick(Expr a, int r, int c);

  Expr matmul(Expr a, Expr b);
  // a * b^T without materializing the transpose.
  Expr matmul_nt(Expr a, Expr b);
  Expr transpose(Expr a);

  Expr add(std::vector<Expr> xs);
  Expr add(Expr a, Expr b);
  Expr add(Expr a, Expr b, Expr c);
  // Broadcast a [1 x c] row over every row of a.
  Expr add_row(Expr a, Expr row);
  // Broadcast a [r x 1] column over every column of a.
  Expr add_col(Expr a, Expr col);
  Expr scalar_mul(Expr a, double s);
  Expr sub(Expr a, Expr b);

  Expr sigmoid(Expr a);
  Expr tanh(Expr a);
  Expr cmult(Expr a, Expr b);

  Expr concat_cols(std::vector<Expr> xs);
  Expr concat_rows(std::vector<Expr> xs);
  Expr slice_cols(Expr a, int begin, int len);
  Expr slice_rows(Expr a, int begin, int len);

  // Column-wise max over rows -> [1 x c]. Ties resolve to the lowest row.
  Expr col_max(Expr a);
  // Column-wise log(sum(exp(.))) over rows -> [1 x c], max-subtracted.
  Expr col_logsumexp(Expr a);
  // logsumexp of a [1 x c] row vector -> [1 x 1].
  Expr logsumexp_row(Expr a);

  Expr sum_all(Expr a);
  Expr mean_all(Expr a);

  // Per-row stable softmax cross-entropy against integer targets -> [m x 1].
  Expr softmax_ce(Expr logits, std::vector<int> targets);

  const Mat& value(Expr e) const;
  const Mat& grad(Expr e) const;
  double scalar(Expr e) const;

  // Seeds d(root)/d(root) = 1 (root must be 1x1) and propagates down the
  // tape. Gradients stay node-local until accumulate_param_grads().
  void backward(Expr root);
  // Adds every parameter leaf's gradient into Parameter::grad.
  void accumulate_param_grads();
  // Adds parameter gradients into a slot-aligned buffer instead; lets
  // worker threads keep private accumulators.
  void collect_param_grads(std::vector<Mat>& sink) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Op op;
    Mat value;
    Mat grad;
    Mat cache;  // softmax probabilities / pooling argmax rows
    std::vector<int> args;
    std::vector<int> idx_a;
    std::vector<int> idx_b;
    int a = 0;
    int b = 0;
    double s = 0.0;
    Parameter* p = nullptr;
  };

  const Mat& val(int id) const {
    const Node& n = nodes_[id];
    return n.op == Op::kParam ? n.p->value : n.value;
  }
  Mat& ensure_grad(int id);
  int push(Node n);
  int check(Expr e) const;

  std::vector<Node> nodes_;
};

// Uniform(lo, hi) matrix initializer shared by all modules.
Mat uniform_matrix(int rows, int cols, double lo, double hi, std::mt19937& rng);

}  // namespace ad
}  // namespace spanline

#endif  // SPANLINE_AD_H_
