#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace kgdial::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using Rng = std::mt19937_64;

/// A value in the computation graph. Parameters are long-lived leaves;
/// intermediate nodes live as long as something downstream references them.
struct Node {
  Matrix value;
  Matrix grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  Matrix& grad_buffer() {
    if (grad.size() == 0) grad = Matrix::Zero(value.rows(), value.cols());
    return grad;
  }
  double scalar() const { return value(0, 0); }
};

using Var = std::shared_ptr<Node>;

Var constant(Matrix value);
Var parameter(Matrix value);

/// Disables graph recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Reverse pass from a 1x1 root. Gradients accumulate into leaves.
void backward(const Var& root);

Var matmul(const Var& a, const Var& b);
/// a * b^T
Var matmul_nt(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
/// x + row, broadcasting a 1 x cols row over every row of x.
Var add_row(const Var& x, const Var& row);
/// x + c for a constant c (attention masks).
Var add_constant(const Var& x, const Matrix& c);
Var gelu(const Var& x);
Var sigmoid(const Var& x);
Var abs(const Var& x);
Var softmax_rows(const Var& x);
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
/// Row lookup: out.row(i) = table.row(ids[i]).
Var gather_rows(const Var& table, std::span<const int> ids);
Var slice_rows(const Var& x, Eigen::Index start, Eigen::Index count);
Var slice_cols(const Var& x, Eigen::Index start, Eigen::Index count);
Var concat_cols(std::span<const Var> parts);
Var sum(const Var& x);
/// Inverted dropout; identity when rate == 0.
Var dropout(const Var& x, double rate, Rng& rng);

/// Mean token cross-entropy over rows whose target is >= 0.
Var cross_entropy(const Var& logits, std::span<const int> targets);
/// Sum over elements of binary cross-entropy with logits:
/// -y log sigmoid(z) - (1 - y) log(1 - sigmoid(z)).
Var bce_with_logits(const Var& logits, std::span<const double> labels);

/// Row-wise softmax of a plain matrix.
Matrix softmax(const Matrix& x);
/// Row-wise log-softmax of a plain matrix.
Matrix log_softmax(const Matrix& x);

}  // namespace kgdial::nn
