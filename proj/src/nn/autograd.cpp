#include "kgdial/nn/autograd.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace kgdial::nn {

namespace {

thread_local bool g_grad_enabled = true;

Var make_node(Matrix value, std::vector<Var> parents, std::function<void(Node&)> fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (!g_grad_enabled) return node;
  bool any = false;
  for (const auto& p : parents) any = any || p->requires_grad;
  if (!any) return node;
  node->requires_grad = true;
  node->parents = std::move(parents);
  node->backward_fn = std::move(fn);
  return node;
}

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

}  // namespace

Var constant(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return node;
}

Var parameter(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return node;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

void backward(const Var& root) {
  if (root->value.rows() != 1 || root->value.cols() != 1)
    throw std::invalid_argument("backward: root must be a scalar");
  if (!root->requires_grad) return;
  // Iterative post-order DFS for a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root->grad_buffer()(0, 0) += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->grad.size() != 0) n->backward_fn(*n);
  }
}

Var matmul(const Var& a, const Var& b) {
  if (a->value.cols() != b->value.rows()) throw std::invalid_argument("matmul: shape mismatch");
  return make_node(a->value * b->value, {a, b}, [](Node& self) {
    auto& A = *self.parents[0];
    auto& B = *self.parents[1];
    if (A.requires_grad) A.grad_buffer().noalias() += self.grad * B.value.transpose();
    if (B.requires_grad) B.grad_buffer().noalias() += A.value.transpose() * self.grad;
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  if (a->value.cols() != b->value.cols()) throw std::invalid_argument("matmul_nt: shape mismatch");
  return make_node(a->value * b->value.transpose(), {a, b}, [](Node& self) {
    auto& A = *self.parents[0];
    auto& B = *self.parents[1];
    if (A.requires_grad) A.grad_buffer().noalias() += self.grad * B.value;
    if (B.requires_grad) B.grad_buffer().noalias() += self.grad.transpose() * A.value;
  });
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a->value, b->value, "add");
  return make_node(a->value + b->value, {a, b}, [](Node& self) {
    for (auto& p : self.parents)
      if (p->requires_grad) p->grad_buffer() += self.grad;
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a->value, b->value, "sub");
  return make_node(a->value - b->value, {a, b}, [](Node& self) {
    if (self.parents[0]->requires_grad) self.parents[0]->grad_buffer() += self.grad;
    if (self.parents[1]->requires_grad) self.parents[1]->grad_buffer() -= self.grad;
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a->value, b->value, "mul");
  return make_node(a->value.cwiseProduct(b->value), {a, b}, [](Node& self) {
    auto& A = *self.parents[0];
    auto& B = *self.parents[1];
    if (A.requires_grad) A.grad_buffer() += self.grad.cwiseProduct(B.value);
    if (B.requires_grad) B.grad_buffer() += self.grad.cwiseProduct(A.value);
  });
}

Var scale(const Var& a, double s) {
  return make_node(a->value * s, {a}, [s](Node& self) {
    self.parents[0]->grad_buffer() += self.grad * s;
  });
}

Var add_row(const Var& x, const Var& row) {
  if (row->value.rows() != 1 || row->value.cols() != x->value.cols())
    throw std::invalid_argument("add_row: shape mismatch");
  Matrix out = x->value.rowwise() + row->value.row(0);
  return make_node(std::move(out), {x, row}, [](Node& self) {
    if (self.parents[0]->requires_grad) self.parents[0]->grad_buffer() += self.grad;
    if (self.parents[1]->requires_grad)
      self.parents[1]->grad_buffer() += self.grad.colwise().sum();
  });
}

Var add_constant(const Var& x, const Matrix& c) {
  check_same_shape(x->value, c, "add_constant");
  return make_node(x->value + c, {x}, [](Node& self) {
    self.parents[0]->grad_buffer() += self.grad;
  });
}

Var gelu(const Var& x) {
  const Matrix& v = x->value;
  Matrix out(v.rows(), v.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double z = v.data()[i];
    out.data()[i] = 0.5 * z * (1.0 + std::tanh(kGeluC * (z + kGeluA * z * z * z)));
  }
  return make_node(std::move(out), {x}, [](Node& self) {
    auto& X = *self.parents[0];
    auto& g = X.grad_buffer();
    for (Eigen::Index i = 0; i < X.value.size(); ++i) {
      const double z = X.value.data()[i];
      const double t = std::tanh(kGeluC * (z + kGeluA * z * z * z));
      const double d = 0.5 * (1.0 + t) +
                       0.5 * z * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * z * z);
      g.data()[i] += self.grad.data()[i] * d;
    }
  });
}

Var sigmoid(const Var& x) {
  Matrix out = x->value.unaryExpr([](double z) {
    return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  });
  return make_node(std::move(out), {x}, [](Node& self) {
    const Matrix& s = self.value;
    self.parents[0]->grad_buffer() +=
        self.grad.cwiseProduct(s.cwiseProduct((Matrix::Ones(s.rows(), s.cols()) - s)));
  });
}

Var abs(const Var& x) {
  return make_node(x->value.cwiseAbs(), {x}, [](Node& self) {
    auto& X = *self.parents[0];
    auto& g = X.grad_buffer();
    for (Eigen::Index i = 0; i < X.value.size(); ++i) {
      const double z = X.value.data()[i];
      const double sgn = z > 0 ? 1.0 : (z < 0 ? -1.0 : 0.0);
      g.data()[i] += self.grad.data()[i] * sgn;
    }
  });
}

Matrix softmax(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    out.row(r) = (x.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

Matrix log_softmax(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    const double lse = m + std::log((x.row(r).array() - m).exp().sum());
    out.row(r) = x.row(r).array() - lse;
  }
  return out;
}

Var softmax_rows(const Var& x) {
  return make_node(softmax(x->value), {x}, [](Node& self) {
    const Matrix& y = self.value;
    Matrix dy_y = self.grad.cwiseProduct(y);
    Eigen::VectorXd row_dot = dy_y.rowwise().sum();
    Matrix dx = dy_y - (y.array().colwise() * row_dot.array()).matrix();
    self.parents[0]->grad_buffer() += dx;
  });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Matrix& v = x->value;
  const Eigen::Index n = v.rows(), d = v.cols();
  if (gamma->value.cols() != d || beta->value.cols() != d)
    throw std::invalid_argument("layer_norm: shape mismatch");
  auto xhat = std::make_shared<Matrix>(n, d);
  auto inv_std = std::make_shared<Eigen::VectorXd>(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mu = v.row(r).mean();
    const double var = (v.row(r).array() - mu).square().mean();
    (*inv_std)(r) = 1.0 / std::sqrt(var + eps);
    xhat->row(r) = (v.row(r).array() - mu) * (*inv_std)(r);
  }
  Matrix out = (xhat->array().rowwise() * gamma->value.row(0).array()).rowwise() +
               beta->value.row(0).array();
  return make_node(std::move(out), {x, gamma, beta}, [xhat, inv_std](Node& self) {
    auto& X = *self.parents[0];
    auto& G = *self.parents[1];
    auto& B = *self.parents[2];
    const Matrix& dy = self.grad;
    if (G.requires_grad) G.grad_buffer() += dy.cwiseProduct(*xhat).colwise().sum();
    if (B.requires_grad) B.grad_buffer() += dy.colwise().sum();
    if (X.requires_grad) {
      Matrix dxhat = dy.array().rowwise() * G.value.row(0).array();
      const double d = static_cast<double>(dxhat.cols());
      auto& gx = X.grad_buffer();
      for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
        const double m1 = dxhat.row(r).sum() / d;
        const double m2 = dxhat.row(r).dot(xhat->row(r)) / d;
        gx.row(r) += (*inv_std)(r) *
                     (dxhat.row(r).array() - m1 - xhat->row(r).array() * m2).matrix();
      }
    }
  });
}

Var gather_rows(const Var& table, std::span<const int> ids) {
  const Eigen::Index rows = table->value.rows();
  Matrix out(static_cast<Eigen::Index>(ids.size()), table->value.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= rows)
      throw std::out_of_range("gather_rows: id " + std::to_string(ids[i]) + " out of range");
    out.row(static_cast<Eigen::Index>(i)) = table->value.row(ids[i]);
  }
  std::vector<int> idx(ids.begin(), ids.end());
  return make_node(std::move(out), {table}, [idx = std::move(idx)](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < idx.size(); ++i)
      g.row(idx[i]) += self.grad.row(static_cast<Eigen::Index>(i));
  });
}

Var slice_rows(const Var& x, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > x->value.rows())
    throw std::out_of_range("slice_rows: range out of bounds");
  return make_node(x->value.middleRows(start, count), {x}, [start, count](Node& self) {
    self.parents[0]->grad_buffer().middleRows(start, count) += self.grad;
  });
}

Var slice_cols(const Var& x, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > x->value.cols())
    throw std::out_of_range("slice_cols: range out of bounds");
  return make_node(x->value.middleCols(start, count), {x}, [start, count](Node& self) {
    self.parents[0]->grad_buffer().middleCols(start, count) += self.grad;
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const Eigen::Index rows = parts[0]->value.rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p->value.rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
    cols += p->value.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p->value.cols()) = p->value;
    c += p->value.cols();
  }
  return make_node(std::move(out), std::vector<Var>(parts.begin(), parts.end()), [](Node& self) {
    Eigen::Index c0 = 0;
    for (auto& p : self.parents) {
      const Eigen::Index w = p->value.cols();
      if (p->requires_grad) p->grad_buffer() += self.grad.middleCols(c0, w);
      c0 += w;
    }
  });
}

Var sum(const Var& x) {
  Matrix out(1, 1);
  out(0, 0) = x->value.sum();
  return make_node(std::move(out), {x}, [](Node& self) {
    self.parents[0]->grad_buffer().array() += self.grad(0, 0);
  });
}

Var dropout(const Var& x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) throw std::invalid_argument("dropout: rate must be < 1");
  std::bernoulli_distribution keep(1.0 - rate);
  auto mask = std::make_shared<Matrix>(x->value.rows(), x->value.cols());
  for (Eigen::Index i = 0; i < mask->size(); ++i)
    mask->data()[i] = keep(rng) ? 1.0 / (1.0 - rate) : 0.0;
  return make_node(x->value.cwiseProduct(*mask), {x}, [mask](Node& self) {
    self.parents[0]->grad_buffer() += self.grad.cwiseProduct(*mask);
  });
}

Var cross_entropy(const Var& logits, std::span<const int> targets) {
  const Matrix& z = logits->value;
  if (static_cast<Eigen::Index>(targets.size()) != z.rows())
    throw std::invalid_argument("cross_entropy: target count mismatch");
  auto probs = std::make_shared<Matrix>(softmax(z));
  const Matrix logp = log_softmax(z);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < targets.size(); ++r) {
    if (targets[r] < 0) continue;
    if (targets[r] >= z.cols()) throw std::out_of_range("cross_entropy: target out of range");
    total -= logp(static_cast<Eigen::Index>(r), targets[r]);
    ++count;
  }
  if (count == 0) throw std::invalid_argument("cross_entropy: no targets");
  Matrix out(1, 1);
  out(0, 0) = total / static_cast<double>(count);
  std::vector<int> t(targets.begin(), targets.end());
  return make_node(std::move(out), {logits}, [probs, t = std::move(t), count](Node& self) {
    const double g = self.grad(0, 0) / static_cast<double>(count);
    auto& gz = self.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < t.size(); ++r) {
      if (t[r] < 0) continue;
      const auto row = static_cast<Eigen::Index>(r);
      gz.row(row) += g * probs->row(row);
      gz(row, t[r]) -= g;
    }
  });
}

Var bce_with_logits(const Var& logits, std::span<const double> labels) {
  const Matrix& z = logits->value;
  if (static_cast<Eigen::Index>(labels.size()) != z.size())
    throw std::invalid_argument("bce_with_logits: label count mismatch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double x = z.data()[i];
    const double y = labels[static_cast<std::size_t>(i)];
    total += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
  }
  Matrix out(1, 1);
  out(0, 0) = total;
  std::vector<double> y(labels.begin(), labels.end());
  return make_node(std::move(out), {logits}, [y = std::move(y)](Node& self) {
    auto& X = *self.parents[0];
    auto& g = X.grad_buffer();
    for (Eigen::Index i = 0; i < X.value.size(); ++i) {
      const double x = X.value.data()[i];
      const double s = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
      g.data()[i] += self.grad(0, 0) * (s - y[static_cast<std::size_t>(i)]);
    }
  });
}

}  // namespace kgdial::nn
