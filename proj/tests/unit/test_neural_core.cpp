#include <cmath>
#include <random>

#include "doctest.h"
#include "kgdial/errors.hpp"
#include "kgdial/text.hpp"
#include "kgdial/nn/autograd.hpp"
#include "kgdial/nn/checkpoint.hpp"
#include "kgdial/nn/gradcheck.hpp"
#include "kgdial/nn/layers.hpp"
#include "kgdial/nn/optim.hpp"
#include "support.hpp"

using namespace kgdial::nn;

namespace {

// Loop-based reference encoder, written against the parameter names only.
struct RefEncoder {
  const ParameterStore& store;
  std::string name;
  ModelConfig cfg;

  Matrix p(const std::string& n) const { return store.get(name + "." + n)->value; }

  static Matrix linear(const Matrix& x, const Matrix& w, const Matrix& b) {
    Matrix out(x.rows(), w.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        double s = b(0, j);
        for (Eigen::Index k = 0; k < x.cols(); ++k) s += x(i, k) * w(k, j);
        out(i, j) = s;
      }
    return out;
  }

  static Matrix norm(const Matrix& x, const Matrix& g, const Matrix& b) {
    Matrix out(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      double mu = 0, var = 0;
      for (Eigen::Index j = 0; j < x.cols(); ++j) mu += x(i, j);
      mu /= static_cast<double>(x.cols());
      for (Eigen::Index j = 0; j < x.cols(); ++j) var += (x(i, j) - mu) * (x(i, j) - mu);
      var /= static_cast<double>(x.cols());
      for (Eigen::Index j = 0; j < x.cols(); ++j)
        out(i, j) = (x(i, j) - mu) / std::sqrt(var + 1e-5) * g(0, j) + b(0, j);
    }
    return out;
  }

  Matrix forward(const std::vector<int>& ids, const std::vector<int>& mask) const {
    const auto n = static_cast<Eigen::Index>(ids.size());
    const Matrix tok = p("tok"), pos = p("pos");
    Matrix x(n, cfg.hidden);
    for (Eigen::Index i = 0; i < n; ++i) x.row(i) = tok.row(ids[i]) + pos.row(i);
    const int dh = cfg.hidden / cfg.heads;
    for (int l = 0; l < cfg.layers; ++l) {
      const std::string L = "layer" + std::to_string(l) + ".";
      const Matrix q = linear(x, p(L + "attn.q.weight"), p(L + "attn.q.bias"));
      const Matrix k = linear(x, p(L + "attn.k.weight"), p(L + "attn.k.bias"));
      const Matrix v = linear(x, p(L + "attn.v.weight"), p(L + "attn.v.bias"));
      Matrix heads(n, cfg.hidden);
      for (int h = 0; h < cfg.heads; ++h) {
        for (Eigen::Index i = 0; i < n; ++i) {
          std::vector<double> w(static_cast<std::size_t>(n));
          double mx = -1e300;
          for (Eigen::Index j = 0; j < n; ++j) {
            double s = 0;
            for (int c = 0; c < dh; ++c) s += q(i, h * dh + c) * k(j, h * dh + c);
            s /= std::sqrt(static_cast<double>(dh));
            if (!mask.empty() && mask[static_cast<std::size_t>(j)] == 0) s += -1e9;
            w[static_cast<std::size_t>(j)] = s;
            mx = std::max(mx, s);
          }
          double z = 0;
          for (auto& e : w) z += (e = std::exp(e - mx));
          for (int c = 0; c < dh; ++c) {
            double acc = 0;
            for (Eigen::Index j = 0; j < n; ++j) acc += w[static_cast<std::size_t>(j)] / z * v(j, h * dh + c);
            heads(i, h * dh + c) = acc;
          }
        }
      }
      const Matrix a = linear(heads, p(L + "attn.o.weight"), p(L + "attn.o.bias"));
      x = norm(x + a, p(L + "ln1.gamma"), p(L + "ln1.beta"));
      Matrix u = linear(x, p(L + "ff.up.weight"), p(L + "ff.up.bias"));
      for (Eigen::Index i = 0; i < u.size(); ++i) {
        const double zz = u.data()[i];
        u.data()[i] = 0.5 * zz * (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (zz + 0.044715 * zz * zz * zz)));
      }
      const Matrix f = linear(u, p(L + "ff.down.weight"), p(L + "ff.down.bias"));
      x = norm(x + f, p(L + "ln2.gamma"), p(L + "ln2.beta"));
    }
    return x;
  }
};

double max_abs_diff(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("softmax rows sum to one") {
  Rng rng(3);
  std::normal_distribution<double> nd(0, 5);
  Matrix x(6, 9);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
  const Matrix s = softmax(x);
  for (Eigen::Index i = 0; i < s.rows(); ++i) CHECK(s.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
  const Matrix ls = log_softmax(x);
  CHECK(max_abs_diff(ls.array().exp().matrix(), s) < 1e-12);
}

TEST_CASE("encoder matches a loop-based reference implementation") {
  Rng rng(5);
  ParameterStore store;
  auto cfg = kgtest::tiny_model(40, 2);
  Encoder enc(store, "enc", cfg, rng);
  // Perturb layer-norm parameters so they are not identity.
  std::normal_distribution<double> nd(0, 0.3);
  for (auto& [n, v] : store.entries())
    for (Eigen::Index i = 0; i < v->value.size(); ++i) v->value.data()[i] += nd(rng);
  RefEncoder ref{store, "enc", cfg};
  std::mt19937_64 g(1);
  for (int trial = 0; trial < 5; ++trial) {
    auto ids = kgtest::random_ids(g, 7 + static_cast<std::size_t>(trial), 1, 40);
    std::vector<int> mask(ids.size(), 1);
    if (trial % 2) mask.back() = 0;
    const Matrix got = enc.forward(ids, mask)->value;
    CHECK(max_abs_diff(got, ref.forward(ids, mask)) < 1e-6);
  }
}

TEST_CASE("padded positions do not influence real positions") {
  Rng rng(6);
  ParameterStore store;
  Encoder enc(store, "enc", kgtest::tiny_model(30, 2), rng);
  std::vector<int> a{5, 6, 7, 8, 0, 0, 0}, b{5, 6, 7, 8, 11, 23, 3};
  std::vector<int> mask{1, 1, 1, 1, 0, 0, 0};
  const Matrix ya = enc.forward(a, mask)->value, yb = enc.forward(b, mask)->value;
  CHECK(max_abs_diff(ya.topRows(4), yb.topRows(4)) < 1e-12);
}

TEST_CASE("zero-layer encoder is the embedding sum") {
  Rng rng(7);
  ParameterStore store;
  Encoder enc(store, "enc", kgtest::tiny_model(20, 0), rng);
  std::vector<int> ids{3, 9, 1};
  const Matrix y = enc.forward(ids)->value;
  for (int i = 0; i < 3; ++i)
    CHECK(max_abs_diff(y.row(i), enc.token_embedding()->value.row(ids[static_cast<std::size_t>(i)]) +
                                     enc.position_embedding()->value.row(i)) == 0.0);
}

TEST_CASE("out-of-vocabulary ids are rejected") {
  Rng rng(7);
  ParameterStore store;
  Encoder enc(store, "enc", kgtest::tiny_model(20, 1), rng);
  std::vector<int> ids{3, 20};
  CHECK_THROWS(enc.forward(ids));
}

TEST_CASE("decoder is causal and incremental decoding matches batch") {
  Rng rng(8);
  for (bool cross : {false, true}) {
    ParameterStore store;
    auto cfg = kgtest::tiny_model(25, 2);
    Encoder enc(store, "enc", cfg, rng);
    Decoder dec(store, "dec", cfg, rng, cross);
    std::vector<int> src{4, 8, 15, 16};
    const Var memory = enc.forward(src);
    std::vector<int> ids{4, 9, 12, 3, 17, 2};
    const Matrix full = dec.logits(dec.forward(ids, cross ? memory : nullptr))->value;

    auto changed = ids;
    changed[4] = 21;
    const Matrix alt = dec.logits(dec.forward(changed, cross ? memory : nullptr))->value;
    CHECK(max_abs_diff(full.topRows(4), alt.topRows(4)) < 1e-12);
    CHECK(max_abs_diff(full.row(4), alt.row(4)) > 1e-6);

    auto state = dec.start(cross ? &memory->value : nullptr);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const RowVector step = dec.step(state, ids[i]);
      CHECK(max_abs_diff(step, full.row(static_cast<Eigen::Index>(i))) < 1e-9);
    }
  }
}

TEST_CASE("cross attention with empty memory behaves as decoder-only") {
  Rng rng(9);
  ParameterStore store;
  Decoder dec(store, "dec", kgtest::tiny_model(25, 2), rng, true);
  std::vector<int> ids{4, 9, 12};
  const Var empty = constant(Matrix(0, 16));
  const Matrix a = dec.forward(ids, nullptr)->value, b = dec.forward(ids, empty)->value;
  CHECK(max_abs_diff(a, b) == 0.0);
}

TEST_CASE("learning-rate schedule endpoints") {
  CHECK(linear_decay_lr(0.01, 0, 100) == 0.01);
  CHECK(linear_decay_lr(0.01, 50, 100) == doctest::Approx(0.005));
  CHECK(linear_decay_lr(0.01, 100, 100) == 0.0);
  CHECK(linear_decay_lr(0.01, 150, 100) == 0.0);
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  Rng rng(10);
  ParameterStore store;
  Linear lin(store, "lin", 4, 3, rng);
  TrainConfig tc;
  AdamW opt(store, tc);
  std::vector<std::uint64_t> before;
  for (auto& [n, v] : store.entries()) before.push_back(ParameterStore::checksum(v));
  const Var x = constant(Matrix::Ones(2, 4));
  auto loss = [&] { return sum(lin(x)); };
  train_step(store, opt, loss, 100, 100, 0.01);
  std::size_t i = 0;
  for (auto& [n, v] : store.entries()) CHECK(ParameterStore::checksum(v) == before[i++]);
}

TEST_CASE("non-finite loss raises NumericError") {
  Rng rng(10);
  ParameterStore store;
  Linear lin(store, "lin", 2, 1, rng);
  AdamW opt(store, TrainConfig{});
  Matrix bad(1, 2);
  bad << std::nan(""), 1.0;
  auto loss = [&] { return sum(lin(constant(bad))); };
  CHECK_THROWS_AS(train_step(store, opt, loss, 0, 10, 0.01), kgdial::NumericError);
}

TEST_CASE("a small classifier overfits eight samples") {
  Rng rng(11);
  ParameterStore store;
  auto cfg = kgtest::tiny_model(30, 1);
  Encoder enc(store, "enc", cfg, rng);
  Linear head(store, "head", cfg.hidden, 4, rng);
  std::mt19937_64 g(2);
  std::vector<std::vector<int>> xs;
  std::vector<int> ys;
  for (int i = 0; i < 8; ++i) {
    xs.push_back(kgtest::random_ids(g, 6, 8, 30));
    ys.push_back(i % 4);
  }
  auto loss = [&] {
    Var total;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const Var h = slice_rows(enc.forward(xs[i]), 0, 1);
      const int y = ys[i];
      const Var l = cross_entropy(head(h), std::span<const int>(&y, 1));
      total = total ? add(total, l) : l;
    }
    return scale(total, 1.0 / static_cast<double>(xs.size()));
  };
  TrainConfig tc;
  tc.lr = 3e-3;
  AdamW opt(store, tc);
  double first = 0, last = 0;
  for (int s = 0; s < 200; ++s) {
    last = train_step(store, opt, loss, s, 200, tc.lr);
    if (s == 0) first = last;
  }
  CHECK(last <= 0.1 * first);
}

TEST_CASE("checkpoint round trip is exact") {
  Rng rng(12);
  ParameterStore a;
  auto cfg = kgtest::tiny_model(20, 1);
  Encoder ea(a, "enc", cfg, rng);
  auto dir = kgtest::scratch_dir("ckpt");
  auto ck = Checkpoint::from_store("test", cfg.to_json(), a);
  ck.save(dir / "m.ckpt");
  auto loaded = Checkpoint::load(dir / "m.ckpt");
  CHECK(loaded.kind == "test");
  CHECK(ModelConfig::from_json(loaded.config).to_json() == cfg.to_json());
  Rng other(99);
  ParameterStore b;
  Encoder eb(b, "enc", cfg, other);
  loaded.restore(b);
  for (std::size_t i = 0; i < a.entries().size(); ++i)
    CHECK(ParameterStore::checksum(a.entries()[i].second) ==
          ParameterStore::checksum(b.entries()[i].second));
  std::vector<int> ids{1, 2, 3};
  CHECK(max_abs_diff(ea.forward(ids)->value, eb.forward(ids)->value) == 0.0);

  kgdial::write_file(dir / "bad.ckpt", "NOTACKPT........");
  CHECK_THROWS_AS(Checkpoint::load(dir / "bad.ckpt"), kgdial::FormatError);
}

TEST_CASE("seeded initialisation is reproducible") {
  auto cfg = kgtest::tiny_model(20, 2);
  Rng r1(42), r2(42);
  ParameterStore a, b;
  Encoder ea(a, "enc", cfg, r1), eb(b, "enc", cfg, r2);
  REQUIRE(a.entries().size() == b.entries().size());
  for (std::size_t i = 0; i < a.entries().size(); ++i)
    CHECK(ParameterStore::checksum(a.entries()[i].second) ==
          ParameterStore::checksum(b.entries()[i].second));
}

TEST_CASE("analytic gradients of the layer stack match finite differences") {
  Rng rng(13);
  ParameterStore store;
  auto cfg = kgtest::tiny_model(20, 1);
  Encoder enc(store, "enc", cfg, rng);
  Decoder dec(store, "dec", cfg, rng, true);
  std::vector<int> src{3, 4, 5, 6}, tgt{7, 8, 9}, next{8, 9, 10};
  std::vector<int> mask{1, 1, 1, 0};
  auto loss = [&] {
    const Var mem = enc.forward(src, mask);
    const Var logits = dec.logits(dec.forward(tgt, mem));
    const Var pooled = sigmoid(sum(abs(slice_cols(mem, 0, 4))));
    return add(cross_entropy(logits, next), pooled);
  };
  auto r = gradient_check(store, loss, 1e-5, 20, 1);
  INFO("worst " << r.worst_parameter << " a=" << r.worst_analytic << " n=" << r.worst_numeric);
  CHECK(r.coords_checked > 0);
  CHECK(r.max_rel_error <= 1e-4);
}

TEST_CASE("gradient check rejects eps outside its range") {
  ParameterStore store;
  Rng rng(1);
  Linear lin(store, "lin", 2, 1, rng);
  auto loss = [&] { return sum(lin(constant(Matrix::Ones(1, 2)))); };
  CHECK_THROWS_AS(gradient_check(store, loss, 1e-7), kgdial::ConfigError);
  CHECK_THROWS_AS(gradient_check(store, loss, 1e-2), kgdial::ConfigError);
  CHECK_NOTHROW(gradient_check(store, loss, 1e-6));
  CHECK_NOTHROW(gradient_check(store, loss, 1e-3));
}

TEST_CASE("model config validation") {
  ModelConfig cfg = kgtest::tiny_model(10);
  cfg.heads = 3;
  CHECK_THROWS_AS(cfg.validate(), kgdial::ConfigError);
  cfg = kgtest::tiny_model(0);
  CHECK_THROWS_AS(cfg.validate(), kgdial::ConfigError);
}
