#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "dafe/grad_check.hpp"
#include "dafe/graph.hpp"
#include "dafe/parameter.hpp"
#include "dafe/rng.hpp"
#include "dafe/tensor.hpp"

using namespace dafe;

namespace {

// Independent reference matmul used as the oracle for affine().
Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  Tensor c({a.rows(), b.cols()});
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a.at(i, k) * b.at(k, j);
      c.at(i, j) = s;
    }
  }
  return c;
}

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double& x : t.values()) x = u(rng);
  return t;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) return false;
  return std::memcmp(a.data(), b.data(), a.numel() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("tensor shape bookkeeping") {
  Tensor t = Tensor::zeros(3, 4);
  CHECK(t.numel() == 12);
  CHECK(t.rows() == 3);
  CHECK(t.cols() == 4);
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
}

TEST_CASE("affine forward cases") {
  ParameterStore store;
  Graph g;

  SECTION("identity weights pass input through") {
    Parameter& w = store.create("w", ParamGroup::kBase,
                                Tensor::row_major(2, 2, {1, 0, 0, 1}));
    Parameter& b =
        store.create("b", ParamGroup::kBase, Tensor::vector_of({0, 0}));
    Var x = g.input(Tensor::row_major(1, 2, {1, 2}));
    Var y = g.affine(x, g.leaf(w), g.leaf(b));
    CHECK(g.value(y).at(0, 0) == 1.0);
    CHECK(g.value(y).at(0, 1) == 2.0);
  }

  SECTION("hand matrix-multiplication oracle") {
    Tensor xm = Tensor::row_major(1, 2, {1, 2});
    Tensor wm = Tensor::row_major(2, 2, {1, 0, 1, 1});
    Tensor expected = naive_matmul(xm, wm);  // [[3, 2]]
    Parameter& w = store.create("w", ParamGroup::kBase, wm);
    Parameter& b =
        store.create("b", ParamGroup::kBase, Tensor::vector_of({1, 1}));
    Var y = g.affine(g.input(xm), g.leaf(w), g.leaf(b));
    CHECK(g.value(y).at(0, 0) == expected.at(0, 0) + 1.0);  // 4
    CHECK(g.value(y).at(0, 1) == expected.at(0, 1) + 1.0);  // 3
  }

  SECTION("zero input rows all equal the bias") {
    Rng rng(7);
    Parameter& w =
        store.create("w", ParamGroup::kBase, random_tensor({4, 3}, rng));
    Parameter& b = store.create("b", ParamGroup::kBase,
                                Tensor::vector_of({5, 5, 5}));
    Var y = g.affine(g.input(Tensor::zeros(3, 4)), g.leaf(w), g.leaf(b));
    for (std::size_t r = 0; r < 3; ++r) {
      for (std::size_t c = 0; c < 3; ++c) CHECK(g.value(y).at(r, c) == 5.0);
    }
  }

  SECTION("inner dimension mismatch names both shapes") {
    Parameter& w =
        store.create("w", ParamGroup::kBase, Tensor::zeros(3, 2));
    Parameter& b =
        store.create("b", ParamGroup::kBase, Tensor::vector_of({0, 0}));
    try {
      g.affine(g.input(Tensor::zeros(1, 2)), g.leaf(w), g.leaf(b));
      FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("[1x2]") != std::string::npos);
      CHECK(msg.find("[3x2]") != std::string::npos);
    }
  }
}

TEST_CASE("affine backward accumulates exact gradients into x, w, b") {
  ParameterStore store;
  Graph g;
  Parameter& w = store.create("w", ParamGroup::kBase,
                              Tensor::row_major(2, 2, {1, 2, 3, 4}));
  Parameter& b =
      store.create("b", ParamGroup::kBase, Tensor::vector_of({0.5, -0.5}));
  Var x = g.input(Tensor::row_major(2, 2, {1, -1, 2, 0.5}));
  Var y = g.affine(x, g.leaf(w), g.leaf(b));
  Var loss = g.sum_all(y);
  g.backward(loss);
  // d(sum)/dx = ones * W^T; columns of W sum to [3, 7]... rows: [w00+w01, w10+w11]
  CHECK(g.grad(x).at(0, 0) == Catch::Approx(3.0));
  CHECK(g.grad(x).at(0, 1) == Catch::Approx(7.0));
  // d(sum)/dw[k][j] = sum_i x[i][k]
  CHECK(w.grad.at(0, 0) == Catch::Approx(3.0));
  CHECK(w.grad.at(1, 0) == Catch::Approx(-0.5));
  // d(sum)/db[j] = n rows
  CHECK(b.grad[0] == Catch::Approx(2.0));
  CHECK(b.grad[1] == Catch::Approx(2.0));
}

TEST_CASE("layer_norm forward symmetries") {
  ParameterStore store;
  Parameter& gain =
      store.create("g", ParamGroup::kBase, Tensor({4}, {1, 1, 1, 1}));
  Parameter& bias = store.create("b", ParamGroup::kBase, Tensor({4}));

  SECTION("constant row maps to zeros") {
    Graph g;
    Var y = g.layer_norm(g.input(Tensor::row_major(1, 4, {3, 3, 3, 3})),
                         g.leaf(gain), g.leaf(bias), 1e-5);
    for (std::size_t c = 0; c < 4; ++c) {
      CHECK(g.value(y).at(0, c) == Catch::Approx(0.0).margin(1e-12));
    }
  }

  SECTION("zero-mean unit-variance row is fixed up to eps") {
    ParameterStore s2;
    Parameter& g2 = s2.create("g", ParamGroup::kBase, Tensor({2}, {1, 1}));
    Parameter& b2 = s2.create("b", ParamGroup::kBase, Tensor({2}));
    Graph g;
    Var y = g.layer_norm(g.input(Tensor::row_major(1, 2, {1, -1})),
                         g.leaf(g2), g.leaf(b2), 1e-10);
    CHECK(g.value(y).at(0, 0) == Catch::Approx(1.0).epsilon(1e-6));
    CHECK(g.value(y).at(0, 1) == Catch::Approx(-1.0).epsilon(1e-6));
  }
}

TEST_CASE("layer_norm gradient matches finite differences") {
  ParameterStore store;
  Rng rng(11);
  Parameter& x =
      store.create("x", ParamGroup::kBase, random_tensor({4, 8}, rng));
  Parameter& gain =
      store.create("g", ParamGroup::kBase, random_tensor({8}, rng));
  Parameter& bias =
      store.create("b", ParamGroup::kBase, random_tensor({8}, rng));
  auto run = [&](bool with_grad) {
    Graph g;
    Var y = g.layer_norm(g.leaf(x), g.leaf(gain), g.leaf(bias), 1e-5);
    // squared sum makes the loss curvature nontrivial
    Var loss = g.sum_all(g.mul(y, y));
    const double v = g.value(loss)[0];
    if (with_grad) g.backward(loss);
    return v;
  };
  auto report = grad_check(run, {&x, &gain, &bias}, 1e-5, 16, 3);
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("softmax_masked") {
  Graph g;

  SECTION("symmetric scores split evenly") {
    Var p = g.softmax_masked(g.input(Tensor::row_major(1, 2, {0, 0})),
                             BoolMat::all_true(1, 2));
    CHECK(g.value(p).at(0, 0) == Catch::Approx(0.5));
    CHECK(g.value(p).at(0, 1) == Catch::Approx(0.5));
  }

  SECTION("single unmasked entry takes all mass") {
    BoolMat mask(1, 2);
    mask.at(0, 0) = 1;
    Var p = g.softmax_masked(g.input(Tensor::row_major(1, 2, {5, 7})), mask);
    CHECK(g.value(p).at(0, 0) == 1.0);
    CHECK(g.value(p).at(0, 1) == 0.0);
  }

  SECTION("direct evaluation oracle: [0, ln 3] -> [1/4, 3/4]") {
    Var p = g.softmax_masked(
        g.input(Tensor::row_major(1, 2, {0.0, std::log(3.0)})),
        BoolMat::all_true(1, 2));
    CHECK(g.value(p).at(0, 0) == Catch::Approx(0.25).epsilon(1e-12));
    CHECK(g.value(p).at(0, 1) == Catch::Approx(0.75).epsilon(1e-12));
  }

  SECTION("fully masked row is rejected") {
    CHECK_THROWS_AS(g.softmax_masked(g.input(Tensor::zeros(1, 3)),
                                     BoolMat(1, 3)),
                    MaskError);
  }

  SECTION("rows sum to one within 1e-12 and masked entries are exactly 0") {
    Rng rng(3);
    Tensor scores = random_tensor({6, 9}, rng);
    for (double& x : scores.values()) x *= 10.0;
    BoolMat mask(6, 9);
    std::uniform_int_distribution<int> coin(0, 1);
    for (std::size_t r = 0; r < 6; ++r) {
      bool any = false;
      for (std::size_t c = 0; c < 9; ++c) {
        mask.at(r, c) = coin(rng);
        any = any || mask.at(r, c);
      }
      if (!any) mask.at(r, 0) = 1;
    }
    Var p = g.softmax_masked(g.input(scores), mask);
    for (std::size_t r = 0; r < 6; ++r) {
      double row_sum = 0.0;
      for (std::size_t c = 0; c < 9; ++c) {
        row_sum += g.value(p).at(r, c);
        if (!mask.at(r, c)) CHECK(g.value(p).at(r, c) == 0.0);
      }
      CHECK(std::abs(row_sum - 1.0) <= 1e-12);
    }
  }

  SECTION("masked entries receive exactly-zero gradient") {
    BoolMat mask(1, 3);
    mask.at(0, 0) = 1;
    mask.at(0, 2) = 1;
    Var scores = g.input(Tensor::row_major(1, 3, {0.3, 9.9, -0.2}));
    Var p = g.softmax_masked(scores, mask);
    Var loss = g.sum_all(g.mul(p, p));
    g.backward(loss);
    CHECK(g.grad(scores).at(0, 1) == 0.0);
    CHECK(g.grad(scores).at(0, 0) != 0.0);
  }
}

TEST_CASE("cross_entropy") {
  SECTION("uniform logits give ln V") {
    Graph g;
    Var loss =
        g.cross_entropy(g.input(Tensor::zeros(4, 10)), {1, 5, 0, 9}, -1);
    CHECK(g.value(loss)[0] == Catch::Approx(std::log(10.0)).epsilon(1e-12));
  }

  SECTION("saturated margin gives almost zero loss") {
    Graph g;
    Tensor logits = Tensor::zeros(1, 5);
    logits.at(0, 2) = 1e4;
    Var loss = g.cross_entropy(g.input(logits), {2}, -1);
    CHECK(g.value(loss)[0] == Catch::Approx(0.0).margin(1e-9));
  }

  SECTION("ignored positions contribute nothing") {
    Graph g;
    Tensor logits = Tensor::zeros(3, 4);
    logits.at(1, 0) = 100.0;  // would dominate if counted
    Var loss = g.cross_entropy(g.input(logits), {0, /*pad*/ -7, 3}, -7);
    CHECK(g.value(loss)[0] == Catch::Approx(std::log(4.0)).epsilon(1e-12));
  }

  SECTION("all positions ignored is an error") {
    Graph g;
    CHECK_THROWS_AS(g.cross_entropy(g.input(Tensor::zeros(2, 4)), {0, 0}, 0),
                    EmptyLossError);
  }

  SECTION("gradient matches finite differences") {
    ParameterStore store;
    Rng rng(5);
    Parameter& logits =
        store.create("l", ParamGroup::kBase, random_tensor({3, 7}, rng));
    const std::vector<int> targets = {2, 6, 0};
    auto run = [&](bool with_grad) {
      Graph g;
      Var loss = g.cross_entropy(g.leaf(logits), targets, -1);
      const double v = g.value(loss)[0];
      if (with_grad) g.backward(loss);
      return v;
    };
    auto report = grad_check(run, {&logits}, 1e-5, 21, 1);
    CHECK(report.max_rel_err < 1e-4);
  }
}

TEST_CASE("grad_check harness") {
  SECTION("quadratic: f(x) = sum x^2") {
    ParameterStore store;
    Parameter& x =
        store.create("x", ParamGroup::kBase, Tensor({2}, {1.0, 2.0}));
    auto run = [&](bool with_grad) {
      Graph g;
      Var xv = g.leaf(x);
      Var loss = g.sum_all(g.mul(xv, xv));
      const double v = g.value(loss)[0];
      if (with_grad) g.backward(loss);
      return v;
    };
    x.grad.fill(0.0);
    run(true);
    CHECK(x.grad[0] == Catch::Approx(2.0));
    CHECK(x.grad[1] == Catch::Approx(4.0));
    auto report = grad_check(run, {&x}, 1e-5);
    CHECK(report.max_rel_err < 1e-6);
  }

  SECTION("constant function has zero error") {
    ParameterStore store;
    Parameter& x =
        store.create("x", ParamGroup::kBase, Tensor({3}, {1, 2, 3}));
    auto run = [&](bool with_grad) {
      Graph g;
      Var c = g.constant(Tensor({1}, {4.0}));
      Var loss = g.sum_all(c);
      Var xv = g.leaf(x);
      (void)xv;
      if (with_grad) g.backward(loss);
      return g.value(loss)[0];
    };
    auto report = grad_check(run, {&x}, 1e-5);
    CHECK(report.max_rel_err == 0.0);
  }

  SECTION("non-deterministic function is rejected") {
    ParameterStore store;
    Parameter& x = store.create("x", ParamGroup::kBase, Tensor({1}, {1.0}));
    int calls = 0;
    auto run = [&](bool) {
      return static_cast<double>(calls++);
    };
    CHECK_THROWS_AS(grad_check(run, {&x}, 1e-5), ReproducibilityError);
  }

  SECTION("step size outside [1e-6, 1e-3] is rejected") {
    ParameterStore store;
    Parameter& x = store.create("x", ParamGroup::kBase, Tensor({1}, {1.0}));
    auto run = [&](bool) { return 0.0; };
    CHECK_THROWS_AS(grad_check(run, {&x}, 1e-2), ConfigError);
    CHECK_THROWS_AS(grad_check(run, {&x}, 1e-7), ConfigError);
  }
}

TEST_CASE("every forward op passes finite-difference checks across seeds") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ParameterStore store;
    Rng rng(seed);
    Parameter& a =
        store.create("a", ParamGroup::kBase, random_tensor({3, 4}, rng));
    Parameter& w =
        store.create("w", ParamGroup::kBase, random_tensor({4, 5}, rng));
    Parameter& w2 =
        store.create("w2", ParamGroup::kBase, random_tensor({3, 5}, rng));
    Parameter& b =
        store.create("b", ParamGroup::kBase, random_tensor({5}, rng));
    Parameter& gain =
        store.create("gain", ParamGroup::kBase, random_tensor({5}, rng));
    Parameter& bias =
        store.create("bias", ParamGroup::kBase, random_tensor({5}, rng));
    Parameter& emb =
        store.create("emb", ParamGroup::kBase, random_tensor({6, 4}, rng));

    BoolMat mask = BoolMat::all_true(3, 3);
    mask.at(0, 2) = 0;
    mask.at(2, 0) = 0;

    auto run = [&](bool with_grad) {
      Graph g;
      Var av = g.leaf(a);
      Var gathered = g.gather_rows(g.leaf(emb), {0, 5, 2});  // 3x4
      Var mixed = g.add(av, gathered);
      Var h = g.affine(mixed, g.leaf(w), g.leaf(b));          // 3x5
      Var hn = g.layer_norm(h, g.leaf(gain), g.leaf(bias), 1e-5);
      Var hr = g.relu(hn);
      Var joined = g.concat_cols({g.slice_cols(hr, 0, 2),
                                  g.slice_cols(hr, 2, 3)});   // 3x5
      Var scores = g.matmul_nt(joined, g.leaf(w2));           // 3x3
      Var p = g.softmax_masked(g.scale(scores, 0.7), mask);
      Var ctx = g.matmul(p, joined);                          // 3x5
      Var loss = g.cross_entropy(ctx, {1, 4, 0}, -1);
      const double v = g.value(loss)[0];
      if (with_grad) g.backward(loss);
      return v;
    };
    auto report = grad_check(
        run, {&a, &w, &w2, &b, &gain, &bias, &emb}, 1e-5, 6, seed);
    INFO("seed " << seed << " max rel err " << report.max_rel_err);
    CHECK(report.max_rel_err < 1e-3);
  }
}

TEST_CASE("ops are deterministic given identical inputs") {
  auto build = [](Tensor& out_probs) {
    Rng rng(99);
    Graph g;
    Tensor scores = random_tensor({4, 4}, rng);
    Var p = g.softmax_masked(g.input(scores), BoolMat::all_true(4, 4));
    Var h = g.matmul(p, g.input(random_tensor({4, 3}, rng)));
    out_probs = g.value(h);
  };
  Tensor a, b;
  build(a);
  build(b);
  CHECK(bitwise_equal(a, b));
}

TEST_CASE("backward leaves non-trainable parameter grads untouched") {
  ParameterStore store;
  Parameter& frozen =
      store.create("frozen", ParamGroup::kDomainIn, Tensor({3}, {0, 0, 0}));
  frozen.trainable = false;
  frozen.grad.values() = {7.0, 8.0, 9.0};  // sentinel
  Parameter& live =
      store.create("live", ParamGroup::kBase, Tensor({3}, {1, 2, 3}));
  Graph g;
  Var s = g.add(g.leaf(frozen), g.leaf(live));
  Var loss = g.sum_all(s);
  g.backward(loss);
  CHECK(frozen.grad[0] == 7.0);
  CHECK(frozen.grad[1] == 8.0);
  CHECK(frozen.grad[2] == 9.0);
  CHECK(live.grad[0] == 1.0);
  CHECK(live.grad[1] == 1.0);
}

TEST_CASE("parameter store contracts") {
  ParameterStore store;
  store.create("p1", ParamGroup::kBase, Tensor({2}, {1, 2}));
  CHECK_THROWS_AS(store.create("p1", ParamGroup::kBase, Tensor({1})),
                  LookupError);
  CHECK_THROWS_AS(store.require("absent"), LookupError);

  const std::uint64_t before = store.value_checksum(ParamGroup::kBase);
  store.require("p1").value[0] = 1.0000000001;
  CHECK(store.value_checksum(ParamGroup::kBase) != before);
  store.require("p1").value[0] = 1.0;
  CHECK(store.value_checksum(ParamGroup::kBase) == before);
}
