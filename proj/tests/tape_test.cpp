#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "chargenet/tensor/grad_check.hpp"
#include "chargenet/tensor/sgd.hpp"
#include "test_util.hpp"

namespace chargenet {
namespace {

using testing::finite_difference;
using testing::max_relative_error;
using testing::random_tensor;

TEST(MatMul, IdentityAndZero) {
  Tape tape;
  Var eye = tape.constant(Tensor::identity(2));
  Var m = tape.constant(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  EXPECT_EQ(tape.value(tape.matmul(eye, m)), Tensor::matrix(2, 2, {1, 2, 3, 4}));
  Var zero = tape.constant(Tensor({2, 2}));
  EXPECT_EQ(tape.value(tape.matmul(zero, m)), Tensor({2, 2}));
}

TEST(MatMul, ShapeErrorNamesBothShapes) {
  Tape tape;
  Var a = tape.constant(Tensor({3, 4}));
  Var b = tape.constant(Tensor({3, 2}));
  try {
    tape.matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("[3x4]"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("[3x2]"), std::string::npos);
  }
}

TEST(MatMul, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  ParameterStore store;
  Parameter& a = store.add("a", {3, 4});
  Parameter& b = store.add("b", {4, 2});
  testing::randomize(a, rng);
  testing::randomize(b, rng);
  auto loss = [&] {
    Tape tape;
    return tape.value(tape.sum(tape.matmul(tape.param(a), tape.param(b)))).item();
  };
  Tape tape;
  tape.backward(tape.sum(tape.matmul(tape.param(a), tape.param(b))));
  EXPECT_LT(max_relative_error(*a.grad, finite_difference(a, loss)), 1e-6);
  EXPECT_LT(max_relative_error(*b.grad, finite_difference(b, loss)), 1e-6);
}

TEST(Elementwise, TanhAndSigmoidAtZero) {
  ParameterStore store;
  Parameter& x = store.add("x", {1});
  {
    Tape tape;
    Var y = tape.tanh(tape.param(x));
    EXPECT_EQ(tape.value(y).item(), 0.0);
    tape.backward(y);
    EXPECT_DOUBLE_EQ((*x.grad)[0], 1.0);
  }
  x.clear_grad();
  {
    Tape tape;
    Var y = tape.sigmoid(tape.param(x));
    EXPECT_EQ(tape.value(y).item(), 0.5);
    tape.backward(y);
    EXPECT_DOUBLE_EQ((*x.grad)[0], 0.25);
  }
}

TEST(Elementwise, ConcatOfTwoGruStates) {
  std::mt19937_64 rng(3);
  Tape tape;
  Tensor a = random_tensor({75}, rng);
  Var c = tape.concat({tape.constant(a), tape.constant(random_tensor({75}, rng))});
  ASSERT_EQ(tape.value(c).size(), 150u);
  for (std::size_t i = 0; i < 75; ++i) EXPECT_EQ(tape.value(c)[i], a[i]);
}

TEST(Elementwise, ShapeMismatch) {
  Tape tape;
  Var a = tape.constant(Tensor({3}));
  Var b = tape.constant(Tensor({4}));
  EXPECT_THROW(tape.add(a, b), ShapeError);
  EXPECT_THROW(tape.mul(a, b), ShapeError);
  EXPECT_THROW(tape.concat({tape.constant(Tensor({2, 2}))}), ShapeError);
}

TEST(Softmax, Examples) {
  for (double c : {-5.0, 0.0, 3.7}) {
    auto p = softmax(std::vector<double>{c, c, c});
    for (double v : p) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  }
  EXPECT_EQ(softmax(std::vector<double>{42.0}), std::vector<double>{1.0});
  auto p = softmax(std::vector<double>{std::log(1.0), std::log(2.0), std::log(3.0)});
  EXPECT_NEAR(p[0], 1.0 / 6, 1e-15);
  EXPECT_NEAR(p[1], 2.0 / 6, 1e-15);
  EXPECT_NEAR(p[2], 3.0 / 6, 1e-15);
  EXPECT_THROW(softmax(std::vector<double>{}), DomainError);
}

TEST(Softmax, SumsToOneAndShiftInvariant) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> shift(-50, 50);
  std::uniform_int_distribution<int> len(1, 40);
  for (int trial = 0; trial < 500; ++trial) {
    Tensor logits = random_tensor({static_cast<std::size_t>(len(rng))}, rng, -20, 20);
    auto p = softmax(logits.data());
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-9);
    const double c = shift(rng);
    std::vector<double> moved(logits.data().begin(), logits.data().end());
    for (double& v : moved) v += c;
    auto q = softmax(moved);
    for (std::size_t i = 0; i < p.size(); ++i) {
      EXPECT_GT(p[i], 0.0);
      EXPECT_NEAR(p[i], q[i], 1e-12);
    }
  }
}

TEST(CrossEntropy, Examples) {
  EXPECT_EQ(cross_entropy(std::vector<double>{0, 1, 0}, std::vector<double>{0, 1, 0}), 0.0);
  EXPECT_NEAR(cross_entropy(std::vector<double>{0.5, 0.5, 0, 0}, std::vector<double>{0.25, 0.25, 0.25, 0.25}),
              std::log(4.0), 1e-15);
  EXPECT_THROW(cross_entropy(std::vector<double>{1}, std::vector<double>{0.5, 0.5}), ShapeError);
  // zero predicted probability is clamped, never infinite
  EXPECT_NEAR(cross_entropy(std::vector<double>{1, 0}, std::vector<double>{0, 1}), -std::log(1e-12), 1e-9);
}

TEST(CrossEntropy, MatchesDirectSummation) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 12;
    auto t = softmax(random_tensor({n}, rng, -3, 3).data());
    auto p = softmax(random_tensor({n}, rng, -3, 3).data());
    double oracle = 0.0;
    for (std::size_t i = 0; i < n; ++i) oracle += -(t[i] * std::log(p[i]));
    EXPECT_NEAR(cross_entropy(t, p), oracle, 1e-12);
  }
}

TEST(Backward, SumGivesOnes) {
  ParameterStore store;
  Parameter& x = store.add("x", {2, 3});
  Tape tape;
  tape.backward(tape.sum(tape.param(x)));
  for (double g : x.grad->data()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, TanhOfDotAtZeroWeights) {
  ParameterStore store;
  Parameter& w = store.add("w", {3});
  Tape tape;
  Tensor x = Tensor::vector({0.5, -1.25, 2.0});
  tape.backward(tape.tanh(tape.dot(tape.param(w), tape.constant(x))));
  EXPECT_EQ(*w.grad, x);
}

TEST(Backward, RejectsNonScalarAndSecondPass) {
  ParameterStore store;
  Parameter& w = store.add("w", {3});
  Tape tape;
  Var v = tape.tanh(tape.param(w));
  EXPECT_THROW(tape.backward(v), DomainError);
  Var s = tape.sum(v);
  tape.backward(s);
  EXPECT_THROW(tape.backward(s), StateError);
  EXPECT_THROW(tape.tanh(v), StateError);
}

TEST(Backward, UnreachableParameterGetsZeroGrad) {
  ParameterStore store;
  Parameter& used = store.add("used", {2});
  Parameter& unused = store.add("unused", {2});
  Tape tape;
  tape.param(unused);
  tape.backward(tape.sum(tape.param(used)));
  ASSERT_TRUE(unused.grad.has_value());
  for (double g : unused.grad->data()) EXPECT_EQ(g, 0.0);
}

TEST(Backward, LookupAccumulatesIntoTableRows) {
  ParameterStore store;
  Parameter& table = store.add("emb", {4, 2});
  Tape tape;
  Var a = tape.lookup(table, 1);
  Var b = tape.lookup(table, 1);
  Var c = tape.lookup(table, 3);
  tape.backward(tape.sum(tape.concat({a, b, c})));
  EXPECT_EQ(*table.grad, Tensor::matrix(4, 2, {0, 0, 2, 2, 0, 0, 1, 1}));
  EXPECT_THROW(tape.lookup(table, 4), ShapeError);
}

// Every primitive against central differences on random inputs in [-2, 2].
TEST(Primitives, AllGradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 5; ++trial) {
    ParameterStore store;
    Parameter& A = store.add("A", {3, 4});
    Parameter& B = store.add("B", {4, 2});
    Parameter& x = store.add("x", {4});
    Parameter& y = store.add("y", {4});
    Parameter& target_logits = store.add("t", {3});
    for (Parameter* p : store.all()) testing::randomize(*p, rng);
    const Tensor target(Shape{3}, softmax(target_logits.value.data()));
    auto loss = [&](Tape& tape) {
      Var a = tape.param(A), b = tape.param(B), vx = tape.param(x), vy = tape.param(y);
      Var mm = tape.sum(tape.matmul(a, b));
      Var mv = tape.tanh(tape.matmul(a, vx));
      Var gates = tape.mul(tape.sigmoid(vx), tape.sub(vy, tape.scale(vx, 0.3)));
      Var both = tape.concat({mv, tape.dot(gates, vy)});
      Var probs = tape.softmax(tape.matmul(a, tape.add(vx, vy)));
      Var pooled = tape.weighted_sum(probs, {vx, vy, gates});
      Var ce = tape.cross_entropy(target, probs);
      return tape.add(tape.add(mm, tape.sum(both)), tape.add(ce, tape.sum(pooled)));
    };
    auto report = grad_check(loss, store.all(), 1e-4, 1e-5);
    EXPECT_TRUE(report.passed()) << "max relative error " << report.max_relative_error();
  }
}

TEST(GradCheck, LinearModelIsExact) {
  std::mt19937_64 rng(1);
  ParameterStore store;
  Parameter& w = store.add("w", {2, 3});
  Parameter& b = store.add("b", {2});
  testing::randomize(w, rng);
  testing::randomize(b, rng);
  const Tensor x = Tensor::vector({0.3, -1.1, 0.7});
  auto loss = [&](Tape& tape) {
    return tape.sum(tape.add(tape.matmul(tape.param(w), tape.constant(x)), tape.param(b)));
  };
  auto report = grad_check(loss, {&w, &b});
  EXPECT_TRUE(report.passed());
  EXPECT_LT(report.max_relative_error(), 1e-8);
}

TEST(GradCheck, FlagsCorruptedRule) {
  ParameterStore store;
  Parameter& w = store.add("w", {3});
  w.value = Tensor::vector({0.2, -0.4, 0.9});
  // cube with a wrong derivative (2x instead of 3x^2)
  auto loss = [&](Tape& tape) {
    Var v = tape.param(w);
    Tensor out = tape.value(v);
    for (double& e : out.data()) e = e * e * e;
    Var cube = tape.custom({v}, out, [](const auto& inputs, const Tensor&, std::span<const double> g, auto& grads) {
      for (std::size_t i = 0; i < g.size(); ++i) grads[0][i] += g[i] * 2.0 * (*inputs[0])[i];
    });
    return tape.sum(cube);
  };
  auto report = grad_check(loss, {&w});
  EXPECT_FALSE(report.passed());
}

TEST(Determinism, ForwardBackwardStepIsBitIdentical) {
  auto run = [] {
    std::mt19937_64 rng(99);
    ParameterStore store;
    Parameter& w = store.add("w", {5, 5});
    Parameter& u = store.add("u", {5});
    store.initialize(rng);
    for (int step = 0; step < 3; ++step) {
      Tape tape;
      Var h = tape.tanh(tape.matmul(tape.param(w), tape.param(u)));
      Var p = tape.softmax(h);
      tape.backward(tape.cross_entropy(Tensor::vector({1, 0, 0, 0, 0}), p));
      sgd_step(store, {0.1, 1});
    }
    return store.snapshot();
  };
  EXPECT_EQ(run(), run());
}

}  // namespace
}  // namespace chargenet
