#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "samctr/errors.hpp"
#include "samctr/gradcheck.hpp"
#include "samctr/parameter_store.hpp"
#include "samctr/tape.hpp"
#include "samctr/tensor.hpp"

using namespace samctr;

TEST(Inner, HandValues) {
  EXPECT_EQ(inner({1, 0}, {0, 1}), 0.0);
  EXPECT_EQ(inner({1, 1}, {1, 1}), 2.0);
  EXPECT_EQ(inner({1, 2}, {3, 4}), 11.0);
  EXPECT_THROW(inner({1, 2}, {1}), ShapeError);
}

TEST(Hadamard, HandValues) {
  EXPECT_EQ(hadamard({1, 1}, {3, -7}), (DenseVector{3, -7}));
  EXPECT_EQ(hadamard({0, 0}, {3, -7}), (DenseVector{0, 0}));
  EXPECT_EQ(hadamard({2, 3}, {4, 5}), (DenseVector{8, 15}));
  EXPECT_THROW(hadamard({1}, {1, 2}), ShapeError);
}

TEST(Softmax, HandValuesAndErrors) {
  const double c = 3.7;
  const std::vector<double> eq = {c, c, c};
  for (double w : softmax_weights(eq)) EXPECT_NEAR(w, 1.0 / 3.0, 1e-15);
  const std::vector<double> two = {0.0, std::log(2.0)};
  const auto w = softmax_weights(two);
  EXPECT_NEAR(w[0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(w[1], 2.0 / 3.0, 1e-15);
  EXPECT_THROW(softmax_weights(std::vector<double>{}), DomainError);
}

TEST(Softmax, SumsToOneAndShiftInvariant) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0, 5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(1 + trial % 9);
    for (double& x : s) x = g(rng);
    const auto a = softmax_weights(s);
    EXPECT_NEAR(std::accumulate(a.begin(), a.end(), 0.0), 1.0, 1e-12);
    const double shift = g(rng) * 100;
    for (double& x : s) x += shift;
    const auto b = softmax_weights(s);
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-12);
  }
}

TEST(Activations, HandValues) {
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_EQ(relu(-3.0), 0.0);
  EXPECT_EQ(relu(2.5), 2.5);
  EXPECT_NEAR(sigmoid(std::log(3.0)), 0.75, 1e-15);
  for (double x : {-700.0, -50.0, 50.0, 700.0}) {
    const double s = sigmoid(x);
    EXPECT_TRUE(std::isfinite(s));
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
  }
  EXPECT_GT(sigmoid(-700.0), 0.0);
}

TEST(Tensor, VecMatRowConvention) {
  DenseMatrix m(2, 3, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(vec_mat({1, 1}, m), (DenseVector{5, 7, 9}));
  EXPECT_THROW(vec_mat({1, 1, 1}, m), ShapeError);
  EXPECT_THROW(DenseMatrix(2, 2, std::vector<double>{1, 2, 3}), ShapeError);
}

TEST(Tensor, RequireFinite) {
  const std::vector<double> bad = {1.0, std::nan("")};
  EXPECT_THROW(require_finite(bad, "x"), NumericError);
  const std::vector<double> inf = {HUGE_VAL};
  EXPECT_THROW(require_finite(inf, "x"), NumericError);
}

TEST(ParameterStore, UniqueNamesAndShapes) {
  ParameterStore s;
  s.add("a", DenseMatrix(2, 3));
  EXPECT_THROW(s.add("a", DenseMatrix(1, 1)), ContractError);
  EXPECT_THROW(s.id("missing"), ContractError);
  for (const auto& slot : s) EXPECT_TRUE(slot.grad.same_shape(slot.value));
}

TEST(ParameterStore, XavierSupportAndMean) {
  DenseMatrix m(1000, 16);
  std::mt19937_64 rng(9);
  fill_xavier(m, 1000, 16, rng);
  const double a = std::sqrt(6.0 / (1000 + 16));
  EXPECT_DOUBLE_EQ(xavier_bound(1000, 16), a);
  double sum = 0;
  for (double v : m.values()) {
    EXPECT_GT(v, -a);
    EXPECT_LT(v, a);
    sum += v;
  }
  EXPECT_LT(std::abs(sum / 16000.0), 3 * a / std::sqrt(16000.0));
}

TEST(Tape, QuadraticForm) {
  ParameterStore s;
  const SlotId w = s.add("w", DenseMatrix(1, 3, {0.5, -2, 3}));
  const SlotId unused = s.add("u", DenseMatrix(1, 2, {1, 1}));
  Tape t;
  const Var v = t.parameter(s, w);
  t.parameter(s, unused);
  t.backward(t.sum_squares(v));
  EXPECT_EQ(s.slot(w).grad, DenseMatrix(1, 3, {1, -4, 6}));
  EXPECT_EQ(s.slot(unused).grad, DenseMatrix(1, 2));
}

TEST(Tape, BackwardTwiceDoublesGradients) {
  ParameterStore s;
  const SlotId w = s.add("w", DenseMatrix(2, 2, {1, 2, -1, 0.5}));
  Tape t;
  const Var v = t.parameter(s, w);
  const Var root = t.sum_all(t.mul(v, t.sigmoid(v)));
  t.backward(root);
  const DenseMatrix once = s.slot(w).grad;
  t.backward(root);
  for (std::size_t k = 0; k < once.size(); ++k) EXPECT_EQ(s.slot(w).grad[k], 2 * once[k]);
}

TEST(Tape, NonScalarRootRejected) {
  ParameterStore s;
  const SlotId w = s.add("w", DenseMatrix(2, 2));
  Tape t;
  EXPECT_THROW(t.backward(t.parameter(s, w)), ContractError);
}

TEST(Tape, GatherOutOfRange) {
  ParameterStore s;
  const SlotId w = s.add("w", DenseMatrix(3, 2));
  Tape t;
  const std::vector<std::uint32_t> rows = {0, 3};
  EXPECT_THROW(t.gather_rows(s, w, rows), ContractError);
}

TEST(Tape, ShapeMismatch) {
  Tape t;
  const Var a = t.constant(DenseMatrix(2, 3));
  const Var b = t.constant(DenseMatrix(3, 2));
  EXPECT_THROW(t.add(a, b), ShapeError);
  EXPECT_THROW(t.matmul(a, a), ShapeError);
}

// Every primitive in one composite, against the central-difference checker.
TEST(Tape, PrimitivesMatchFiniteDifferences) {
  ParameterStore s;
  std::mt19937_64 rng(3);
  const SlotId a = s.add("a", DenseMatrix(4, 3));
  const SlotId b = s.add("b", DenseMatrix(3, 3));
  const SlotId c = s.add("c", DenseMatrix(1, 3));
  const SlotId e = s.add("e", DenseMatrix(5, 3));
  for (SlotId id : {a, b, c, e}) fill_xavier(s.slot(id).value, 3, 3, rng);
  const std::vector<std::uint32_t> rows = {4, 1, 1, 0};
  const std::vector<double> labels = {1, 0, 1, 1};

  auto build = [&](Tape& t, ParameterStore& st) {
    const Var va = t.parameter(st, a);
    const Var vb = t.parameter(st, b);
    const Var vc = t.parameter(st, c);
    const Var ve = t.gather_rows(st, e, rows);
    const Var h = t.relu(t.add(t.matmul(va, vb), vc));
    const Var sm = t.softmax_rows(t.mul(h, ve));
    const std::vector<Var> parts = {sm, t.slice_cols(ve, 1, 2), t.scale(va, 0.3)};
    const Var cat = t.concat_cols(parts);
    const Var top = t.slice_rows(cat, 0, 4);
    const std::vector<Var> terms = {t.row_dot(va, ve), t.row_sum(top), t.row_sum(t.sub(va, ve))};
    const Var logits = t.add_n(terms);
    return t.add(t.logloss(logits, labels), t.scale(t.sum_squares(t.sigmoid(vc)), 0.1));
  };
  Tape t;
  t.backward(build(t, s));
  const auto r = finite_diff_check(
      [&](ParameterStore& st) {
        Tape tt;
        return tt.scalar(build(tt, st));
      },
      s);
  EXPECT_LT(r.max_relative_error, 1e-7) << r.worst_slot << "[" << r.worst_index << "]";
  EXPECT_EQ(r.checked, 12u + 9u + 3u + 15u);
  // Rows of e never gathered keep a zero gradient.
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(s.slot(e).grad(2, k), 0.0);
    EXPECT_EQ(s.slot(e).grad(3, k), 0.0);
  }
}

TEST(Tape, DropoutInvertedScalingMonteCarlo) {
  // E[mask * x / (1 - p)] = x; 1e5 masks, 3 sigma.
  const double p = 0.3, x = 2.0;
  const std::size_t masks = 100000;
  std::mt19937_64 rng(17);
  Tape t;
  const Var v = t.constant(DenseMatrix(masks, 1, x));
  const Var dropped = t.dropout(v, p, rng);
  double sum = 0;
  for (double y : t.value(dropped).values()) sum += y;
  const double mean = sum / masks;
  const double sigma = x / (1 - p) * std::sqrt(p * (1 - p) / masks);
  EXPECT_LT(std::abs(mean - x), 3 * sigma);
}

TEST(GradCheck, LinearIsExactAndCorruptionDetected) {
  ParameterStore s;
  const SlotId w = s.add("w", DenseMatrix(1, 3, {0.2, -0.4, 1.5}));
  const DenseMatrix x(3, 1, {1.0, 2.0, -3.0});
  auto linear = [&](ParameterStore& st) {
    Tape t;
    return t.scalar(t.matmul(t.parameter(st, w), t.constant(x)));
  };
  {
    Tape t;
    t.backward(t.matmul(t.parameter(s, w), t.constant(x)));
  }
  EXPECT_LT(finite_diff_check(linear, s).max_relative_error, 1e-9);

  s.zero_grad();
  auto logistic = [&](ParameterStore& st) {
    Tape t;
    return t.scalar(t.sigmoid(t.matmul(t.parameter(st, w), t.constant(x))));
  };
  {
    Tape t;
    t.backward(t.sigmoid(t.matmul(t.parameter(s, w), t.constant(x))));
  }
  EXPECT_LT(finite_diff_check(logistic, s).max_relative_error, 1e-6);
  s.slot(w).grad[1] += 0.1;
  EXPECT_GT(finite_diff_check(logistic, s).max_relative_error, 1e-2);
}

TEST(GradCheck, RestoresValues) {
  ParameterStore s;
  const SlotId w = s.add("w", DenseMatrix(1, 2, {0.1, 0.7}));
  const auto before = s.slot(w).value;
  finite_diff_check([&](ParameterStore& st) { return std::sin(st.slot(w).value[0]); }, s);
  EXPECT_EQ(s.slot(w).value, before);
}

TEST(L2, PenaltyGradientMatchesFiniteDifferences) {
  ParameterStore s;
  const SlotId w = s.add("w", DenseMatrix(2, 2, {0.3, -1.2, 2.0, 0.0}));
  s.add("frozen", DenseMatrix(1, 1, 5.0), false);
  const double lambda = 0.7;
  const double penalty = apply_l2(s, lambda);
  EXPECT_NEAR(penalty, lambda * (0.09 + 1.44 + 4.0), 1e-15);
  for (std::size_t k = 0; k < 4; ++k)
    EXPECT_DOUBLE_EQ(s.slot(w).grad[k], 2 * lambda * s.slot(w).value[k]);
  const auto r = finite_diff_check(
      [&](ParameterStore& st) {
        double q = 0;
        for (double v : st.slot(w).value.values()) q += v * v;
        return lambda * q;
      },
      s);
  EXPECT_LT(r.max_relative_error, 1e-8);
  EXPECT_EQ(s.slot("frozen").grad[0], 0.0);
}
