/*
 Copyright 2026 The rheo Authors
 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      http://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "rheo/error.hpp"
#include "rheo/tensor.hpp"
#include "support/gradcheck.hpp"

using namespace rheo;
using namespace rheo::ad;
using rheo::testing::check_gradients;
using rheo::testing::random_readout;
using rheo::testing::random_tensor;

namespace {

constexpr double kRelTol = 1e-5;
constexpr double kAbsTol = 1e-8;

void expect_values(const Tensor& t, std::initializer_list<double> want, double tol = 1e-14) {
  ASSERT_EQ(t.size(), want.size());
  std::size_t i = 0;
  for (double w : want) {
    EXPECT_NEAR(t.data()[i], w, tol) << "entry " << i;
    ++i;
  }
}

}  // namespace

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  Tape tape(false);
  const auto eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  const auto x = Tensor::from({2, 3}, {1, -2, 3, 0.5, 4, -6});
  const auto y = matmul(tape, eye, x);
  EXPECT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y.data()[i], x.data()[i]);
}

TEST(Matmul, HandExpansion) {
  Tape tape(false);
  const auto y = matmul(tape, Tensor::from({2, 2}, {1, 2, 3, 4}), Tensor::from({2, 1}, {0, 1}));
  EXPECT_EQ(y.rows(), 2u);
  EXPECT_EQ(y.cols(), 1u);
  expect_values(y, {2, 4});
}

TEST(Matmul, InnerDimensionMismatchThrows) {
  Tape tape(false);
  try {
    matmul(tape, Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
    FAIL() << "expected a shape error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
}

TEST(Matmul, GradientOfSumOfProductIsOnesTimesBTransposed) {
  std::mt19937_64 rng(1);
  auto a = random_tensor(3, 4, rng, true);
  auto b = random_tensor(4, 2, rng, false);
  Tape tape;
  tape.backward(sum(tape, matmul(tape, a, b)));
  // d/da_ij sum_k (ab)_ik = sum_k b_jk
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_NEAR(a.grad()[i * 4 + j], b.at(j, 0) + b.at(j, 1), 1e-14);
    }
  }
  const auto fd = check_gradients(
      [&](Tape& t) { return sum(t, matmul(t, a, b)); }, {a});
  EXPECT_TRUE(fd.passed(kRelTol, kAbsTol)) << fd.worst_where;
}

TEST(Matmul, Associativity) {
  std::mt19937_64 rng(2);
  const auto a = random_tensor(8, 8, rng);
  const auto b = random_tensor(8, 8, rng);
  const auto c = random_tensor(8, 8, rng);
  Tape tape(false);
  const auto left = matmul(tape, matmul(tape, a, b), c);
  const auto right = matmul(tape, a, matmul(tape, b, c));
  EXPECT_LT(rheo::testing::max_abs_diff(left.data(), right.data()), 1e-10);
}

TEST(LayerNorm, ConstantRowMapsToZero) {
  Tape tape(false);
  const auto y = layer_norm(tape, Tensor::full({1, 4}, 3.0), Tensor::full({4}, 1.0),
                            Tensor::zeros({4}));
  expect_values(y, {0, 0, 0, 0});
}

TEST(LayerNorm, TwoEntryRowStandardizes) {
  Tape tape(false);
  const auto y = layer_norm(tape, Tensor::from({1, 2}, {1, 3}), Tensor::full({2}, 1.0),
                            Tensor::zeros({2}), 1e-14);
  expect_values(y, {-1, 1}, 1e-12);
}

TEST(LayerNorm, ZeroGainGivesBias) {
  std::mt19937_64 rng(3);
  Tape tape(false);
  const auto bias = Tensor::from({3}, {0.5, -1, 2});
  const auto y = layer_norm(tape, random_tensor(5, 3, rng), Tensor::zeros({3}), bias);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(y.at(i, j), bias.data()[j]);
  }
}

TEST(Gelu, ZeroAndAsymptote) {
  Tape tape(false);
  const auto y = gelu(tape, Tensor::from({1, 3}, {0.0, 12.0, -12.0}));
  EXPECT_EQ(y.data()[0], 0.0);
  EXPECT_NEAR(y.data()[1], 12.0, 1e-12);
  EXPECT_NEAR(y.data()[2], 0.0, 1e-12);
}

TEST(Gelu, GradientAtHalfMatchesFiniteDifference) {
  auto x = Tensor::from({1, 1}, {0.5}, true);
  Tape tape;
  tape.backward(sum(tape, gelu(tape, x)));
  const double h = 1e-6;
  auto phi = [](double v) { return 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))); };
  const double fd = (phi(0.5 + h) - phi(0.5 - h)) / (2 * h);
  EXPECT_LT(std::abs(x.grad()[0] - fd) / std::abs(fd), 1e-6);
}

TEST(Backward, SumGivesOnes) {
  auto w = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6}, true);
  Tape tape;
  tape.backward(sum(tape, w));
  for (double g : w.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, SumOfSquaresGivesTwiceW) {
  auto w = Tensor::from({1, 3}, {0.5, -2.0, 3.0}, true);
  Tape tape;
  tape.backward(sum(tape, mul(tape, w, w)));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(w.grad()[i], 2.0 * w.data()[i]);
}

TEST(Backward, RepeatedCallWithoutResetIsAnError) {
  auto w = Tensor::from({1, 2}, {1, 2}, true);
  Tape tape;
  const auto loss = sum(tape, w);
  tape.backward(loss);
  try {
    tape.backward(loss);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::State);
  }
  tape.reset();
  w.zero_grad();
  tape.backward(sum(tape, w));
  EXPECT_EQ(w.grad()[0], 1.0);
}

TEST(Backward, EmptyTapeAndNonScalarLossAreErrors) {
  Tape empty;
  try {
    empty.backward(Tensor::scalar(1.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::State);
  }
  auto w = Tensor::from({1, 2}, {1, 2}, true);
  Tape tape;
  const auto y = scale(tape, w, 2.0);
  try {
    tape.backward(y);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
}

TEST(Backward, CompositeMlpMatchesFiniteDifference) {
  std::mt19937_64 rng(4);
  const auto x = random_tensor(5, 3, rng);
  auto w1 = random_tensor(3, 6, rng, true);
  auto b1 = Tensor::from({6}, {0.1, -0.2, 0.3, 0.0, 0.05, -0.1}, true);
  auto w2 = random_tensor(6, 2, rng, true);
  auto f = [&](Tape& t) {
    const auto h = gelu(t, add_row(t, matmul(t, x, w1), b1));
    return random_readout(t, matmul(t, h, w2), 9);
  };
  const auto fd = check_gradients(f, {w1, b1, w2});
  EXPECT_TRUE(fd.passed(kRelTol, kAbsTol))
      << fd.worst_where << " rel " << fd.worst_relative << " abs " << fd.worst_absolute;
}

// Every primitive against central differences on inputs drawn from [-1, 1].
TEST(Primitives, FiniteDifferenceOracle) {
  std::mt19937_64 rng(5);
  auto a = random_tensor(4, 3, rng, true);
  auto b = random_tensor(4, 3, rng, true);
  auto c = random_tensor(3, 5, rng, true);
  auto row = random_tensor(1, 3, rng, true);
  auto gain = random_tensor(1, 3, rng, true);
  auto bias = random_tensor(1, 3, rng, true);
  auto flat_row = [](const Tensor& r) {
    return Tensor::from({r.size()}, r.data(), true);
  };
  auto row1 = flat_row(row), gain1 = flat_row(gain), bias1 = flat_row(bias);

  struct Case {
    const char* name;
    std::function<Tensor(Tape&)> f;
    std::vector<Tensor> leaves;
  };
  const std::vector<Case> cases = {
      {"matmul", [&](Tape& t) { return random_readout(t, matmul(t, a, c), 11); }, {a, c}},
      {"transpose", [&](Tape& t) { return random_readout(t, transpose(t, a), 12); }, {a}},
      {"add", [&](Tape& t) { return random_readout(t, add(t, a, b), 13); }, {a, b}},
      {"sub", [&](Tape& t) { return random_readout(t, sub(t, a, b), 14); }, {a, b}},
      {"mul", [&](Tape& t) { return random_readout(t, mul(t, a, b), 15); }, {a, b}},
      {"scale", [&](Tape& t) { return random_readout(t, scale(t, a, -1.7), 16); }, {a}},
      {"add_row", [&](Tape& t) { return random_readout(t, add_row(t, a, row1), 17); },
       {a, row1}},
      {"mul_row", [&](Tape& t) { return random_readout(t, mul_row(t, a, row1), 18); },
       {a, row1}},
      {"gelu", [&](Tape& t) { return random_readout(t, gelu(t, a), 19); }, {a}},
      {"layer_norm",
       [&](Tape& t) { return random_readout(t, layer_norm(t, a, gain1, bias1), 20); },
       {a, gain1, bias1}},
      {"concat_cols",
       [&](Tape& t) { return random_readout(t, concat_cols(t, {a, b, a}), 21); }, {a, b}},
      {"slice_cols",
       [&](Tape& t) { return random_readout(t, slice_cols(t, a, 1, 2), 22); }, {a}},
      {"sum", [&](Tape& t) { return scale(t, sum(t, mul(t, a, a)), 0.3); }, {a}},
      {"relative_l2_loss", [&](Tape& t) { return relative_l2_loss(t, a, b); }, {a}},
  };
  for (const auto& c : cases) {
    const auto fd = check_gradients(c.f, c.leaves);
    EXPECT_GT(fd.checked, 0u);
    EXPECT_TRUE(fd.passed(kRelTol, kAbsTol))
        << c.name << ": " << fd.worst_where << " rel " << fd.worst_relative << " abs "
        << fd.worst_absolute;
  }
}

TEST(Tensor, DeterministicAcrossRuns) {
  auto run = [] {
    std::mt19937_64 rng(7);
    auto a = random_tensor(6, 4, rng, true);
    auto b = random_tensor(4, 6, rng, true);
    Tape tape;
    const auto y = layer_norm(tape, gelu(tape, matmul(tape, a, b)), Tensor::full({6}, 1.0),
                              Tensor::zeros({6}));
    tape.backward(sum(tape, mul(tape, y, y)));
    std::vector<double> out(y.data().begin(), y.data().end());
    out.insert(out.end(), a.grad().begin(), a.grad().end());
    return out;
  };
  EXPECT_EQ(run(), run());
}

TEST(Tensor, InferenceTapeRecordsNothing) {
  std::mt19937_64 rng(8);
  auto a = random_tensor(3, 3, rng, true);
  Tape tape(false);
  const auto y = gelu(tape, matmul(tape, a, a));
  EXPECT_EQ(tape.size(), 0u);
  EXPECT_FALSE(y.requires_grad());
}

TEST(Tensor, StorageAccountingReturnsToBaseline) {
  const auto before = storage_stats().live_bytes;
  {
    auto t = Tensor::zeros({100, 10});
    EXPECT_GE(storage_stats().live_bytes, before + 100 * 10 * sizeof(double));
  }
  EXPECT_EQ(storage_stats().live_bytes, before);
}

TEST(Tensor, ShapeErrorsOnBroadcastOps) {
  Tape tape(false);
  EXPECT_THROW(add(tape, Tensor::zeros({2, 2}), Tensor::zeros({2, 3})), Error);
  EXPECT_THROW(add_row(tape, Tensor::zeros({2, 2}), Tensor::zeros({3})), Error);
  EXPECT_THROW(slice_cols(tape, Tensor::zeros({2, 2}), 1, 2), Error);
}
