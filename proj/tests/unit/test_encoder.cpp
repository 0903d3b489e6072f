// Copyright 2026 The malsum Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <random>

#include "mal/encoder.hpp"
#include "oracles.hpp"

namespace {

using D = mal::Tensor<double>;
namespace o = mal::oracle;

void fill(mal::ParamStore<double>& s, double value) {
  for (auto& e : s.entries())
    for (auto& v : e.tensor.mutable_data()) v = value;
}

void randomize(mal::ParamStore<double>& s, std::uint64_t seed, double scale = 0.8) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& e : s.entries())
    for (auto& v : e.tensor.mutable_data()) v = u(rng);
}

D random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(r * c);
  for (auto& x : v) x = u(rng);
  return D::matrix(r, c, v);
}

o::Gru gru_oracle(const mal::GruParams<double>& p) {
  return {o::mat_of(p.w_xr), o::mat_of(p.w_hr), o::mat_of(p.w_xz), o::mat_of(p.w_hz),
          o::mat_of(p.w_xh), o::mat_of(p.w_hh), o::vec_of(p.b_r),  o::vec_of(p.b_z),
          o::vec_of(p.b_h)};
}

TEST(GruCell, ZeroParametersHalveState) {
  mal::ParamStore<double> s;
  auto p = mal::GruParams<double>::create(s, "g", 2, 2, 1);
  fill(s, 0.0);
  auto h = mal::gru_cell(D::vector({0.3, -0.2}), D::vector({1, 1}), p);
  EXPECT_DOUBLE_EQ(h[0], 0.5);
  EXPECT_DOUBLE_EQ(h[1], 0.5);
}

TEST(GruCell, SaturatedUpdateGateKeepsState) {
  mal::ParamStore<double> s;
  auto p = mal::GruParams<double>::create(s, "g", 2, 2, 1);
  fill(s, 0.0);
  for (auto& v : p.b_z.mutable_data()) v = 100.0;
  auto h = mal::gru_cell(D::vector({0.3, -0.2}), D::vector({0.7, -0.4}), p);
  EXPECT_NEAR(h[0], 0.7, 1e-12);
  EXPECT_NEAR(h[1], -0.4, 1e-12);
}

TEST(GruCell, MatchesScalarOracle) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    mal::ParamStore<double> s;
    auto p = mal::GruParams<double>::create(s, "g", 4, 3, 1);
    randomize(s, seed);
    const o::Vec x{0.5, -0.1, 0.9, -0.7}, h{0.2, -0.6, 0.4};
    auto got = mal::gru_cell(D::vector(x), D::vector(h), p);
    auto want = o::gru(gru_oracle(p), x, h);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
  }
}

struct BiFixture {
  mal::ParamStore<double> store;
  mal::GruParams<double> fwd, bwd;
  BiFixture(std::size_t ke, std::size_t kh, std::uint64_t seed) {
    fwd = mal::GruParams<double>::create(store, "f", ke, kh, 1);
    bwd = mal::GruParams<double>::create(store, "b", ke, kh, 1);
    randomize(store, seed);
  }
};

TEST(Bidirectional, SingleStepConcatenatesBothDirections) {
  BiFixture f(3, 2, 4);
  const o::Vec x{0.1, 0.2, -0.3};
  auto h = mal::encode_bidirectional(D::matrix(1, 3, x), f.fwd, f.bwd);
  auto a = o::gru(gru_oracle(f.fwd), x, {0, 0});
  auto b = o::gru(gru_oracle(f.bwd), x, {0, 0});
  ASSERT_EQ(h.shape(), (mal::Shape{1, 4}));
  EXPECT_NEAR(h[0], a[0], 1e-12);
  EXPECT_NEAR(h[1], a[1], 1e-12);
  EXPECT_NEAR(h[2], b[0], 1e-12);
  EXPECT_NEAR(h[3], b[1], 1e-12);
}

TEST(Bidirectional, ZeroParametersGiveZeroStates) {
  BiFixture f(3, 2, 4);
  fill(f.store, 0.0);
  auto h = mal::encode_bidirectional(random_matrix(4, 3, 2), f.fwd, f.bwd);
  for (double v : h.data()) EXPECT_EQ(v, 0.0);
}

TEST(Bidirectional, ReversalSymmetry) {
  BiFixture f(3, 2, 6);
  auto x = random_matrix(3, 3, 9);
  auto xr = D::matrix(3, 3, {x.at(2, 0), x.at(2, 1), x.at(2, 2), x.at(1, 0), x.at(1, 1), x.at(1, 2), x.at(0, 0),
                             x.at(0, 1), x.at(0, 2)});
  auto h = mal::encode_bidirectional(x, f.fwd, f.bwd);
  auto hr = mal::encode_bidirectional(xr, f.bwd, f.fwd);
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t i = 0; i < 2; ++i) {
      EXPECT_NEAR(hr.at(2 - t, i), h.at(t, 2 + i), 1e-12);
      EXPECT_NEAR(hr.at(2 - t, 2 + i), h.at(t, i), 1e-12);
    }
  }
}

TEST(SelfAttention, SinglePositionAttendsToItself) {
  mal::ParamStore<double> s;
  auto p = mal::SelfAttentionParams<double>::create(s, "sa", 2, 1);
  randomize(s, 3);
  auto h = random_matrix(1, 4, 5);
  auto out = mal::self_attention(h, p);
  EXPECT_DOUBLE_EQ(out.weights[0], 1.0);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(out.context[i], h[i], 1e-15);
}

TEST(SelfAttention, ZeroScoringGivesUniformRows) {
  mal::ParamStore<double> s;
  auto p = mal::SelfAttentionParams<double>::create(s, "sa", 2, 1);
  randomize(s, 3);
  for (auto* t : {&p.w_hi, &p.w_hj, &p.b_a, &p.v})
    for (auto& v : t->mutable_data()) v = 0.0;
  auto h = random_matrix(3, 4, 5);
  auto out = mal::self_attention(h, p);
  for (double w : out.weights.data()) EXPECT_NEAR(w, 1.0 / 3.0, 1e-15);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      EXPECT_NEAR(out.context.at(i, j), (h.at(0, j) + h.at(1, j) + h.at(2, j)) / 3.0, 1e-12);
}

TEST(SelfAttention, MatchesScalarOracle) {
  mal::ParamStore<double> s;
  auto p = mal::SelfAttentionParams<double>::create(s, "sa", 2, 1);
  randomize(s, 8);
  auto h = random_matrix(3, 4, 12);
  auto out = mal::self_attention(h, p);
  auto H = o::mat_of(h);
  auto w_hi = o::mat_of(p.w_hi), w_hj = o::mat_of(p.w_hj), w_hh = o::mat_of(p.w_hhbar), w_ch = o::mat_of(p.w_chbar);
  auto b_a = o::vec_of(p.b_a), v = o::vec_of(p.v), b_h = o::vec_of(p.b_hbar);
  o::Mat keys;
  for (auto& r : H) keys.push_back(o::mv(w_hj, r));
  for (std::size_t i = 0; i < 3; ++i) {
    auto a = o::softmax(o::additive(keys, o::plus(o::mv(w_hi, H[i]), b_a), v));
    auto c = o::weighted_rows(a, H);
    auto rev = o::plus(o::plus(o::mv(w_hh, H[i]), o::mv(w_ch, c)), b_h);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(out.weights.at(i, j), a[j], 1e-6);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(out.context.at(i, j), c[j], 1e-6);
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(out.revised.at(i, j), std::tanh(rev[j]), 1e-6);
  }
}

struct HeadFixture {
  mal::ParamStore<double> store;
  mal::SalienceHeadParams<double> head;
  D x, h, c, hbar;
  explicit HeadFixture(std::size_t steps) {
    head = mal::SalienceHeadParams<double>::create(store, "sal", {3, 2}, 1);
    randomize(store, 21);
    x = random_matrix(steps, 3, 1);
    h = random_matrix(steps, 4, 2);
    c = random_matrix(steps, 4, 3);
    hbar = random_matrix(steps, 2, 4);
  }
};

TEST(SalienceHead, ZeroParametersGiveHalf) {
  HeadFixture f(3);
  fill(f.store, 0.0);
  auto r_hat = mal::predict_salience(f.x, f.h, f.c, f.hbar, f.head);
  for (double r : r_hat.data()) EXPECT_EQ(r, 0.5);
}

TEST(SalienceHead, LargeBiasSaturates) {
  HeadFixture f(3);
  fill(f.store, 0.0);
  f.head.b.mutable_data()[0] = 100.0;
  auto r_hat = mal::predict_salience(f.x, f.h, f.c, f.hbar, f.head);
  for (double r : r_hat.data()) EXPECT_NEAR(r, 1.0, 1e-12);
}

TEST(SalienceHead, MatchesScalarOracle) {
  HeadFixture f(2);
  auto r = mal::predict_salience(f.x, f.h, f.c, f.hbar, f.head);
  for (std::size_t t = 0; t < 2; ++t) {
    double z = f.head.b[0];
    for (std::size_t i = 0; i < 3; ++i) z += f.head.w_x[i] * f.x.at(t, i);
    for (std::size_t i = 0; i < 4; ++i) z += f.head.w_h[i] * f.h.at(t, i) + f.head.w_c[i] * f.c.at(t, i);
    for (std::size_t i = 0; i < 2; ++i) z += f.head.w_hbar[i] * f.hbar.at(t, i);
    EXPECT_NEAR(r[t], o::sigmoid(z), 1e-12);
  }
}

TEST(SupervisedAttention, UniformScoresGiveUniformWeights) {
  auto a = mal::supervised_attention(D::vector({0.4, 0.4, 0.4, 0.4}));
  for (double v : a.data()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(SupervisedAttention, OneZeroScores) {
  auto a = mal::supervised_attention(D::vector({1.0, 0.0}));
  const double e = std::exp(1.0);
  EXPECT_NEAR(a[0], e / (e + 1), 1e-12);
  EXPECT_NEAR(a[1], 1 / (e + 1), 1e-12);
  EXPECT_NEAR(a[0], 0.731, 1e-3);
}

TEST(SupervisedAttention, Monotone) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> r(6);
    for (auto& v : r) v = u(rng);
    auto a = mal::supervised_attention(D::vector(r));
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 6; ++j)
        if (r[i] > r[j]) {
          EXPECT_GT(a[i], a[j]);
        }
  }
}

TEST(SupervisedContext, OneHotSelectsRow) {
  auto h = random_matrix(3, 4, 7);
  auto c = mal::supervised_context(D::vector({0, 1, 0}), h);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(c[j], h.at(1, j));
}

TEST(SupervisedContext, EqualRowsGiveThatRow) {
  auto h = D::matrix(3, 2, {0.5, -2, 0.5, -2, 0.5, -2});
  auto c = mal::supervised_context(D::vector({0.2, 0.5, 0.3}), h);
  EXPECT_NEAR(c[0], 0.5, 1e-15);
  EXPECT_NEAR(c[1], -2.0, 1e-15);
}

TEST(SupervisedContext, MatchesManualWeightedSum) {
  auto h = random_matrix(3, 4, 13);
  const o::Vec a{0.2, 0.3, 0.5};
  auto c = mal::supervised_context(D::vector(a), h);
  auto want = o::weighted_rows(a, o::mat_of(h));
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(c[j], want[j], 1e-12);
}

TEST(SupervisedContext, LengthMismatchThrows) {
  EXPECT_THROW(mal::supervised_context(D::vector({0.5, 0.5}), random_matrix(3, 4, 1)), mal::DimensionError);
}

}  // namespace
