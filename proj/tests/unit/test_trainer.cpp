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

#include <cmath>
#include <random>
#include <sstream>

#include "mal/grad_check.hpp"
#include "mal/trainer.hpp"
#include "synthetic.hpp"

namespace {

using D = mal::Tensor<double>;

mal::TrainingPair toy_pair() {
  mal::TrainingPair p;
  p.source_ids = {4, 5, 6};
  p.target_ids = {5, 3};
  p.salience_labels = {0, 1, 0};
  p.content_mask = {false, true, true};
  p.source_tokens = {"the", "fox", "ran"};
  p.summary_tokens = {"fox"};
  return p;
}

TEST(SalienceLoss, HalfEverywhereIsLogTwo) {
  EXPECT_NEAR(mal::salience_loss(D::vector({0.5, 0.5, 0.5}), {1, 0, 1}).item(), std::log(2.0), 1e-12);
}

TEST(SalienceLoss, PerfectPredictionIsNearZero) {
  EXPECT_LE(mal::salience_loss(D::vector({1.0, 0.0}), {1, 0}).item(), 1e-6);
}

TEST(SalienceLoss, HandComputedValue) {
  EXPECT_NEAR(mal::salience_loss(D::vector({0.9, 0.1}), {1, 0}).item(), 0.10536051565782628, 1e-12);
}

TEST(SalienceLoss, LengthMismatchThrows) {
  EXPECT_THROW(mal::salience_loss(D::vector({0.5}), {1, 0}), mal::DimensionError);
}

TEST(NllLoss, UniformDistributions) {
  auto u = D::filled({4}, 0.25);
  EXPECT_NEAR(mal::nll_loss<double>({u, u}, {0, 3}).item(), 2 * std::log(4.0), 1e-12);
}

TEST(NllLoss, PerfectDistributionsGiveZero) {
  EXPECT_EQ(mal::nll_loss<double>({D::vector({0, 1}), D::vector({1, 0})}, {1, 0}).item(), 0.0);
}

TEST(NllLoss, HandComputedValue) {
  auto v = mal::nll_loss<double>({D::vector({0.5, 0.5}), D::vector({0.25, 0.75})}, {0, 1}).item();
  EXPECT_NEAR(v, std::log(2.0) + std::log(4.0 / 3.0), 1e-12);
  EXPECT_NEAR(v, 0.9808, 1e-4);
}

TEST(NllLoss, TargetOutsideVocabularyThrows) {
  EXPECT_THROW(mal::nll_loss<double>({D::vector({0.5, 0.5})}, {2}), mal::VocabularyRangeError);
}

TEST(TotalLoss, SwitchesOffIsNllAlone) {
  mal::MalModel<double> m({8, 4, 4, false, false, false, 2});
  mal::Switches off;
  off.salience_loss = off.use_cs = off.use_cu = false;
  auto l = mal::total_loss(m, toy_pair(), off);
  EXPECT_EQ(l.total.item(), l.nll);
  EXPECT_EQ(l.salience, 0.0);
}

TEST(TotalLoss, AllOnIsSumOfComponents) {
  mal::MalModel<double> m({8, 4, 4, true, true, false, 2});
  auto pair = toy_pair();
  mal::Switches sw;
  auto l = mal::total_loss(m, pair, sw);
  EXPECT_EQ(l.total.item(), l.salience + l.nll);
  // recompute both terms independently
  auto f = m.forward_source(pair.source_ids, pair.content_mask, sw);
  const double ls = mal::salience_loss(f.encoder.r_hat, pair.salience_labels).item();
  auto dists = mal::teacher_forced_dists(m, f, pair.target_ids);
  double nll = 0.0;
  for (std::size_t t = 0; t < dists.size(); ++t) nll -= std::log(dists[t][static_cast<std::size_t>(pair.target_ids[t])]);
  EXPECT_NEAR(l.salience, ls, 1e-12);
  EXPECT_NEAR(l.nll, nll, 1e-12);
}

TEST(TotalLoss, SwitchNeedingMissingBranchThrows) {
  mal::MalModel<double> m({8, 4, 4, true, false, false, 2});
  EXPECT_THROW(mal::total_loss(m, toy_pair(), mal::Switches{}), mal::Error);
}

TEST(TotalLoss, GradientCheckAllConfigurations) {
  for (int cfg = 0; cfg < 4; ++cfg) {
    mal::MalModel<double> m({8, 3, 3, true, true, cfg == 3, 4});
    mal::Switches sw;
    sw.use_cs = cfg != 1;
    sw.use_cu = cfg != 2;
    auto pair = toy_pair();
    auto report = mal::grad_check(
        [&](mal::ParamStore<double>&) { return mal::total_loss(m, pair, sw).total; }, m.params(), 1e-3);
    EXPECT_LT(report.max_relative_error, 1e-4) << "config " << cfg << " " << report.worst_parameter;
  }
}

TEST(TotalLoss, StoppedContextGradientLeavesSalienceBranchUntouched) {
  mal::MalModel<double> m({8, 3, 3, true, true, false, 4});
  mal::Switches sw;
  sw.salience_loss = false;
  sw.stop_cs_gradient = true;
  mal::total_loss(m, toy_pair(), sw).total.backward();
  for (const auto& e : m.params().entries()) {
    const bool branch = e.name.rfind("enc.self.", 0) == 0 || e.name.rfind("sal.", 0) == 0;
    if (!branch) continue;
    for (double g : e.tensor.grad()) EXPECT_EQ(g, 0.0) << e.name;
  }
  sw.stop_cs_gradient = false;
  m.params().zero_grad();
  mal::total_loss(m, toy_pair(), sw).total.backward();
  double norm = 0.0;
  for (double g : m.params().get("sal.b_r").grad()) norm += std::abs(g);
  EXPECT_GT(norm, 0.0);
}

TEST(Adadelta, FirstStepOfUnitGradient) {
  mal::ParamStore<double> ps;
  auto x = ps.add_values("x", {1}, {0.0});
  mal::Adadelta<double> opt(ps);
  x.mutable_grad()[0] = 1.0;
  opt.step(ps);
  EXPECT_NEAR(x[0], -std::sqrt(1e-6 / (0.05 + 1e-6)), 1e-15);
  EXPECT_NEAR(x[0], -0.0044721, 1e-7);
}

TEST(Adadelta, ZeroGradientLeavesParameters) {
  mal::ParamStore<double> ps;
  auto x = ps.add_values("x", {3}, {1, 2, 3});
  mal::Adadelta<double> opt(ps);
  for (int i = 0; i < 5; ++i) {
    ps.zero_grad();
    opt.step(ps);
  }
  EXPECT_EQ(x.to_vector(), (std::vector<double>{1, 2, 3}));
}

TEST(Adadelta, StepOpposesGradientAndAccumulatorsStayNonnegative) {
  mal::ParamStore<double> ps;
  auto x = ps.add_values("x", {6}, std::vector<double>(6, 0.0));
  mal::Adadelta<double> opt(ps);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int step = 0; step < 200; ++step) {
    ps.zero_grad();
    auto before = x.to_vector();
    auto g = x.mutable_grad();
    for (auto& v : g) v = n(rng);
    const std::vector<double> gs(g.begin(), g.end());
    opt.step(ps);
    for (std::size_t i = 0; i < 6; ++i) {
      const double delta = x[i] - before[i];
      if (gs[i] != 0.0) {
        EXPECT_EQ(std::signbit(delta), !std::signbit(gs[i]));
      }
      EXPECT_GE(opt.sq_grad()[0][i], 0.0);
      EXPECT_GE(opt.sq_delta()[0][i], 0.0);
    }
  }
}

TEST(Adadelta, NonFiniteGradientRejectedBeforeAnyUpdate) {
  mal::ParamStore<double> ps;
  auto a = ps.add_values("a", {1}, {1.0});
  auto b = ps.add_values("b", {1}, {1.0});
  mal::Adadelta<double> opt(ps);
  a.mutable_grad()[0] = 1.0;
  b.mutable_grad()[0] = std::nan("");
  try {
    opt.step(ps);
    FAIL();
  } catch (const mal::NonFiniteError& e) {
    EXPECT_NE(std::string(e.what()).find("b"), std::string::npos);
  }
  EXPECT_EQ(a[0], 1.0);
}

TEST(ClipGlobalNorm, RescalesToMaximum) {
  mal::ParamStore<double> ps;
  auto a = ps.add_values("a", {2}, {0, 0});
  auto b = ps.add_values("b", {1}, {0});
  a.mutable_grad()[0] = 3.0;
  a.mutable_grad()[1] = 0.0;
  b.mutable_grad()[0] = 4.0;
  EXPECT_DOUBLE_EQ(mal::clip_global_norm(ps, 1.0), 5.0);
  EXPECT_NEAR(a.grad()[0], 0.6, 1e-15);
  EXPECT_NEAR(b.grad()[0], 0.8, 1e-15);
  EXPECT_DOUBLE_EQ(mal::clip_global_norm(ps, 10.0), 1.0);
  EXPECT_NEAR(b.grad()[0], 0.8, 1e-15);
}

TEST(Train, ZeroEpochsLeavesParameters) {
  mal::MalModel<float> m({8, 4, 4, true, true, false, 2});
  std::vector<std::vector<float>> before;
  for (auto& e : m.params().entries()) before.push_back(e.tensor.to_vector());
  mal::TrainConfig cfg;
  cfg.epochs = 0;
  EXPECT_TRUE(mal::train(m, {toy_pair()}, cfg).empty());
  for (std::size_t k = 0; k < before.size(); ++k) EXPECT_EQ(m.params().entries()[k].tensor.to_vector(), before[k]);
}

TEST(Train, EmptyCorpusAndBadClipRejected) {
  mal::MalModel<float> m({8, 4, 4, true, true, false, 2});
  EXPECT_THROW(mal::train(m, {}, mal::TrainConfig{}), mal::EmptyInputError);
  mal::TrainConfig cfg;
  cfg.clip_norm = 0.0;
  EXPECT_THROW(mal::train(m, {toy_pair()}, cfg), mal::Error);
}

std::string loss_log(std::uint64_t seed) {
  auto corpus = mal::testing::encode_synthetic(mal::testing::make_synthetic(6, 3));
  mal::MalModel<float> m({41, 8, 8, true, true, false, seed});
  mal::TrainConfig cfg;
  cfg.epochs = 3;
  cfg.seed = seed;
  std::ostringstream out;
  for (const auto& e : mal::train(m, corpus, cfg)) mal::write_loss_line(out, e);
  return out.str();
}

TEST(Train, SameSeedSameLog) {
  EXPECT_EQ(loss_log(5), loss_log(5));
  EXPECT_NE(loss_log(5), loss_log(6));
}

TEST(Train, LossDecreasesOnSmallCorpus) {
  auto corpus = mal::testing::encode_synthetic(mal::testing::make_synthetic(8, 4));
  mal::MalModel<float> m({41, 16, 16, true, true, false, 1});
  mal::TrainConfig cfg;
  cfg.epochs = 15;
  auto log = mal::train(m, corpus, cfg);
  EXPECT_LT(log.back().mean_total, 0.5 * log.front().mean_total);
}

TEST(Train, GraphWeightsGetNoGradientWithoutUnsupervisedContext) {
  auto corpus = mal::testing::encode_synthetic(mal::testing::make_synthetic(4, 2));
  mal::MalModel<float> m({41, 8, 8, true, true, false, 1});
  const auto before = m.graph_weights().to_vector();
  mal::TrainConfig cfg;
  cfg.epochs = 1;
  cfg.switches.use_cu = false;
  mal::TrainHooks hooks;
  hooks.on_update = [&](std::size_t) {
    auto g = m.graph_weights();
    for (float v : g.grad()) EXPECT_EQ(v, 0.0f);
  };
  mal::train(m, corpus, cfg, hooks);
  EXPECT_EQ(m.graph_weights().to_vector(), before);
}

TEST(Train, CheckpointHookFollowsInterval) {
  auto corpus = mal::testing::encode_synthetic(mal::testing::make_synthetic(2, 2));
  mal::MalModel<float> m({41, 4, 4, true, true, false, 1});
  mal::TrainConfig cfg;
  cfg.epochs = 5;
  cfg.checkpoint_interval = 2;
  std::vector<std::size_t> at;
  mal::TrainHooks hooks;
  hooks.on_checkpoint = [&](std::size_t e) { at.push_back(e); };
  mal::train(m, corpus, cfg, hooks);
  EXPECT_EQ(at, (std::vector<std::size_t>{2, 4}));
}

}  // namespace
