#include <gtest/gtest.h>

#include <random>

#include "ofcl/error.hpp"
#include "ofcl/metrics.hpp"
#include "ofcl/rng.hpp"

using namespace ofcl;

namespace {

AccuracyMatrix filled(const std::vector<std::vector<double>>& rows) {
  AccuracyMatrix m(rows.size());
  for (std::size_t t = 0; t < rows.size(); ++t) {
    for (std::size_t i = 0; i <= t; ++i) m.record(t, i, rows[t][i]);
  }
  return m;
}

}  // namespace

TEST(AccuracyMatrix, StoreAndLoad) {
  AccuracyMatrix m(3);
  m.record(0, 0, 0.8);
  EXPECT_EQ(m.at(0, 0), 0.8);
  EXPECT_FALSE(m.get(1, 0).has_value());
  EXPECT_THROW(m.at(1, 0), PreconditionError);
  EXPECT_FALSE(m.complete());
}

TEST(AccuracyMatrix, RejectsUpperTriangleAndDuplicates) {
  AccuracyMatrix m(3);
  EXPECT_THROW(m.record(0, 1, 0.5), PreconditionError);
  EXPECT_THROW(m.record(3, 0, 0.5), PreconditionError);
  m.record(0, 0, 0.8);
  EXPECT_THROW(m.record(0, 0, 0.8), PreconditionError);
  EXPECT_THROW(m.record(1, 0, 1.5), PreconditionError);
  EXPECT_THROW(m.record(1, 0, -0.1), PreconditionError);
}

TEST(LastAccuracy, Examples) {
  const auto m = filled({{0.7}, {0.6, 0.9}});
  EXPECT_DOUBLE_EQ(last_accuracy(m), 0.75);
  const std::vector<AccuracyMatrix> one{m};
  EXPECT_DOUBLE_EQ(avg_last_accuracy(one), 0.75);
  const std::vector<AccuracyMatrix> flat{filled({{0.5}, {0.5, 0.5}, {0.5, 0.5, 0.5}})};
  EXPECT_EQ(avg_last_accuracy(flat), 0.5);
  const std::vector<AccuracyMatrix> two{filled({{1.0}, {0.2, 0.2}}), filled({{1.0}, {0.6, 0.6}})};
  EXPECT_NEAR(avg_last_accuracy(two), 0.4, 1e-15);
}

TEST(LastForgetting, Examples) {
  const auto m = filled({{0.8}, {0.6, 0.9}});
  EXPECT_NEAR(last_forgetting(m), 0.2, 1e-15);
  const auto steady = filled({{0.5}, {0.5, 0.4}, {0.5, 0.4, 0.9}});
  EXPECT_EQ(last_forgetting(steady), 0.0);
  // Strictly improving rows give backward transfer, reported as negative.
  const auto improving = filled({{0.5}, {0.6, 0.4}, {0.7, 0.5, 0.9}});
  EXPECT_LT(last_forgetting(improving), 0.0);
  const std::vector<AccuracyMatrix> two{filled({{0.9}, {0.8, 0.5}}), filled({{0.9}, {0.6, 0.5}})};
  EXPECT_NEAR(avg_last_forgetting(two), 0.2, 1e-15);
}

TEST(LastForgetting, NotClampedAndNeedsTwoTasks) {
  const auto backward = filled({{0.4}, {0.9, 0.5}});
  EXPECT_NEAR(last_forgetting(backward), -0.5, 1e-15);
  EXPECT_THROW(last_forgetting(filled({{0.4}})), PreconditionError);
}

// Two clients, three tasks, dyadic entries so every intermediate is exact.
//   client 0: A = (1/4 + 5/8 + 1)/3 = 5/8
//             F = ((3/4 - 1/4) + (7/8 - 5/8))/2 = 3/8
//   client 1: A = (1/2 + 3/4 + 3/4)/3 = 2/3
//             F = ((3/4 - 1/2) + (1/2 - 3/4))/2 = 0   (peak of task 0 is after task 1)
//   A = (5/8 + 2/3)/2 = 31/48, F = 3/16
TEST(Metrics, TwoClientThreeTaskOracle) {
  const std::vector<AccuracyMatrix> clients{
      filled({{0.75}, {0.5, 0.875}, {0.25, 0.625, 1.0}}),
      filled({{0.5}, {0.75, 0.5}, {0.5, 0.75, 0.75}}),
  };
  EXPECT_NEAR(last_accuracy(clients[0]), 5.0 / 8.0, 1e-12);
  EXPECT_NEAR(last_accuracy(clients[1]), 2.0 / 3.0, 1e-12);
  EXPECT_EQ(last_forgetting(clients[0]), 3.0 / 8.0);
  EXPECT_EQ(last_forgetting(clients[1]), 0.0);
  EXPECT_NEAR(avg_last_accuracy(clients), 31.0 / 48.0, 1e-12);
  EXPECT_EQ(avg_last_forgetting(clients), 3.0 / 16.0);

  const std::vector<AccuracyMatrix> swapped{clients[1], clients[0]};
  EXPECT_NEAR(avg_last_accuracy(swapped), 31.0 / 48.0, 1e-12);
  EXPECT_EQ(avg_last_forgetting(swapped), 3.0 / 16.0);
}

TEST(Metrics, ForgettingNonNegativeWhenPeakIsOwnRow) {
  Rng rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t tasks = 2 + trial % 6;
    std::vector<std::vector<double>> rows(tasks);
    for (std::size_t t = 0; t < tasks; ++t) {
      rows[t].resize(t + 1);
      rows[t][t] = u(rng);
    }
    for (std::size_t t = 1; t < tasks; ++t) {
      for (std::size_t i = 0; i < t; ++i) rows[t][i] = u(rng) * rows[i][i];
    }
    const auto m = filled(rows);
    EXPECT_GE(last_forgetting(m), 0.0);
    EXPECT_LE(last_forgetting(m), 1.0);
    EXPECT_GE(last_accuracy(m), 0.0);
    EXPECT_LE(last_accuracy(m), 1.0);
  }
}

TEST(EvaluateModel, ZeroModelPredictsLowestClass) {
  ModelConfig c;
  c.input_dim = 2;
  c.num_classes = 2;
  const auto p = zeros_like(make_layout(c));
  std::vector<LabeledExample> test;
  for (int i = 0; i < 10; ++i) test.push_back({{double(i), -double(i)}, i % 2, 0});
  EXPECT_EQ(evaluate_model(p, c, test), 0.5);
  EXPECT_EQ(predict(p, c, test[3].features), 0u);
  EXPECT_THROW(evaluate_model(p, c, std::span<const LabeledExample>{}), PreconditionError);
}

TEST(EvaluateModel, FittedSeparableSetIsPerfect) {
  ModelConfig c;
  c.input_dim = 2;
  c.hidden_dims = {4};
  c.num_classes = 2;
  c.init_seed = 3;
  Rng rng(1);
  std::normal_distribution<double> g(0.0, 0.3);
  std::vector<LabeledExample> data;
  for (int i = 0; i < 40; ++i) {
    const int label = i % 2;
    const double centre = label ? 2.0 : -2.0;
    data.push_back({{centre + g(rng), centre + g(rng)}, label, static_cast<std::uint64_t>(i)});
  }
  auto p = init_parameters(c);
  auto opt = make_optimizer(OptimizerKind::SGD, 0.1, p.size());
  for (int step = 0; step < 300; ++step) p = optimizer_step(p, loss_and_grad(p, c, data).grad, opt);
  EXPECT_EQ(evaluate_model(p, c, data), 1.0);
  EXPECT_EQ(evaluate_model(p, c, data), evaluate_model(p, c, data));
}
