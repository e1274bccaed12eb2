#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "ofcl/error.hpp"
#include "ofcl/federation.hpp"
#include "ofcl/rng.hpp"
#include "oracles.hpp"

using namespace ofcl;

namespace {

ParameterVector vec(std::vector<double> v) {
  Layout layout{{{v.size(), 1, 0}}};
  return ParameterVector(std::move(v), std::move(layout));
}

std::vector<ParameterVector> random_clients(Rng& rng, std::size_t k, std::size_t n) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<ParameterVector> out;
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<double> v(n);
    for (double& x : v) x = g(rng);
    out.push_back(vec(v));
  }
  return out;
}

}  // namespace

TEST(ShouldCommunicate, Examples) {
  const CommSchedule s{30, 5};
  EXPECT_FALSE(should_communicate(30, s));
  EXPECT_TRUE(should_communicate(35, s));
  EXPECT_FALSE(should_communicate(32, s));
  EXPECT_FALSE(should_communicate(0, s));
  EXPECT_THROW(should_communicate(10, CommSchedule{0, 0}), PreconditionError);
}

TEST(ShouldCommunicate, FireCountMatchesCountingOracle) {
  for (std::size_t burn = 0; burn < 40; burn += 3) {
    for (std::size_t q = 1; q < 9; ++q) {
      for (std::size_t b = 0; b < 120; b += 7) {
        std::size_t fired = 0;
        for (std::size_t bn = 1; bn <= b; ++bn) fired += should_communicate(bn, {burn, q});
        EXPECT_EQ(fired, oracle::count_rounds(b, burn, q));
      }
    }
  }
}

TEST(FedAvg, Examples) {
  const std::vector<ParameterVector> two{vec({1, 2}), vec({3, 4})};
  EXPECT_EQ(fedavg(two).values, (std::vector<double>{2, 3}));
  const std::vector<ParameterVector> one{vec({0.1, -7.3})};
  EXPECT_EQ(fedavg(one), one.front());
  const std::vector<ParameterVector> w{vec({0}), vec({4})};
  EXPECT_EQ(fedavg(w, std::vector<double>{1, 3}).values, std::vector<double>{3});
}

TEST(FedAvg, Errors) {
  const std::vector<ParameterVector> mixed{vec({1, 2}), vec({3})};
  EXPECT_THROW(fedavg(mixed), DimensionError);
  EXPECT_THROW(fedavg(std::span<const ParameterVector>{}), PreconditionError);
  const std::vector<ParameterVector> two{vec({1}), vec({3})};
  EXPECT_THROW(fedavg(two, std::vector<double>{0, 0}), PreconditionError);
  EXPECT_THROW(fedavg(two, std::vector<double>{1}), DimensionError);
}

TEST(FedAvg, PermutationInvariantBitForBit) {
  Rng rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    auto clients = random_clients(rng, 2 + trial % 6, 33);
    std::vector<double> w(clients.size());
    std::uniform_real_distribution<double> u(0.1, 3.0);
    for (double& x : w) x = u(rng);
    const auto ref = fedavg(clients);
    const auto ref_w = fedavg(clients, w);
    std::vector<std::size_t> perm(clients.size());
    std::iota(perm.begin(), perm.end(), 0u);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<ParameterVector> pc;
    std::vector<double> pw;
    for (std::size_t i : perm) {
      pc.push_back(clients[i]);
      pw.push_back(w[i]);
    }
    EXPECT_EQ(fedavg(pc), ref);
    EXPECT_EQ(fedavg(pc, pw), ref_w);
  }
}

TEST(ClassWeighted, Examples) {
  RoundReport r1{{vec({0}), vec({4})}, {{1}, {2}}};
  EXPECT_EQ(class_weighted_avg(r1).values, std::vector<double>{2});
  RoundReport r2{{vec({0}), vec({4})}, {{1, 2}, {2}}};
  EXPECT_EQ(class_weighted_avg(r2).values, std::vector<double>{1});
}

TEST(ClassWeighted, ExcludesSilentClientsAndFallsBack) {
  RoundReport r{{vec({0}), vec({4}), vec({100})}, {{1}, {2}, {}}};
  EXPECT_EQ(class_weighted_avg(r).values, std::vector<double>{2});
  RoundReport none{{vec({0}), vec({4}), vec({100})}, {{}, {}, {}}};
  EXPECT_EQ(class_weighted_avg(none), fedavg(none.params));
  RoundReport bad{{vec({0}), vec({4})}, {{1}}};
  EXPECT_THROW(class_weighted_avg(bad), DimensionError);
}

TEST(ClassWeighted, IdenticalReportsReduceToFedAvgBitForBit) {
  Rng rng(100);
  std::uniform_int_distribution<int> cls(0, 9);
  for (int trial = 0; trial < 100; ++trial) {
    RoundReport r;
    r.params = random_clients(rng, 1 + trial % 7, 1 + trial);
    std::set<ClassId> shared;
    for (int i = 0, n = 1 + trial % 4; i < n; ++i) shared.insert(cls(rng));
    r.classes.assign(r.params.size(), shared);
    EXPECT_EQ(class_weighted_avg(r), fedavg(r.params)) << "trial " << trial;
  }
}

TEST(ClassWeighted, MatchesPerClassDefinition) {
  Rng rng(5);
  std::bernoulli_distribution coin(0.4);
  for (int trial = 0; trial < 100; ++trial) {
    RoundReport r;
    r.params = random_clients(rng, 4, 6);
    for (std::size_t k = 0; k < 4; ++k) {
      std::set<ClassId> s;
      for (ClassId c = 0; c < 5; ++c) {
        if (coin(rng)) s.insert(c);
      }
      r.classes.push_back(s);
    }
    // Direct definition: mean over classes of the mean over contributing clients.
    std::vector<double> want(6, 0.0);
    std::size_t n_classes = 0;
    for (ClassId c = 0; c < 5; ++c) {
      std::vector<std::size_t> who;
      for (std::size_t k = 0; k < 4; ++k) {
        if (r.classes[k].contains(c)) who.push_back(k);
      }
      if (who.empty()) continue;
      ++n_classes;
      for (std::size_t i = 0; i < 6; ++i) {
        double s = 0.0;
        for (std::size_t k : who) s += r.params[k].values[i];
        want[i] += s / who.size();
      }
    }
    const auto got = n_classes ? class_weighted_avg(r) : fedavg(r.params);
    for (std::size_t i = 0; i < 6; ++i) {
      EXPECT_NEAR(got.values[i], n_classes ? want[i] / n_classes : got.values[i], 1e-12);
    }
  }
}

TEST(ClassWeighted, PermutationInvariantInClientsAndClassIds) {
  Rng rng(8);
  std::bernoulli_distribution coin(0.5);
  for (int trial = 0; trial < 50; ++trial) {
    RoundReport r;
    r.params = random_clients(rng, 5, 12);
    for (std::size_t k = 0; k < 5; ++k) {
      std::set<ClassId> s;
      for (ClassId c = 0; c < 6; ++c) {
        if (coin(rng)) s.insert(c);
      }
      r.classes.push_back(s);
    }
    const auto ref = class_weighted_avg(r);

    std::vector<std::size_t> perm{0, 1, 2, 3, 4};
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<ClassId> relabel{0, 1, 2, 3, 4, 5};
    std::shuffle(relabel.begin(), relabel.end(), rng);
    RoundReport p;
    for (std::size_t k : perm) {
      p.params.push_back(r.params[k]);
      std::set<ClassId> s;
      for (ClassId c : r.classes[k]) s.insert(relabel[static_cast<std::size_t>(c)] + 100);
      p.classes.push_back(s);
    }
    EXPECT_EQ(class_weighted_avg(p), ref);
  }
}

TEST(TemporalSmooth, Examples) {
  GlobalState st;
  st.theta_g = vec({0});
  EXPECT_EQ(temporal_smooth(vec({6}), st).values, std::vector<double>{6});
  st.advance(vec({0}));
  EXPECT_EQ(st.round, 1u);
  EXPECT_EQ(temporal_smooth(vec({6}), st).values, std::vector<double>{3});
  st.advance(vec({2.5, -1}));
  EXPECT_EQ(temporal_smooth(vec({2.5, -1}), st).values, (std::vector<double>{2.5, -1}));
  EXPECT_THROW(temporal_smooth(vec({1}), st), DimensionError);
}

TEST(TemporalSmooth, LiesBetweenPrevAndNew) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto pair = random_clients(rng, 2, 20);
    GlobalState st;
    st.advance(pair[0]);
    const auto out = temporal_smooth(pair[1], st);
    for (std::size_t i = 0; i < 20; ++i) {
      EXPECT_GE(out.values[i], std::min(pair[0].values[i], pair[1].values[i]));
      EXPECT_LE(out.values[i], std::max(pair[0].values[i], pair[1].values[i]));
    }
  }
}

TEST(Broadcast, OverwritesParamsAndKeepsOptimizer) {
  Rng rng(1);
  auto ps = random_clients(rng, 4, 5);
  std::vector<LocalModel> clients;
  for (std::size_t k = 0; k < 3; ++k) {
    auto opt = make_optimizer(OptimizerKind::Adam, 0.01, 5);
    opt.adam_t = 7 + k;
    opt.adam_m.assign(5, 0.5);
    clients.push_back({ps[k], opt});
  }
  const auto saved = clients;
  broadcast(ps[3], clients);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(clients[k].params, ps[3]);
    EXPECT_EQ(clients[k].optimizer, saved[k].optimizer);
  }
  broadcast(ps[3], clients, true);
  for (const auto& c : clients) {
    EXPECT_EQ(c.optimizer.adam_t, 0u);
    EXPECT_EQ(c.optimizer.adam_m, std::vector<double>(5, 0.0));
  }
  std::vector<LocalModel> bad{{vec({1, 2}), make_optimizer(OptimizerKind::SGD, 0.1, 2)}};
  EXPECT_THROW(broadcast(ps[0], bad), DimensionError);
}

TEST(Broadcast, OwnParamsLeaveClientUnchanged) {
  std::vector<LocalModel> one{{vec({1.5, -2}), make_optimizer(OptimizerKind::SGD, 0.1, 2)}};
  const auto before = one[0].params;
  broadcast(before, one);
  EXPECT_EQ(one[0].params, before);
}

TEST(Checksum, SensitiveToEveryBit) {
  const auto a = vec({1.0, 2.0});
  auto b = a;
  b.values[1] = std::nextafter(2.0, 3.0);
  EXPECT_EQ(checksum(a), checksum(vec({1.0, 2.0})));
  EXPECT_NE(checksum(a), checksum(b));
}

TEST(Aggregation, NamesRoundTrip) {
  for (auto s : {AggregationStrategy::FedAvg, AggregationStrategy::ClassWeighted,
                 AggregationStrategy::FedProx}) {
    EXPECT_EQ(parse_aggregation(to_string(s)), s);
  }
  EXPECT_THROW(parse_aggregation("median"), PreconditionError);
}
