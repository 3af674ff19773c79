#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "helpers.hpp"
#include "rert/refindex.hpp"

namespace rert {
namespace {

// Bank with one expert per class-identity map so labels are easy to control:
// prediction = argmax of the first two features under any routing.
ExpertBank identity_bank(std::size_t experts) {
  std::vector<Expert> ex(experts, Expert{{1, 0, 0, 1}, {0, 0}});
  return ExpertBank(2, 2, std::move(ex));
}

ReferenceEntry entry_at(const ExpertBank& bank, Vec embedding, Vec routing = {0.5, 0.5}) {
  return ReferenceEntry::verified(bank, ModelInput({1.0, 0.0}, 0), TaskEmbedding(std::move(embedding)),
                                  RoutingWeights(std::move(routing)), Label{0});
}

std::vector<std::size_t> brute_knn(const ReferenceSet& set, const Vec& q, std::size_t k) {
  std::vector<std::size_t> idx(set.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> d(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    long double s = 0;
    const auto& e = set[i].embedding().values();
    for (std::size_t j = 0; j < q.size(); ++j) s += (e[j] - q[j]) * (long double)(e[j] - q[j]);
    d[i] = static_cast<double>(s);
  }
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return d[a] < d[b]; });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

TEST(ReferenceEntry, VerifiesCorrectness) {
  const auto bank = identity_bank(2);
  EXPECT_NO_THROW(entry_at(bank, {0.0}));
  EXPECT_THROW(ReferenceEntry::verified(bank, ModelInput({1.0, 0.0}, 0), TaskEmbedding({0.0}),
                                        RoutingWeights::uniform(2), Label{1}),
               InvalidInput);
}

TEST(Seal, Examples) {
  const auto bank = identity_bank(2);
  EXPECT_EQ(seal({entry_at(bank, {0.0})}).size(), 1u);
  EXPECT_THROW(seal({}), InvalidInput);
  EXPECT_THROW(seal({entry_at(bank, {0.0}), entry_at(bank, {0.0, 1.0})}), InvalidInput);
  const auto bank3 = identity_bank(3);
  EXPECT_THROW(seal({entry_at(bank, {0.0}), entry_at(bank3, {0.0}, {0.2, 0.3, 0.5})}),
               InvalidInput);
}

TEST(Seal, KeepsInsertionOrder) {
  const auto bank = identity_bank(2);
  const auto set = seal({entry_at(bank, {3.0}), entry_at(bank, {1.0}), entry_at(bank, {2.0})});
  EXPECT_EQ(set[0].embedding().values()[0], 3.0);
  EXPECT_EQ(set[2].embedding().values()[0], 2.0);
  EXPECT_EQ(set.embedding_dim(), 1u);
  EXPECT_EQ(set.expert_count(), 2u);
}

TEST(Resolve, Examples) {
  const auto bank = identity_bank(2);
  const auto set = seal({entry_at(bank, {3.0}), entry_at(bank, {1.0}), entry_at(bank, {2.0})});
  const Vec q{0.0};
  const auto knn = resolve(set, q, NeighborhoodSpec::knn(2), KernelSpec::gaussian());
  EXPECT_EQ(knn.indices, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(knn.distances, (Vec{1.0, 2.0}));
  const auto ball = resolve(set, q, NeighborhoodSpec::epsilon_ball(1.5), KernelSpec::gaussian());
  EXPECT_EQ(ball.indices, (std::vector<std::size_t>{1}));
  const auto empty = resolve(set, q, NeighborhoodSpec::epsilon_ball(0.5), KernelSpec::gaussian());
  EXPECT_TRUE(empty.empty());
}

TEST(Resolve, RejectsBadQueries) {
  const auto bank = identity_bank(2);
  const auto set = seal({entry_at(bank, {3.0})});
  EXPECT_THROW(resolve(set, Vec{0.0, 1.0}, NeighborhoodSpec::knn(1), KernelSpec::gaussian()),
               InvalidInput);
  EXPECT_THROW(resolve(set, Vec{0.0}, NeighborhoodSpec::knn(0), KernelSpec::gaussian()),
               InvalidInput);
  EXPECT_THROW(resolve(set, Vec{0.0}, NeighborhoodSpec::epsilon_ball(0.0), KernelSpec::gaussian()),
               InvalidInput);
  EXPECT_THROW(resolve(set, Vec{0.5},
                       NeighborhoodSpec::knn(1, NeighborSpace::routing_weight),
                       KernelSpec::gaussian()),
               InvalidInput);
}

TEST(Resolve, MatchesBruteForceScan) {
  auto rng = rng_stream(Seed{41}, 0);
  const auto bank = testing::random_bank(rng, 3, 3, 3);
  const auto set = testing::random_refset(rng, bank, 500, 4);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec q = testing::normal_vec(rng, 4);
    const auto hood = resolve(set, q, NeighborhoodSpec::knn(5), KernelSpec::gaussian());
    ASSERT_EQ(hood.indices, brute_knn(set, q, 5));
    ASSERT_TRUE(std::is_sorted(hood.distances.begin(), hood.distances.end()));
    double s = 0;
    for (double w : hood.kernel_weights) {
      ASSERT_GT(w, 0.0);
      s += w;
    }
    ASSERT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(Resolve, TiesGoToLowerIndex) {
  const auto bank = identity_bank(2);
  // Four points at distance 1 from the origin, one further out.
  const auto set = seal({entry_at(bank, {5.0, 0.0}), entry_at(bank, {0.0, 1.0}),
                         entry_at(bank, {1.0, 0.0}), entry_at(bank, {0.0, -1.0}),
                         entry_at(bank, {-1.0, 0.0})});
  const auto hood = resolve(set, Vec{0.0, 0.0}, NeighborhoodSpec::knn(2), KernelSpec::gaussian());
  EXPECT_EQ(hood.indices, (std::vector<std::size_t>{1, 2}));
  // Duplicates of the same point.
  const auto dup = seal({entry_at(bank, {1.0}), entry_at(bank, {1.0}), entry_at(bank, {1.0})});
  EXPECT_EQ(resolve(dup, Vec{0.0}, NeighborhoodSpec::knn(2), KernelSpec::gaussian()).indices,
            (std::vector<std::size_t>{0, 1}));
}

TEST(Resolve, AllZeroDistancesGiveUniformWeights) {
  const auto bank = identity_bank(2);
  const auto dup = seal({entry_at(bank, {1.0}), entry_at(bank, {1.0})});
  const auto hood = resolve(dup, Vec{1.0}, NeighborhoodSpec::knn(2), KernelSpec::gaussian());
  EXPECT_EQ(hood.kernel_weights, (Vec{0.5, 0.5}));
}

TEST(Resolve, KnnOfAllEqualsWidestBall) {
  auto rng = rng_stream(Seed{42}, 0);
  const auto bank = testing::random_bank(rng, 3, 3, 3);
  const auto set = testing::random_refset(rng, bank, 60, 3);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec q = testing::normal_vec(rng, 3);
    const auto all = resolve(set, q, NeighborhoodSpec::knn(60), KernelSpec::gaussian());
    const auto ball =
        resolve(set, q, NeighborhoodSpec::epsilon_ball(all.distances.back()), KernelSpec::gaussian());
    ASSERT_EQ(all.size(), 60u);
    std::vector<std::size_t> a = all.indices, b = ball.indices;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    ASSERT_EQ(a, b);
  }
}

TEST(Resolve, WeightsFollowPointsUnderReordering) {
  auto rng = rng_stream(Seed{43}, 0);
  const auto bank = testing::random_bank(rng, 3, 3, 3);
  const auto set = testing::random_refset(rng, bank, 40, 3);
  std::vector<ReferenceEntry> reversed(set.entries().rbegin(), set.entries().rend());
  const auto rset = seal(std::move(reversed));
  const Vec q = testing::normal_vec(rng, 3);
  const auto a = resolve(set, q, NeighborhoodSpec::knn(6), KernelSpec::gaussian());
  const auto b = resolve(rset, q, NeighborhoodSpec::knn(6), KernelSpec::gaussian());
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a.indices[i], set.size() - 1 - b.indices[i]);
    ASSERT_NEAR(a.kernel_weights[i], b.kernel_weights[i], 1e-15);
  }
}

TEST(Resolve, RoutingSpaceUsesRoutingWeights) {
  const auto bank = identity_bank(2);
  const auto set = seal({entry_at(bank, {0.0}, {0.9, 0.1}), entry_at(bank, {0.0}, {0.2, 0.8})});
  const auto hood = resolve(set, Vec{0.25, 0.75},
                            NeighborhoodSpec::knn(1, NeighborSpace::routing_weight),
                            KernelSpec::gaussian());
  EXPECT_EQ(hood.indices, (std::vector<std::size_t>{1}));
}

}  // namespace
}  // namespace rert
