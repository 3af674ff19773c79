#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "rert/core.hpp"

namespace rert {
namespace {

using testing::on_simplex;
using testing::random_simplex;

// Tries every support set S and keeps the one satisfying the KKT conditions
// of min ||x - v||^2 on the simplex: x_i = v_i - tau on S, 0 elsewhere,
// x_i > 0 on S and v_j <= tau off S.
Vec kkt_projection(const Vec& v) {
  const std::size_t n = v.size();
  for (std::size_t mask = 1; mask < (std::size_t{1} << n); ++mask) {
    long double sum = 0;
    std::size_t size = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask >> i & 1) {
        sum += v[i];
        ++size;
      }
    }
    const long double tau = (sum - 1.0L) / static_cast<long double>(size);
    bool ok = true;
    Vec x(n, 0.0);
    for (std::size_t i = 0; i < n && ok; ++i) {
      if (mask >> i & 1) {
        ok = v[i] - tau > 0;
        x[i] = static_cast<double>(v[i] - tau);
      } else {
        ok = v[i] <= tau;
      }
    }
    if (ok) return x;
  }
  ADD_FAILURE() << "no KKT support found";
  return {};
}

TEST(RoutingWeights, AcceptsSimplexPoints) {
  EXPECT_NO_THROW(RoutingWeights({0.25, 0.75}));
  EXPECT_NO_THROW(RoutingWeights({0.5, 0.5 + 1e-10}));
  EXPECT_EQ(RoutingWeights::uniform(4)[2], 0.25);
  EXPECT_EQ(RoutingWeights::one_hot(3, 1).values(), (Vec{0, 1, 0}));
}

TEST(RoutingWeights, RejectsInvalid) {
  EXPECT_THROW(RoutingWeights({1.0}), InvalidInput);
  EXPECT_THROW(RoutingWeights({0.6, 0.6}), InvalidInput);
  EXPECT_THROW(RoutingWeights({1.1, -0.1}), InvalidInput);
  EXPECT_THROW(RoutingWeights({std::nan(""), 1.0}), InvalidInput);
  EXPECT_THROW(RoutingWeights({std::numeric_limits<double>::infinity(), 0.0}), InvalidInput);
}

TEST(RoutingWeights, Top1PrefersLowerIndex) {
  EXPECT_EQ(RoutingWeights({0.4, 0.4, 0.2}).top1(), 0u);
  EXPECT_EQ(RoutingWeights({0.2, 0.4, 0.4}).top1(), 1u);
}

TEST(TypesRejectNonFinite, EmbeddingAndInput) {
  EXPECT_THROW(TaskEmbedding({1.0, std::nan("")}), InvalidInput);
  EXPECT_THROW(TaskEmbedding(Vec{}), InvalidInput);
  EXPECT_THROW(ModelInput({std::numeric_limits<double>::infinity()}, 0), InvalidInput);
}

TEST(SimplexProject, Examples) {
  EXPECT_EQ(simplex_project(Vec{0.6, 0.6}).values(), (Vec{0.5, 0.5}));
  EXPECT_EQ(simplex_project(Vec{1, 0, 0}).values(), (Vec{1, 0, 0}));
  const Vec v{0.9, -0.3, 0.2};
  const Vec expected = kkt_projection(v);
  const auto got = simplex_project(v);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(got[i], expected[i], 1e-15);
}

TEST(SimplexProject, RejectsBadInput) {
  EXPECT_THROW(simplex_project(Vec{1.0, std::nan("")}), InvalidInput);
  EXPECT_THROW(simplex_project(Vec{1.0}), InvalidInput);
}

TEST(SimplexProject, MatchesKktOracle) {
  auto rng = rng_stream(Seed{11}, 0);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 2 + rng.below(6);
    const Vec v = testing::normal_vec(rng, n, 1.5);
    const Vec expected = kkt_projection(v);
    const auto got = simplex_project(v);
    for (std::size_t i = 0; i < n; ++i) ASSERT_NEAR(got[i], expected[i], 1e-12);
  }
}

TEST(SimplexProject, Idempotent) {
  auto rng = rng_stream(Seed{12}, 0);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto once = simplex_project(testing::normal_vec(rng, 5, 2.0));
    const auto twice = simplex_project(once.values());
    ASSERT_EQ(once, twice);
  }
}

TEST(SimplexProject, UnchangedOnSimplex) {
  auto rng = rng_stream(Seed{13}, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto r = random_simplex(rng, 4);
    const auto p = simplex_project(r.values());
    for (std::size_t i = 0; i < 4; ++i) ASSERT_NEAR(p[i], r[i], 1e-12);
  }
}

TEST(SimplexProject, NearestAmongSampledSimplexPoints) {
  auto rng = rng_stream(Seed{14}, 0);
  for (int trial = 0; trial < 10; ++trial) {
    const Vec v = testing::normal_vec(rng, 4, 1.0);
    const auto p = simplex_project(v);
    const double best = [&] {
      double d = 0;
      for (std::size_t i = 0; i < 4; ++i) d += (p[i] - v[i]) * (p[i] - v[i]);
      return d;
    }();
    for (int k = 0; k < 10000; ++k) {
      const auto q = random_simplex(rng, 4);
      double d = 0;
      for (std::size_t i = 0; i < 4; ++i) d += (q[i] - v[i]) * (q[i] - v[i]);
      ASSERT_GE(d, best - 1e-12);
    }
  }
}

TEST(Interpolate, Examples) {
  EXPECT_EQ(interpolate(RoutingWeights({1, 0}), RoutingWeights({0, 1}), 0.5).values(),
            (Vec{0.5, 0.5}));
  const RoutingWeights a({0.3, 0.7});
  const RoutingWeights b({0.6, 0.4});
  EXPECT_EQ(interpolate(a, b, 1.0), a);
  EXPECT_EQ(interpolate(a, b, 0.0), b);
}

TEST(Interpolate, MatchesHighPrecision) {
  const RoutingWeights a({0.2, 0.3, 0.5});
  const RoutingWeights b({0.5, 0.25, 0.25});
  const auto got = interpolate(a, b, 0.25);
  for (std::size_t i = 0; i < 3; ++i) {
    const long double want = 0.25L * a[i] + 0.75L * b[i];
    EXPECT_NEAR(got[i], static_cast<double>(want), 1e-15);
  }
}

TEST(Interpolate, RejectsBadAlphaAndMismatch) {
  const RoutingWeights a({0.3, 0.7});
  EXPECT_THROW(interpolate(a, a, -0.1), InvalidInput);
  EXPECT_THROW(interpolate(a, a, 1.5), InvalidInput);
  EXPECT_THROW(interpolate(a, RoutingWeights::uniform(3), 0.5), InvalidInput);
}

TEST(Interpolate, StaysOnSimplex) {
  auto rng = rng_stream(Seed{15}, 0);
  for (int trial = 0; trial < 5000; ++trial) {
    const auto a = random_simplex(rng, 6);
    const auto b = random_simplex(rng, 6);
    ASSERT_TRUE(on_simplex(interpolate(a, b, rng.uniform())));
  }
}

TEST(RngStream, Deterministic) {
  auto a = rng_stream(Seed{7}, 0);
  auto b = rng_stream(Seed{7}, 0);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(RngStream, StreamsAndSeedsDiffer) {
  auto a = rng_stream(Seed{7}, 0);
  auto b = rng_stream(Seed{7}, 1);
  auto c = rng_stream(Seed{8}, 0);
  int same_ab = 0, same_ac = 0;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    same_ab += x == b.next_u64();
    same_ac += x == c.next_u64();
  }
  EXPECT_LT(same_ab, 100);
  EXPECT_LT(same_ac, 100);
}

TEST(RngStream, DistributionsInRange) {
  auto rng = rng_stream(Seed{3}, 9);
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_LT(rng.below(7), 7u);
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.02);
}

}  // namespace
}  // namespace rert
