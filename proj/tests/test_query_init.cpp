#include <gtest/gtest.h>

#include "helpers.hpp"
#include "omnitube/query_init.hpp"
#include "oracles.hpp"

using namespace omnitube;
using namespace testing_helpers;

TEST(Similarity, CosineAndDot) {
  const std::vector<double> a{1, 0}, b{1, 1}, z{0, 0};
  EXPECT_NEAR(similarity(a, b, Similarity::cosine), 1 / std::sqrt(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(similarity(a, b, Similarity::dot), 1.0);
  EXPECT_EQ(similarity(a, z, Similarity::cosine), 0.0);
}

TEST(TopM, PicksMostSimilarRowsBestFirst) {
  const Tensor tokens(Shape{4, 2}, std::vector<double>{0, 1, 1, 0, 0.9, 0.1, -1, 0});
  const std::vector<double> ref{1, 0};
  EXPECT_EQ(top_m_indices(tokens, ref, 2, Similarity::cosine), (std::vector<std::size_t>{1, 2}));
  const auto mean = top_m_mean(tokens, ref, 2, Similarity::cosine);
  EXPECT_DOUBLE_EQ(mean[0], 0.95);
  EXPECT_DOUBLE_EQ(mean[1], 0.05);
}

TEST(TopM, TiesGoToLowerIndex) {
  const Tensor tokens(Shape{3, 1}, std::vector<double>{2, 2, 2});
  EXPECT_EQ(top_m_indices(tokens, std::vector<double>{1}, 2, Similarity::dot), (std::vector<std::size_t>{0, 1}));
}

TEST(TopM, AgreesWithRankOracle) {
  Rng rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.index(20), m = 1 + rng.index(n);
    Tensor tokens = random_tensor(rng, {n, 4});
    // repeated rows force ties
    if (n > 2 && trial % 3 == 0) std::copy(tokens.row(0).begin(), tokens.row(0).end(), tokens.row(n - 1).begin());
    std::vector<double> ref(4);
    for (auto& v : ref) v = rng.normal();
    for (auto kind : {Similarity::cosine, Similarity::dot}) {
      std::vector<double> scores(n);
      for (std::size_t i = 0; i < n; ++i) scores[i] = similarity(tokens.row(i), ref, kind);
      auto got = top_m_indices(tokens, ref, m, kind);
      std::sort(got.begin(), got.end());
      ASSERT_EQ(got, oracle::top_m_by_rank(scores, m));
    }
  }
}

TEST(TopM, MeanOfAllTokensWhenMEqualsCount) {
  Rng rng(2);
  const Tensor tokens = random_tensor(rng, {5, 3});
  const auto mean = top_m_mean(tokens, std::vector<double>{1, 2, 3}, 5, Similarity::cosine);
  for (std::size_t c = 0; c < 3; ++c) {
    double s = 0;
    for (std::size_t r = 0; r < 5; ++r) s += tokens(r, c);
    EXPECT_NEAR(mean[c], s / 5, 1e-15);
  }
}

TEST(TopM, RejectsMAboveTokenCount) {
  const Tensor tokens = Tensor::matrix(4, 2);
  try {
    top_m_indices(tokens, std::vector<double>{1, 0}, 5, Similarity::cosine);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_argument);
  }
  EXPECT_THROW(top_m_indices(tokens, std::vector<double>{1, 0}, 0, Similarity::cosine), Error);
}

TEST(ModelConfig, RejectsTopMAboveGridCells) {
  ModelConfig c = toy_config();
  c.top_m = 17;
  EXPECT_THROW(c.validate(), Error);
  c.top_m = 16;
  EXPECT_NO_THROW(c.validate());
}
