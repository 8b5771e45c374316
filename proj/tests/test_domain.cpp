#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "pfp/domain.hpp"

using namespace pfp;

namespace {

std::vector<std::string> names_of(const DomainSpec& d) {
  std::vector<std::string> out;
  for (const auto& f : d.feature_space) out.push_back(f.name());
  return out;
}

DomainSpec two_feature_continuous() {
  return DomainSpec(FeatureSpace({FeatureSpec::continuous("x", -10, 10), FeatureSpec::continuous("y", -10, 10)}),
                    {-1, 0, 1}, DomainLabel::kCustom);
}

}  // namespace

TEST(MushroomDomain, SixFeaturesThreeValuesEach) {
  const auto d = make_mushroom_domain();
  EXPECT_EQ(d.n(), 6u);
  EXPECT_EQ(names_of(d), (std::vector<std::string>{"texture", "color", "shape", "height", "weight", "smell"}));
  for (const auto& f : d.feature_space) {
    ASSERT_TRUE(f.is_discrete());
    EXPECT_EQ(f.values().size(), 3u);
    EXPECT_EQ(f.encodings(), (std::vector<double>{-1, 0, 1}));
  }
}

TEST(MushroomDomain, SmellHasStinkyPleasantNeutral) {
  const auto d = make_mushroom_domain();
  const auto& smell = d.feature_space[*d.feature_space.index_of("smell")];
  for (const char* v : {"stinky", "pleasant", "neutral"})
    EXPECT_NE(std::find(smell.values().begin(), smell.values().end(), v), smell.values().end()) << v;
}

TEST(MushroomDomain, ThetaValueSet) {
  EXPECT_EQ(make_mushroom_domain().theta_value_set, (std::vector<double>{-2, -1, 0, 1, 2}));
  EXPECT_EQ(make_mushroom_domain().label, DomainLabel::kMushroom);
}

TEST(FlightDomain, EightFeaturesAirlinesDiscrete) {
  const auto d = make_flight_domain();
  EXPECT_EQ(d.n(), 8u);
  EXPECT_EQ(names_of(d), (std::vector<std::string>{"arrival-time-before-meeting", "american", "delta", "jetblue",
                                                   "southwest", "longest-stop", "number-of-stops", "price"}));
  for (const char* a : {"american", "delta", "jetblue", "southwest"}) {
    const auto& f = d.feature_space[*d.feature_space.index_of(a)];
    EXPECT_TRUE(f.is_discrete()) << a;
    EXPECT_EQ(f.encodings(), (std::vector<double>{0, 1}));
  }
  for (const char* c : {"arrival-time-before-meeting", "longest-stop", "number-of-stops", "price"}) {
    const auto& f = d.feature_space[*d.feature_space.index_of(c)];
    EXPECT_FALSE(f.is_discrete()) << c;
    EXPECT_EQ(f.lower(), 0.0);
    EXPECT_EQ(f.upper(), 1.0);
  }
  EXPECT_EQ(d.theta_value_set, (std::vector<double>{-1, -0.5, 0, 0.5, 1}));
}

TEST(FeatureSpec, RejectsMalformedSpecs) {
  EXPECT_THROW(FeatureSpec::discrete("a", {"x"}, {0}), std::invalid_argument);
  EXPECT_THROW(FeatureSpec::discrete("a", {"x", "x"}, {0, 1}), std::invalid_argument);
  EXPECT_THROW(FeatureSpec::discrete("a", {"x", "y"}, {0}), std::invalid_argument);
  EXPECT_THROW(FeatureSpec::continuous("a", 1, 1), std::invalid_argument);
  EXPECT_THROW(FeatureSpec::continuous("a", 2, 1), std::invalid_argument);
}

TEST(FeatureSpace, RejectsDuplicateNamesAndEmpty) {
  EXPECT_THROW(FeatureSpace({}), std::invalid_argument);
  EXPECT_THROW(FeatureSpace({FeatureSpec::continuous("a", 0, 1), FeatureSpec::continuous("a", 0, 1)}),
               std::invalid_argument);
}

TEST(DomainSpec, ThetaSetMustContainZero) {
  EXPECT_THROW(DomainSpec(FeatureSpace({FeatureSpec::continuous("a", 0, 1)}), {-1, 1}, DomainLabel::kCustom),
               std::invalid_argument);
}

TEST(Action, ValidityFollowsFeatureSpecs) {
  const auto m = make_mushroom_domain();
  EXPECT_TRUE(is_valid(m.feature_space, Action{-1, 0, 1, 1, 0, -1}));
  EXPECT_FALSE(is_valid(m.feature_space, Action{0.5, 0, 1, 1, 0, -1}));
  EXPECT_FALSE(is_valid(m.feature_space, Action{0, 0, 1}));
  const auto f = make_flight_domain();
  EXPECT_TRUE(is_valid(f.feature_space, Action{0.3, 1, 0, 0, 0, 0.2, 0.9, 1.0}));
  EXPECT_FALSE(is_valid(f.feature_space, Action{1.3, 1, 0, 0, 0, 0.2, 0.9, 1.0}));
  EXPECT_FALSE(is_valid(f.feature_space, Action{0.3, 0.5, 0, 0, 0, 0.2, 0.9, 1.0}));
  EXPECT_THROW(require_valid(f.feature_space, Action{0.3}), std::invalid_argument);
}

class SampleRewardSparsity : public ::testing::TestWithParam<std::size_t> {};

TEST_P(SampleRewardSparsity, ExactlyKNonzeroFromValueSet) {
  const auto d = make_mushroom_domain();
  const std::size_t k = GetParam();
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto gt = sample_reward(d, k, seed);
    ASSERT_EQ(gt.size(), 6u);
    std::size_t nonzero = 0;
    std::vector<std::size_t> expect_relevant;
    for (std::size_t j = 0; j < 6; ++j) {
      const double t = gt.theta()[j];
      EXPECT_NE(std::find(d.theta_value_set.begin(), d.theta_value_set.end(), t), d.theta_value_set.end());
      if (t != 0.0) {
        ++nonzero;
        expect_relevant.push_back(j);
      }
    }
    EXPECT_EQ(nonzero, k);
    EXPECT_EQ(gt.relevant_set(), expect_relevant);
  }
}

INSTANTIATE_TEST_SUITE_P(PaperSparsities, SampleRewardSparsity, ::testing::Values(1u, 3u, 6u));

TEST(SampleReward, OutOfRangeCountThrows) {
  const auto d = make_mushroom_domain();
  EXPECT_THROW(sample_reward(d, 0, 1), std::invalid_argument);
  EXPECT_THROW(sample_reward(d, 7, 1), std::invalid_argument);
}

TEST(SampleReward, DeterministicUnderSeed) {
  const auto d = make_flight_domain();
  EXPECT_EQ(sample_reward(d, 3, 42).theta(), sample_reward(d, 3, 42).theta());
  bool any_diff = false;
  for (std::uint64_t s = 0; s < 20 && !any_diff; ++s)
    any_diff = sample_reward(d, 3, s).theta() != sample_reward(d, 3, s + 100).theta();
  EXPECT_TRUE(any_diff);
}

TEST(SampleReward, RelevantFeaturesRoughlyUniform) {
  const auto d = make_mushroom_domain();
  std::vector<int> hits(6, 0);
  const int trials = 6000;
  for (int s = 0; s < trials; ++s) hits[sample_reward(d, 1, s).relevant_set()[0]]++;
  const double p = 1.0 / 6.0, sigma = std::sqrt(trials * p * (1 - p));
  for (int h : hits) EXPECT_NEAR(h, trials * p, 4 * sigma);
}

TEST(GroundTruthReward, RelevantSetIsNonzeroSet) {
  const GroundTruthReward gt({0, -1.5, 0, 2});
  EXPECT_EQ(gt.relevant_set(), (std::vector<std::size_t>{1, 3}));
}

TEST(TrueReward, Examples) {
  EXPECT_EQ(true_reward(GroundTruthReward(std::vector<double>(6, 0.0)), Action{1, -1, 0, 1, 1, -1}), 0.0);
  EXPECT_EQ(true_reward(GroundTruthReward({2, 0, 0, 0, 0, 0}), Action{1, -1, 0, 1, 1, -1}), 2.0);
  EXPECT_DOUBLE_EQ(true_reward(GroundTruthReward({1, -1}), Action{0.5, 0.25}), 0.25);
}

TEST(TrueReward, DimensionMismatchThrows) {
  EXPECT_THROW(true_reward(GroundTruthReward({1, 2}), Action{1, 2, 3}), std::invalid_argument);
}

TEST(TrueReward, LinearOnCustomDomain) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0, 5);
  for (int t = 0; t < 500; ++t) {
    const GroundTruthReward gt({g(rng), g(rng), g(rng)});
    const Action a{g(rng), g(rng), g(rng)}, b{g(rng), g(rng), g(rng)};
    Action sum{a[0] + b[0], a[1] + b[1], a[2] + b[2]};
    EXPECT_NEAR(true_reward(gt, sum), true_reward(gt, a) + true_reward(gt, b), 1e-9);
  }
}

TEST(TrueReward, IrrelevantCoordinateNeverMatters) {
  const auto d = make_mushroom_domain();
  ContextSampler s(2, 9);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto gt = sample_reward(d, 1 + seed % 6, seed);
    Action a = s.sample_action(d.feature_space);
    const double r = true_reward(gt, a);
    for (std::size_t j = 0; j < 6; ++j) {
      if (gt.theta()[j] != 0.0) continue;
      for (double v : {-1.0, 0.0, 1.0}) {
        Action b = a;
        b[j] = v;
        EXPECT_EQ(true_reward(gt, b), r);
      }
    }
  }
}

TEST(SampleContext, TwoDistinctValidMushroomActions) {
  const auto d = make_mushroom_domain();
  ContextSampler s(2, 1);
  for (int i = 0; i < 500; ++i) {
    const Context c = sample_context(d, s);
    ASSERT_EQ(c.actions.size(), 2u);
    EXPECT_NE(c.actions[0], c.actions[1]);
    for (const auto& a : c.actions) {
      ASSERT_EQ(a.size(), 6u);
      for (double v : a.values) EXPECT_TRUE(v == -1 || v == 0 || v == 1);
    }
  }
}

TEST(SampleContext, FlightActionsWithinBounds) {
  const auto d = make_flight_domain();
  ContextSampler s(3, 5);
  for (int i = 0; i < 200; ++i)
    for (const auto& a : sample_context(d, s).actions) EXPECT_TRUE(is_valid(d.feature_space, a));
}

TEST(SampleContext, SameSeedSameSequence) {
  const auto d = make_mushroom_domain();
  ContextSampler a(2, 77), b(2, 77);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sample_context(d, a).actions, sample_context(d, b).actions);
}

TEST(SampleContext, StreamsAreDistinct) {
  const auto d = make_mushroom_domain();
  ContextSampler train(2, 77, Stream::kContexts), eval(2, 77, Stream::kEval);
  int same = 0;
  for (int i = 0; i < 50; ++i) same += sample_context(d, train).actions == sample_context(d, eval).actions;
  EXPECT_LT(same, 5);
}

TEST(SampleContext, SizeBelowTwoThrows) {
  ContextSampler s(1, 0);
  EXPECT_THROW(sample_context(make_mushroom_domain(), s), std::invalid_argument);
}

// 10,000 coordinates: each encoding count within 3 sigma of N/3.
TEST(SampleContext, EncodingFrequenciesMultinomial) {
  const auto d = make_mushroom_domain();
  ContextSampler s(2, 2024);
  std::map<double, int> counts;
  int n = 0;
  while (n < 10000) {
    for (const auto& a : sample_context(d, s).actions)
      for (double v : a.values) {
        if (n == 10000) break;
        counts[v]++;
        ++n;
      }
  }
  const double p = 1.0 / 3.0, sigma = std::sqrt(10000 * p * (1 - p));
  ASSERT_EQ(counts.size(), 3u);
  for (const auto& [v, c] : counts) EXPECT_NEAR(c, 10000 * p, 3 * sigma) << "encoding " << v;
}

TEST(DomainJson, RoundTripsBuiltins) {
  for (const auto& d : {make_mushroom_domain(), make_flight_domain(), two_feature_continuous()}) {
    const auto j = domain_to_json(d);
    EXPECT_EQ(domain_from_json(j), d);
    EXPECT_TRUE(j.contains("features"));
    EXPECT_TRUE(j.contains("theta_value_set"));
  }
  const auto j = domain_to_json(make_mushroom_domain());
  EXPECT_EQ(j["label"], "mushroom");
  EXPECT_EQ(j["features"][0]["kind"], "discrete");
  EXPECT_EQ(j["features"][0]["values"].size(), 3u);
}

TEST(DomainLabel, ParseAndPrint) {
  EXPECT_EQ(parse_domain_label("flight"), DomainLabel::kFlight);
  EXPECT_EQ(to_string(DomainLabel::kMushroom), "mushroom");
  EXPECT_THROW(parse_domain_label("toaster"), std::invalid_argument);
}
