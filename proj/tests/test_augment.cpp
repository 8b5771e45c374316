#include <gtest/gtest.h>

#include <random>
#include <set>

#include "oracles.hpp"
#include "pfp/augment.hpp"
#include "pfp/errors.hpp"
#include "pfp/oracle.hpp"

using namespace pfp;

namespace {

DomainSpec two_feature_domain() {
  return DomainSpec(FeatureSpace({FeatureSpec::continuous("flavor", 0, 20), FeatureSpec::continuous("zest", 0, 20)}),
                    {-1, 0, 1}, DomainLabel::kCustom);
}

PreferenceRecord paper_record() {
  PreferenceRecord r;
  r.a1 = Action{0, 1};
  r.a2 = Action{10, 2};
  r.label = ExamplePref::kFirst;
  r.mask = RelevanceMask({true, false});
  return r;
}

PreferenceRecord masked(Action a1, Action a2, std::vector<bool> mask, ExamplePref label = ExamplePref::kFirst) {
  PreferenceRecord r;
  r.a1 = std::move(a1);
  r.a2 = std::move(a2);
  r.label = label;
  r.mask = RelevanceMask(std::move(mask));
  return r;
}

}  // namespace

TEST(MaskIrrelevant, AllTrueLeavesActions) {
  auto r = paper_record();
  r.mask = RelevanceMask::all(2, true);
  const auto [m1, m2] = mask_irrelevant(r);
  EXPECT_EQ(m1, (MaskedAction{0.0, 1.0}));
  EXPECT_EQ(m2, (MaskedAction{10.0, 2.0}));
}

TEST(MaskIrrelevant, PaperExample) {
  const auto [m1, m2] = mask_irrelevant(paper_record());
  EXPECT_EQ(m1, (MaskedAction{0.0, std::nullopt}));
  EXPECT_EQ(m2, (MaskedAction{10.0, std::nullopt}));
}

TEST(MaskIrrelevant, AllFalseMasksEverything) {
  auto r = paper_record();
  r.mask = RelevanceMask::all(2, false);
  const auto [m1, m2] = mask_irrelevant(r);
  EXPECT_EQ(m1, (MaskedAction{std::nullopt, std::nullopt}));
  EXPECT_EQ(m2, (MaskedAction{std::nullopt, std::nullopt}));
}

TEST(MaskIrrelevant, MissingMaskIsPreconditionViolation) {
  auto r = paper_record();
  r.mask.reset();
  EXPECT_THROW(mask_irrelevant(r), PreconditionViolation);
}

TEST(FeatCombos, ThreeDifferingGiveSevenOrderedSubsets) {
  const auto r = masked(Action{1, 1, 1, 1, 0, 0}, Action{1, -1, -1, -1, 0, 0}, {true, false, false, false, true, true});
  const auto [m1, m2] = mask_irrelevant(r);
  const auto combos = feat_combos(m1, m2, r.a1, r.a2, AugmentMode::kSeenValues);
  ASSERT_EQ(combos.size(), 7u);
  const std::vector<std::vector<std::size_t>> expected{{1}, {2}, {3}, {1, 2}, {1, 3}, {2, 3}, {1, 2, 3}};
  for (std::size_t i = 0; i < 7; ++i) EXPECT_EQ(combos[i].indices, expected[i]);
}

TEST(FeatCombos, EqualIrrelevantCoordinatesGiveNothing) {
  const auto r = masked(Action{1, 0, 0}, Action{-1, 0, 0}, {true, false, false});
  const auto [m1, m2] = mask_irrelevant(r);
  EXPECT_TRUE(feat_combos(m1, m2, r.a1, r.a2, AugmentMode::kSeenValues).empty());
}

TEST(FeatCombos, PaperExampleSingleSubset) {
  const auto r = paper_record();
  const auto [m1, m2] = mask_irrelevant(r);
  const auto combos = feat_combos(m1, m2, r.a1, r.a2, AugmentMode::kSeenValues);
  ASSERT_EQ(combos.size(), 1u);
  EXPECT_EQ(combos[0].indices, (std::vector<std::size_t>{1}));
  EXPECT_EQ(combos[0].values, (std::vector<std::pair<double, double>>{{2.0, 1.0}}));
}

TEST(FeatCombos, AnyValueRejectsContinuous) {
  const auto d = two_feature_domain();
  const auto r = paper_record();
  const auto [m1, m2] = mask_irrelevant(r);
  EXPECT_THROW(feat_combos(m1, m2, r.a1, r.a2, AugmentMode::kAnyValue, &d.feature_space), UnsupportedMode);
  PreferenceDataset data(d.feature_space);
  data.add(r);
  EXPECT_THROW(augment(data, AugmentMode::kAnyValue), UnsupportedMode);
}

TEST(FeatCombos, AnyValueEnumeratesEveryAssignment) {
  const auto d = make_mushroom_domain();
  const auto r = masked(Action{1, 0, -1, 1, 0, 1}, Action{-1, 0, 1, 1, 1, 1}, {true, true, true, true, false, false});
  const auto [m1, m2] = mask_irrelevant(r);
  const auto combos = feat_combos(m1, m2, r.a1, r.a2, AugmentMode::kAnyValue, &d.feature_space);
  // Reference: every (v1, v2) on features 4 and 5, minus the original and
  // minus assignments that make the two actions identical (never, since
  // feature 0 differs).
  std::set<std::pair<Action, Action>> expect;
  const std::vector<double> enc{-1, 0, 1};
  for (double p : enc)
    for (double q : enc)
      for (double s : enc)
        for (double t : enc) {
          Action b1 = r.a1, b2 = r.a2;
          b1[4] = p, b2[4] = q, b1[5] = s, b2[5] = t;
          if (b1 == r.a1 && b2 == r.a2) continue;
          expect.emplace(b1, b2);
        }
  std::set<std::pair<Action, Action>> got;
  for (const auto& c : combos) got.insert(apply_combo(r.a1, r.a2, c));
  EXPECT_EQ(combos.size(), 80u);
  EXPECT_EQ(got, expect);
  for (std::size_t i = 1; i < combos.size(); ++i) EXPECT_LE(combos[i - 1].indices.size(), combos[i].indices.size());
}

TEST(FeatCombos, AnyValueDropsIdenticalPairs) {
  const auto d = make_mushroom_domain();
  const auto r = masked(Action{0, 0, 0, 0, 0, 1}, Action{0, 0, 0, 0, 0, -1}, {true, true, true, true, true, false});
  const auto [m1, m2] = mask_irrelevant(r);
  const auto combos = feat_combos(m1, m2, r.a1, r.a2, AugmentMode::kAnyValue, &d.feature_space);
  // 9 assignments, minus the original, minus the 3 with v1 == v2.
  EXPECT_EQ(combos.size(), 5u);
  for (const auto& c : combos) {
    const auto [b1, b2] = apply_combo(r.a1, r.a2, c);
    EXPECT_NE(b1, b2);
  }
}

TEST(Augment, PaperExampleAddsSwappedRecord) {
  PreferenceDataset d(two_feature_domain().feature_space);
  d.add(paper_record());
  const auto out = augment(d);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0], d[0]);
  EXPECT_EQ(out[1].a1, (Action{0, 2}));
  EXPECT_EQ(out[1].a2, (Action{10, 1}));
  EXPECT_EQ(out[1].label, ExamplePref::kFirst);
  EXPECT_TRUE(out[1].synthesized);
  EXPECT_FALSE(out[1].mask.has_value());
  EXPECT_FALSE(out[1].utterance.has_value());
}

TEST(Augment, UnmaskedDatasetPassesThrough) {
  PreferenceDataset d(make_mushroom_domain().feature_space);
  auto r = masked(Action{1, 1, 1, 1, 1, 1}, Action{-1, -1, -1, -1, -1, -1}, std::vector<bool>(6, false));
  r.mask.reset();
  d.add(r);
  d.add(r);
  EXPECT_EQ(augment(d), d);
}

TEST(Augment, MushroomThreeIrrelevantDiffering) {
  PreferenceDataset d(make_mushroom_domain().feature_space);
  auto r = masked(Action{1, 0, -1, 1, 0, -1}, Action{-1, 0, 1, 0, 1, 1}, {true, true, true, false, false, false});
  r.feature_labels = {{0, FeaturePref::kFirst}, {2, FeaturePref::kSecond}};
  r.utterance = "texture color shape";
  d.add(r);
  const auto out = augment(d);
  EXPECT_EQ(out.size(), d.size() + 7);
  EXPECT_EQ(out.synthesized_count(), 7u);
  const auto ref = oracle::brute_force_swaps(r);
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_EQ(out[1 + i].a1, ref[i].first);
    EXPECT_EQ(out[1 + i].a2, ref[i].second);
    EXPECT_EQ(out[1 + i].feature_labels, r.feature_labels);
  }
}

TEST(Augment, FeatureLabelsCopiedOnlyForRelevantFeatures) {
  PreferenceDataset d(make_mushroom_domain().feature_space);
  auto r = masked(Action{1, 0, 0, 0, 0, 1}, Action{-1, 0, 0, 0, 0, -1}, {true, false, false, false, false, false});
  r.feature_labels = {{0, FeaturePref::kFirst}, {5, FeaturePref::kFirst}};
  d.add(r);
  const auto out = augment(d);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[1].feature_labels, (std::vector<FeatureLabel>{{0, FeaturePref::kFirst}}));
}

TEST(Augment, DeduplicatesAgainstExistingRecords) {
  PreferenceDataset d(two_feature_domain().feature_space);
  d.add(paper_record());
  PreferenceRecord existing;
  existing.a1 = Action{0, 2};
  existing.a2 = Action{10, 1};
  existing.label = ExamplePref::kFirst;
  d.add(existing);
  EXPECT_EQ(augment(d).size(), 2u);
  // A second masked record that would synthesize the same pair adds nothing.
  PreferenceDataset e(two_feature_domain().feature_space);
  e.add(paper_record());
  e.add(masked(Action{0, 2}, Action{10, 1}, {true, false}));
  const auto out = augment(e);
  EXPECT_EQ(out.size(), 2u);
  EXPECT_EQ(out.synthesized_count(), 0u);
}

TEST(Augment, MatchesBruteForceOnRandomDatasets) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 200; ++t) {
    const auto dom = oracle::random_discrete_domain(rng, 2 + rng() % 5);
    ContextSampler s(2, rng());
    PreferenceDataset d(dom.feature_space);
    const std::size_t m = 1 + rng() % 6;
    for (std::size_t i = 0; i < m; ++i) {
      const auto c = sample_context(dom, s);
      std::vector<bool> mask(dom.n());
      for (std::size_t j = 0; j < dom.n(); ++j) mask[j] = rng() % 2;
      auto r = masked(c.actions[0], c.actions[1], mask, static_cast<ExamplePref>(static_cast<int>(rng() % 3) - 1));
      if (rng() % 4 == 0) r.mask.reset();
      d.add(r);
    }
    const auto out = augment(d);
    const auto ref = oracle::brute_force_augment(d);
    ASSERT_EQ(out.size(), ref.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      EXPECT_EQ(std::make_tuple(out[i].a1, out[i].a2, out[i].label), ref[i]);
      EXPECT_EQ(out[i].synthesized, i >= d.size());
    }
  }
}

// Invariants -----------------------------------------------------------------

TEST(AugmentProperties, SoundSupersetInvolutionIdempotence) {
  const auto dom = make_mushroom_domain();
  ContextSampler s(2, 5);
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const auto gt = sample_reward(dom, 1 + seed % 6, seed);
    const auto c = sample_context(dom, s);
    PreferenceDataset d(dom.feature_space);
    d.add(answer_query(gt, c.actions[0], c.actions[1], Condition::kPragFp, OracleConfig{}));
    const auto out = augment(d);

    ASSERT_GE(out.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) EXPECT_EQ(out[i], d[i]);

    const auto& src = d[0];
    std::size_t k = 0;
    for (std::size_t j = 0; j < 6; ++j) k += !(*src.mask)[j] && src.a1[j] != src.a2[j];
    EXPECT_EQ(out.synthesized_count(), (std::size_t{1} << k) - 1);

    for (std::size_t i = d.size(); i < out.size(); ++i) {
      const auto& syn = out[i];
      // soundness
      const double diff = true_reward(gt, syn.a1) - true_reward(gt, syn.a2);
      EXPECT_EQ(static_cast<int>(syn.label), (diff > 0) - (diff < 0));
      // swapped coordinates are a non-empty subset of the mask-false set
      std::vector<std::size_t> swapped;
      for (std::size_t j = 0; j < 6; ++j) {
        if (syn.a1[j] == src.a1[j] && syn.a2[j] == src.a2[j]) continue;
        EXPECT_FALSE((*src.mask)[j]);
        EXPECT_EQ(syn.a1[j], src.a2[j]);
        EXPECT_EQ(syn.a2[j], src.a1[j]);
        swapped.push_back(j);
      }
      EXPECT_FALSE(swapped.empty());
      // involution
      Action b1 = syn.a1, b2 = syn.a2;
      for (std::size_t j : swapped) std::swap(b1[j], b2[j]);
      EXPECT_EQ(b1, src.a1);
      EXPECT_EQ(b2, src.a2);
    }
    EXPECT_EQ(augment(out), out);
  }
}

TEST(AugmentProperties, AnyValueLabelsAreSound) {
  const auto dom = make_mushroom_domain();
  ContextSampler s(2, 6);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto gt = sample_reward(dom, 4 + seed % 3, seed);
    const auto c = sample_context(dom, s);
    PreferenceDataset d(dom.feature_space);
    d.add(answer_query(gt, c.actions[0], c.actions[1], Condition::kPragRlhf, OracleConfig{}));
    const auto out = augment(d, AugmentMode::kAnyValue);
    for (std::size_t i = 1; i < out.size(); ++i) {
      const double diff = true_reward(gt, out[i].a1) - true_reward(gt, out[i].a2);
      EXPECT_EQ(static_cast<int>(out[i].label), (diff > 0) - (diff < 0));
    }
  }
}

TEST(AugmentMode, Parse) {
  EXPECT_EQ(parse_augment_mode("seen"), AugmentMode::kSeenValues);
  EXPECT_EQ(parse_augment_mode("any"), AugmentMode::kAnyValue);
  EXPECT_THROW(parse_augment_mode("all"), std::invalid_argument);
}
