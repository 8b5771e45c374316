#pragma once
//
// Simulated user. Answers example-level and feature-level comparisons from a
// known linear reward, reports which features are reward-relevant, and can
// optionally make Boltzmann-rational mistakes on the example label.
//

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "pfp/domain.hpp"
#include "pfp/preference.hpp"
#include "pfp/rng.hpp"

namespace pfp {

enum class NoiseKind { kNone, kBoltzmann };

struct OracleConfig {
  NoiseKind noise = NoiseKind::kNone;
  double temperature = 1.0;
  std::uint64_t rng_seed = 0;

  static OracleConfig boltzmann(double temperature, std::uint64_t seed) {
    if (!(temperature > 0.0)) throw std::invalid_argument("Boltzmann temperature must be positive");
    return {NoiseKind::kBoltzmann, temperature, seed};
  }
};

namespace detail {
inline void check_pair(const GroundTruthReward& gt, const Action& a1, const Action& a2) {
  if (a1.size() != gt.size() || a2.size() != gt.size())
    throw std::invalid_argument("action dimension does not match reward dimension " + std::to_string(gt.size()));
}
}  // namespace detail

// `rng` is only consumed under Boltzmann noise (one uniform draw per call).
inline ExamplePref oracle_example_pref(const GroundTruthReward& gt, const Action& a1, const Action& a2,
                                       const OracleConfig& cfg, Rng& rng) {
  detail::check_pair(gt, a1, a2);
  const double r1 = true_reward(gt, a1);
  const double r2 = true_reward(gt, a2);
  if (cfg.noise == NoiseKind::kNone) {
    if (r1 > r2) return ExamplePref::kFirst;
    if (r1 < r2) return ExamplePref::kSecond;
    return ExamplePref::kTie;
  }
  if (!(cfg.temperature > 0.0)) throw std::invalid_argument("Boltzmann temperature must be positive");
  // exp(r1/T) / (exp(r1/T) + exp(r2/T)) without overflow
  const double p_first = 1.0 / (1.0 + std::exp((r2 - r1) / cfg.temperature));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return u(rng) < p_first ? ExamplePref::kFirst : ExamplePref::kSecond;
}

inline ExamplePref oracle_example_pref(const GroundTruthReward& gt, const Action& a1, const Action& a2,
                                       const OracleConfig& cfg) {
  Rng rng = make_rng(Stream::kOracleNoise, cfg.rng_seed);
  return oracle_example_pref(gt, a1, a2, cfg, rng);
}

// Compares the per-feature contributions theta_j * a_j. Feature labels are
// always exact; noise only touches the example label.
inline FeatureLabel oracle_feature_pref(const GroundTruthReward& gt, const Action& a1, const Action& a2,
                                        std::size_t j, const OracleConfig& = {}) {
  detail::check_pair(gt, a1, a2);
  if (j >= gt.size()) throw std::invalid_argument("feature index " + std::to_string(j) + " out of range");
  const double diff = gt.theta()[j] * (a1[j] - a2[j]);
  if (diff > 0.0) return {j, FeaturePref::kFirst};
  if (diff < 0.0) return {j, FeaturePref::kSecond};
  return {j, FeaturePref::kNone};
}

inline RelevanceMask oracle_relevance_mask(const GroundTruthReward& gt) {
  std::vector<bool> m(gt.size(), false);
  for (std::size_t j : gt.relevant_set()) m[j] = true;
  return RelevanceMask(std::move(m));
}

// Assembles the record a simulated user would return for one comparison
// under `condition`. The oracle mask is global (theta_j != 0).
inline PreferenceRecord answer_query(const GroundTruthReward& gt, const Action& a1, const Action& a2,
                                     Condition condition, const OracleConfig& cfg, Rng& rng) {
  PreferenceRecord rec;
  rec.a1 = a1;
  rec.a2 = a2;
  rec.label = oracle_example_pref(gt, a1, a2, cfg, rng);
  const RelevanceMask mask = oracle_relevance_mask(gt);
  switch (condition) {
    case Condition::kRlhf:
      break;
    case Condition::kFp:
      for (std::size_t j = 0; j < gt.size(); ++j) rec.feature_labels.push_back(oracle_feature_pref(gt, a1, a2, j));
      break;
    case Condition::kPragRlhf:
      rec.mask = mask;
      break;
    case Condition::kPragFp:
      for (std::size_t j : mask.true_set()) rec.feature_labels.push_back(oracle_feature_pref(gt, a1, a2, j));
      rec.mask = mask;
      break;
  }
  return rec;
}

inline PreferenceRecord answer_query(const GroundTruthReward& gt, const Action& a1, const Action& a2,
                                     Condition condition, const OracleConfig& cfg) {
  Rng rng = make_rng(Stream::kOracleNoise, cfg.rng_seed);
  return answer_query(gt, a1, a2, condition, cfg, rng);
}

// Stateful wrapper for sequences of queries: owns one noise stream so that a
// run of answers is a pure function of (gt, inputs, seed).
class SimulatedUser {
 public:
  SimulatedUser(GroundTruthReward gt, OracleConfig cfg)
      : gt_(std::move(gt)), cfg_(cfg), rng_(make_rng(Stream::kOracleNoise, cfg.rng_seed)) {}

  const GroundTruthReward& reward() const noexcept { return gt_; }

  PreferenceRecord answer(const Action& a1, const Action& a2, Condition condition) {
    return answer_query(gt_, a1, a2, condition, cfg_, rng_);
  }

 private:
  GroundTruthReward gt_;
  OracleConfig cfg_;
  Rng rng_;
};

}  // namespace pfp
