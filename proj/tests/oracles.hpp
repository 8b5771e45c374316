#pragma once
// Reference implementations used by the tests. They recompute things from
// the definitions without going through the library's own helpers.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <tuple>
#include <vector>

#include "pfp/domain.hpp"
#include "pfp/preference.hpp"
#include "pfp/reward_model.hpp"

namespace oracle {

// Predictor output for feature j: one-hot lookup or scalar product.
inline double feature_out(const pfp::FeatureSpace& space, const std::vector<std::vector<double>>& w, std::size_t j,
                          double x) {
  const auto& f = space[j];
  if (!f.is_discrete()) return w[j][0] * x;
  for (std::size_t k = 0; k < f.encodings().size(); ++k)
    if (f.encodings()[k] == x) return w[j][k];
  throw std::logic_error("value not in encodings");
}

inline double model_reward(const pfp::RewardModel& m, const pfp::Action& a) {
  double r = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) r += m.combiner()[j] * feature_out(m.space(), m.predictors(), j, a[j]);
  return r;
}

// -log sigma(x), written differently from the library's softplus.
inline double neg_log_sigmoid(double x) { return x >= 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x)); }

inline double xent(double d, double y) { return y * neg_log_sigmoid(d) + (1.0 - y) * neg_log_sigmoid(-d); }

inline double target_of(pfp::ExamplePref p) {
  return p == pfp::ExamplePref::kFirst ? 1.0 : p == pfp::ExamplePref::kSecond ? 0.0 : 0.5;
}

struct Losses {
  double rlhf = 0.0, feat = 0.0;
  double total(double beta) const { return (1.0 - beta) * rlhf + beta * feat; }
};

inline Losses losses(const pfp::RewardModel& m, const pfp::PreferenceDataset& d) {
  Losses L;
  for (const auto& r : d) {
    L.rlhf += xent(model_reward(m, r.a1) - model_reward(m, r.a2), target_of(r.label));
    if (r.synthesized) continue;
    for (const auto& fl : r.feature_labels) {
      if (fl.label == pfp::FeaturePref::kNone) continue;
      const double dj = feature_out(m.space(), m.predictors(), fl.feature, r.a1[fl.feature]) -
                        feature_out(m.space(), m.predictors(), fl.feature, r.a2[fl.feature]);
      L.feat += xent(dj, fl.label == pfp::FeaturePref::kFirst ? 1.0 : 0.0);
    }
  }
  return L;
}

// Central differences of the reference joint loss over the flat parameters.
inline std::vector<double> fd_gradient(const pfp::RewardModel& m, const pfp::PreferenceDataset& d, double beta,
                                       double h = 1e-5) {
  pfp::RewardModel probe = m;
  std::vector<double> p = m.parameters();
  std::vector<double> g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double keep = p[i];
    p[i] = keep + h;
    probe.set_parameters(p);
    const double up = losses(probe, d).total(beta);
    p[i] = keep - h;
    probe.set_parameters(p);
    const double down = losses(probe, d).total(beta);
    p[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// Every aligned swap over non-empty subsets of the masked, differing
// coordinates, enumerated by bitmask and then put in (size, lexicographic)
// order of the index sets.
inline std::vector<std::pair<pfp::Action, pfp::Action>> brute_force_swaps(const pfp::PreferenceRecord& r) {
  std::vector<std::size_t> s;
  for (std::size_t j = 0; j < r.a1.size(); ++j)
    if (!(*r.mask)[j] && r.a1[j] != r.a2[j]) s.push_back(j);
  std::vector<std::vector<std::size_t>> subsets;
  for (std::uint32_t bits = 1; bits < (1u << s.size()); ++bits) {
    std::vector<std::size_t> sub;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (bits & (1u << i)) sub.push_back(s[i]);
    subsets.push_back(sub);
  }
  std::sort(subsets.begin(), subsets.end(), [](const auto& x, const auto& y) {
    return x.size() != y.size() ? x.size() < y.size() : x < y;
  });
  std::vector<std::pair<pfp::Action, pfp::Action>> out;
  for (const auto& sub : subsets) {
    pfp::Action b1 = r.a1, b2 = r.a2;
    for (std::size_t j : sub) std::swap(b1[j], b2[j]);
    out.emplace_back(b1, b2);
  }
  return out;
}

// Reference augmentation of a whole dataset, de-duplicating against every
// record seen so far.
inline std::vector<std::tuple<pfp::Action, pfp::Action, pfp::ExamplePref>> brute_force_augment(
    const pfp::PreferenceDataset& d) {
  std::vector<std::tuple<pfp::Action, pfp::Action, pfp::ExamplePref>> all;
  for (const auto& r : d) all.emplace_back(r.a1, r.a2, r.label);
  for (const auto& r : d) {
    if (!r.mask || r.synthesized) continue;
    for (auto& [b1, b2] : brute_force_swaps(r)) {
      auto t = std::make_tuple(b1, b2, r.label);
      if (std::find(all.begin(), all.end(), t) == all.end()) all.push_back(t);
    }
  }
  return all;
}

// Random discrete domain with n features of 2..4 values each.
inline pfp::DomainSpec random_discrete_domain(std::mt19937_64& rng, std::size_t n) {
  std::vector<pfp::FeatureSpec> fs;
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t k = 2 + rng() % 3;
    std::vector<std::string> names;
    std::vector<double> enc;
    for (std::size_t v = 0; v < k; ++v) {
      names.push_back("v" + std::to_string(v));
      enc.push_back(static_cast<double>(v) - 1.0);
    }
    fs.push_back(pfp::FeatureSpec::discrete("f" + std::to_string(j), names, enc));
  }
  return pfp::DomainSpec(pfp::FeatureSpace(fs), {-2, -1, 0, 1, 2}, pfp::DomainLabel::kCustom);
}

inline pfp::RewardModel random_model(const pfp::FeatureSpace& space, std::mt19937_64& rng, double scale) {
  pfp::RewardModel m(space);
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> p(m.parameter_count());
  for (double& x : p) x = u(rng);
  m.set_parameters(p);
  return m;
}

}  // namespace oracle
