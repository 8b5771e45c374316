#pragma once
//
// Pragmatic data augmentation.
//
// A record whose mask marks some features as irrelevant licenses new
// comparisons: changing only irrelevant coordinates cannot change the
// user's preference, so each such variant inherits the original label.
//
// SEEN_VALUES swaps the observed values of a subset of the irrelevant
// coordinates between the two actions (a1°[j] = a2[j], a2°[j] = a1[j]).
// Only coordinates whose values differ take part, so every non-empty
// subset of k such coordinates yields a distinct pair: 2^k - 1 records.
//
// ANY_VALUE assumes irrelevance in general and lets every irrelevant
// coordinate of either action take any declared encoding.
//

#include <algorithm>
#include <cstddef>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "pfp/domain.hpp"
#include "pfp/errors.hpp"
#include "pfp/preference.hpp"

namespace pfp {

enum class AugmentMode { kSeenValues, kAnyValue };

inline AugmentMode parse_augment_mode(const std::string& s) {
  if (s == "seen" || s == "seen-values") return AugmentMode::kSeenValues;
  if (s == "any" || s == "any-value") return AugmentMode::kAnyValue;
  throw std::invalid_argument("unknown augment mode '" + s + "'");
}

// nullopt is the masked-out marker.
using MaskedAction = std::vector<std::optional<double>>;

inline std::pair<MaskedAction, MaskedAction> mask_irrelevant(const PreferenceRecord& record) {
  if (!record.mask) throw PreconditionViolation("mask_irrelevant requires a relevance mask");
  const RelevanceMask& mask = *record.mask;
  if (mask.size() != record.a1.size() || mask.size() != record.a2.size())
    throw std::invalid_argument("mask length must equal action dimension");
  MaskedAction m1(record.a1.size()), m2(record.a2.size());
  for (std::size_t j = 0; j < mask.size(); ++j) {
    if (mask[j]) {
      m1[j] = record.a1[j];
      m2[j] = record.a2[j];
    }
  }
  return {std::move(m1), std::move(m2)};
}

// One synthesized variant: coordinate indices[i] becomes
// (values[i].first, values[i].second) in (a1°, a2°).
struct FeatureCombo {
  std::vector<std::size_t> indices;
  std::vector<std::pair<double, double>> values;

  friend bool operator==(const FeatureCombo&, const FeatureCombo&) = default;
  friend auto operator<=>(const FeatureCombo&, const FeatureCombo&) = default;
};

inline std::pair<Action, Action> apply_combo(const Action& a1, const Action& a2, const FeatureCombo& c) {
  Action o1 = a1, o2 = a2;
  for (std::size_t i = 0; i < c.indices.size(); ++i) {
    o1[c.indices[i]] = c.values[i].first;
    o2[c.indices[i]] = c.values[i].second;
  }
  return {std::move(o1), std::move(o2)};
}

namespace detail {

// All non-empty subsets of `pool`, by size then lexicographically.
inline std::vector<std::vector<std::size_t>> nonempty_subsets(const std::vector<std::size_t>& pool) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> cur;
  for (std::size_t k = 1; k <= pool.size(); ++k) {
    // standard k-combination walk over positions
    std::vector<std::size_t> pos(k);
    for (std::size_t i = 0; i < k; ++i) pos[i] = i;
    while (true) {
      cur.clear();
      for (std::size_t p : pos) cur.push_back(pool[p]);
      out.push_back(cur);
      std::size_t i = k;
      while (i > 0 && pos[i - 1] == pool.size() - k + (i - 1)) --i;
      if (i == 0) break;
      ++pos[i - 1];
      for (std::size_t t = i; t < k; ++t) pos[t] = pos[t - 1] + 1;
    }
  }
  return out;
}

constexpr std::size_t kMaxAnyValueCombos = 1u << 20;

}  // namespace detail

// Enumerates the variants licensed by a masked pair. `space` is required
// for ANY_VALUE (it supplies the encodings to range over).
inline std::vector<FeatureCombo> feat_combos(const MaskedAction& masked_a1, const MaskedAction& masked_a2,
                                             const Action& a1, const Action& a2, AugmentMode mode,
                                             const FeatureSpace* space = nullptr) {
  const std::size_t n = a1.size();
  if (masked_a1.size() != n || masked_a2.size() != n || a2.size() != n)
    throw std::invalid_argument("feat_combos: dimension mismatch");

  std::vector<std::size_t> masked;
  for (std::size_t j = 0; j < n; ++j) {
    if (masked_a1[j].has_value() != masked_a2[j].has_value())
      throw std::invalid_argument("feat_combos: inconsistent masking at feature " + std::to_string(j));
    if (!masked_a1[j]) masked.push_back(j);
  }

  std::vector<FeatureCombo> out;
  if (mode == AugmentMode::kSeenValues) {
    std::vector<std::size_t> differing;
    for (std::size_t j : masked)
      if (a1[j] != a2[j]) differing.push_back(j);
    for (auto& subset : detail::nonempty_subsets(differing)) {
      FeatureCombo c;
      for (std::size_t j : subset) c.values.emplace_back(a2[j], a1[j]);
      c.indices = std::move(subset);
      out.push_back(std::move(c));
    }
    return out;
  }

  if (space == nullptr) throw std::invalid_argument("ANY_VALUE augmentation needs the feature space");
  if (space->size() != n) throw std::invalid_argument("feat_combos: feature space dimension mismatch");
  std::size_t total = 1;
  for (std::size_t j : masked) {
    const FeatureSpec& f = (*space)[j];
    if (!f.is_discrete())
      throw UnsupportedMode("ANY_VALUE augmentation is undefined for continuous feature '" + f.name() + "'");
    const std::size_t k = f.encodings().size();
    total *= k * k;
    if (total > detail::kMaxAnyValueCombos)
      throw std::invalid_argument("ANY_VALUE augmentation would enumerate too many variants");
  }

  // Odometer over (v1, v2) pairs for each masked coordinate.
  std::vector<std::size_t> digit(masked.size(), 0);
  for (std::size_t step = 0; step < total; ++step) {
    FeatureCombo c;
    Action o1 = a1, o2 = a2;
    for (std::size_t i = 0; i < masked.size(); ++i) {
      const std::size_t j = masked[i];
      const auto& enc = (*space)[j].encodings();
      const double v1 = enc[digit[i] / enc.size()];
      const double v2 = enc[digit[i] % enc.size()];
      o1[j] = v1;
      o2[j] = v2;
      if (v1 != a1[j] || v2 != a2[j]) {
        c.indices.push_back(j);
        c.values.emplace_back(v1, v2);
      }
    }
    if (!c.indices.empty() && o1 != o2) out.push_back(std::move(c));
    for (std::size_t i = masked.size(); i-- > 0;) {
      const std::size_t k = (*space)[masked[i]].encodings().size();
      if (++digit[i] < k * k) break;
      digit[i] = 0;
    }
  }
  std::sort(out.begin(), out.end(), [](const FeatureCombo& x, const FeatureCombo& y) {
    if (x.indices.size() != y.indices.size()) return x.indices.size() < y.indices.size();
    return x < y;
  });
  return out;
}

// Returns D' ⊇ D: the input records in order, followed by each masked
// record's synthesized variants. Variants identical (a1, a2, label) to a
// record already in D' are dropped.
inline PreferenceDataset augment(const PreferenceDataset& dataset, AugmentMode mode = AugmentMode::kSeenValues) {
  PreferenceDataset out = dataset;
  std::set<std::tuple<Action, Action, ExamplePref>> seen;
  for (const auto& r : dataset) seen.emplace(r.a1, r.a2, r.label);

  for (const auto& r : dataset) {
    if (!r.mask || r.synthesized) continue;
    auto [m1, m2] = mask_irrelevant(r);
    for (const auto& combo : feat_combos(m1, m2, r.a1, r.a2, mode, &dataset.feature_space())) {
      auto [s1, s2] = apply_combo(r.a1, r.a2, combo);
      if (!seen.emplace(s1, s2, r.label).second) continue;
      PreferenceRecord syn;
      syn.a1 = std::move(s1);
      syn.a2 = std::move(s2);
      syn.label = r.label;
      for (const auto& fl : r.feature_labels)
        if ((*r.mask)[fl.feature]) syn.feature_labels.push_back(fl);
      syn.synthesized = true;
      out.add(std::move(syn));
    }
  }
  return out;
}

}  // namespace pfp
