#pragma once
//
// Feature spaces, actions, contexts and linear ground-truth rewards, plus the
// two built-in domains (mushroom foraging, flight booking).
//
// An action is a point in R^n. Discrete features take one of a declared set
// of numeric encodings; continuous features live in [lower, upper]. The
// ground-truth reward is linear in the encodings: R(a) = sum_j theta_j * a_j.
//

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pfp/rng.hpp"

namespace pfp {

enum class FeatureKind { kDiscrete, kContinuous };

class FeatureSpec {
 public:
  static FeatureSpec discrete(std::string name, std::vector<std::string> values,
                              std::vector<double> encodings) {
    FeatureSpec f;
    f.name_ = std::move(name);
    f.kind_ = FeatureKind::kDiscrete;
    f.values_ = std::move(values);
    f.encodings_ = std::move(encodings);
    f.validate();
    return f;
  }

  static FeatureSpec continuous(std::string name, double lower, double upper) {
    FeatureSpec f;
    f.name_ = std::move(name);
    f.kind_ = FeatureKind::kContinuous;
    f.lower_ = lower;
    f.upper_ = upper;
    f.validate();
    return f;
  }

  const std::string& name() const noexcept { return name_; }
  FeatureKind kind() const noexcept { return kind_; }
  bool is_discrete() const noexcept { return kind_ == FeatureKind::kDiscrete; }
  const std::vector<std::string>& values() const noexcept { return values_; }
  const std::vector<double>& encodings() const noexcept { return encodings_; }
  double lower() const noexcept { return lower_; }
  double upper() const noexcept { return upper_; }

  // Position of `encoding` among the declared encodings, if present.
  std::optional<std::size_t> encoding_index(double encoding) const {
    for (std::size_t i = 0; i < encodings_.size(); ++i)
      if (encodings_[i] == encoding) return i;
    return std::nullopt;
  }

  bool accepts(double v) const {
    if (is_discrete()) return encoding_index(v).has_value();
    return std::isfinite(v) && v >= lower_ && v <= upper_;
  }

  // Human-readable value; discrete encodings map back to their names.
  std::string describe(double v) const {
    if (is_discrete()) {
      if (auto i = encoding_index(v)) return values_[*i];
    }
    nlohmann::json j = v;
    return j.dump();
  }

  friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;

 private:
  FeatureSpec() = default;

  void validate() const {
    if (name_.empty()) throw std::invalid_argument("feature name must be non-empty");
    if (kind_ == FeatureKind::kDiscrete) {
      if (values_.size() < 2)
        throw std::invalid_argument("discrete feature '" + name_ + "' needs at least 2 values");
      if (values_.size() != encodings_.size())
        throw std::invalid_argument("feature '" + name_ + "': one encoding per value required");
      if (std::set<std::string>(values_.begin(), values_.end()).size() != values_.size())
        throw std::invalid_argument("feature '" + name_ + "': duplicate value name");
      if (std::set<double>(encodings_.begin(), encodings_.end()).size() != encodings_.size())
        throw std::invalid_argument("feature '" + name_ + "': duplicate encoding");
      for (double e : encodings_)
        if (!std::isfinite(e)) throw std::invalid_argument("feature '" + name_ + "': non-finite encoding");
    } else {
      if (!(std::isfinite(lower_) && std::isfinite(upper_) && lower_ < upper_))
        throw std::invalid_argument("feature '" + name_ + "': continuous bounds need lower < upper");
    }
  }

  std::string name_;
  FeatureKind kind_ = FeatureKind::kContinuous;
  std::vector<std::string> values_;
  std::vector<double> encodings_;
  double lower_ = 0.0;
  double upper_ = 1.0;
};

class FeatureSpace {
 public:
  explicit FeatureSpace(std::vector<FeatureSpec> features) : features_(std::move(features)) {
    if (features_.empty()) throw std::invalid_argument("feature space needs at least one feature");
    std::set<std::string> names;
    for (const auto& f : features_)
      if (!names.insert(f.name()).second)
        throw std::invalid_argument("duplicate feature name '" + f.name() + "'");
  }

  std::size_t size() const noexcept { return features_.size(); }
  const FeatureSpec& operator[](std::size_t j) const { return features_.at(j); }
  const std::vector<FeatureSpec>& features() const noexcept { return features_; }
  auto begin() const { return features_.begin(); }
  auto end() const { return features_.end(); }

  std::optional<std::size_t> index_of(const std::string& name) const {
    for (std::size_t j = 0; j < features_.size(); ++j)
      if (features_[j].name() == name) return j;
    return std::nullopt;
  }

  bool all_discrete() const {
    return std::all_of(features_.begin(), features_.end(),
                       [](const FeatureSpec& f) { return f.is_discrete(); });
  }

  friend bool operator==(const FeatureSpace&, const FeatureSpace&) = default;

 private:
  std::vector<FeatureSpec> features_;
};

struct Action {
  std::vector<double> values;

  Action() = default;
  explicit Action(std::vector<double> v) : values(std::move(v)) {}
  Action(std::initializer_list<double> v) : values(v) {}

  std::size_t size() const noexcept { return values.size(); }
  double operator[](std::size_t j) const { return values[j]; }
  double& operator[](std::size_t j) { return values[j]; }

  friend bool operator==(const Action&, const Action&) = default;
  friend auto operator<=>(const Action&, const Action&) = default;
};

inline bool is_valid(const FeatureSpace& space, const Action& a) {
  if (a.size() != space.size()) return false;
  for (std::size_t j = 0; j < a.size(); ++j)
    if (!space[j].accepts(a[j])) return false;
  return true;
}

inline void require_valid(const FeatureSpace& space, const Action& a) {
  if (a.size() != space.size())
    throw std::invalid_argument("action has " + std::to_string(a.size()) + " coordinates, expected " +
                                std::to_string(space.size()));
  for (std::size_t j = 0; j < a.size(); ++j)
    if (!space[j].accepts(a[j]))
      throw std::invalid_argument("value " + std::to_string(a[j]) + " invalid for feature '" +
                                  space[j].name() + "'");
}

struct Context {
  std::vector<Action> actions;
};

enum class DomainLabel { kMushroom, kFlight, kCustom };

inline std::string to_string(DomainLabel l) {
  switch (l) {
    case DomainLabel::kMushroom: return "mushroom";
    case DomainLabel::kFlight: return "flight";
    case DomainLabel::kCustom: return "custom";
  }
  return "custom";
}

inline DomainLabel parse_domain_label(const std::string& s) {
  if (s == "mushroom") return DomainLabel::kMushroom;
  if (s == "flight") return DomainLabel::kFlight;
  if (s == "custom") return DomainLabel::kCustom;
  throw std::invalid_argument("unknown domain '" + s + "'");
}

struct DomainSpec {
  FeatureSpace feature_space;
  std::vector<double> theta_value_set;
  DomainLabel label = DomainLabel::kCustom;

  DomainSpec(FeatureSpace space, std::vector<double> thetas, DomainLabel l)
      : feature_space(std::move(space)), theta_value_set(std::move(thetas)), label(l) {
    if (std::find(theta_value_set.begin(), theta_value_set.end(), 0.0) == theta_value_set.end())
      throw std::invalid_argument("theta value set must contain 0");
  }

  std::size_t n() const noexcept { return feature_space.size(); }

  friend bool operator==(const DomainSpec&, const DomainSpec&) = default;
};

inline DomainSpec make_mushroom_domain() {
  const std::vector<double> enc = {-1.0, 0.0, 1.0};
  std::vector<FeatureSpec> f;
  f.push_back(FeatureSpec::discrete("texture", {"smooth", "bumpy", "slimy"}, enc));
  f.push_back(FeatureSpec::discrete("color", {"red", "green", "blue"}, enc));
  f.push_back(FeatureSpec::discrete("shape", {"bulbous", "flat", "conical"}, enc));
  f.push_back(FeatureSpec::discrete("height", {"short", "average", "tall"}, enc));
  f.push_back(FeatureSpec::discrete("weight", {"light", "moderate", "heavy"}, enc));
  f.push_back(FeatureSpec::discrete("smell", {"stinky", "neutral", "pleasant"}, enc));
  return DomainSpec(FeatureSpace(std::move(f)), {-2.0, -1.0, 0.0, 1.0, 2.0}, DomainLabel::kMushroom);
}

inline DomainSpec make_flight_domain() {
  const std::vector<std::string> yes_no = {"no", "yes"};
  const std::vector<double> bin = {0.0, 1.0};
  std::vector<FeatureSpec> f;
  f.push_back(FeatureSpec::continuous("arrival-time-before-meeting", 0.0, 1.0));
  f.push_back(FeatureSpec::discrete("american", yes_no, bin));
  f.push_back(FeatureSpec::discrete("delta", yes_no, bin));
  f.push_back(FeatureSpec::discrete("jetblue", yes_no, bin));
  f.push_back(FeatureSpec::discrete("southwest", yes_no, bin));
  f.push_back(FeatureSpec::continuous("longest-stop", 0.0, 1.0));
  f.push_back(FeatureSpec::continuous("number-of-stops", 0.0, 1.0));
  f.push_back(FeatureSpec::continuous("price", 0.0, 1.0));
  return DomainSpec(FeatureSpace(std::move(f)), {-1.0, -0.5, 0.0, 0.5, 1.0}, DomainLabel::kFlight);
}

inline DomainSpec make_domain(DomainLabel label) {
  switch (label) {
    case DomainLabel::kMushroom: return make_mushroom_domain();
    case DomainLabel::kFlight: return make_flight_domain();
    case DomainLabel::kCustom: break;
  }
  throw std::invalid_argument("custom domains must be loaded from JSON");
}

class GroundTruthReward {
 public:
  explicit GroundTruthReward(std::vector<double> theta) : theta_(std::move(theta)) {
    for (std::size_t j = 0; j < theta_.size(); ++j) {
      if (!std::isfinite(theta_[j])) throw std::invalid_argument("theta must be finite");
      if (theta_[j] != 0.0) relevant_.push_back(j);
    }
  }

  const std::vector<double>& theta() const noexcept { return theta_; }
  const std::vector<std::size_t>& relevant_set() const noexcept { return relevant_; }
  std::size_t size() const noexcept { return theta_.size(); }

 private:
  std::vector<double> theta_;
  std::vector<std::size_t> relevant_;
};

// Relevant features are picked uniformly without replacement and always get
// a nonzero weight; the others are exactly zero.
inline GroundTruthReward sample_reward(const DomainSpec& domain, std::size_t relevant_count,
                                       std::uint64_t rng_seed) {
  const std::size_t n = domain.n();
  if (relevant_count < 1 || relevant_count > n)
    throw std::invalid_argument("relevant_count must be in [1, " + std::to_string(n) + "]");
  std::vector<double> nonzero;
  for (double v : domain.theta_value_set)
    if (v != 0.0) nonzero.push_back(v);
  if (nonzero.empty()) throw std::invalid_argument("theta value set has no nonzero member");

  Rng rng = make_rng(Stream::kReward, rng_seed);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);

  std::vector<double> theta(n, 0.0);
  std::uniform_int_distribution<std::size_t> pick(0, nonzero.size() - 1);
  std::vector<std::size_t> chosen(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(relevant_count));
  std::sort(chosen.begin(), chosen.end());
  for (std::size_t j : chosen) theta[j] = nonzero[pick(rng)];
  return GroundTruthReward(std::move(theta));
}

inline double true_reward(const GroundTruthReward& gt, const Action& a) {
  if (a.size() != gt.size())
    throw std::invalid_argument("action dimension " + std::to_string(a.size()) +
                                " does not match reward dimension " + std::to_string(gt.size()));
  double r = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) r += gt.theta()[j] * a[j];
  return r;
}

// Draws contexts of `context_size` distinct actions, each coordinate
// uniform over its encodings (discrete) or its range (continuous).
class ContextSampler {
 public:
  ContextSampler(std::size_t context_size, std::uint64_t rng_seed,
                 Stream stream = Stream::kContexts)
      : context_size_(context_size), rng_(make_rng(stream, rng_seed)) {}

  explicit ContextSampler(std::size_t context_size, Rng rng)
      : context_size_(context_size), rng_(std::move(rng)) {}

  std::size_t context_size() const noexcept { return context_size_; }

  Action sample_action(const FeatureSpace& space) {
    Action a;
    a.values.reserve(space.size());
    for (const auto& f : space) {
      if (f.is_discrete()) {
        std::uniform_int_distribution<std::size_t> d(0, f.encodings().size() - 1);
        a.values.push_back(f.encodings()[d(rng_)]);
      } else {
        std::uniform_real_distribution<double> d(f.lower(), f.upper());
        a.values.push_back(d(rng_));
      }
    }
    return a;
  }

  Context sample(const DomainSpec& domain) {
    if (context_size_ < 2) throw std::invalid_argument("context_size must be at least 2");
    Context c;
    c.actions.reserve(context_size_);
    while (c.actions.size() < context_size_) {
      Action a = sample_action(domain.feature_space);
      if (std::find(c.actions.begin(), c.actions.end(), a) == c.actions.end())
        c.actions.push_back(std::move(a));
    }
    return c;
  }

 private:
  std::size_t context_size_;
  Rng rng_;
};

inline Context sample_context(const DomainSpec& domain, ContextSampler& sampler) {
  return sampler.sample(domain);
}

// --- JSON ------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const FeatureSpec& f) {
  j = nlohmann::json{{"name", f.name()}};
  if (f.is_discrete()) {
    j["kind"] = "discrete";
    j["values"] = f.values();
    j["encodings"] = f.encodings();
  } else {
    j["kind"] = "continuous";
    j["lower"] = f.lower();
    j["upper"] = f.upper();
  }
}

inline FeatureSpec feature_spec_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "discrete")
    return FeatureSpec::discrete(j.at("name").get<std::string>(),
                                 j.at("values").get<std::vector<std::string>>(),
                                 j.at("encodings").get<std::vector<double>>());
  if (kind == "continuous")
    return FeatureSpec::continuous(j.at("name").get<std::string>(), j.at("lower").get<double>(),
                                   j.at("upper").get<double>());
  throw std::invalid_argument("unknown feature kind '" + kind + "'");
}

inline nlohmann::json domain_to_json(const DomainSpec& d) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& f : d.feature_space) features.push_back(f);
  return {{"label", to_string(d.label)}, {"features", features}, {"theta_value_set", d.theta_value_set}};
}

inline DomainSpec domain_from_json(const nlohmann::json& j) {
  std::vector<FeatureSpec> features;
  for (const auto& f : j.at("features")) features.push_back(feature_spec_from_json(f));
  return DomainSpec(FeatureSpace(std::move(features)), j.at("theta_value_set").get<std::vector<double>>(),
                    parse_domain_label(j.at("label").get<std::string>()));
}

}  // namespace pfp
