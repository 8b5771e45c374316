#pragma once
//
// Learned reward model.
//
//   R̂(a)   = sum_j combiner[j] * R̂_j(a_j)
//   R̂_j(v) = predictors[j] · encode_j(v)
//
// encode_j is one-hot over the declared encodings for discrete features and
// the identity for continuous ones. Predictors share no parameters; their
// outputs feed a single linear combiner (no bias, no activation).
//
// Training minimises (1 - beta) * rlhf_loss + beta * feat_loss, both
// Bradley-Terry cross-entropies: rlhf over whole actions, feat over the
// per-feature predictor outputs (before the combiner).
//

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pfp/domain.hpp"
#include "pfp/errors.hpp"
#include "pfp/preference.hpp"
#include "pfp/rng.hpp"

namespace pfp {

// Overflow-safe exp(r1) / (exp(r1) + exp(r2)).
inline double bt_prob(double r1, double r2) {
  if (!std::isfinite(r1) || !std::isfinite(r2)) throw std::invalid_argument("bt_prob needs finite rewards");
  // Saturated values stay strictly inside (0, 1) and still sum to 1.
  constexpr double kEdge = 0x1p-53;
  const double d = r1 - r2;
  if (d >= 0.0) return std::min(1.0 / (1.0 + std::exp(-d)), 1.0 - kEdge);
  const double e = std::exp(d);
  return std::max(e / (1.0 + e), kEdge);
}

namespace detail {
// log(1 + exp(x)), stable for large |x|.
inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Cross-entropy of BT(d) against target probability y of "first wins",
// and its derivative with respect to d.
inline double bt_xent(double d, double y) { return y * softplus(-d) + (1.0 - y) * softplus(d); }
inline double bt_xent_grad(double d, double y) { return sigmoid(d) - y; }

inline double target(ExamplePref p) {
  switch (p) {
    case ExamplePref::kFirst: return 1.0;
    case ExamplePref::kSecond: return 0.0;
    case ExamplePref::kTie: return 0.5;
  }
  return 0.5;
}
}  // namespace detail

// Maps a feature value to (slot, coefficient): the encoded vector is
// coefficient * e_slot. One-hot gives (index, 1); identity gives (0, v).
struct EncodedValue {
  std::size_t slot = 0;
  double x = 0.0;
};

class FeatureEncoder {
 public:
  explicit FeatureEncoder(FeatureSpace space) : space_(std::move(space)) {}

  const FeatureSpace& space() const noexcept { return space_; }

  std::size_t width(std::size_t j) const {
    const FeatureSpec& f = space_[j];
    return f.is_discrete() ? f.encodings().size() : 1;
  }

  EncodedValue encode_sparse(std::size_t j, double value) const {
    const FeatureSpec& f = space_[j];
    if (f.is_discrete()) {
      auto idx = f.encoding_index(value);
      if (!idx) throw std::invalid_argument("value " + std::to_string(value) + " is not an encoding of '" + f.name() + "'");
      return {*idx, 1.0};
    }
    if (!f.accepts(value))
      throw std::invalid_argument("value " + std::to_string(value) + " outside range of '" + f.name() + "'");
    return {0, value};
  }

  std::vector<double> encode(std::size_t j, double value) const {
    std::vector<double> v(width(j), 0.0);
    const EncodedValue e = encode_sparse(j, value);
    v[e.slot] = e.x;
    return v;
  }

  friend bool operator==(const FeatureEncoder&, const FeatureEncoder&) = default;

 private:
  FeatureSpace space_;
};

// How the summed losses are scaled for the descent step. kSum follows the
// literal sums; kMean divides the example term by the number of pairs and
// the feature term by the number of labeled feature terms, so the step size
// stays stable as augmentation grows the dataset. Reported losses are
// always the plain sums.
enum class Reduction { kSum, kMean };

struct TrainConfig {
  double beta = 0.5;
  double learning_rate = 0.1;
  std::size_t epochs = 300;
  std::uint64_t rng_seed = 0;
  // Roughly 1/sqrt(fan-in) of the predictor layer. Near-zero starts leave the
  // combiner-times-predictor product stuck at its saddle.
  double init_scale = 0.5;
  Reduction reduction = Reduction::kMean;

  void validate() const {
    if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must lie in [0, 1]");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
    if (!(init_scale >= 0.0)) throw std::invalid_argument("init_scale must be non-negative");
  }
};

class RewardModel {
 public:
  // All-zero parameters.
  explicit RewardModel(FeatureSpace space) : encoder_(std::move(space)) {
    const std::size_t n = encoder_.space().size();
    combiner_.assign(n, 0.0);
    predictors_.resize(n);
    for (std::size_t j = 0; j < n; ++j) predictors_[j].assign(encoder_.width(j), 0.0);
  }

  static RewardModel initialized(FeatureSpace space, double init_scale, std::uint64_t seed) {
    RewardModel m(std::move(space));
    Rng rng = make_rng(Stream::kInit, seed);
    std::uniform_real_distribution<double> u(-init_scale, init_scale);
    for (auto& p : m.predictors_)
      for (double& w : p) w = init_scale > 0.0 ? u(rng) : 0.0;
    for (double& c : m.combiner_) c = init_scale > 0.0 ? u(rng) : 0.0;
    return m;
  }

  const FeatureEncoder& encoder() const noexcept { return encoder_; }
  const FeatureSpace& space() const noexcept { return encoder_.space(); }
  std::size_t n() const noexcept { return combiner_.size(); }

  const std::vector<double>& combiner() const noexcept { return combiner_; }
  std::vector<double>& combiner() noexcept { return combiner_; }
  const std::vector<std::vector<double>>& predictors() const noexcept { return predictors_; }
  std::vector<std::vector<double>>& predictors() noexcept { return predictors_; }

  std::size_t parameter_count() const {
    std::size_t k = combiner_.size();
    for (const auto& p : predictors_) k += p.size();
    return k;
  }

  // Flattened as predictors (feature-major) followed by the combiner.
  std::vector<double> parameters() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const auto& p : predictors_) out.insert(out.end(), p.begin(), p.end());
    out.insert(out.end(), combiner_.begin(), combiner_.end());
    return out;
  }

  void set_parameters(std::span<const double> flat) {
    if (flat.size() != parameter_count()) throw std::invalid_argument("parameter vector has wrong length");
    std::size_t k = 0;
    for (auto& p : predictors_)
      for (double& w : p) w = flat[k++];
    for (double& c : combiner_) c = flat[k++];
  }

  bool all_finite() const {
    for (double v : parameters())
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const RewardModel&, const RewardModel&) = default;

 private:
  FeatureEncoder encoder_;
  std::vector<std::vector<double>> predictors_;
  std::vector<double> combiner_;
};

inline double feature_reward(const RewardModel& model, std::size_t j, double value) {
  if (j >= model.n()) throw std::invalid_argument("feature index out of range");
  const EncodedValue e = model.encoder().encode_sparse(j, value);
  return model.predictors()[j][e.slot] * e.x;
}

inline double reward(const RewardModel& model, const Action& a) {
  if (a.size() != model.n())
    throw std::invalid_argument("action dimension " + std::to_string(a.size()) + " does not match model dimension " +
                                std::to_string(model.n()));
  double r = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) r += model.combiner()[j] * feature_reward(model, j, a[j]);
  return r;
}

struct LossBreakdown {
  double rlhf_component = 0.0;
  double feat_component = 0.0;
  double total = 0.0;
  std::size_t pair_count = 0;
  std::size_t feature_term_count = 0;
};

// Same shape as the model's parameters.
struct ModelGradient {
  std::vector<std::vector<double>> predictors;
  std::vector<double> combiner;

  explicit ModelGradient(const RewardModel& m) : predictors(m.predictors()), combiner(m.n(), 0.0) {
    for (auto& p : predictors) std::fill(p.begin(), p.end(), 0.0);
  }

  std::vector<double> flat() const {
    std::vector<double> out;
    for (const auto& p : predictors) out.insert(out.end(), p.begin(), p.end());
    out.insert(out.end(), combiner.begin(), combiner.end());
    return out;
  }
};

namespace detail {

// Dataset pre-encoded against one feature space, so that the training loop
// never re-validates values.
struct CompiledRecord {
  std::vector<EncodedValue> e1, e2;
  double target = 0.5;
  bool synthesized = false;
  std::vector<std::pair<std::size_t, double>> feature_targets;  // (j, 1 or 0)
};

inline std::vector<CompiledRecord> compile(const FeatureEncoder& enc, const PreferenceDataset& data) {
  const std::size_t n = enc.space().size();
  if (data.feature_space().size() != n) throw std::invalid_argument("dataset dimension does not match model");
  std::vector<CompiledRecord> out;
  out.reserve(data.size());
  for (const auto& r : data) {
    if (r.a1.size() != n || r.a2.size() != n) throw std::invalid_argument("record dimension does not match model");
    CompiledRecord c;
    for (std::size_t j = 0; j < n; ++j) {
      c.e1.push_back(enc.encode_sparse(j, r.a1[j]));
      c.e2.push_back(enc.encode_sparse(j, r.a2[j]));
    }
    c.target = target(r.label);
    c.synthesized = r.synthesized;
    if (!r.synthesized)
      for (const auto& fl : r.feature_labels) {
        if (fl.label == FeaturePref::kNone) continue;
        c.feature_targets.emplace_back(fl.feature, fl.label == FeaturePref::kFirst ? 1.0 : 0.0);
      }
    out.push_back(std::move(c));
  }
  return out;
}

inline double predictor_out(const RewardModel& m, std::size_t j, const EncodedValue& e) {
  return m.predictors()[j][e.slot] * e.x;
}

// Loss and (optionally) gradient in one sweep. Gradient is of the
// beta-weighted total.
inline LossBreakdown evaluate(const RewardModel& m, const std::vector<CompiledRecord>& data, double beta,
                              ModelGradient* grad, double rlhf_scale = 1.0, double feat_scale = 1.0) {
  const std::size_t n = m.n();
  LossBreakdown lb;
  std::vector<double> f1(n), f2(n);
  for (const auto& rec : data) {
    double r1 = 0.0, r2 = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      f1[j] = predictor_out(m, j, rec.e1[j]);
      f2[j] = predictor_out(m, j, rec.e2[j]);
      r1 += m.combiner()[j] * f1[j];
      r2 += m.combiner()[j] * f2[j];
    }
    const double d = r1 - r2;
    lb.rlhf_component += bt_xent(d, rec.target);
    ++lb.pair_count;
    if (grad != nullptr && beta < 1.0) {
      const double g = (1.0 - beta) * rlhf_scale * bt_xent_grad(d, rec.target);
      for (std::size_t j = 0; j < n; ++j) {
        grad->combiner[j] += g * (f1[j] - f2[j]);
        const double gc = g * m.combiner()[j];
        grad->predictors[j][rec.e1[j].slot] += gc * rec.e1[j].x;
        grad->predictors[j][rec.e2[j].slot] -= gc * rec.e2[j].x;
      }
    }
    for (const auto& [j, y] : rec.feature_targets) {
      const double dj = f1[j] - f2[j];
      lb.feat_component += bt_xent(dj, y);
      ++lb.feature_term_count;
      if (grad != nullptr && beta > 0.0) {
        const double g = beta * feat_scale * bt_xent_grad(dj, y);
        grad->predictors[j][rec.e1[j].slot] += g * rec.e1[j].x;
        grad->predictors[j][rec.e2[j].slot] -= g * rec.e2[j].x;
      }
    }
  }
  lb.total = (1.0 - beta) * lb.rlhf_component + beta * lb.feat_component;
  return lb;
}

// Scale factors turning the summed losses into the descended objective.
inline std::pair<double, double> reduction_scales(Reduction r, const std::vector<CompiledRecord>& data) {
  std::size_t terms = 0;
  for (const auto& rec : data) terms += rec.feature_targets.size();
  const double pairs = static_cast<double>(std::max<std::size_t>(1, data.size()));
  switch (r) {
    case Reduction::kSum: return {1.0, 1.0};
    case Reduction::kMean: return {1.0 / pairs, 1.0 / static_cast<double>(std::max<std::size_t>(1, terms))};
  }
  return {1.0, 1.0};
}

inline double scaled_total(const LossBreakdown& lb, double beta, std::pair<double, double> scales) {
  return (1.0 - beta) * scales.first * lb.rlhf_component + beta * scales.second * lb.feat_component;
}

inline void check_beta(double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must lie in [0, 1]");
}

}  // namespace detail

inline double rlhf_loss(const RewardModel& model, const PreferenceDataset& dataset) {
  if (dataset.empty()) throw std::invalid_argument("rlhf_loss needs a non-empty dataset");
  return detail::evaluate(model, detail::compile(model.encoder(), dataset), 0.0, nullptr).rlhf_component;
}

inline double feat_loss(const RewardModel& model, const PreferenceDataset& dataset) {
  return detail::evaluate(model, detail::compile(model.encoder(), dataset), 1.0, nullptr).feat_component;
}

inline LossBreakdown joint_loss(const RewardModel& model, const PreferenceDataset& dataset, double beta) {
  detail::check_beta(beta);
  return detail::evaluate(model, detail::compile(model.encoder(), dataset), beta, nullptr);
}

inline ModelGradient gradient(const RewardModel& model, const PreferenceDataset& dataset, double beta) {
  detail::check_beta(beta);
  ModelGradient g(model);
  detail::evaluate(model, detail::compile(model.encoder(), dataset), beta, &g);
  return g;
}

// Per-epoch total loss, recorded by train() when requested.
using LossTrace = std::vector<double>;

// Full-batch gradient descent from a seeded uniform initialisation.
inline RewardModel train(const PreferenceDataset& dataset, const DomainSpec& domain, const TrainConfig& cfg,
                         LossTrace* trace = nullptr) {
  cfg.validate();
  if (dataset.empty()) throw std::invalid_argument("train needs a non-empty dataset");
  RewardModel model = RewardModel::initialized(domain.feature_space, cfg.init_scale, cfg.rng_seed);
  const auto data = detail::compile(model.encoder(), dataset);
  const auto scales = detail::reduction_scales(cfg.reduction, data);
  if (trace) trace->clear();

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    ModelGradient g(model);
    const LossBreakdown lb = detail::evaluate(model, data, cfg.beta, &g, scales.first, scales.second);
    if (!std::isfinite(lb.total)) throw TrainingFailure(epoch, "loss diverged at epoch " + std::to_string(epoch));
    if (trace) trace->push_back(detail::scaled_total(lb, cfg.beta, scales));
    for (std::size_t j = 0; j < model.n(); ++j) {
      auto& w = model.predictors()[j];
      for (std::size_t s = 0; s < w.size(); ++s) w[s] -= cfg.learning_rate * g.predictors[j][s];
      model.combiner()[j] -= cfg.learning_rate * g.combiner[j];
    }
  }
  const LossBreakdown final_lb = detail::evaluate(model, data, cfg.beta, nullptr);
  if (!std::isfinite(final_lb.total) || !model.all_finite())
    throw TrainingFailure(cfg.epochs, "loss diverged at epoch " + std::to_string(cfg.epochs));
  if (trace) trace->push_back(detail::scaled_total(final_lb, cfg.beta, scales));
  return model;
}

// --- checkpoint JSON ---------------------------------------------------------

inline std::string to_string(Reduction r) { return r == Reduction::kSum ? "sum" : "mean"; }

inline Reduction parse_reduction(const std::string& s) {
  if (s == "sum") return Reduction::kSum;
  if (s == "mean") return Reduction::kMean;
  throw std::invalid_argument("unknown reduction '" + s + "'");
}

inline nlohmann::json config_to_json(const TrainConfig& c) {
  return {{"beta", c.beta},
          {"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"rng_seed", c.rng_seed},
          {"init_scale", c.init_scale},
          {"reduction", to_string(c.reduction)}};
}

inline TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.beta = j.value("beta", c.beta);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.epochs = j.value("epochs", c.epochs);
  c.rng_seed = j.value("rng_seed", c.rng_seed);
  c.init_scale = j.value("init_scale", c.init_scale);
  if (j.contains("reduction")) c.reduction = parse_reduction(j.at("reduction").get<std::string>());
  c.validate();
  return c;
}

inline nlohmann::json checkpoint_to_json(const RewardModel& m, const DomainSpec& domain, const TrainConfig& cfg) {
  return {{"combiner", m.combiner()},
          {"predictors", m.predictors()},
          {"domain_label", to_string(domain.label)},
          {"config", config_to_json(cfg)}};
}

inline RewardModel checkpoint_from_json(const nlohmann::json& j, const DomainSpec& domain) {
  RewardModel m(domain.feature_space);
  auto combiner = j.at("combiner").get<std::vector<double>>();
  auto predictors = j.at("predictors").get<std::vector<std::vector<double>>>();
  if (combiner.size() != m.n() || predictors.size() != m.n())
    throw std::invalid_argument("checkpoint does not match domain dimension");
  for (std::size_t k = 0; k < m.n(); ++k)
    if (predictors[k].size() != m.predictors()[k].size())
      throw std::invalid_argument("checkpoint predictor width mismatch at feature " + std::to_string(k));
  m.combiner() = std::move(combiner);
  m.predictors() = std::move(predictors);
  return m;
}

}  // namespace pfp
