#pragma once
//
// Experiment orchestration: simulated or ingested preference data per query
// condition, training across budgets and seeds, and the GT-best probability
// metric, written out as CSV.
//

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <future>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "pfp/augment.hpp"
#include "pfp/domain.hpp"
#include "pfp/errors.hpp"
#include "pfp/lang_parse.hpp"
#include "pfp/oracle.hpp"
#include "pfp/preference.hpp"
#include "pfp/reward_model.hpp"
#include "pfp/rng.hpp"

namespace pfp {

enum class MaskSource { kOracle, kKeyword, kLm };

inline MaskSource parse_mask_source(const std::string& s) {
  if (s == "oracle") return MaskSource::kOracle;
  if (s == "keyword") return MaskSource::kKeyword;
  if (s == "lm") return MaskSource::kLm;
  throw std::invalid_argument("unknown mask source '" + s + "'");
}

inline std::string to_string(MaskSource m) {
  switch (m) {
    case MaskSource::kOracle: return "oracle";
    case MaskSource::kKeyword: return "keyword";
    case MaskSource::kLm: return "lm";
  }
  return "oracle";
}

// How pragmatic masks are obtained when the data has to be simulated.
struct MaskPolicy {
  MaskSource source = MaskSource::kOracle;
  std::optional<Lexicon> lexicon;        // defaults to the domain lexicon
  std::optional<LmClientConfig> lm;      // required for kLm
};

// Simulation knobs for build_training_set.
struct DataConfig {
  std::uint64_t seed = 0;
  OracleConfig oracle;
  MaskPolicy masks;
  AugmentMode augment_mode = AugmentMode::kSeenValues;
};

// Short phrase a simulated user would use to name feature j.
inline std::string describe_feature(const DomainSpec& domain, std::size_t j) {
  const std::string& name = domain.feature_space[j].name();
  if (domain.label == DomainLabel::kFlight) {
    static const std::map<std::string, std::string> phrases = {
        {"arrival-time-before-meeting", "arriving before the meeting"},
        {"american", "flying american"},
        {"delta", "flying delta"},
        {"jetblue", "flying jetblue"},
        {"southwest", "flying southwest"},
        {"longest-stop", "the length of the longest stop"},
        {"number-of-stops", "the number of stops"},
        {"price", "the price"}};
    if (auto it = phrases.find(name); it != phrases.end()) return it->second;
  }
  return "the " + name;
}

// Templated description naming exactly the features in `mask`.
inline std::string describe_mask(const DomainSpec& domain, const RelevanceMask& mask) {
  std::string out = "what matters to me is ";
  bool first = true;
  for (std::size_t j : mask.true_set()) {
    if (!first) out += " and also ";
    out += describe_feature(domain, j);
    first = false;
  }
  if (first) out = "nothing in particular";
  return out;
}

inline RelevanceMask parse_mask(const std::string& utterance, const DomainSpec& domain, const MaskPolicy& policy) {
  switch (policy.source) {
    case MaskSource::kOracle:
      throw std::invalid_argument("oracle masks are not parsed from text");
    case MaskSource::kKeyword:
      return parse_keywords(utterance, domain, policy.lexicon ? *policy.lexicon : default_lexicon(domain)).mask;
    case MaskSource::kLm:
      if (!policy.lm) throw std::invalid_argument("mask source 'lm' needs an LM client configuration");
      return parse_via_lm(utterance, domain, *policy.lm).mask;
  }
  throw std::invalid_argument("bad mask source");
}

// Replaces an oracle mask with the parse of a description, keeping feature
// labels consistent with the new mask under PRAG_FP.
inline void apply_text_mask(PreferenceRecord& rec, const GroundTruthReward& gt, const DomainSpec& domain,
                            Condition condition, const MaskPolicy& policy, const std::string& utterance) {
  rec.utterance = utterance;
  rec.mask = parse_mask(utterance, domain, policy);
  if (condition == Condition::kPragFp) {
    rec.feature_labels.clear();
    for (std::size_t j : rec.mask->true_set()) rec.feature_labels.push_back(oracle_feature_pref(gt, rec.a1, rec.a2, j));
  }
}

// Raw (pre-augmentation) records: `budget` random size-2 comparisons
// answered by the simulated user. Record i depends only on the seed and i,
// so smaller budgets are prefixes of larger ones.
inline PreferenceDataset simulate_records(const GroundTruthReward& gt, const DomainSpec& domain, Condition condition,
                                          std::size_t budget, const DataConfig& cfg) {
  if (gt.size() != domain.n()) throw std::invalid_argument("reward dimension does not match domain");
  ContextSampler sampler(2, cfg.seed);
  OracleConfig oc = cfg.oracle;
  oc.rng_seed = cfg.seed;
  SimulatedUser user(gt, oc);
  PreferenceDataset data(domain.feature_space);
  for (std::size_t i = 0; i < budget; ++i) {
    Context c = sample_context(domain, sampler);
    PreferenceRecord rec = user.answer(c.actions[0], c.actions[1], condition);
    if (is_pragmatic(condition) && cfg.masks.source != MaskSource::kOracle)
      apply_text_mask(rec, gt, domain, condition, cfg.masks, describe_mask(domain, oracle_relevance_mask(gt)));
    data.add(std::move(rec));
  }
  return data;
}

inline PreferenceDataset build_training_set(const GroundTruthReward& gt, const DomainSpec& domain, Condition condition,
                                            std::size_t budget, const DataConfig& cfg) {
  if (budget < 1) throw PreconditionViolation("budget must be at least 1");
  PreferenceDataset raw = simulate_records(gt, domain, condition, budget, cfg);
  return is_pragmatic(condition) ? augment(raw, cfg.augment_mode) : raw;
}

inline PreferenceDataset prefix(const PreferenceDataset& d, std::size_t count) {
  PreferenceDataset out(d.feature_space());
  for (std::size_t i = 0; i < std::min(count, d.size()); ++i) out.add(d[i]);
  return out;
}

// Mean Bradley-Terry probability the model gives the ground-truth-better
// action over eval_pairs fresh size-2 contexts (tied pairs skipped). The
// contexts depend only on (domain, seed).
inline double eval_gt_best_prob(const RewardModel& model, const GroundTruthReward& gt, const DomainSpec& domain,
                                std::size_t eval_pairs, std::uint64_t seed) {
  if (eval_pairs < 1) throw PreconditionViolation("eval_pairs must be at least 1");
  ContextSampler sampler(2, seed, Stream::kEval);
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < eval_pairs; ++i) {
    Context c = sample_context(domain, sampler);
    const double t0 = true_reward(gt, c.actions[0]);
    const double t1 = true_reward(gt, c.actions[1]);
    if (t0 == t1) continue;
    const Action& best = t0 > t1 ? c.actions[0] : c.actions[1];
    const Action& other = t0 > t1 ? c.actions[1] : c.actions[0];
    sum += bt_prob(reward(model, best), reward(model, other));
    ++used;
  }
  return used == 0 ? 0.5 : sum / static_cast<double>(used);
}

// --- flight dataset ingestion -------------------------------------------------

struct FlightRow {
  std::size_t line = 0;
  std::vector<Action> options;  // three options, normalized
  std::size_t best = 0;
  std::string utterance;
  std::vector<double> theta;
};

struct FlightRecordFile {
  std::vector<FlightRow> rows;
  std::vector<std::size_t> duplicate_option_lines;  // ingestion report
};

// Parses flight JSONL rows and min-max normalizes continuous columns over
// the whole file. Airline columns must already be 0/1.
inline FlightRecordFile read_flight_file(std::istream& in, const DomainSpec& domain = make_flight_domain()) {
  const std::size_t n = domain.n();
  FlightRecordFile file;
  std::string text;
  std::size_t lineno = 0;
  while (std::getline(in, text)) {
    ++lineno;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    FlightRow row;
    row.line = lineno;
    try {
      const auto j = nlohmann::json::parse(text);
      const auto opts = j.at("options").get<std::vector<std::vector<double>>>();
      if (opts.size() != 3) throw std::invalid_argument("expected 3 options, got " + std::to_string(opts.size()));
      for (const auto& o : opts) {
        if (o.size() != n) throw std::invalid_argument("options need " + std::to_string(n) + " features");
        for (double v : o)
          if (!std::isfinite(v)) throw std::invalid_argument("non-finite feature value");
        row.options.emplace_back(o);
      }
      const long long best = j.at("best").get<long long>();
      if (best < 0 || best > 2) throw std::invalid_argument("best must be 0, 1 or 2");
      row.best = static_cast<std::size_t>(best);
      row.utterance = j.value("utterance", std::string());
      row.theta = j.at("theta").get<std::vector<double>>();
      if (row.theta.size() != n) throw std::invalid_argument("theta needs " + std::to_string(n) + " entries");
      for (std::size_t f = 0; f < n; ++f) {
        if (!domain.feature_space[f].is_discrete()) continue;
        for (const auto& o : row.options)
          if (!domain.feature_space[f].accepts(o[f]))
            throw std::invalid_argument("invalid value for feature '" + domain.feature_space[f].name() + "'");
      }
    } catch (const IngestionError&) {
      throw;
    } catch (const std::exception& e) {
      throw IngestionError(lineno, e.what());
    }
    file.rows.push_back(std::move(row));
  }

  for (std::size_t f = 0; f < n; ++f) {
    const FeatureSpec& spec = domain.feature_space[f];
    if (spec.is_discrete() || file.rows.empty()) continue;
    double lo = file.rows[0].options[0][f], hi = lo;
    for (const auto& r : file.rows)
      for (const auto& o : r.options) {
        lo = std::min(lo, o[f]);
        hi = std::max(hi, o[f]);
      }
    for (auto& r : file.rows)
      for (auto& o : r.options)
        o[f] = hi > lo ? spec.lower() + (o[f] - lo) / (hi - lo) * (spec.upper() - spec.lower()) : spec.lower();
  }
  for (const auto& r : file.rows) {
    const auto& o = r.options;
    if (o[0] == o[1] || o[0] == o[2] || o[1] == o[2]) file.duplicate_option_lines.push_back(r.line);
  }
  return file;
}

// Each 3-option row becomes (best, other) ≻ comparisons for both others.
inline PreferenceDataset convert_triples_to_pairs(const FlightRecordFile& file, const DomainSpec& domain,
                                                  const MaskPolicy& masks) {
  PreferenceDataset out(domain.feature_space);
  for (const auto& row : file.rows) {
    std::optional<RelevanceMask> mask;
    if (masks.source == MaskSource::kOracle)
      mask = oracle_relevance_mask(GroundTruthReward(row.theta));
    else
      mask = parse_mask(row.utterance, domain, masks);
    for (std::size_t k = 0; k < row.options.size(); ++k) {
      if (k == row.best) continue;
      PreferenceRecord rec;
      rec.a1 = row.options[row.best];
      rec.a2 = row.options[k];
      rec.label = ExamplePref::kFirst;
      rec.mask = mask;
      rec.utterance = row.utterance;
      out.add(std::move(rec));
    }
  }
  return out;
}

// Rows sharing a reward vector, in order of first appearance.
struct FlightGroup {
  std::vector<double> theta;
  std::vector<FlightRow> rows;
};

inline std::vector<FlightGroup> group_by_reward(const FlightRecordFile& file) {
  std::vector<FlightGroup> groups;
  for (const auto& r : file.rows) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const FlightGroup& g) { return g.theta == r.theta; });
    if (it == groups.end()) {
      groups.push_back({r.theta, {}});
      it = std::prev(groups.end());
    }
    it->rows.push_back(r);
  }
  return groups;
}

// --- experiment sweeps ---------------------------------------------------------

struct ExperimentConfig {
  DomainSpec domain = make_mushroom_domain();
  Condition condition = Condition::kPragFp;
  std::size_t relevant_count = 1;
  std::vector<std::size_t> budgets;
  std::vector<std::uint64_t> seeds;
  std::size_t eval_pairs = 200;
  TrainConfig train;
  AugmentMode augment_mode = AugmentMode::kSeenValues;
  MaskPolicy masks;
  OracleConfig oracle;
  std::size_t reward_count = 2;     // reward functions averaged per row
  std::uint64_t reward_seed = 0;
  std::optional<std::vector<FlightGroup>> flight_groups;  // ingested data replaces simulation
  std::size_t threads = 0;          // 0: hardware concurrency

  void validate() const {
    if (budgets.empty()) throw std::invalid_argument("budget schedule is empty");
    if (budgets.front() < 1) throw PreconditionViolation("budgets must be at least 1");
    for (std::size_t i = 1; i < budgets.size(); ++i)
      if (budgets[i] <= budgets[i - 1]) throw std::invalid_argument("budgets must be strictly increasing");
    if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
    if (eval_pairs < 1) throw std::invalid_argument("eval_pairs must be at least 1");
    if (!flight_groups && (relevant_count < 1 || relevant_count > domain.n()))
      throw std::invalid_argument("relevant_count out of range");
    if (!flight_groups && reward_count < 1) throw std::invalid_argument("reward_count must be at least 1");
    if (flight_groups && flight_groups->empty()) throw std::invalid_argument("flight dataset has no rows");
    train.validate();
  }
};

struct RunRow {
  std::uint64_t seed = 0;
  std::size_t budget = 0;
  double gt_best_prob = 0.0;        // mean over reward functions
  std::size_t n_train_records = 0;  // summed over reward functions
  std::size_t n_synth_records = 0;
};

struct BudgetSummary {
  std::size_t budget = 0;
  double mean = 0.0;
  double stderr_ = 0.0;
};

struct EvalResult {
  Condition condition = Condition::kRlhf;
  std::vector<RunRow> rows;  // seed-major, then budget
  std::vector<BudgetSummary> summary;

  const BudgetSummary& at_budget(std::size_t b) const {
    for (const auto& s : summary)
      if (s.budget == b) return s;
    throw std::out_of_range("no summary for budget " + std::to_string(b));
  }
};

// Standard error of the mean over seeds (sample standard deviation).
inline BudgetSummary summarize(std::size_t budget, const std::vector<double>& values) {
  BudgetSummary s;
  s.budget = budget;
  const double k = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / k;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stderr_ = std::sqrt(ss / (k - 1.0)) / std::sqrt(k);
  }
  return s;
}

namespace detail {

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  Rng r = make_rng({a, b, 0x5eedULL});
  return r();
}

struct RewardCase {
  GroundTruthReward gt;
  std::optional<FlightGroup> group;
};

inline std::vector<RewardCase> reward_cases(const ExperimentConfig& cfg) {
  std::vector<RewardCase> out;
  if (cfg.flight_groups) {
    for (const auto& g : *cfg.flight_groups) out.push_back({GroundTruthReward(g.theta), g});
  } else {
    for (std::size_t r = 0; r < cfg.reward_count; ++r)
      out.push_back({sample_reward(cfg.domain, cfg.relevant_count, mix(cfg.reward_seed, r)), std::nullopt});
  }
  return out;
}

// Raw records of one ingested reward group for one seed: its pairs in a
// seed-dependent order, with feature labels taken from the group's reward.
inline PreferenceDataset flight_records(const FlightGroup& g, const DomainSpec& domain, Condition condition,
                                        const MaskPolicy& masks, std::uint64_t seed) {
  FlightRecordFile file;
  file.rows = g.rows;
  PreferenceDataset pairs = convert_triples_to_pairs(file, domain, masks);
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(Stream::kContexts, seed);
  std::shuffle(order.begin(), order.end(), rng);
  const GroundTruthReward gt(g.theta);
  PreferenceDataset out(domain.feature_space);
  for (std::size_t i : order) {
    PreferenceRecord rec = pairs[i];
    if (wants_feature_labels(condition)) {
      const std::vector<std::size_t> feats =
          condition == Condition::kFp ? RelevanceMask::all(domain.n(), true).true_set() : rec.mask->true_set();
      for (std::size_t j : feats) rec.feature_labels.push_back(oracle_feature_pref(gt, rec.a1, rec.a2, j));
    }
    if (!is_pragmatic(condition)) {
      rec.mask.reset();
      rec.utterance.reset();
    }
    out.add(std::move(rec));
  }
  return out;
}

}  // namespace detail

// Per (reward, seed) job: one raw stream at the largest budget, then for
// each budget a prefix, augmentation, fresh training and evaluation.
inline EvalResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto cases = detail::reward_cases(cfg);
  const std::size_t max_budget = cfg.budgets.back();
  const std::size_t n_jobs = cases.size() * cfg.seeds.size();
  const std::size_t nb = cfg.budgets.size();

  struct Cell {
    double prob = 0.0;
    std::size_t n_train = 0, n_synth = 0;
  };
  std::vector<Cell> cells(n_jobs * nb);

  auto job = [&](std::size_t idx) {
    const std::size_t r = idx / cfg.seeds.size();
    const std::size_t s = idx % cfg.seeds.size();
    const auto& rc = cases[r];
    const std::uint64_t run_seed = detail::mix(cfg.seeds[s], r);

    PreferenceDataset raw(cfg.domain.feature_space);
    if (rc.group) {
      raw = detail::flight_records(*rc.group, cfg.domain, cfg.condition, cfg.masks, run_seed);
    } else {
      DataConfig dc;
      dc.seed = run_seed;
      dc.oracle = cfg.oracle;
      dc.masks = cfg.masks;
      dc.augment_mode = cfg.augment_mode;
      raw = simulate_records(rc.gt, cfg.domain, cfg.condition, max_budget, dc);
    }
    TrainConfig tc = cfg.train;
    tc.rng_seed = run_seed;
    for (std::size_t b = 0; b < nb; ++b) {
      PreferenceDataset data = prefix(raw, cfg.budgets[b]);
      if (is_pragmatic(cfg.condition)) data = augment(data, cfg.augment_mode);
      RewardModel model(cfg.domain.feature_space);
      try {
        model = train(data, cfg.domain, tc);
      } catch (const TrainingFailure& e) {
        throw TrainingFailure(e.epoch(), std::string(e.what()) + " (seed " + std::to_string(cfg.seeds[s]) +
                                             ", budget " + std::to_string(cfg.budgets[b]) + ")");
      }
      Cell& c = cells[idx * nb + b];
      c.prob = eval_gt_best_prob(model, rc.gt, cfg.domain, cfg.eval_pairs, run_seed);
      c.n_train = data.size();
      c.n_synth = data.synthesized_count();
    }
  };

  std::size_t threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n_jobs);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n_jobs; ++i) job(i);
  } else {
    std::vector<std::future<void>> workers;
    std::atomic<std::size_t> next{0};
    for (std::size_t t = 0; t < threads; ++t)
      workers.push_back(std::async(std::launch::async, [&] {
        for (std::size_t i = next++; i < n_jobs; i = next++) job(i);
      }));
    std::exception_ptr first_error;
    for (auto& w : workers) {
      try {
        w.get();
      } catch (...) {
        if (!first_error) first_error = std::current_exception();
      }
    }
    if (first_error) std::rethrow_exception(first_error);
  }

  EvalResult result;
  result.condition = cfg.condition;
  for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
    for (std::size_t b = 0; b < nb; ++b) {
      RunRow row;
      row.seed = cfg.seeds[s];
      row.budget = cfg.budgets[b];
      for (std::size_t r = 0; r < cases.size(); ++r) {
        const Cell& c = cells[(r * cfg.seeds.size() + s) * nb + b];
        row.gt_best_prob += c.prob;
        row.n_train_records += c.n_train;
        row.n_synth_records += c.n_synth;
      }
      row.gt_best_prob /= static_cast<double>(cases.size());
      result.rows.push_back(row);
    }
  }
  for (std::size_t b = 0; b < nb; ++b) {
    std::vector<double> v;
    for (std::size_t s = 0; s < cfg.seeds.size(); ++s) v.push_back(result.rows[s * nb + b].gt_best_prob);
    result.summary.push_back(summarize(cfg.budgets[b], v));
  }
  return result;
}

inline void write_csv(std::ostream& out, const EvalResult& r) {
  char buf[64];
  out << "condition,seed,budget,gt_best_prob,n_train_records,n_synth_records\n";
  const std::string cond = to_string(r.condition);
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof buf, "%.6f", row.gt_best_prob);
    out << cond << ',' << row.seed << ',' << row.budget << ',' << buf << ',' << row.n_train_records << ','
        << row.n_synth_records << '\n';
  }
  for (const auto& s : r.summary) {
    std::snprintf(buf, sizeof buf, "%.6f", s.mean);
    out << cond << ",mean," << s.budget << ',' << buf << ",,\n";
  }
  for (const auto& s : r.summary) {
    std::snprintf(buf, sizeof buf, "%.6f", s.stderr_);
    out << cond << ",stderr," << s.budget << ',' << buf << ",,\n";
  }
}

inline std::string to_csv(const EvalResult& r) {
  std::ostringstream os;
  write_csv(os, r);
  return os.str();
}

}  // namespace pfp
