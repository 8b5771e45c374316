#pragma once
//
// Preference labels, relevance masks and the preference dataset together
// with its JSONL line format.
//

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "pfp/domain.hpp"
#include "pfp/errors.hpp"

namespace pfp {

// Example-level relation f(a1, a2). Wire values: 1, -1, 0.
enum class ExamplePref : int { kFirst = 1, kSecond = -1, kTie = 0 };

// Feature-level relation phi on one coordinate. kNone marks indifference.
enum class FeaturePref : int { kFirst = 1, kSecond = -1, kNone = 0 };

inline ExamplePref flip(ExamplePref p) {
  return p == ExamplePref::kTie ? p : (p == ExamplePref::kFirst ? ExamplePref::kSecond : ExamplePref::kFirst);
}

inline FeaturePref flip(FeaturePref p) {
  return p == FeaturePref::kNone ? p : (p == FeaturePref::kFirst ? FeaturePref::kSecond : FeaturePref::kFirst);
}

struct FeatureLabel {
  std::size_t feature = 0;
  FeaturePref label = FeaturePref::kNone;

  friend bool operator==(const FeatureLabel&, const FeatureLabel&) = default;
};

struct RelevanceMask {
  std::vector<bool> relevant;

  RelevanceMask() = default;
  explicit RelevanceMask(std::vector<bool> r) : relevant(std::move(r)) {}
  static RelevanceMask all(std::size_t n, bool value) { return RelevanceMask(std::vector<bool>(n, value)); }

  std::size_t size() const noexcept { return relevant.size(); }
  bool operator[](std::size_t j) const { return relevant[j]; }
  std::size_t count() const { return static_cast<std::size_t>(std::count(relevant.begin(), relevant.end(), true)); }

  std::vector<std::size_t> true_set() const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < relevant.size(); ++j)
      if (relevant[j]) out.push_back(j);
    return out;
  }

  friend bool operator==(const RelevanceMask&, const RelevanceMask&) = default;
};

// Query condition: which kinds of labels a query collects.
enum class Condition { kRlhf, kFp, kPragRlhf, kPragFp };

inline std::string to_string(Condition c) {
  switch (c) {
    case Condition::kRlhf: return "rlhf";
    case Condition::kFp: return "fp";
    case Condition::kPragRlhf: return "prag-rlhf";
    case Condition::kPragFp: return "prag-fp";
  }
  return "rlhf";
}

inline Condition parse_condition(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return c == '_' ? '-' : std::tolower(c); });
  if (s == "rlhf") return Condition::kRlhf;
  if (s == "fp") return Condition::kFp;
  if (s == "prag-rlhf") return Condition::kPragRlhf;
  if (s == "prag-fp") return Condition::kPragFp;
  throw std::invalid_argument("unknown condition '" + s + "'");
}

inline bool is_pragmatic(Condition c) { return c == Condition::kPragRlhf || c == Condition::kPragFp; }
inline bool wants_feature_labels(Condition c) { return c == Condition::kFp || c == Condition::kPragFp; }

struct PreferenceRecord {
  Action a1;
  Action a2;
  ExamplePref label = ExamplePref::kTie;
  std::vector<FeatureLabel> feature_labels;
  std::optional<RelevanceMask> mask;
  std::optional<std::string> utterance;
  bool synthesized = false;

  // Pair identity ignoring provenance; used for de-duplication.
  bool same_comparison(const PreferenceRecord& o) const { return a1 == o.a1 && a2 == o.a2 && label == o.label; }

  friend bool operator==(const PreferenceRecord&, const PreferenceRecord&) = default;
};

inline void validate(const PreferenceRecord& r, std::size_t n) {
  if (r.a1.size() != n || r.a2.size() != n)
    throw std::invalid_argument("record actions must have " + std::to_string(n) + " coordinates");
  std::set<std::size_t> seen;
  for (const auto& fl : r.feature_labels) {
    if (fl.feature >= n) throw std::invalid_argument("feature label index out of range");
    if (!seen.insert(fl.feature).second) throw std::invalid_argument("duplicate feature label index");
  }
  if (r.mask && r.mask->size() != n) throw std::invalid_argument("mask length must equal n");
  if (r.synthesized && (r.mask || r.utterance))
    throw std::invalid_argument("synthesized records carry neither mask nor utterance");
}

class PreferenceDataset {
 public:
  explicit PreferenceDataset(FeatureSpace space) : space_(std::move(space)) {}

  const FeatureSpace& feature_space() const noexcept { return space_; }
  const std::vector<PreferenceRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const PreferenceRecord& operator[](std::size_t i) const { return records_.at(i); }
  auto begin() const { return records_.begin(); }
  auto end() const { return records_.end(); }

  void add(PreferenceRecord r) {
    validate(r, space_.size());
    records_.push_back(std::move(r));
  }

  std::size_t synthesized_count() const {
    return static_cast<std::size_t>(
        std::count_if(records_.begin(), records_.end(), [](const auto& r) { return r.synthesized; }));
  }
  std::size_t raw_count() const { return size() - synthesized_count(); }

  friend bool operator==(const PreferenceDataset&, const PreferenceDataset&) = default;

 private:
  FeatureSpace space_;
  std::vector<PreferenceRecord> records_;
};

// --- JSONL -----------------------------------------------------------------

inline nlohmann::json record_to_json(const PreferenceRecord& r) {
  nlohmann::json fl = nlohmann::json::array();
  for (const auto& l : r.feature_labels) fl.push_back({{"j", l.feature}, {"label", static_cast<int>(l.label)}});
  nlohmann::json j;
  j["a1"] = r.a1.values;
  j["a2"] = r.a2.values;
  j["label"] = static_cast<int>(r.label);
  j["feature_labels"] = fl;
  if (r.mask) {
    std::vector<int> m;
    for (bool b : r.mask->relevant) m.push_back(b ? 1 : 0);
    j["mask"] = m;
  } else {
    j["mask"] = nullptr;
  }
  j["utterance"] = r.utterance ? nlohmann::json(*r.utterance) : nlohmann::json(nullptr);
  j["synthesized"] = r.synthesized;
  return j;
}

inline int parse_ternary(const nlohmann::json& v, const char* what) {
  const int x = v.get<int>();
  if (x < -1 || x > 1) throw std::invalid_argument(std::string(what) + " must be 1, -1 or 0");
  return x;
}

inline PreferenceRecord record_from_json(const nlohmann::json& j) {
  PreferenceRecord r;
  r.a1 = Action(j.at("a1").get<std::vector<double>>());
  r.a2 = Action(j.at("a2").get<std::vector<double>>());
  r.label = static_cast<ExamplePref>(parse_ternary(j.at("label"), "label"));
  if (j.contains("feature_labels"))
    for (const auto& fl : j.at("feature_labels"))
      r.feature_labels.push_back(
          {fl.at("j").get<std::size_t>(), static_cast<FeaturePref>(parse_ternary(fl.at("label"), "feature label"))});
  if (j.contains("mask") && !j.at("mask").is_null()) {
    std::vector<bool> m;
    for (const auto& b : j.at("mask")) {
      const int v = b.get<int>();
      if (v != 0 && v != 1) throw std::invalid_argument("mask entries must be 0 or 1");
      m.push_back(v == 1);
    }
    r.mask = RelevanceMask(std::move(m));
  }
  if (j.contains("utterance") && !j.at("utterance").is_null()) r.utterance = j.at("utterance").get<std::string>();
  r.synthesized = j.value("synthesized", false);
  return r;
}

inline void write_jsonl(std::ostream& out, const PreferenceDataset& d) {
  for (const auto& r : d) out << record_to_json(r).dump() << '\n';
}

inline std::string to_jsonl(const PreferenceDataset& d) {
  std::string s;
  for (const auto& r : d) s += record_to_json(r).dump() + '\n';
  return s;
}

// Reads one record per non-blank line; errors name the offending line.
inline PreferenceDataset read_jsonl(std::istream& in, const FeatureSpace& space) {
  PreferenceDataset d(space);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      d.add(record_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw IngestionError(lineno, e.what());
    }
  }
  return d;
}

}  // namespace pfp
