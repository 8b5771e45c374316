#pragma once
//
// Turning free-text preference descriptions into relevance masks.
//
// Any feature the description does not mention is treated as irrelevant.
// Two parsers share that rule: a deterministic keyword lexicon and a client
// for an external language-model service.
//
// Lexicon phrases come in two forms:
//   "price"                  plain: matches as a substring of the utterance
//   "stop ~ fewest|number"   windowed: a token containing "stop" with a
//                            token containing one of the qualifiers at most
//                            kQualifierWindow tokens away
//

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstddef>
#include <fstream>
#include <map>
#include <regex>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "pfp/domain.hpp"
#include "pfp/errors.hpp"
#include "pfp/preference.hpp"

namespace pfp {

inline constexpr std::size_t kQualifierWindow = 3;

inline std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

inline std::vector<std::string> tokenize(const std::string& lowered) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : lowered) {
    if (std::isalnum(static_cast<unsigned char>(ch)) || ch == '$') {
      cur += ch;
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

struct Trigger {
  std::string head;
  std::vector<std::string> qualifiers;  // empty: plain substring trigger

  static Trigger parse(const std::string& phrase) {
    Trigger t;
    const auto tilde = phrase.find('~');
    if (tilde == std::string::npos) {
      t.head = to_lower(phrase);
    } else {
      t.head = to_lower(trim(phrase.substr(0, tilde)));
      std::string rest = phrase.substr(tilde + 1);
      std::size_t start = 0;
      while (start <= rest.size()) {
        const auto bar = rest.find('|', start);
        std::string q = to_lower(trim(rest.substr(start, bar == std::string::npos ? std::string::npos : bar - start)));
        if (!q.empty()) t.qualifiers.push_back(std::move(q));
        if (bar == std::string::npos) break;
        start = bar + 1;
      }
      if (t.qualifiers.empty()) throw std::invalid_argument("windowed phrase '" + phrase + "' has no qualifiers");
    }
    if (t.head.empty()) throw std::invalid_argument("lexicon phrases must be non-empty");
    return t;
  }

  bool matches(const std::string& lowered, const std::vector<std::string>& tokens) const {
    if (qualifiers.empty()) return lowered.find(head) != std::string::npos;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (tokens[i].find(head) == std::string::npos) continue;
      const std::size_t lo = i >= kQualifierWindow ? i - kQualifierWindow : 0;
      const std::size_t hi = std::min(tokens.size() - 1, i + kQualifierWindow);
      for (std::size_t k = lo; k <= hi; ++k) {
        if (k == i) continue;
        for (const auto& q : qualifiers)
          if (tokens[k].find(q) != std::string::npos) return true;
      }
    }
    return false;
  }
};

}  // namespace detail

// Trigger phrases per feature, in feature-space order.
class Lexicon {
 public:
  Lexicon(const FeatureSpace& space, const std::map<std::string, std::vector<std::string>>& phrases) {
    for (const auto& [name, _] : phrases)
      if (!space.index_of(name)) throw std::invalid_argument("lexicon names unknown feature '" + name + "'");
    for (const auto& f : space) {
      auto it = phrases.find(f.name());
      if (it == phrases.end() || it->second.empty())
        throw std::invalid_argument("lexicon has no trigger phrase for feature '" + f.name() + "'");
      std::vector<std::string> list;
      for (const auto& p : it->second) {
        detail::Trigger::parse(p);  // validates
        list.push_back(to_lower(p));
      }
      names_.push_back(f.name());
      phrases_.push_back(std::move(list));
    }
  }

  std::size_t size() const noexcept { return phrases_.size(); }
  const std::vector<std::string>& phrases(std::size_t j) const { return phrases_.at(j); }
  const std::string& feature_name(std::size_t j) const { return names_.at(j); }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (std::size_t k = 0; k < names_.size(); ++k) j[names_[k]] = phrases_[k];
    return j;
  }

  static Lexicon from_json(const FeatureSpace& space, const nlohmann::json& j) {
    return Lexicon(space, j.get<std::map<std::string, std::vector<std::string>>>());
  }

  static Lexicon load(const FeatureSpace& space, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open lexicon file '" + path + "'");
    return from_json(space, nlohmann::json::parse(in));
  }

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<std::string>> phrases_;
};

inline Lexicon mushroom_lexicon(const DomainSpec& d) {
  std::map<std::string, std::vector<std::string>> p;
  for (const auto& f : d.feature_space) {
    std::vector<std::string> list{f.name()};
    list.insert(list.end(), f.values().begin(), f.values().end());
    p[f.name()] = std::move(list);
  }
  p["color"].push_back("colour");
  p["smell"].insert(p["smell"].end(), {"odor", "odour", "scent", "stink"});
  p["texture"].push_back("feel");
  p["weight"].push_back("weigh");
  return Lexicon(d.feature_space, p);
}

inline Lexicon flight_lexicon(const DomainSpec& d) {
  const std::string stop_count = "number|numbers|fewest|few|fewer|more|many|most|less|least|multiple|count|amount";
  const std::string stop_length = "long|length|short|duration|time|hour|quick|brief";
  std::map<std::string, std::vector<std::string>> p;
  p["arrival-time-before-meeting"] = {"arriv", "meeting", "early", "on time", "before the", "late"};
  p["american"] = {"american"};
  p["delta"] = {"delta"};
  p["jetblue"] = {"jetblue", "jet blue"};
  p["southwest"] = {"southwest", "south west"};
  p["longest-stop"] = {"stop ~ " + stop_length, "layover ~ " + stop_length};
  p["number-of-stops"] = {"stop ~ " + stop_count, "layover ~ " + stop_count, "nonstop", "non-stop", "direct"};
  p["price"] = {"price", "cheap", "expensive", "cost", "$", "money", "fare", "afford", "budget", "dollar"};
  return Lexicon(d.feature_space, p);
}

inline Lexicon default_lexicon(const DomainSpec& d) {
  switch (d.label) {
    case DomainLabel::kMushroom: return mushroom_lexicon(d);
    case DomainLabel::kFlight: return flight_lexicon(d);
    case DomainLabel::kCustom: break;
  }
  std::map<std::string, std::vector<std::string>> p;
  for (const auto& f : d.feature_space) p[f.name()] = {f.name()};
  return Lexicon(d.feature_space, p);
}

enum class ParseSource { kKeyword, kLm };

struct ParseResult {
  RelevanceMask mask;
  ParseSource source = ParseSource::kKeyword;
  std::vector<std::vector<std::string>> matched_phrases;
};

inline ParseResult parse_keywords(const std::string& utterance, const DomainSpec& domain, const Lexicon& lexicon) {
  if (lexicon.size() != domain.n()) throw std::invalid_argument("lexicon does not match domain");
  const std::string lowered = to_lower(utterance);
  const auto tokens = detail::tokenize(lowered);
  ParseResult res;
  res.source = ParseSource::kKeyword;
  res.mask = RelevanceMask::all(domain.n(), false);
  res.matched_phrases.resize(domain.n());
  for (std::size_t j = 0; j < domain.n(); ++j) {
    for (const auto& phrase : lexicon.phrases(j)) {
      if (detail::Trigger::parse(phrase).matches(lowered, tokens)) {
        res.mask.relevant[j] = true;
        res.matched_phrases[j].push_back(phrase);
      }
    }
  }
  return res;
}

// --- language-model client --------------------------------------------------

struct LmClientConfig {
  std::string endpoint;  // e.g. http://127.0.0.1:9000/parse
  std::string prompt_template =
      "Features: {feature_list}\n"
      "Description: \"{utterance}\"\n"
      "Answer with JSON {\"mask\": [...]} holding one 0/1 entry per feature, in order, "
      "where 1 marks a feature the description mentions as mattering.";
  std::chrono::milliseconds timeout{2000};
  std::size_t max_retries = 2;

  void validate() const {
    if (prompt_template.find("{utterance}") == std::string::npos ||
        prompt_template.find("{feature_list}") == std::string::npos)
      throw std::invalid_argument("prompt template needs {utterance} and {feature_list} placeholders");
  }
};

namespace detail {

inline void replace_all(std::string& s, const std::string& from, const std::string& to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
    s.replace(pos, from.size(), to);
}

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

inline Endpoint split_endpoint(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw std::invalid_argument("bad LM endpoint URL '" + url + "'");
  return {m[1].str(), m[2].matched ? m[2].str() : std::string("/")};
}

}  // namespace detail

inline std::string fill_prompt(const LmClientConfig& client, const std::string& utterance, const DomainSpec& domain) {
  std::string features;
  for (std::size_t j = 0; j < domain.n(); ++j) {
    if (j) features += ", ";
    features += domain.feature_space[j].name();
  }
  std::string prompt = client.prompt_template;
  detail::replace_all(prompt, "{feature_list}", features);
  detail::replace_all(prompt, "{utterance}", utterance);
  return prompt;
}

// Validates an LM response body against the {"mask": [0|1 x n]} contract.
inline RelevanceMask decode_lm_mask(const std::string& body, std::size_t n) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const std::exception& e) {
    throw ParseProtocolError(std::string("response is not JSON: ") + e.what(), body);
  }
  if (!j.is_object() || !j.contains("mask") || !j["mask"].is_array())
    throw ParseProtocolError("response lacks a \"mask\" array", body);
  const auto& arr = j["mask"];
  if (arr.size() != n)
    throw ParseProtocolError("mask has " + std::to_string(arr.size()) + " entries, expected " + std::to_string(n), body);
  std::vector<bool> m;
  for (const auto& v : arr) {
    if (!v.is_number_integer() || (v.get<int>() != 0 && v.get<int>() != 1))
      throw ParseProtocolError("mask entries must be 0 or 1", body);
    m.push_back(v.get<int>() == 1);
  }
  return RelevanceMask(std::move(m));
}

// One POST per attempt; transport failures and 5xx answers are retried up
// to max_retries times. Any other answer is decoded or rejected.
inline ParseResult parse_via_lm(const std::string& utterance, const DomainSpec& domain, const LmClientConfig& client) {
  client.validate();
  const auto ep = detail::split_endpoint(client.endpoint);
  const std::string body = nlohmann::json{{"prompt", fill_prompt(client, utterance, domain)}}.dump();

  std::string last_error = "no attempt made";
  for (std::size_t attempt = 0; attempt <= client.max_retries; ++attempt) {
    httplib::Client cli(ep.origin);
    cli.set_connection_timeout(client.timeout);
    cli.set_read_timeout(client.timeout);
    cli.set_write_timeout(client.timeout);
    auto res = cli.Post(ep.path, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) throw ParseProtocolError("HTTP " + std::to_string(res->status), res->body);
    ParseResult out;
    out.mask = decode_lm_mask(res->body, domain.n());
    out.source = ParseSource::kLm;
    out.matched_phrases.resize(domain.n());
    return out;
  }
  throw ServiceUnavailable("LM endpoint " + client.endpoint + " failed after " +
                           std::to_string(client.max_retries + 1) + " attempts: " + last_error);
}

}  // namespace pfp
