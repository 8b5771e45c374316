#pragma once
//
// Live elicitation sessions.
//
// A session serves random size-2 comparisons, takes a human's answers
// (example choice, optional per-feature choices, optional free-text
// description), re-augments its data and retrains the reward model from
// scratch before answering. SessionManager holds sessions in memory;
// ElicitationServer exposes them over HTTP + JSON.
//

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "pfp/augment.hpp"
#include "pfp/domain.hpp"
#include "pfp/harness.hpp"
#include "pfp/lang_parse.hpp"
#include "pfp/oracle.hpp"
#include "pfp/preference.hpp"
#include "pfp/reward_model.hpp"
#include "pfp/rng.hpp"

namespace pfp {

// Error surfaced to clients as {"error": code, "detail": ...}.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(int status, std::string code, const std::string& detail)
      : std::runtime_error(detail), status_(status), code_(std::move(code)) {}

  int status() const noexcept { return status_; }
  const std::string& code() const noexcept { return code_; }

  static ServiceError bad_request(const std::string& d) { return {400, "bad_request", d}; }
  static ServiceError validation(const std::string& d) { return {400, "validation_error", d}; }
  static ServiceError not_found(const std::string& d) { return {404, "not_found", d}; }
  static ServiceError conflict(const std::string& d) { return {409, "conflict", d}; }

 private:
  int status_;
  std::string code_;
};

enum class SessionMode { kPractice, kFree };

inline SessionMode parse_session_mode(const std::string& s) {
  if (s == "practice") return SessionMode::kPractice;
  if (s == "free") return SessionMode::kFree;
  throw std::invalid_argument("unknown session mode '" + s + "'");
}

inline std::string to_string(SessionMode m) { return m == SessionMode::kPractice ? "practice" : "free"; }

struct SessionParams {
  DomainLabel domain = DomainLabel::kMushroom;
  Condition condition = Condition::kPragFp;
  SessionMode mode = SessionMode::kPractice;
  std::uint64_t seed = 0;
  std::size_t relevant_count = 1;  // practice-mode reward sparsity
  TrainConfig train;
  std::size_t eval_pairs = 200;

  static SessionParams from_json(const nlohmann::json& j) {
    SessionParams p;
    try {
      p.domain = parse_domain_label(j.value("domain", std::string("mushroom")));
      if (p.domain == DomainLabel::kCustom) throw std::invalid_argument("custom domains are not served");
      p.condition = parse_condition(j.value("condition", std::string("prag-fp")));
      p.mode = parse_session_mode(j.value("mode", std::string("practice")));
      p.seed = j.value("seed", std::uint64_t{0});
      p.relevant_count = j.value("relevant_count", std::size_t{1});
      if (j.contains("train")) p.train = config_from_json(j.at("train"));
      p.eval_pairs = j.value("eval_pairs", p.eval_pairs);
      if (p.eval_pairs < 1) throw std::invalid_argument("eval_pairs must be at least 1");
    } catch (const nlohmann::json::exception& e) {
      throw ServiceError::bad_request(e.what());
    } catch (const std::invalid_argument& e) {
      throw ServiceError::bad_request(e.what());
    }
    return p;
  }

  nlohmann::json to_json() const {
    return {{"domain", to_string(domain)},
            {"condition", to_string(condition)},
            {"mode", to_string(mode)},
            {"seed", seed},
            {"relevant_count", relevant_count},
            {"train", config_to_json(train)},
            {"eval_pairs", eval_pairs}};
  }
};

struct QueryPayload {
  std::string query_id;
  Action a1, a2;
};

enum class Choice { kFirst, kSecond, kSkip };

struct ResponsePayload {
  std::string query_id;
  Choice example_choice = Choice::kFirst;
  std::optional<std::vector<Choice>> feature_choices;
  std::optional<std::string> description;

  // Missing or malformed fields are collected and reported together.
  static ResponsePayload from_json(const nlohmann::json& j) {
    ResponsePayload r;
    std::vector<std::string> problems;
    auto choice = [&](const nlohmann::json& v, bool allow_skip, const std::string& field) -> Choice {
      if (!v.is_string()) {
        problems.push_back(field + " must be a string");
        return Choice::kSkip;
      }
      const auto s = v.get<std::string>();
      if (s == "first") return Choice::kFirst;
      if (s == "second") return Choice::kSecond;
      if (s == "skip" && allow_skip) return Choice::kSkip;
      problems.push_back(field + " has invalid value '" + s + "'");
      return Choice::kSkip;
    };
    if (!j.is_object()) throw ServiceError::validation("response body must be a JSON object");
    if (j.contains("query_id") && j["query_id"].is_string())
      r.query_id = j["query_id"].get<std::string>();
    else
      problems.push_back("query_id");
    if (j.contains("example_choice"))
      r.example_choice = choice(j["example_choice"], false, "example_choice");
    else
      problems.push_back("example_choice");
    if (j.contains("feature_choices") && !j["feature_choices"].is_null()) {
      if (!j["feature_choices"].is_array()) {
        problems.push_back("feature_choices must be an array");
      } else {
        std::vector<Choice> fc;
        for (std::size_t k = 0; k < j["feature_choices"].size(); ++k)
          fc.push_back(choice(j["feature_choices"][k], true, "feature_choices[" + std::to_string(k) + "]"));
        r.feature_choices = std::move(fc);
      }
    }
    if (j.contains("description") && !j["description"].is_null()) {
      if (j["description"].is_string())
        r.description = j["description"].get<std::string>();
      else
        problems.push_back("description must be a string");
    }
    if (!problems.empty()) {
      std::string msg = "invalid response; missing or malformed: ";
      for (std::size_t k = 0; k < problems.size(); ++k) msg += (k ? ", " : "") + problems[k];
      throw ServiceError::validation(msg);
    }
    return r;
  }

  nlohmann::json to_json() const {
    auto name = [](Choice c) { return c == Choice::kFirst ? "first" : c == Choice::kSecond ? "second" : "skip"; };
    nlohmann::json j{{"query_id", query_id}, {"example_choice", name(example_choice)}};
    if (feature_choices) {
      nlohmann::json fc = nlohmann::json::array();
      for (Choice c : *feature_choices) fc.push_back(name(c));
      j["feature_choices"] = fc;
    } else {
      j["feature_choices"] = nullptr;
    }
    j["description"] = description ? nlohmann::json(*description) : nlohmann::json(nullptr);
    return j;
  }
};

struct ModelSnapshot {
  nlohmann::json body;
};

class Session {
 public:
  Session(std::string id, SessionParams params)
      : id_(std::move(id)),
        params_(std::move(params)),
        domain_(make_domain(params_.domain)),
        lexicon_(default_lexicon(domain_)),
        sampler_(2, params_.seed, Stream::kSession),
        raw_(domain_.feature_space),
        train_data_(domain_.feature_space),
        model_(domain_.feature_space),
        created_(std::chrono::system_clock::now()),
        updated_(created_) {
    params_.train.rng_seed = params_.seed;
    params_.train.validate();
    if (params_.mode == SessionMode::kPractice) {
      if (params_.relevant_count < 1 || params_.relevant_count > domain_.n())
        throw ServiceError::bad_request("relevant_count out of range");
      gt_ = sample_reward(domain_, params_.relevant_count, params_.seed);
    }
  }

  const std::string& id() const noexcept { return id_; }
  const SessionParams& params() const noexcept { return params_; }
  const DomainSpec& domain() const noexcept { return domain_; }
  const std::optional<GroundTruthReward>& ground_truth() const noexcept { return gt_; }
  std::mutex& mutex() noexcept { return mu_; }

  // Same query until it is answered.
  nlohmann::json next_query() {
    if (!pending_) {
      Context c = sample_context(domain_, sampler_);
      pending_ = QueryPayload{"q" + std::to_string(history_.size() + 1), c.actions[0], c.actions[1]};
    }
    return query_json(*pending_);
  }

  nlohmann::json submit(const ResponsePayload& resp) {
    if (!pending_ || resp.query_id != pending_->query_id)
      throw ServiceError::conflict("query '" + resp.query_id + "' is not the outstanding query" +
                                   (pending_ ? " ('" + pending_->query_id + "')" : std::string()));
    PreferenceRecord rec = build_record(*pending_, resp);
    raw_.add(std::move(rec));
    history_.push_back(resp);
    pending_.reset();
    retrain();
    updated_ = std::chrono::system_clock::now();
    return snapshot();
  }

  nlohmann::json snapshot() const {
    nlohmann::json j;
    j["session_id"] = id_;
    j["combiner"] = model_.combiner();
    nlohmann::json features = nlohmann::json::array();
    for (std::size_t k = 0; k < domain_.n(); ++k) {
      const FeatureSpec& f = domain_.feature_space[k];
      nlohmann::json vals = nlohmann::json::array();
      if (f.is_discrete()) {
        for (std::size_t v = 0; v < f.values().size(); ++v)
          vals.push_back({{"value", f.values()[v]},
                          {"encoding", f.encodings()[v]},
                          {"reward", feature_reward(model_, k, f.encodings()[v])}});
      } else {
        for (double x : {f.lower(), f.upper()})
          vals.push_back({{"value", f.describe(x)}, {"encoding", x}, {"reward", feature_reward(model_, k, x)}});
      }
      features.push_back({{"name", f.name()}, {"values", vals}});
    }
    j["feature_rewards"] = features;
    if (gt_) {
      j["gt_best_probability"] = eval_gt_best_prob(model_, *gt_, domain_, params_.eval_pairs, params_.seed);
      j["gt_theta"] = gt_->theta();
    } else {
      j["gt_best_probability"] = nullptr;
    }
    j["raw_records"] = train_data_.raw_count();
    j["synthesized_records"] = train_data_.synthesized_count();
    j["responses"] = history_.size();
    return j;
  }

  nlohmann::json checkpoint() const { return checkpoint_to_json(model_, domain_, params_.train); }

  nlohmann::json export_json() const {
    nlohmann::json responses = nlohmann::json::array();
    for (const auto& r : history_) responses.push_back(r.to_json());
    auto secs = [](auto tp) {
      return std::chrono::duration_cast<std::chrono::seconds>(tp.time_since_epoch()).count();
    };
    return {{"session", params_.to_json()},
            {"dataset_jsonl", to_jsonl(train_data_)},
            {"checkpoint", checkpoint()},
            {"responses", responses},
            {"created", secs(created_)},
            {"updated", secs(updated_)}};
  }

  const RewardModel& model() const noexcept { return model_; }
  const PreferenceDataset& training_data() const noexcept { return train_data_; }

 private:
  nlohmann::json query_json(const QueryPayload& q) const {
    auto table = [&](const Action& a) {
      nlohmann::json rows = nlohmann::json::array();
      for (std::size_t k = 0; k < domain_.n(); ++k)
        rows.push_back({{"feature", domain_.feature_space[k].name()},
                        {"value", domain_.feature_space[k].describe(a[k])},
                        {"encoding", a[k]}});
      return rows;
    };
    nlohmann::json required = nlohmann::json::array({"example_choice"});
    if (params_.condition == Condition::kFp) required.push_back("feature_choices");
    if (is_pragmatic(params_.condition)) required.push_back("description");
    return {{"query_id", q.query_id},
            {"condition", to_string(params_.condition)},
            {"first", table(q.a1)},
            {"second", table(q.a2)},
            {"required", required}};
  }

  static FeaturePref to_pref(Choice c) {
    return c == Choice::kFirst ? FeaturePref::kFirst : c == Choice::kSecond ? FeaturePref::kSecond : FeaturePref::kNone;
  }

  PreferenceRecord build_record(const QueryPayload& q, const ResponsePayload& resp) const {
    const std::size_t n = domain_.n();
    const Condition cond = params_.condition;
    std::vector<std::string> missing;
    if (resp.feature_choices && resp.feature_choices->size() != n)
      missing.push_back("feature_choices must have " + std::to_string(n) + " entries");
    if (cond == Condition::kFp && !resp.feature_choices) missing.push_back("feature_choices");
    if (is_pragmatic(cond) && (!resp.description || resp.description->empty())) missing.push_back("description");
    if (!missing.empty()) {
      std::string msg = "response does not match condition " + to_string(cond) + "; missing: ";
      for (std::size_t k = 0; k < missing.size(); ++k) msg += (k ? ", " : "") + missing[k];
      throw ServiceError::validation(msg);
    }

    PreferenceRecord rec;
    rec.a1 = q.a1;
    rec.a2 = q.a2;
    rec.label = resp.example_choice == Choice::kFirst ? ExamplePref::kFirst : ExamplePref::kSecond;
    if (cond == Condition::kFp) {
      for (std::size_t k = 0; k < n; ++k) rec.feature_labels.push_back({k, to_pref((*resp.feature_choices)[k])});
    }
    if (is_pragmatic(cond)) {
      rec.utterance = *resp.description;
      rec.mask = parse_keywords(*resp.description, domain_, lexicon_).mask;
      if (cond == Condition::kPragFp && resp.feature_choices)
        for (std::size_t k : rec.mask->true_set()) rec.feature_labels.push_back({k, to_pref((*resp.feature_choices)[k])});
    }
    return rec;
  }

  void retrain() {
    train_data_ = is_pragmatic(params_.condition) ? augment(raw_) : raw_;
    model_ = train(train_data_, domain_, params_.train);
  }

  std::string id_;
  SessionParams params_;
  DomainSpec domain_;
  Lexicon lexicon_;
  std::optional<GroundTruthReward> gt_;
  ContextSampler sampler_;
  PreferenceDataset raw_;
  PreferenceDataset train_data_;
  RewardModel model_;
  std::vector<ResponsePayload> history_;
  std::optional<QueryPayload> pending_;
  std::chrono::system_clock::time_point created_, updated_;
  std::mutex mu_;
};

// In-memory session registry. Calls on one session are serialized by that
// session's mutex; different sessions proceed concurrently.
class SessionManager {
 public:
  SessionManager() : salt_(std::random_device{}()) {}

  std::string create(const SessionParams& params) {
    std::lock_guard<std::mutex> lock(mu_);
    std::ostringstream id;
    id << "s" << std::hex << (salt_ ^ (0x9e3779b97f4a7c15ULL * ++counter_));
    sessions_.emplace(id.str(), std::make_shared<Session>(id.str(), params));
    return id.str();
  }

  template <typename Fn>
  auto with_session(const std::string& id, Fn&& fn) {
    std::shared_ptr<Session> s;
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = sessions_.find(id);
      if (it == sessions_.end()) throw ServiceError::not_found("unknown session '" + id + "'");
      s = it->second;
    }
    std::lock_guard<std::mutex> lock(s->mutex());
    return fn(*s);
  }

  nlohmann::json next_query(const std::string& id) {
    return with_session(id, [](Session& s) { return s.next_query(); });
  }
  nlohmann::json submit_response(const std::string& id, const ResponsePayload& r) {
    return with_session(id, [&](Session& s) { return s.submit(r); });
  }
  nlohmann::json model_snapshot(const std::string& id) {
    return with_session(id, [](Session& s) { return s.snapshot(); });
  }
  nlohmann::json export_session(const std::string& id) {
    return with_session(id, [](Session& s) { return s.export_json(); });
  }

  // Recreates an exported session by re-asking its queries and re-submitting
  // the recorded responses. Returns the new session id.
  std::string replay(const nlohmann::json& exported) {
    const std::string id = create(SessionParams::from_json(exported.at("session")));
    for (const auto& r : exported.at("responses")) {
      next_query(id);
      submit_response(id, ResponsePayload::from_json(r));
    }
    return id;
  }

 private:
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t salt_;
  std::uint64_t counter_ = 0;
};

// Retrains from an exported dataset with the checkpoint's config.
inline RewardModel retrain_from_export(const nlohmann::json& exported) {
  const SessionParams params = SessionParams::from_json(exported.at("session"));
  const DomainSpec domain = make_domain(params.domain);
  std::istringstream in(exported.at("dataset_jsonl").get<std::string>());
  const PreferenceDataset data = read_jsonl(in, domain.feature_space);
  const TrainConfig cfg = config_from_json(exported.at("checkpoint").at("config"));
  if (data.empty()) return RewardModel(domain.feature_space);
  return train(data, domain, cfg);
}

class ElicitationServer {
 public:
  ElicitationServer() { routes(); }

  SessionManager& sessions() noexcept { return sessions_; }

  // Blocks until stop().
  bool listen(const std::string& host, int port) { return server_.listen(host, port); }

  // Binds an ephemeral port; call listen_after_bind() (usually on a thread).
  int bind_any(const std::string& host = "127.0.0.1") { return server_.bind_to_any_port(host); }
  bool listen_after_bind() { return server_.listen_after_bind(); }
  void wait_until_ready() { server_.wait_until_ready(); }
  void stop() { server_.stop(); }

 private:
  static void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  template <typename Fn>
  static void guarded(httplib::Response& res, Fn&& fn) {
    try {
      fn();
    } catch (const ServiceError& e) {
      send_json(res, e.status(), {{"error", e.code()}, {"detail", e.what()}});
    } catch (const nlohmann::json::exception& e) {
      send_json(res, 400, {{"error", "bad_request"}, {"detail", e.what()}});
    } catch (const std::invalid_argument& e) {
      send_json(res, 400, {{"error", "bad_request"}, {"detail", e.what()}});
    } catch (const std::exception& e) {
      send_json(res, 500, {{"error", "internal"}, {"detail", e.what()}});
    }
  }

  void routes() {
    server_.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                 {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                 {"Access-Control-Allow-Headers", "Content-Type"}});
    server_.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server_.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto body = req.body.empty() ? nlohmann::json::object() : nlohmann::json::parse(req.body);
        send_json(res, 201, {{"id", sessions_.create(SessionParams::from_json(body))}});
      });
    });
    server_.Get(R"(/sessions/([^/]+)/query)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send_json(res, 200, sessions_.next_query(req.matches[1])); });
    });
    server_.Post(R"(/sessions/([^/]+)/response)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        // Unknown session wins over a malformed body.
        const std::string id = req.matches[1];
        sessions_.with_session(id, [](Session&) { return 0; });
        nlohmann::json body;
        try {
          body = nlohmann::json::parse(req.body);
        } catch (const nlohmann::json::exception& e) {
          throw ServiceError::validation(std::string("body is not JSON: ") + e.what());
        }
        send_json(res, 200, sessions_.submit_response(id, ResponsePayload::from_json(body)));
      });
    });
    server_.Get(R"(/sessions/([^/]+)/model)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send_json(res, 200, sessions_.model_snapshot(req.matches[1])); });
    });
    server_.Get(R"(/sessions/([^/]+)/export)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send_json(res, 200, sessions_.export_session(req.matches[1])); });
    });
  }

  SessionManager sessions_;
  httplib::Server server_;
};

}  // namespace pfp
