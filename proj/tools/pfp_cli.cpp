// pfp: experiments, augmentation, parsing, flight ingestion and the
// elicitation server from the command line.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pfp/augment.hpp"
#include "pfp/domain.hpp"
#include "pfp/harness.hpp"
#include "pfp/lang_parse.hpp"
#include "pfp/preference.hpp"
#include "pfp/service.hpp"

namespace {

// TOML (CLI11's own reader) or a JSON object with the same keys. Keys
// without a section belong to `experiment run`.
class TomlOrJsonConfig : public CLI::ConfigTOML {
 public:
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    std::stringstream buf;
    buf << input.rdbuf();
    const std::string text = buf.str();
    const auto first = text.find_first_not_of(" \t\r\n");
    std::vector<CLI::ConfigItem> items;
    if (first == std::string::npos || text[first] != '{') {
      std::istringstream toml(text);
      items = CLI::ConfigTOML::from_config(toml);
    } else {
      flatten(nlohmann::json::parse(text), {}, items);
    }
    for (auto& item : items)
      if (item.parents.empty() && item.name != "--") item.parents = {"experiment", "run"};
    return items;
  }

 private:
  static std::string scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void flatten(const nlohmann::json& obj, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& out) {
    for (const auto& [key, v] : obj.items()) {
      if (v.is_object()) {
        auto p = parents;
        p.push_back(key);
        flatten(v, p, out);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (v.is_array())
        for (const auto& e : v) item.inputs.push_back(scalar(e));
      else
        item.inputs.push_back(scalar(v));
      out.push_back(std::move(item));
    }
  }
};

// "1..20", "1,2,5,10" or a mix such as "1..5,10,20".
std::vector<std::size_t> parse_budgets(const std::string& spec) {
  std::vector<std::size_t> out;
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part.empty()) continue;
    const auto dots = part.find("..");
    if (dots == std::string::npos) {
      out.push_back(std::stoul(part));
    } else {
      const std::size_t lo = std::stoul(part.substr(0, dots));
      const std::size_t hi = std::stoul(part.substr(dots + 2));
      if (hi < lo) throw std::invalid_argument("bad budget range '" + part + "'");
      for (std::size_t b = lo; b <= hi; ++b) out.push_back(b);
    }
  }
  if (out.empty()) throw std::invalid_argument("empty budget schedule");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  return out;
}

struct MaskFlags {
  std::string source;
  std::string lexicon_path;
  std::string lm_endpoint;
  std::size_t lm_retries = 2;
  int lm_timeout_ms = 2000;

  void add_to(CLI::App* app) {
    app->add_option("--mask-source", source, "oracle | keyword | lm")
        ->check(CLI::IsMember({"oracle", "keyword", "lm"}));
    app->add_option("--lexicon", lexicon_path, "keyword lexicon JSON");
    app->add_option("--lm-endpoint", lm_endpoint, "LM parser URL, e.g. http://localhost:9000/parse");
    app->add_option("--lm-retries", lm_retries);
    app->add_option("--lm-timeout-ms", lm_timeout_ms);
  }

  pfp::MaskPolicy policy(const pfp::DomainSpec& domain, pfp::MaskSource fallback) const {
    pfp::MaskPolicy p;
    p.source = source.empty() ? fallback : pfp::parse_mask_source(source);
    if (!lexicon_path.empty()) p.lexicon = pfp::Lexicon::load(domain.feature_space, lexicon_path);
    if (p.source == pfp::MaskSource::kLm) {
      pfp::LmClientConfig lm;
      lm.endpoint = lm_endpoint;
      lm.max_retries = lm_retries;
      lm.timeout = std::chrono::milliseconds(lm_timeout_ms);
      if (lm.endpoint.empty()) throw std::invalid_argument("--mask-source lm needs --lm-endpoint");
      lm.validate();
      p.lm = lm;
    }
    return p;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pragmatic feature preference toolkit"};
  app.require_subcommand(1);
  app.config_formatter(std::make_shared<TomlOrJsonConfig>());
  app.set_config("--config", "", "TOML or JSON file mirroring the experiment run flags");

  // experiment run
  auto* experiment = app.add_subcommand("experiment", "Budget/seed sweeps")->require_subcommand(1)->fallthrough();
  auto* run = experiment->add_subcommand("run", "Run one condition and write a CSV")->fallthrough();
  std::string domain_name = "mushroom", condition_name = "prag-fp", budgets = "1..20", out_csv, flights, mode = "seen";
  std::size_t relevant = 1, n_seeds = 5, eval_pairs = 200, rewards = 2, threads = 0;
  std::uint64_t seed_base = 0, reward_seed = 0;
  pfp::TrainConfig train;
  std::string reduction = pfp::to_string(train.reduction);
  MaskFlags exp_masks;
  run->add_option("--domain", domain_name)->check(CLI::IsMember({"mushroom", "flight"}));
  run->add_option("--condition", condition_name)->check(CLI::IsMember({"rlhf", "fp", "prag-rlhf", "prag-fp"}));
  run->add_option("--relevant-count", relevant, "non-zero reward weights");
  run->add_option("--budgets", budgets, "e.g. 1..20 or 1,5,10");
  run->add_option("--seeds", n_seeds, "number of seeds");
  run->add_option("--seed-base", seed_base, "first seed");
  run->add_option("--eval-pairs", eval_pairs);
  run->add_option("--beta", train.beta);
  run->add_option("--lr", train.learning_rate);
  run->add_option("--epochs", train.epochs);
  run->add_option("--init-scale", train.init_scale);
  run->add_option("--reduction", reduction)->check(CLI::IsMember({"sum", "mean"}));
  run->add_option("--rewards", rewards, "sampled reward functions per sweep");
  run->add_option("--reward-seed", reward_seed);
  run->add_option("--mode", mode, "augmentation mode")->check(CLI::IsMember({"seen", "any"}));
  run->add_option("--flights", flights, "ingest this flight JSONL instead of simulating");
  run->add_option("--threads", threads, "0 = all cores");
  run->add_option("--out", out_csv, "CSV path (stdout if omitted)");
  exp_masks.add_to(run);

  // augment
  auto* aug = app.add_subcommand("augment", "Pragmatic augmentation of a JSONL dataset");
  std::string aug_in, aug_out, aug_mode = "seen", aug_domain = "mushroom";
  aug->add_option("--in", aug_in)->required();
  aug->add_option("--out", aug_out)->required();
  aug->add_option("--mode", aug_mode)->check(CLI::IsMember({"seen", "any"}));
  aug->add_option("--domain", aug_domain)->check(CLI::IsMember({"mushroom", "flight"}));

  // parse
  auto* parse = app.add_subcommand("parse", "Map a description to a feature mask");
  std::string parse_domain = "flight", utterance;
  MaskFlags parse_masks;
  parse->add_option("--domain", parse_domain)->check(CLI::IsMember({"mushroom", "flight"}));
  parse->add_option("--utterance", utterance)->required();
  parse_masks.add_to(parse);

  // ingest-flights
  auto* ingest = app.add_subcommand("ingest-flights", "Convert flight triples into a pairwise dataset");
  std::string ingest_in, ingest_out;
  MaskFlags ingest_masks;
  ingest->add_option("--in", ingest_in)->required();
  ingest->add_option("--out", ingest_out)->required();
  ingest_masks.add_to(ingest);

  // serve
  auto* serve = app.add_subcommand("serve", "Start the elicitation service");
  int port = 8080;
  std::string host = "0.0.0.0";
  serve->add_option("--port", port);
  serve->add_option("--host", host);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      pfp::ExperimentConfig cfg;
      cfg.domain = pfp::make_domain(pfp::parse_domain_label(domain_name));
      cfg.condition = pfp::parse_condition(condition_name);
      cfg.relevant_count = relevant;
      cfg.budgets = parse_budgets(budgets);
      for (std::size_t s = 0; s < n_seeds; ++s) cfg.seeds.push_back(seed_base + s);
      cfg.eval_pairs = eval_pairs;
      train.reduction = pfp::parse_reduction(reduction);
      cfg.train = train;
      cfg.augment_mode = pfp::parse_augment_mode(mode);
      cfg.reward_count = rewards;
      cfg.reward_seed = reward_seed;
      cfg.threads = threads;
      const auto fallback =
          cfg.domain.label == pfp::DomainLabel::kFlight ? pfp::MaskSource::kKeyword : pfp::MaskSource::kOracle;
      cfg.masks = exp_masks.policy(cfg.domain, fallback);
      if (!flights.empty()) {
        if (cfg.domain.label != pfp::DomainLabel::kFlight) throw std::invalid_argument("--flights needs --domain flight");
        auto in = open_in(flights);
        cfg.flight_groups = pfp::group_by_reward(pfp::read_flight_file(in, cfg.domain));
      }
      const pfp::EvalResult result = pfp::run_experiment(cfg);
      if (out_csv.empty()) {
        pfp::write_csv(std::cout, result);
      } else {
        auto out = open_out(out_csv);
        pfp::write_csv(out, result);
      }
    } else if (*aug) {
      const auto domain = pfp::make_domain(pfp::parse_domain_label(aug_domain));
      auto in = open_in(aug_in);
      const auto data = pfp::read_jsonl(in, domain.feature_space);
      const auto augmented = pfp::augment(data, pfp::parse_augment_mode(aug_mode));
      auto out = open_out(aug_out);
      pfp::write_jsonl(out, augmented);
      std::cerr << data.size() << " records in, " << augmented.synthesized_count() << " synthesized\n";
    } else if (*parse) {
      const auto domain = pfp::make_domain(pfp::parse_domain_label(parse_domain));
      const auto policy = parse_masks.policy(domain, pfp::MaskSource::kKeyword);
      if (policy.source == pfp::MaskSource::kOracle) throw std::invalid_argument("parse needs keyword or lm");
      const pfp::RelevanceMask mask = pfp::parse_mask(utterance, domain, policy);
      nlohmann::json j;
      j["mask"] = mask.relevant;
      j["features"] = nlohmann::json::array();
      for (std::size_t k : mask.true_set()) j["features"].push_back(domain.feature_space[k].name());
      std::cout << j.dump() << '\n';
    } else if (*ingest) {
      const auto domain = pfp::make_flight_domain();
      auto in = open_in(ingest_in);
      const auto file = pfp::read_flight_file(in, domain);
      const auto data = pfp::convert_triples_to_pairs(file, domain, ingest_masks.policy(domain, pfp::MaskSource::kKeyword));
      auto out = open_out(ingest_out);
      pfp::write_jsonl(out, data);
      std::cerr << file.rows.size() << " rows, " << data.size() << " records, "
                << pfp::group_by_reward(file).size() << " reward groups\n";
      for (std::size_t line : file.duplicate_option_lines) std::cerr << "line " << line << ": duplicate options\n";
    } else if (*serve) {
      pfp::ElicitationServer server;
      std::cerr << "listening on " << host << ':' << port << '\n';
      if (!server.listen(host, port)) {
        std::cerr << "error: could not bind " << host << ':' << port << '\n';
        return 1;
      }
    }
  } catch (const pfp::IngestionError& e) {
    std::cerr << "ingestion error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
