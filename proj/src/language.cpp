#include "ubiphysio/language.hpp"

#include <sstream>

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "ubiphysio/errors.hpp"
#include "ubiphysio/file_util.hpp"

namespace ubiphysio {

using nlohmann::json;

std::string render_tokens(const std::vector<int>& tokens, const PromptOptions& opt) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    int t = tokens[i];
    if (t < 0 || t >= opt.codebook_size) {
      throw ValidationError(fmt::format("token {} at position {} is outside 0..{}", t, i, opt.codebook_size - 1));
    }
    if (i) out += ' ';
    out += opt.token_prefix + std::to_string(t) + opt.token_suffix;
  }
  return out;
}

std::string assemble_description_instruction(std::optional<int> action_type, const std::vector<int>& tokens,
                                             const PromptOptions& opt) {
  std::string out = opt.task_prompt;
  out += "\nThe action you need to describe is as following, ";
  if (action_type) out += "type: " + opt.labels.text(*action_type) + ", ";
  out += "tokens: " + render_tokens(tokens, opt) + ".";
  return out;
}

// ---- knowledge base ----

KnowledgeBase KnowledgeBase::parse(const std::string& jsonl) {
  KnowledgeBase kb;
  std::istringstream in(jsonl);
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = json::parse(line);
      kb.add({j.at("action_type").get<int>(), j.at("low_demand").get<std::string>(),
              j.at("high_demand").get<std::string>()});
    } catch (const json::exception& e) {
      throw ParseError(fmt::format("knowledge base line {}: {}", lineno, e.what()));
    } catch (const ValidationError& e) {
      throw ParseError(fmt::format("knowledge base line {}: {}", lineno, e.what()));
    }
  }
  return kb;
}

KnowledgeBase KnowledgeBase::load(const std::filesystem::path& path) { return parse(read_file(path)); }

void KnowledgeBase::add(KnowledgeEntry e) {
  if (!is_valid_action(e.action_type)) throw ValidationError(fmt::format("action type {} out of range", e.action_type));
  if (entries_.count(e.action_type)) throw ValidationError(fmt::format("duplicate entry for action type {}", e.action_type));
  int key = e.action_type;
  entries_.emplace(key, std::move(e));
}

const KnowledgeEntry& KnowledgeBase::retrieve(int action_type) const {
  auto it = entries_.find(action_type);
  if (it == entries_.end()) throw NotFoundError(fmt::format("no knowledge entry for action type {}", action_type));
  return it->second;
}

std::string KnowledgeBase::to_jsonl() const {
  std::string out;
  for (const auto& [k, e] : entries_) {
    json j = {{"action_type", e.action_type}, {"low_demand", e.low_demand}, {"high_demand", e.high_demand}};
    out += j.dump() + "\n";
  }
  return out;
}

// ---- feedback prompt ----

void UserProfile::validate() const {
  if (!(pain >= 0.0 && pain <= 10.0)) throw ValidationError(fmt::format("pain score {} outside 0..10", pain));
  if (!(tug > 0.0)) throw ValidationError(fmt::format("TUG time must be positive, got {}", tug));
  if (!(age > 0.0)) throw ValidationError(fmt::format("age must be positive, got {}", age));
}

Role UserProfile::effective_role() const {
  if (role) return *role;
  return pain == 0.0 ? Role::FitnessCoach : Role::Physiotherapist;
}

UserProfile UserProfile::from_json(const std::string& text) {
  UserProfile p;
  try {
    auto j = json::parse(text);
    p.age = j.at("age").get<double>();
    p.pain = j.at("pain").get<double>();
    p.tug = j.at("tug").get<double>();
    if (j.contains("role")) {
      auto r = j["role"].get<std::string>();
      if (r == "physiotherapist") {
        p.role = Role::Physiotherapist;
      } else if (r == "fitness coach" || r == "fitness_coach") {
        p.role = Role::FitnessCoach;
      } else {
        throw ValidationError("unknown role '" + r + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("user profile: ") + e.what());
  }
  p.validate();
  return p;
}

std::string render_profile(const UserProfile& p) {
  return fmt::format("age: {}, reported pain score: {} (0-10), Time-Up-and-Go score: {} seconds", p.age, p.pain,
                     p.tug);
}

std::string assemble_feedback_prompt(const UserProfile& profile, const KnowledgeEntry* knowledge,
                                     const std::string& description) {
  profile.validate();
  const char* role = profile.effective_role() == Role::FitnessCoach ? "a fitness coach" : "a physiotherapist";
  std::string out = fmt::format("You are now {} to support the daily functioning and exercise of a person. ", role);
  out += "In the following, you will receive ";
  if (knowledge) {
    out += "the <knowledge> specifying the pre-defined low-demand and high-demand feedbacks for the action, ";
  } else {
    out += "the ";
  }
  out +=
      "<user profile> indicating the age, self-reported pain score (0-10), and Timed-Up-and-Go (TUG) score, "
      "<action description> detailing the action type and movement patterns of the person. "
      "You need to return the <instant feedback> in a vivid tongue.\n\n";
  if (knowledge) {
    out += "<knowledge>\n";
    out += "low-demand: " + knowledge->low_demand + "\n";
    out += "high-demand: " + knowledge->high_demand + "\n";
    out += "</knowledge>\n";
  }
  out += "<user profile>\n" + render_profile(profile) + "\n</user profile>\n";
  out += "<action description>\n" + description + "\n</action description>\n";
  out += "<instant feedback>\n";
  return out;
}

// ---- fine-tuning export ----

std::size_t word_count(const std::string& text) {
  std::istringstream in(text);
  std::size_t n = 0;
  std::string w;
  while (in >> w) ++n;
  return n;
}

std::vector<FinetuneRecord> build_finetune_records(const std::vector<FinetuneInstance>& instances,
                                                   bool action_conditioned, const PromptOptions& opt) {
  std::vector<FinetuneRecord> out;
  for (const auto& inst : instances) {
    if (inst.descriptions.empty()) throw ValidationError("instance '" + inst.id + "' has no descriptions");
    std::optional<int> y;
    if (action_conditioned) y = inst.action_type;
    const std::string prompt = assemble_description_instruction(y, inst.tokens, opt);
    for (std::size_t i = 0; i < inst.descriptions.size(); ++i) {
      const auto& d = inst.descriptions[i];
      std::size_t words = word_count(d);
      if (words == 0) {
        spdlog::warn("instance '{}': description {} is empty, skipped", inst.id, i);
        continue;
      }
      if (words > static_cast<std::size_t>(kDescriptionWordLimit)) {
        spdlog::warn("instance '{}': description {} has {} words (limit {})", inst.id, i, words,
                     kDescriptionWordLimit);
      }
      out.push_back({prompt, d});
    }
  }
  return out;
}

std::string finetune_to_jsonl(const std::vector<FinetuneRecord>& records) {
  std::string out;
  for (const auto& r : records) out += json{{"input", r.input}, {"output", r.output}}.dump() + "\n";
  return out;
}

std::vector<FinetuneRecord> finetune_from_jsonl(const std::string& jsonl) {
  std::vector<FinetuneRecord> out;
  std::istringstream in(jsonl);
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto j = json::parse(line);
      out.push_back({j.at("input").get<std::string>(), j.at("output").get<std::string>()});
    } catch (const json::exception& e) {
      throw ParseError(fmt::format("fine-tune record line {}: {}", lineno, e.what()));
    }
  }
  return out;
}

}  // namespace ubiphysio
