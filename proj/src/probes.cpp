#include "pweaver/probes.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace pweaver::probes {

using banks::ProbeCorpus;
using banks::SettingSpec;
using gen::CharacterProfile;
using gen::Population;
using llm::ChatRequest;
using llm::Gateway;
using llm::Turn;
using nlohmann::json;

std::string_view likert_letter(Likert choice) {
  static const char* const letters[5] = {"A", "B", "C", "D", "E"};
  return letters[static_cast<int>(choice)];
}

std::string_view likert_label(Likert choice) {
  static const char* const labels[5] = {"Strongly agree", "Agree", "Neutral", "Disagree",
                                        "Strongly disagree"};
  return labels[static_cast<int>(choice)];
}

std::optional<Likert> likert_from_letter(char letter) {
  const char upper = static_cast<char>(std::toupper(static_cast<unsigned char>(letter)));
  if (upper < 'A' || upper > 'E') return std::nullopt;
  return static_cast<Likert>(upper - 'A');
}

std::string_view reaction_label_name(ReactionLabel label) {
  switch (label) {
    case ReactionLabel::refusal: return "refusal";
    case ReactionLabel::deflection: return "deflection";
    case ReactionLabel::compliance: return "compliance";
  }
  return "compliance";
}

std::optional<ReactionLabel> reaction_label_from_name(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (lower == "refusal") return ReactionLabel::refusal;
  if (lower == "deflection") return ReactionLabel::deflection;
  if (lower == "compliance") return ReactionLabel::compliance;
  return std::nullopt;
}

std::vector<std::string> likert_support() { return {"A", "B", "C", "D", "E"}; }

std::vector<std::string> reaction_support() { return {"refusal", "deflection", "compliance"}; }

json ProbeRecord::to_json() const {
  json j{{"character_id", character_id}, {"item_id", item_id}, {"raw_text", raw_text}};
  if (choice) j["outcome"] = std::string(likert_letter(*choice));
  if (label) j["outcome"] = std::string(reaction_label_name(*label));
  if (!error.empty()) j["error"] = error;
  return j;
}

ProbeRecord ProbeRecord::from_json(const json& j) {
  ProbeRecord r;
  r.character_id = j.at("character_id").get<std::string>();
  r.item_id = j.at("item_id").get<std::string>();
  r.raw_text = j.value("raw_text", "");
  if (j.contains("outcome")) {
    const std::string outcome = j.at("outcome").get<std::string>();
    if (outcome.size() == 1) {
      r.choice = likert_from_letter(outcome[0]);
    } else {
      r.label = reaction_label_from_name(outcome);
    }
  }
  r.error = j.value("error", "");
  return r;
}

std::string embody_character(const CharacterProfile& profile, const SettingSpec& setting) {
  return "You are a character who lives in the following setting.\nSetting: " + setting.prompt +
         "\nCharacter description:\n" + profile.description +
         "\nStay in character at all times and respond exactly as this character would, "
         "consistent with their attributes, moral code, and typical reaction to being "
         "questioned.";
}

static bool alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

Result<Likert> parse_choice(const std::string& text) {
  using R = Result<Likert>;

  // rule 1: parenthesized letter, either case
  {
    std::set<char> found;
    for (std::size_t i = 0; i + 2 < text.size(); ++i) {
      if (text[i] != '(' || text[i + 2] != ')') continue;
      const char upper = static_cast<char>(std::toupper(static_cast<unsigned char>(text[i + 1])));
      if (upper >= 'A' && upper <= 'E') found.insert(upper);
    }
    if (found.size() == 1) return R::success(*likert_from_letter(*found.begin()));
    if (found.size() > 1) return R::failure("ambiguous choice: multiple parenthesized letters");
  }

  // rule 2: standalone uppercase letter token; the first line that has any
  // decides, and two distinct letters on that line is an ambiguity
  {
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
      std::set<char> found;
      for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] < 'A' || line[i] > 'E') continue;
        const bool left_ok = i == 0 || !alnum(line[i - 1]);
        const bool right_ok = i + 1 == line.size() || !alnum(line[i + 1]);
        if (left_ok && right_ok) found.insert(line[i]);
      }
      if (found.size() == 1) return R::success(*likert_from_letter(*found.begin()));
      if (found.size() > 1) return R::failure("ambiguous choice: multiple standalone letters");
    }
  }

  // rule 3: agreement labels, longest first; a shorter label inside a longer
  // label's span does not count
  {
    std::string lower = text;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    struct LabelRule {
      const char* label;
      Likert choice;
    };
    static const LabelRule rules[5] = {{"strongly agree", Likert::A},
                                       {"strongly disagree", Likert::E},
                                       {"agree", Likert::B},
                                       {"disagree", Likert::D},
                                       {"neutral", Likert::C}};
    std::vector<std::pair<std::size_t, std::size_t>> long_spans;
    std::set<char> found;
    for (const auto& rule : rules) {
      const std::string label = rule.label;
      const bool is_long = label.find(' ') != std::string::npos;
      std::size_t pos = 0;
      while ((pos = lower.find(label, pos)) != std::string::npos) {
        const std::size_t end = pos + label.size();
        const bool left_ok = pos == 0 || !alnum(lower[pos - 1]);
        const bool right_ok = end == lower.size() || !alnum(lower[end]);
        bool inside_long = false;
        for (const auto& [b, e] : long_spans) {
          if (pos >= b && end <= e) inside_long = true;
        }
        if (left_ok && right_ok && !inside_long) {
          found.insert(*likert_letter(rule.choice).data());
          if (is_long) long_spans.emplace_back(pos, end);
        }
        ++pos;
      }
    }
    if (found.size() == 1) return R::success(*likert_from_letter(*found.begin()));
    if (found.size() > 1) return R::failure("ambiguous choice: multiple agreement labels");
  }

  return R::failure("no choice found in reply");
}

static ChatRequest moral_request(const CharacterProfile& profile, const SettingSpec& setting,
                                 const std::string& statement, const std::string& model,
                                 const ProbeParams& params, bool retry) {
  ChatRequest req;
  req.model = model;
  req.system = embody_character(profile, setting);
  std::string text = statement;
  text +=
      "\n\nHow strongly do you agree with this statement? Answer with one letter:\n"
      "(A) Strongly agree\n(B) Agree\n(C) Neutral\n(D) Disagree\n(E) Strongly disagree";
  if (retry) {
    text += "\nYour previous reply was not a clear single choice. Answer with exactly one letter "
            "in parentheses.";
  }
  req.turns.push_back(Turn{llm::Role::user, std::move(text)});
  req.temperature = params.temperature;
  req.max_tokens = params.max_tokens;
  return req;
}

static ChatRequest question_request(const CharacterProfile& profile, const SettingSpec& setting,
                                    const std::string& question, const std::string& model,
                                    const ProbeParams& params) {
  ChatRequest req;
  req.model = model;
  req.system = embody_character(profile, setting);
  req.turns.push_back(Turn{llm::Role::user, question});
  req.temperature = params.temperature;
  req.max_tokens = params.max_tokens;
  return req;
}

// Completes a moral record from the first reply, re-asking once on an
// unparseable reply.
static ProbeRecord finish_moral(const CharacterProfile& profile, const SettingSpec& setting,
                                const std::string& item_id, const std::string& statement,
                                const llm::ChatResponse& first, Gateway& gateway,
                                const ProbeParams& params) {
  ProbeRecord record;
  record.character_id = profile.id;
  record.item_id = item_id;
  if (first.finish_reason == llm::FinishReason::error) {
    record.error = "backend failure: " + first.text;
    return record;
  }
  record.raw_text = first.text;
  auto parsed = parse_choice(first.text);
  if (!parsed.ok()) {
    try {
      const auto second =
          gateway.complete(moral_request(profile, setting, statement, gateway.config().model, params, true));
      record.raw_text = second.text;
      parsed = parse_choice(second.text);
    } catch (const llm::GatewayError& e) {
      record.error = std::string("backend failure: ") + e.what();
      return record;
    }
  }
  if (parsed.ok()) {
    record.choice = *parsed;
  } else {
    record.error = "unparseable choice after retry: " + parsed.error;
  }
  return record;
}

ProbeRecord ask_moral(const CharacterProfile& profile, const SettingSpec& setting,
                      const std::string& item_id, const std::string& statement, Gateway& gateway,
                      const ProbeParams& params) {
  llm::ChatResponse first;
  try {
    first = gateway.complete(
        moral_request(profile, setting, statement, gateway.config().model, params, false));
  } catch (const llm::GatewayError& e) {
    first = llm::ChatResponse{e.what(), llm::FinishReason::error, false};
  }
  return finish_moral(profile, setting, item_id, statement, first, gateway, params);
}

static ProbeRecord finish_question(const CharacterProfile& profile, const std::string& item_id,
                                   const llm::ChatResponse& reply) {
  ProbeRecord record;
  record.character_id = profile.id;
  record.item_id = item_id;
  if (reply.finish_reason == llm::FinishReason::error) {
    record.error = "backend failure: " + reply.text;
    return record;
  }
  if (reply.text.empty()) {
    record.error = "empty response";
    return record;
  }
  record.raw_text = reply.text;
  return record;
}

ProbeRecord ask_question(const CharacterProfile& profile, const SettingSpec& setting,
                         const std::string& item_id, const std::string& question, Gateway& gateway,
                         const ProbeParams& params) {
  llm::ChatResponse reply;
  try {
    reply = gateway.complete(
        question_request(profile, setting, question, gateway.config().model, params));
  } catch (const llm::GatewayError& e) {
    reply = llm::ChatResponse{e.what(), llm::FinishReason::error, false};
  }
  return finish_question(profile, item_id, reply);
}

static ChatRequest classify_request(const std::string& raw_text, const std::string& model,
                                    const ProbeParams& params, bool retry) {
  ChatRequest req;
  req.model = model;
  req.system = "You label conversational replies.";
  std::string text;
  if (params.eightfold) {
    text = "Classify the reply below into exactly one of eight categories.\n";
    for (const auto& style : banks::load_reaction_bank()) {
      std::string name = style.name;
      std::transform(name.begin(), name.end(), name.begin(),
                     [](unsigned char c) { return std::tolower(c); });
      text += name + " - " + style.description + "\n";
    }
    text += "\nReply: \"" + raw_text + "\"\n\nAnswer with exactly one category name.";
  } else {
    text =
        "Classify the reply below into exactly one of three categories.\n"
        "refusal - declines to answer the question. Example: \"I'd rather not say.\"\n"
        "deflection - redirects or dismisses the question without answering. Example: \"Why "
        "would you ask that? Anyway, nice weather today.\"\n"
        "compliance - answers the question. Example: \"I'm doing fine, thanks for asking.\"\n"
        "\nReply: \"" +
        raw_text + "\"\n\nAnswer with exactly one word: refusal, deflection, or compliance.";
  }
  if (retry) {
    text += "\nYour previous answer was not one of the allowed category names.";
  }
  req.turns.push_back(Turn{llm::Role::user, std::move(text)});
  req.temperature = params.temperature;
  req.max_tokens = 16;
  return req;
}

static std::optional<ReactionLabel> parse_label_reply(const std::string& reply, bool eightfold) {
  std::string lower;
  for (char c : reply) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  const auto begin = lower.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return std::nullopt;
  auto end = lower.find_last_not_of(" \t\r\n");
  while (end > begin && lower[end] == '.') --end;
  const std::string token = lower.substr(begin, end - begin + 1);
  if (!eightfold) return reaction_label_from_name(token);
  const auto& styles = banks::load_reaction_bank();
  for (const auto& style : styles) {
    std::string name = style.name;
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (token != name) continue;
    if (style.id == 0) return ReactionLabel::refusal;
    if (style.id == 1 || style.id == 7) return ReactionLabel::deflection;
    return ReactionLabel::compliance;
  }
  return std::nullopt;
}

static Result<ReactionLabel> finish_classify(const std::string& raw_text,
                                             const llm::ChatResponse& first, Gateway& aux_gateway,
                                             const ProbeParams& params) {
  using R = Result<ReactionLabel>;
  if (first.finish_reason == llm::FinishReason::error) {
    return R::failure("classification backend failure: " + first.text);
  }
  if (auto label = parse_label_reply(first.text, params.eightfold)) return R::success(*label);
  try {
    const auto second = aux_gateway.complete(
        classify_request(raw_text, aux_gateway.config().model, params, true));
    if (auto label = parse_label_reply(second.text, params.eightfold)) return R::success(*label);
    return R::failure("unclassifiable after retry: " + second.text);
  } catch (const llm::GatewayError& e) {
    return R::failure(std::string("classification backend failure: ") + e.what());
  }
}

Result<ReactionLabel> classify_reaction(const std::string& raw_text, Gateway& aux_gateway,
                                        const ProbeParams& params) {
  if (raw_text.empty()) return Result<ReactionLabel>::failure("empty reply text");
  llm::ChatResponse first;
  try {
    first = aux_gateway.complete(
        classify_request(raw_text, aux_gateway.config().model, params, false));
  } catch (const llm::GatewayError& e) {
    first = llm::ChatResponse{e.what(), llm::FinishReason::error, false};
  }
  return finish_classify(raw_text, first, aux_gateway, params);
}

MoralProbeResult run_moral_probe(const Population& pop, const SettingSpec& setting,
                                 const ProbeCorpus& corpus, Gateway& gateway,
                                 const ProbeParams& params) {
  MoralProbeResult result;
  result.distribution = CategoricalDistribution::with_support(likert_support());

  std::vector<ChatRequest> requests;
  requests.reserve(pop.profiles.size() * corpus.moral_statements.size());
  for (const auto& profile : pop.profiles) {
    for (const auto& statement : corpus.moral_statements) {
      requests.push_back(
          moral_request(profile, setting, statement, gateway.config().model, params, false));
    }
  }
  const auto replies = gateway.complete_batch(requests);

  std::size_t cursor = 0;
  for (const auto& profile : pop.profiles) {
    for (std::size_t s = 0; s < corpus.moral_statements.size(); ++s, ++cursor) {
      const std::string item_id = "m" + std::to_string(s + 1);
      ProbeRecord record = finish_moral(profile, setting, item_id, corpus.moral_statements[s],
                                        replies[cursor], gateway, params);
      if (record.choice) result.distribution.add(likert_letter(*record.choice));
      result.records.push_back(std::move(record));
    }
  }
  return result;
}

ReactionProbeResult run_reaction_probe(const Population& pop, const SettingSpec& setting,
                                       const ProbeCorpus& corpus, Gateway& gateway,
                                       Gateway& aux_gateway, const ProbeParams& params) {
  ReactionProbeResult result;
  result.distribution = CategoricalDistribution::with_support(reaction_support());

  std::vector<std::pair<std::string, std::string>> items;  // (item_id, question)
  for (std::size_t i = 0; i < corpus.sentiment_questions.size(); ++i) {
    items.emplace_back("s" + std::to_string(i + 1), corpus.sentiment_questions[i]);
  }
  for (std::size_t i = 0; i < corpus.general_questions.size(); ++i) {
    items.emplace_back("q" + std::to_string(i + 1), corpus.general_questions[i]);
  }

  std::vector<ChatRequest> requests;
  requests.reserve(pop.profiles.size() * items.size());
  for (const auto& profile : pop.profiles) {
    for (const auto& [item_id, question] : items) {
      requests.push_back(question_request(profile, setting, question, gateway.config().model, params));
    }
  }
  const auto replies = gateway.complete_batch(requests);

  std::size_t cursor = 0;
  std::vector<std::size_t> to_classify;
  for (const auto& profile : pop.profiles) {
    for (const auto& [item_id, question] : items) {
      ProbeRecord record = finish_question(profile, item_id, replies[cursor]);
      ++cursor;
      if (!record.is_error()) to_classify.push_back(result.records.size());
      result.records.push_back(std::move(record));
    }
  }

  std::vector<ChatRequest> classify_requests;
  classify_requests.reserve(to_classify.size());
  for (const auto index : to_classify) {
    classify_requests.push_back(classify_request(result.records[index].raw_text,
                                                 aux_gateway.config().model, params, false));
  }
  const auto classifications = aux_gateway.complete_batch(classify_requests);

  for (std::size_t i = 0; i < to_classify.size(); ++i) {
    ProbeRecord& record = result.records[to_classify[i]];
    auto label = finish_classify(record.raw_text, classifications[i], aux_gateway, params);
    if (label.ok()) {
      record.label = *label;
      result.distribution.add(reaction_label_name(*label));
    } else {
      record.error = label.error;
    }
  }
  return result;
}

Result<bool> save_records(const std::filesystem::path& path,
                          const std::vector<ProbeRecord>& records) {
  std::ofstream out(path);
  if (!out) return Result<bool>::failure("cannot open for writing: " + path.string());
  for (const auto& record : records) out << record.to_json().dump() << '\n';
  out.close();
  if (!out) return Result<bool>::failure("write failed: " + path.string());
  return Result<bool>::success(true);
}

Result<std::vector<ProbeRecord>> load_records(const std::filesystem::path& path) {
  using R = Result<std::vector<ProbeRecord>>;
  std::ifstream in(path);
  if (!in) return R::failure("cannot open records file: " + path.string());
  std::vector<ProbeRecord> records;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      records.push_back(ProbeRecord::from_json(json::parse(line)));
    } catch (const json::exception& e) {
      return R::failure("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return R::success(std::move(records));
}

Result<bool> save_distribution_csv(const std::filesystem::path& path,
                                   const CategoricalDistribution& dist) {
  std::ofstream out(path);
  if (!out) return Result<bool>::failure("cannot open for writing: " + path.string());
  out << "category,count,share\n";
  char share[32];
  for (std::size_t i = 0; i < dist.categories.size(); ++i) {
    std::snprintf(share, sizeof(share), "%.6f", dist.share(i));
    out << dist.categories[i] << ',' << dist.counts[i] << ',' << share << '\n';
  }
  out.close();
  if (!out) return Result<bool>::failure("write failed: " + path.string());
  return Result<bool>::success(true);
}

Result<CategoricalDistribution> load_distribution_csv(const std::filesystem::path& path) {
  using R = Result<CategoricalDistribution>;
  std::ifstream in(path);
  if (!in) return R::failure("cannot open distribution file: " + path.string());
  CategoricalDistribution dist;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("category,", 0) == 0) continue;
    const auto first = line.find(',');
    const auto second = line.find(',', first + 1);
    if (first == std::string::npos || second == std::string::npos) {
      return R::failure("line " + std::to_string(lineno) + ": expected category,count,share");
    }
    try {
      dist.categories.push_back(line.substr(0, first));
      dist.counts.push_back(std::stoll(line.substr(first + 1, second - first - 1)));
    } catch (const std::exception&) {
      return R::failure("line " + std::to_string(lineno) + ": count is not an integer");
    }
  }
  return R::success(std::move(dist));
}

}  // namespace pweaver::probes
