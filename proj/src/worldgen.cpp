#include "pweaver/worldgen.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

namespace pweaver::worldgen {

using banks::SettingSpec;
using llm::ChatRequest;
using llm::Gateway;
using llm::Turn;

static std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

static bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

const BehavioralLexicon& BehavioralLexicon::default_lexicon() {
  static const BehavioralLexicon lexicon{{
      "moral",       "immoral",      "ethical",     "unethical",   "kind",
      "unkind",      "kind-hearted", "cruel",       "friendly",    "unfriendly",
      "hostile",     "honest",       "dishonest",   "deceitful",   "aggressive",
      "gentle",      "shy",          "outgoing",    "brave",       "cowardly",
      "loyal",       "disloyal",     "generous",    "selfish",     "greedy",
      "compassionate", "callous",    "polite",      "rude",        "arrogant",
      "humble",      "temperament",  "personality", "attitude",    "demeanor",
      "virtuous",    "wicked",       "evil",        "good-natured", "grumpy",
      "cheerful",    "optimistic",   "pessimistic", "anxious",     "irritable",
      "empathetic",  "ruthless",     "trustworthy", "manipulative", "mean",
  }};
  return lexicon;
}

Result<BehavioralLexicon> BehavioralLexicon::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return Result<BehavioralLexicon>::failure("cannot open lexicon: " + path.string());
  BehavioralLexicon lexicon;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) {
      line.pop_back();
    }
    const auto start = line.find_first_not_of(" \t");
    if (start == std::string::npos) continue;
    lexicon.terms.push_back(lower(line.substr(start)));
  }
  if (lexicon.terms.empty()) {
    return Result<BehavioralLexicon>::failure("lexicon holds no terms: " + path.string());
  }
  return Result<BehavioralLexicon>::success(std::move(lexicon));
}

ScreenResult screen_behavioral(const std::string& label, const BehavioralLexicon& lexicon) {
  const std::string haystack = lower(label);
  ScreenResult result;
  for (const auto& term : lexicon.terms) {
    if (term.empty()) continue;
    std::size_t pos = 0;
    while ((pos = haystack.find(term, pos)) != std::string::npos) {
      const bool left_ok = pos == 0 || !word_char(haystack[pos - 1]);
      const std::size_t end = pos + term.size();
      const bool right_ok = end == haystack.size() || !word_char(haystack[end]);
      if (left_ok && right_ok) {
        result.clean = false;
        result.matched_terms.push_back(term);
        break;
      }
      ++pos;
    }
  }
  return result;
}

ScreenResult screen_behavioral(const std::string& label) {
  return screen_behavioral(label, BehavioralLexicon::default_lexicon());
}

nlohmann::json WorldBank::to_json() const {
  nlohmann::json axes_json = nlohmann::json::array();
  for (const auto& axis : axes) {
    axes_json.push_back({{"name", axis.name}, {"options", axis.options}});
  }
  return {{"setting",
           {{"name", setting.name},
            {"category", std::string(banks::category_name(setting.category))},
            {"prompt", setting.prompt}}},
          {"axes", std::move(axes_json)}};
}

WorldBank WorldBank::from_json(const nlohmann::json& j) {
  WorldBank bank;
  const auto& s = j.at("setting");
  bank.setting.name = s.at("name").get<std::string>();
  bank.setting.category = s.at("category").get<std::string>() == "fantastical"
                              ? banks::SettingCategory::fantastical
                              : banks::SettingCategory::realistic;
  bank.setting.prompt = s.at("prompt").get<std::string>();
  for (const auto& a : j.at("axes")) {
    bank.axes.push_back({a.at("name").get<std::string>(),
                         a.at("options").get<std::vector<std::string>>()});
  }
  return bank;
}

static std::string trim_ws(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

// "1." / "2)" / "-" / "*" enumeration marker at the start of a trimmed line
static bool enumerated(const std::string& line) {
  std::size_t p = 0;
  while (p < line.size() && std::isdigit(static_cast<unsigned char>(line[p]))) ++p;
  if (p > 0 && p < line.size() && (line[p] == '.' || line[p] == ')')) return true;
  return !line.empty() && (line[0] == '-' || line[0] == '*');
}

// Splits an LLM list reply on commas and newlines, trimming whitespace,
// leading enumeration markers, and trailing periods. When any line is
// enumerated, unmarked lines are treated as preamble or commentary and
// skipped rather than parsed as items.
static std::vector<std::string> parse_list_reply(const std::string& text) {
  std::vector<std::string> lines;
  std::string current;
  for (char c : text) {
    if (c == '\n') {
      lines.push_back(trim_ws(current));
      current.clear();
    } else {
      current += c;
    }
  }
  lines.push_back(trim_ws(current));

  bool any_enumerated = false;
  for (const auto& line : lines) any_enumerated = any_enumerated || enumerated(line);

  std::vector<std::string> items;
  const auto flush = [&](const std::string& chunk) {
    std::string item = trim_ws(chunk);
    std::size_t p = 0;
    while (p < item.size() && std::isdigit(static_cast<unsigned char>(item[p]))) ++p;
    if (p > 0 && p < item.size() && (item[p] == '.' || item[p] == ')')) {
      item.erase(0, p + 1);
    } else if (!item.empty() && (item[0] == '-' || item[0] == '*')) {
      item.erase(0, 1);
    }
    const auto begin = item.find_first_not_of(" \t");
    if (begin == std::string::npos) return;
    item.erase(0, begin);
    while (!item.empty() && (item.back() == '.' || item.back() == ' ')) item.pop_back();
    if (!item.empty()) items.push_back(std::move(item));
  };
  for (const auto& line : lines) {
    if (any_enumerated && !enumerated(line)) continue;
    std::string chunk;
    for (char c : line) {
      if (c == ',') {
        flush(chunk);
        chunk.clear();
      } else {
        chunk += c;
      }
    }
    flush(chunk);
  }
  return items;
}

// Screens items and deduplicates case-insensitively, first spelling wins.
static void absorb_items(const std::vector<std::string>& items, const BehavioralLexicon& lexicon,
                         std::vector<std::string>& out, std::set<std::string>& seen_lower) {
  for (const auto& item : items) {
    if (!screen_behavioral(item, lexicon).clean) continue;
    if (!seen_lower.insert(lower(item)).second) continue;
    out.push_back(item);
  }
}

static ChatRequest axes_request(const SettingSpec& setting, int k, const std::string& model,
                                const WorldgenParams& params, bool retry) {
  ChatRequest req;
  req.model = model;
  req.system = "You design background attributes for fictional settings.";
  std::string text;
  if (retry) text += "Try again. Your previous list was unusable.\n";
  text += "Setting: " + setting.prompt + "\n\n";
  text += "Propose " + std::to_string(k) +
          " axes of variation for characters who live in this setting, such as occupation, "
          "affiliation, or expertise. Strictly exclude behavioral traits, personality, "
          "temperament, or moral dimensions. Answer with a comma-separated list of short axis "
          "names and nothing else.";
  req.turns.push_back(Turn{llm::Role::user, std::move(text)});
  req.temperature = params.temperature;
  req.max_tokens = params.max_tokens;
  return req;
}

static ChatRequest options_request(const SettingSpec& setting, const std::string& axis_name, int m,
                                   const std::string& model, const WorldgenParams& params,
                                   bool retry) {
  ChatRequest req;
  req.model = model;
  req.system = "You design background attributes for fictional settings.";
  std::string text;
  if (retry) text += "Try again. Your previous list was unusable.\n";
  text += "Setting: " + setting.prompt + "\n\n";
  text += "List " + std::to_string(m) + " distinct options for the attribute \"" + axis_name +
          "\" fitting this setting. Options must be concrete and non-behavioral: no personality, "
          "temperament, or moral qualities. Answer with a comma-separated list of short options "
          "and nothing else.";
  req.turns.push_back(Turn{llm::Role::user, std::move(text)});
  req.temperature = params.temperature;
  req.max_tokens = params.max_tokens;
  return req;
}

Result<std::vector<std::string>> propose_axes(const SettingSpec& setting, int k, Gateway& gateway,
                                              const WorldgenParams& params) {
  using R = Result<std::vector<std::string>>;
  if (k < 1) return R::failure("k must be >= 1");
  const int need = std::min(k, 2);

  std::vector<std::string> axes;
  std::set<std::string> seen;
  try {
    auto reply = gateway.complete(axes_request(setting, k, gateway.config().model, params, false));
    absorb_items(parse_list_reply(reply.text), params.lexicon, axes, seen);
    if (static_cast<int>(axes.size()) < need) {
      reply = gateway.complete(axes_request(setting, k, gateway.config().model, params, true));
      absorb_items(parse_list_reply(reply.text), params.lexicon, axes, seen);
    }
  } catch (const llm::GatewayError& e) {
    return R::failure(std::string("backend failure while proposing axes: ") + e.what());
  }
  if (axes.empty()) {
    return R::failure("no valid axes obtainable for setting " + setting.name);
  }
  if (static_cast<int>(axes.size()) > k) axes.resize(k);
  return R::success(std::move(axes));
}

Result<std::vector<std::string>> expand_axis(const SettingSpec& setting,
                                             const std::string& axis_name, int m, Gateway& gateway,
                                             const WorldgenParams& params) {
  using R = Result<std::vector<std::string>>;
  if (m < 2) return R::failure("m must be >= 2");

  std::vector<std::string> options;
  std::set<std::string> seen;
  try {
    auto reply =
        gateway.complete(options_request(setting, axis_name, m, gateway.config().model, params, false));
    absorb_items(parse_list_reply(reply.text), params.lexicon, options, seen);
    if (static_cast<int>(options.size()) < 2) {
      reply =
          gateway.complete(options_request(setting, axis_name, m, gateway.config().model, params, true));
      absorb_items(parse_list_reply(reply.text), params.lexicon, options, seen);
    }
  } catch (const llm::GatewayError& e) {
    return R::failure("backend failure while expanding axis " + axis_name + ": " + e.what());
  }
  if (options.empty()) {
    return R::failure("no valid options for axis " + axis_name);
  }
  if (static_cast<int>(options.size()) > m) options.resize(m);
  return R::success(std::move(options));
}

Result<WorldBank> build_world_bank(const SettingSpec& setting, int k, int m, Gateway& gateway,
                                   const WorldgenParams& params) {
  using R = Result<WorldBank>;
  if (k < 2) return R::failure("k must be >= 2");
  if (m < 2) return R::failure("m must be >= 2");

  auto axes = propose_axes(setting, k, gateway, params);
  if (!axes.ok()) return R::failure(axes.error);

  // First expansion round goes through the batch path so distinct axes can
  // be in flight together; short axes retry serially inside expand_axis.
  std::vector<llm::ChatRequest> initial;
  initial.reserve(axes->size());
  for (const auto& name : *axes) {
    initial.push_back(options_request(setting, name, m, gateway.config().model, params, false));
  }
  const auto replies = gateway.complete_batch(initial);

  WorldBank bank;
  bank.setting = setting;
  for (std::size_t i = 0; i < axes->size(); ++i) {
    const std::string& name = (*axes)[i];
    std::vector<std::string> options;
    std::set<std::string> seen;
    if (replies[i].finish_reason != llm::FinishReason::error) {
      absorb_items(parse_list_reply(replies[i].text), params.lexicon, options, seen);
    }
    if (static_cast<int>(options.size()) < 2) {
      auto retried = expand_axis(setting, name, m, gateway, params);
      if (!retried.ok()) return R::failure(retried.error);
      for (const auto& option : *retried) {
        if (seen.insert(lower(option)).second) options.push_back(option);
      }
    }
    if (static_cast<int>(options.size()) < 2) {
      return R::failure("axis " + name + " has fewer than 2 valid options");
    }
    if (static_cast<int>(options.size()) > m) options.resize(m);
    bank.axes.push_back(WorldAxis{name, std::move(options)});
  }
  return R::success(std::move(bank));
}

}  // namespace pweaver::worldgen
