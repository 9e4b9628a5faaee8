#include "pweaver/generator.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "pweaver/digest.hpp"

namespace pweaver::gen {

using banks::MoralPosition;
using banks::ReactionStyle;
using banks::SettingSpec;
using llm::ChatRequest;
using llm::Gateway;
using llm::Turn;
using nlohmann::json;

std::string_view method_name(Method method) {
  switch (method) {
    case Method::personaweaver: return "personaweaver";
    case Method::worldweaver: return "worldweaver";
    case Method::personahub: return "personahub";
  }
  return "personaweaver";
}

std::optional<Method> method_from_name(std::string_view name) {
  if (name == "personaweaver") return Method::personaweaver;
  if (name == "worldweaver") return Method::worldweaver;
  if (name == "personahub") return Method::personahub;
  return std::nullopt;
}

static std::string slug(const std::string& text) {
  std::string out;
  bool pending_dash = false;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      if (pending_dash && !out.empty()) out += '-';
      pending_dash = false;
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else {
      pending_dash = true;
    }
  }
  return out.empty() ? "setting" : out;
}

static std::string profile_id(const std::string& setting_name, Method method, int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%03d", index + 1);
  return slug(setting_name) + "-" + std::string(method_name(method)) + "-" + buf;
}

json CharacterBlueprint::to_json() const {
  json world = json::array();
  for (const auto& [axis, option] : world_choices) world.push_back(json::array({axis, option}));
  return {{"world", std::move(world)},
          {"moral_id", moral_id},
          {"reaction_id", reaction_id},
          {"draw_seed", draw_seed}};
}

CharacterBlueprint CharacterBlueprint::from_json(const json& j) {
  CharacterBlueprint bp;
  for (const auto& pair : j.at("world")) {
    bp.world_choices.emplace_back(pair.at(0).get<std::string>(), pair.at(1).get<std::string>());
  }
  bp.moral_id = j.at("moral_id").get<std::string>();
  bp.reaction_id = j.at("reaction_id").get<int>();
  bp.draw_seed = j.at("draw_seed").get<std::uint64_t>();
  return bp;
}

json CharacterProfile::to_json() const {
  json j{{"id", id},
         {"setting_name", setting_name},
         {"method", std::string(method_name(method))},
         {"description", description},
         {"revised", revised}};
  if (blueprint) j["blueprint"] = blueprint->to_json();
  return j;
}

CharacterProfile CharacterProfile::from_json(const json& j) {
  CharacterProfile p;
  p.id = j.at("id").get<std::string>();
  p.setting_name = j.at("setting_name").get<std::string>();
  p.description = j.at("description").get<std::string>();
  if (auto m = method_from_name(j.at("method").get<std::string>())) p.method = *m;
  p.revised = j.value("revised", false);
  if (j.contains("blueprint")) p.blueprint = CharacterBlueprint::from_json(j.at("blueprint"));
  return p;
}

GeneratorBanks GeneratorBanks::builtin(worldgen::WorldBank world) {
  return GeneratorBanks{std::move(world), banks::load_moral_bank(), banks::load_reaction_bank()};
}

Result<CharacterBlueprint> sample_blueprint(const worldgen::WorldBank& world,
                                            const std::vector<MoralPosition>& morals,
                                            const std::vector<ReactionStyle>& reactions, Rng& rng) {
  using R = Result<CharacterBlueprint>;
  if (morals.empty()) return R::failure("moral bank is empty");
  if (reactions.empty()) return R::failure("reaction bank is empty");
  CharacterBlueprint bp;
  for (const auto& axis : world.axes) {
    if (axis.options.empty()) return R::failure("axis " + axis.name + " has no options");
    bp.world_choices.emplace_back(axis.name, axis.options[rng.index(axis.options.size())]);
  }
  bp.moral_id = morals[rng.index(morals.size())].id;
  bp.reaction_id = reactions[rng.index(reactions.size())].id;
  return R::success(std::move(bp));
}

std::string disposition_phrase(const ReactionStyle& reaction) {
  static const char* const builtin_phrases[8] = {
      "tends to refuse to answer questions",
      "tends to redirect or dismiss questions",
      "tends to hesitate about whether to answer",
      "tends to answer questions directly",
      "tends to answer fully and add extra details, even unasked ones",
      "tends to reply in a teasing, sarcastic, or ironic way",
      "tends to respond with aggression, sarcasm, or dismissal of the asker",
      "tends to comment on the act of being questioned itself instead of answering",
  };
  const auto& builtin = banks::load_reaction_bank();
  if (reaction.id >= 0 && reaction.id < 8 && builtin[reaction.id].description == reaction.description) {
    return builtin_phrases[reaction.id];
  }
  // custom bank entry: fall back to the style name
  std::string name = reaction.name;
  std::transform(name.begin(), name.end(), name.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return "tends toward " + name + " when questioned";
}

std::string moral_segment(const MoralPosition& moral) { return "Their moral code: " + moral.text; }

std::string reaction_segment(const ReactionStyle& reaction) {
  return "In conversation, this character " + disposition_phrase(reaction) +
         ". Typical reaction: " + reaction.description;
}

static const MoralPosition* find_moral(const std::vector<MoralPosition>& morals,
                                       const std::string& id) {
  for (const auto& m : morals) {
    if (m.id == id) return &m;
  }
  return nullptr;
}

static const ReactionStyle* find_reaction(const std::vector<ReactionStyle>& reactions, int id) {
  for (const auto& r : reactions) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

Result<std::string> render_profile(const CharacterBlueprint& bp, const SettingSpec& setting,
                                   const std::vector<MoralPosition>& morals,
                                   const std::vector<ReactionStyle>& reactions) {
  using R = Result<std::string>;
  const MoralPosition* moral = find_moral(morals, bp.moral_id);
  if (moral == nullptr) return R::failure("unknown moral id " + bp.moral_id);
  const ReactionStyle* reaction = find_reaction(reactions, bp.reaction_id);
  if (reaction == nullptr) {
    return R::failure("unknown reaction id " + std::to_string(bp.reaction_id));
  }

  std::string text;
  for (const auto& [axis, option] : bp.world_choices) {
    std::string axis_lower = axis;
    std::transform(axis_lower.begin(), axis_lower.end(), axis_lower.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    text += "Their " + axis_lower + " is " + option + ".\n";
  }
  text += moral_segment(*moral) + "\n";
  text += reaction_segment(*reaction);
  (void)setting;  // layout is setting-independent; the setting conditions embodiment instead
  return R::success(std::move(text));
}

static std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

static bool contains_word_ci(const std::string& text, const std::string& word) {
  std::string hay = text;
  std::transform(hay.begin(), hay.end(), hay.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  std::size_t pos = 0;
  while ((pos = hay.find(word, pos)) != std::string::npos) {
    const bool left_ok = pos == 0 || !std::isalnum(static_cast<unsigned char>(hay[pos - 1]));
    const std::size_t end = pos + word.size();
    const bool right_ok = end == hay.size() || !std::isalnum(static_cast<unsigned char>(hay[end]));
    if (left_ok && right_ok) return true;
    ++pos;
  }
  return false;
}

static ChatRequest flag_request(const CharacterProfile& profile, const SettingSpec& setting,
                                const std::string& model, const GenParams& params) {
  ChatRequest req;
  req.model = model;
  req.system = "You review fictional character descriptions for internal coherence.";
  req.turns.push_back(Turn{
      llm::Role::user,
      "Setting: " + setting.prompt + "\n\nCharacter description:\n" + profile.description +
          "\n\nIs this combination of attributes plausible within the setting? Answer with the "
          "single word PLAUSIBLE or IMPLAUSIBLE."});
  req.temperature = params.flag_temperature;
  req.max_tokens = 16;
  return req;
}

static ChatRequest revise_request(const CharacterProfile& profile, const SettingSpec& setting,
                                  const std::string& model, const GenParams& params, int attempt) {
  ChatRequest req;
  req.model = model;
  req.system = "You review fictional character descriptions for internal coherence.";
  std::string text;
  if (attempt > 1) text += "Your previous rewrite was rejected. ";
  text += "This character description pairs world attributes implausibly for its setting.\n\n";
  text += "Setting: " + setting.prompt + "\n\nCharacter description:\n" + profile.description;
  text +=
      "\n\nMinimally rewrite only the world-attribute sentences to make the combination "
      "plausible. The line beginning \"Their moral code:\" and the line beginning \"In "
      "conversation\" must be preserved exactly, byte for byte. Reply with the full revised "
      "description only.";
  req.turns.push_back(Turn{llm::Role::user, std::move(text)});
  req.temperature = params.generation_temperature;
  req.max_tokens = params.max_tokens;
  return req;
}

ReviseOutcome revise_implausible(const CharacterProfile& profile, const GeneratorBanks& banks,
                                 Gateway& gateway, const GenParams& params) {
  ReviseOutcome outcome{profile, {}};
  if (profile.method != Method::personaweaver || !profile.blueprint) {
    outcome.notes.push_back("revision skipped: not a personaweaver profile");
    return outcome;
  }
  const MoralPosition* moral = find_moral(banks.morals, profile.blueprint->moral_id);
  const ReactionStyle* reaction = find_reaction(banks.reactions, profile.blueprint->reaction_id);
  if (moral == nullptr || reaction == nullptr) {
    outcome.notes.push_back("revision skipped: blueprint references unknown bank ids");
    return outcome;
  }

  const SettingSpec setting = banks.world.setting;
  try {
    const auto verdict =
        gateway.complete(flag_request(profile, setting, gateway.config().model, params));
    // anything other than an explicit IMPLAUSIBLE verdict counts as plausible
    if (!contains_word_ci(verdict.text, "implausible")) return outcome;

    const std::string keep_moral = moral_segment(*moral);
    const std::string keep_reaction = reaction_segment(*reaction);
    for (int attempt = 1; attempt <= 2; ++attempt) {
      const auto reply =
          gateway.complete(revise_request(profile, setting, gateway.config().model, params, attempt));
      const std::string revised = trim(reply.text);
      if (revised.empty()) {
        outcome.notes.push_back("revision rejected: empty rewrite");
        continue;
      }
      if (revised.find(keep_moral) == std::string::npos ||
          revised.find(keep_reaction) == std::string::npos) {
        outcome.notes.push_back("revision rejected: behavioral text altered");
        continue;
      }
      if (revised != profile.description) {
        outcome.profile.description = revised;
        outcome.profile.revised = true;
      }
      return outcome;
    }
  } catch (const llm::GatewayError& e) {
    outcome.notes.push_back(std::string("revision backend failure: ") + e.what());
  }
  return outcome;
}

static std::string blueprint_key(const CharacterBlueprint& bp) {
  std::string key;
  for (const auto& [axis, option] : bp.world_choices) key += axis + "\x1f" + option + "\x1e";
  key += bp.moral_id + "\x1f" + std::to_string(bp.reaction_id);
  return key;
}

Result<Population> generate_personaweaver(const SettingSpec& setting, int n,
                                          const GeneratorBanks& banks, Gateway& gateway,
                                          std::uint64_t seed, const GenParams& params) {
  using R = Result<Population>;
  if (n < 1) return R::failure("n must be >= 1");

  Population pop;
  pop.setting_name = setting.name;
  pop.method = Method::personaweaver;
  pop.seed = seed;
  pop.generation_config_digest = sha256_hex(
      json{{"method", "personaweaver"},
           {"setting", setting.name},
           {"n", n},
           {"seed", seed},
           {"backend", gateway.backend_id()},
           {"world", banks.world.to_json()},
           {"morals", banks::bank_digest(banks.morals)},
           {"reactions", banks::bank_digest(banks.reactions)},
           {"revise", params.revise}}
          .dump());

  Rng master(seed);
  std::set<std::string> seen_blueprints;
  for (int i = 0; i < n; ++i) {
    const std::uint64_t draw_seed = master.next();
    Rng child(draw_seed);
    CharacterBlueprint bp;
    bool sampled = false;
    for (int attempt = 0; attempt < 100; ++attempt) {
      auto drawn = sample_blueprint(banks.world, banks.morals, banks.reactions, child);
      if (!drawn.ok()) return R::failure(drawn.error);
      bp = std::move(*drawn);
      sampled = true;
      if (seen_blueprints.count(blueprint_key(bp)) == 0) break;
    }
    if (!sampled) return R::failure("blueprint sampling failed");
    if (!seen_blueprints.insert(blueprint_key(bp)).second) {
      std::cerr << "warning: duplicate blueprint accepted for profile " << i + 1 << " of "
                << setting.name << " after 100 redraws\n";
    }
    bp.draw_seed = draw_seed;

    auto rendered = render_profile(bp, setting, banks.morals, banks.reactions);
    if (!rendered.ok()) {
      pop.errors.push_back(GenerationError{i, "render", rendered.error});
      continue;
    }

    CharacterProfile profile;
    profile.id = profile_id(setting.name, Method::personaweaver, i);
    profile.setting_name = setting.name;
    profile.description = std::move(*rendered);
    profile.blueprint = bp;
    profile.method = Method::personaweaver;

    if (params.revise) {
      auto outcome = revise_implausible(profile, banks, gateway, params);
      for (const auto& note : outcome.notes) {
        pop.errors.push_back(GenerationError{i, "revise", note});
      }
      profile = std::move(outcome.profile);
    }
    pop.profiles.push_back(std::move(profile));
  }
  return R::success(std::move(pop));
}

// Parses "1. text" / "2) text" items; unnumbered lines continue the current
// item, text before the first number is ignored.
static std::vector<std::string> parse_numbered_items(const std::string& text) {
  std::vector<std::string> items;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t p = line.find_first_not_of(" \t");
    if (p == std::string::npos) continue;
    std::size_t digits = p;
    while (digits < line.size() && std::isdigit(static_cast<unsigned char>(line[digits]))) ++digits;
    if (digits > p && digits < line.size() && (line[digits] == '.' || line[digits] == ')')) {
      std::string body = trim(line.substr(digits + 1));
      items.push_back(std::move(body));
    } else if (!items.empty()) {
      if (!items.back().empty()) items.back() += ' ';
      items.back() += trim(line);
    }
  }
  items.erase(std::remove_if(items.begin(), items.end(),
                             [](const std::string& s) { return s.empty(); }),
              items.end());
  return items;
}

static ChatRequest worldweaver_request(const SettingSpec& setting, int start, int count,
                                       const std::string& model, const GenParams& params,
                                       bool retry) {
  ChatRequest req;
  req.model = model;
  req.system = "You write character profiles for fictional settings.";
  std::string text;
  if (retry) text += "Try again. Your previous reply was not a numbered list.\n";
  text += "Generate " + std::to_string(count) +
          " different character profiles for the setting: " + setting.prompt + " Number them " +
          std::to_string(start) + ". through " + std::to_string(start + count - 1) +
          ". with one profile per line, and reply with the numbered list only.";
  req.turns.push_back(Turn{llm::Role::user, std::move(text)});
  req.temperature = params.generation_temperature;
  req.max_tokens = params.max_tokens;
  return req;
}

Result<Population> generate_worldweaver(const SettingSpec& setting, int n, Gateway& gateway,
                                        const GenParams& params) {
  using R = Result<Population>;
  if (n < 1) return R::failure("n must be >= 1");

  Population pop;
  pop.setting_name = setting.name;
  pop.method = Method::worldweaver;
  pop.generation_config_digest =
      sha256_hex(json{{"method", "worldweaver"},
                      {"setting", setting.name},
                      {"n", n},
                      {"backend", gateway.backend_id()},
                      {"temperature", params.generation_temperature}}
                     .dump());

  constexpr int kBatch = 10;
  std::vector<ChatRequest> batch_requests;
  std::vector<std::pair<int, int>> batch_spans;  // (start index, count)
  for (int start = 0; start < n; start += kBatch) {
    const int count = std::min(kBatch, n - start);
    batch_requests.push_back(
        worldweaver_request(setting, start + 1, count, gateway.config().model, params, false));
    batch_spans.emplace_back(start, count);
  }
  const auto replies = gateway.complete_batch(batch_requests);

  for (std::size_t b = 0; b < batch_spans.size(); ++b) {
    const auto [start, count] = batch_spans[b];
    std::vector<std::string> items;
    if (replies[b].finish_reason == llm::FinishReason::error) {
      pop.errors.push_back(GenerationError{start, "batch", replies[b].text});
    } else {
      items = parse_numbered_items(replies[b].text);
    }
    if (static_cast<int>(items.size()) < count) {
      try {
        const auto retry = gateway.complete(
            worldweaver_request(setting, start + 1, count, gateway.config().model, params, true));
        auto retried = parse_numbered_items(retry.text);
        if (retried.size() > items.size()) items = std::move(retried);
      } catch (const llm::GatewayError& e) {
        pop.errors.push_back(GenerationError{start, "batch", e.what()});
      }
    }
    for (int k = 0; k < count; ++k) {
      if (k < static_cast<int>(items.size())) {
        CharacterProfile profile;
        profile.id = profile_id(setting.name, Method::worldweaver, start + k);
        profile.setting_name = setting.name;
        profile.description = items[k];
        profile.method = Method::worldweaver;
        pop.profiles.push_back(std::move(profile));
      } else {
        pop.errors.push_back(
            GenerationError{start + k, "parse", "no numbered profile in batch reply"});
      }
    }
  }
  return R::success(std::move(pop));
}

static ChatRequest adapt_request(const SettingSpec& setting, const std::string& persona,
                                 const std::string& model, const GenParams& params) {
  ChatRequest req;
  req.model = model;
  req.system = "You write character profiles for fictional settings.";
  req.turns.push_back(Turn{llm::Role::user, "Adapt this persona to the setting.\nPersona: " +
                                                persona + "\nSetting: " + setting.prompt +
                                                "\nReply with the adapted character description only."});
  req.temperature = params.generation_temperature;
  req.max_tokens = params.max_tokens;
  return req;
}

Result<Population> generate_personahub(const SettingSpec& setting,
                                       const std::filesystem::path& persona_file, int n,
                                       Gateway& gateway, std::uint64_t seed,
                                       const GenParams& params) {
  using R = Result<Population>;
  if (n < 1) return R::failure("n must be >= 1");

  auto parsed = banks::parse_bank_file(persona_file);
  if (!parsed.ok()) return R::failure(parsed.error);
  const auto* personas = std::get_if<std::vector<std::string>>(&*parsed);
  if (personas == nullptr) return R::failure("not a persona file: " + persona_file.string());
  if (personas->empty()) return R::failure("persona file is empty: " + persona_file.string());
  if (static_cast<int>(personas->size()) < n && !params.sample_with_replacement) {
    return R::failure("persona file has " + std::to_string(personas->size()) +
                      " entries but n = " + std::to_string(n) +
                      " (enable sampling with replacement to reuse personas)");
  }

  Population pop;
  pop.setting_name = setting.name;
  pop.method = Method::personahub;
  pop.seed = seed;
  pop.generation_config_digest =
      sha256_hex(json{{"method", "personahub"},
                      {"setting", setting.name},
                      {"n", n},
                      {"seed", seed},
                      {"backend", gateway.backend_id()},
                      {"personas", sha256_hex(json(*personas).dump())},
                      {"with_replacement", params.sample_with_replacement}}
                     .dump());

  Rng rng(seed);
  std::vector<std::string> chosen;
  chosen.reserve(n);
  if (params.sample_with_replacement) {
    for (int i = 0; i < n; ++i) chosen.push_back((*personas)[rng.index(personas->size())]);
  } else {
    std::vector<std::size_t> order(personas->size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (int i = 0; i < n; ++i) {
      const std::size_t j = i + rng.index(order.size() - i);
      std::swap(order[i], order[j]);
      chosen.push_back((*personas)[order[i]]);
    }
  }

  std::vector<ChatRequest> requests;
  requests.reserve(chosen.size());
  for (const auto& persona : chosen) {
    requests.push_back(adapt_request(setting, persona, gateway.config().model, params));
  }
  const auto replies = gateway.complete_batch(requests);

  for (int i = 0; i < n; ++i) {
    if (replies[i].finish_reason == llm::FinishReason::error) {
      pop.errors.push_back(GenerationError{i, "adapt", replies[i].text});
      continue;
    }
    const std::string description = trim(replies[i].text);
    if (description.empty()) {
      pop.errors.push_back(GenerationError{i, "adapt", "empty adaptation reply"});
      continue;
    }
    CharacterProfile profile;
    profile.id = profile_id(setting.name, Method::personahub, i);
    profile.setting_name = setting.name;
    profile.description = description;
    profile.method = Method::personahub;
    pop.profiles.push_back(std::move(profile));
  }
  return R::success(std::move(pop));
}

Result<bool> save_population(const std::filesystem::path& path, const Population& pop) {
  std::ofstream out(path);
  if (!out) return Result<bool>::failure("cannot open for writing: " + path.string());
  out << json{{"setting", pop.setting_name},
              {"method", std::string(method_name(pop.method))},
              {"config_digest", pop.generation_config_digest},
              {"seed", pop.seed}}
             .dump()
      << '\n';
  for (const auto& profile : pop.profiles) out << profile.to_json().dump() << '\n';
  for (const auto& error : pop.errors) {
    out << json{{"generation_error",
                 {{"index", error.index}, {"stage", error.stage}, {"message", error.message}}}}
               .dump()
        << '\n';
  }
  out.close();
  if (!out) return Result<bool>::failure("write failed: " + path.string());
  return Result<bool>::success(true);
}

Result<Population> load_population(const std::filesystem::path& path) {
  using R = Result<Population>;
  std::ifstream in(path);
  if (!in) return R::failure("cannot open population file: " + path.string());
  std::string line;
  if (!std::getline(in, line)) return R::failure("population file is empty: " + path.string());

  Population pop;
  try {
    const json header = json::parse(line);
    pop.setting_name = header.at("setting").get<std::string>();
    const auto method = method_from_name(header.at("method").get<std::string>());
    if (!method) return R::failure("unknown method in header: " + path.string());
    pop.method = *method;
    pop.generation_config_digest = header.value("config_digest", "");
    pop.seed = header.value("seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    return R::failure("line 1: " + std::string(e.what()));
  }

  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      if (j.contains("generation_error")) {
        const auto& e = j.at("generation_error");
        pop.errors.push_back(GenerationError{e.at("index").get<int>(),
                                             e.at("stage").get<std::string>(),
                                             e.at("message").get<std::string>()});
      } else {
        pop.profiles.push_back(CharacterProfile::from_json(j));
      }
    } catch (const json::exception& e) {
      return R::failure("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return R::success(std::move(pop));
}

}  // namespace pweaver::gen
