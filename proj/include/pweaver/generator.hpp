#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pweaver/banks.hpp"
#include "pweaver/gateway.hpp"
#include "pweaver/result.hpp"
#include "pweaver/worldgen.hpp"

namespace pweaver::gen {

enum class Method { personaweaver, worldweaver, personahub };

std::string_view method_name(Method method);
std::optional<Method> method_from_name(std::string_view name);

/// Seeded generator with index draws via modulo. mt19937_64's output sequence
/// is fixed by the standard, and modulo keeps draws identical across standard
/// libraries (uniform_int_distribution is implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next() { return engine_(); }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

 private:
  std::mt19937_64 engine_;
};

struct CharacterBlueprint {
  std::vector<std::pair<std::string, std::string>> world_choices;  // axis -> option, bank order
  std::string moral_id;
  int reaction_id = 0;
  std::uint64_t draw_seed = 0;

  bool operator==(const CharacterBlueprint&) const = default;

  nlohmann::json to_json() const;
  static CharacterBlueprint from_json(const nlohmann::json& j);
};

struct CharacterProfile {
  std::string id;
  std::string setting_name;
  std::string description;
  std::optional<CharacterBlueprint> blueprint;  // present iff method == personaweaver
  Method method = Method::personaweaver;
  bool revised = false;

  bool operator==(const CharacterProfile&) const = default;

  nlohmann::json to_json() const;
  static CharacterProfile from_json(const nlohmann::json& j);
};

struct GenerationError {
  int index = 0;
  std::string stage;
  std::string message;

  bool operator==(const GenerationError&) const = default;
};

struct Population {
  std::string setting_name;
  Method method = Method::personaweaver;
  std::vector<CharacterProfile> profiles;
  std::vector<GenerationError> errors;
  std::string generation_config_digest;
  std::uint64_t seed = 0;
};

struct GeneratorBanks {
  worldgen::WorldBank world;
  std::vector<banks::MoralPosition> morals;
  std::vector<banks::ReactionStyle> reactions;

  /// Built-in moral and reaction banks around the given world bank.
  static GeneratorBanks builtin(worldgen::WorldBank world);
};

struct GenParams {
  double generation_temperature = 0.8;  // worldweaver batches, personahub adaptation, revision
  double flag_temperature = 0.0;        // plausibility verdicts
  int max_tokens = 512;
  bool revise = true;                     // run the plausibility pass
  bool sample_with_replacement = false;   // personahub persona sampling
};

/// One uniform independent draw per axis plus moral id and reaction id.
Result<CharacterBlueprint> sample_blueprint(const worldgen::WorldBank& world,
                                            const std::vector<banks::MoralPosition>& morals,
                                            const std::vector<banks::ReactionStyle>& reactions,
                                            Rng& rng);

/// Standing-disposition phrasing of a reaction style for profile text.
std::string disposition_phrase(const banks::ReactionStyle& reaction);

/// Fixed-template rendering: one sentence per world axis, the verbatim moral
/// text, and the reaction as a disposition sentence plus the verbatim bank
/// description. No bank ids appear in the text.
Result<std::string> render_profile(const CharacterBlueprint& bp, const banks::SettingSpec& setting,
                                   const std::vector<banks::MoralPosition>& morals,
                                   const std::vector<banks::ReactionStyle>& reactions);

/// The exact substrings of a rendered profile that revision must preserve.
std::string moral_segment(const banks::MoralPosition& moral);
std::string reaction_segment(const banks::ReactionStyle& reaction);

struct ReviseOutcome {
  CharacterProfile profile;
  std::vector<std::string> notes;  // rejected revisions, backend failures
};

/// Plausibility pass: one flag call; when flagged IMPLAUSIBLE, up to two
/// revision calls. A revision is accepted only if the moral and reaction
/// segments survive byte-identically; otherwise the original is kept and the
/// violation noted.
ReviseOutcome revise_implausible(const CharacterProfile& profile, const GeneratorBanks& banks,
                                 llm::Gateway& gateway, const GenParams& params = {});

Result<Population> generate_personaweaver(const banks::SettingSpec& setting, int n,
                                          const GeneratorBanks& banks, llm::Gateway& gateway,
                                          std::uint64_t seed, const GenParams& params = {});

Result<Population> generate_worldweaver(const banks::SettingSpec& setting, int n,
                                        llm::Gateway& gateway, const GenParams& params = {});

Result<Population> generate_personahub(const banks::SettingSpec& setting,
                                       const std::filesystem::path& persona_file, int n,
                                       llm::Gateway& gateway, std::uint64_t seed,
                                       const GenParams& params = {});

/// JSONL persistence: header line with setting/method/config digest/seed,
/// then one line per profile, then one line per generation error.
Result<bool> save_population(const std::filesystem::path& path, const Population& pop);
Result<Population> load_population(const std::filesystem::path& path);

}  // namespace pweaver::gen
