#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pweaver/banks.hpp"
#include "pweaver/distribution.hpp"
#include "pweaver/gateway.hpp"
#include "pweaver/generator.hpp"
#include "pweaver/result.hpp"

namespace pweaver::probes {

enum class Likert { A, B, C, D, E };

std::string_view likert_letter(Likert choice);   // "A".."E"
std::string_view likert_label(Likert choice);    // "Strongly agree".."Strongly disagree"
std::optional<Likert> likert_from_letter(char letter);

enum class ReactionLabel { refusal, deflection, compliance };

std::string_view reaction_label_name(ReactionLabel label);
std::optional<ReactionLabel> reaction_label_from_name(std::string_view name);

/// Support vectors for the probe distributions, in canonical order.
std::vector<std::string> likert_support();
std::vector<std::string> reaction_support();

struct ProbeRecord {
  std::string character_id;
  std::string item_id;  // m1..m10 for statements, s1..s5/q1..q5 for questions
  std::string raw_text;
  std::optional<Likert> choice;
  std::optional<ReactionLabel> label;
  std::string error;  // non-empty marks an error record

  bool is_error() const { return !error.empty(); }

  nlohmann::json to_json() const;
  static ProbeRecord from_json(const nlohmann::json& j);
};

struct ProbeParams {
  double temperature = 0.0;
  int max_tokens = 256;
  bool eightfold = false;  // classify into the 8 styles, then fold to 3
};

/// System prompt that puts the model in character: setting prompt plus the
/// full description plus an in-character instruction. Deliberately carries no
/// assistant-style helpfulness framing.
std::string embody_character(const gen::CharacterProfile& profile,
                             const banks::SettingSpec& setting);

/// Multiple-choice extraction, in priority order: (1) parenthesized letter;
/// (2) standalone A-E token, first line that has one; (3) unique agreement
/// label, longest label first. Two distinct letters at one priority level is
/// an ambiguity error.
Result<Likert> parse_choice(const std::string& text);

ProbeRecord ask_moral(const gen::CharacterProfile& profile, const banks::SettingSpec& setting,
                      const std::string& item_id, const std::string& statement,
                      llm::Gateway& gateway, const ProbeParams& params = {});

ProbeRecord ask_question(const gen::CharacterProfile& profile, const banks::SettingSpec& setting,
                         const std::string& item_id, const std::string& question,
                         llm::Gateway& gateway, const ProbeParams& params = {});

/// Three-way auxiliary classification with one re-ask; never yields a label
/// outside {refusal, deflection, compliance}.
Result<ReactionLabel> classify_reaction(const std::string& raw_text, llm::Gateway& aux_gateway,
                                        const ProbeParams& params = {});

struct MoralProbeResult {
  CategoricalDistribution distribution;  // support A..E
  std::vector<ProbeRecord> records;
};

struct ReactionProbeResult {
  CategoricalDistribution distribution;  // support refusal/deflection/compliance
  std::vector<ProbeRecord> records;
};

/// Every (character, statement) pair asked exactly once; counts plus error
/// records always add up to |profiles| x |statements|.
MoralProbeResult run_moral_probe(const gen::Population& pop, const banks::SettingSpec& setting,
                                 const banks::ProbeCorpus& corpus, llm::Gateway& gateway,
                                 const ProbeParams& params = {});

/// Every (character, question) pair asked then classified; raw texts kept
/// verbatim for stylometry.
ReactionProbeResult run_reaction_probe(const gen::Population& pop,
                                       const banks::SettingSpec& setting,
                                       const banks::ProbeCorpus& corpus, llm::Gateway& gateway,
                                       llm::Gateway& aux_gateway, const ProbeParams& params = {});

Result<bool> save_records(const std::filesystem::path& path,
                          const std::vector<ProbeRecord>& records);
Result<std::vector<ProbeRecord>> load_records(const std::filesystem::path& path);

Result<bool> save_distribution_csv(const std::filesystem::path& path,
                                   const CategoricalDistribution& dist);
Result<CategoricalDistribution> load_distribution_csv(const std::filesystem::path& path);

}  // namespace pweaver::probes
