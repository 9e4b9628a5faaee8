#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "pweaver/banks.hpp"
#include "pweaver/gateway.hpp"
#include "pweaver/result.hpp"

namespace pweaver::worldgen {

/// Word list that defines what counts as behavioral vocabulary. Matching is
/// word-boundary and case-insensitive, so "kind-hearted" trips on "kind" but
/// "means" never trips on "mean".
struct BehavioralLexicon {
  std::vector<std::string> terms;  // stored lowercase

  static const BehavioralLexicon& default_lexicon();
  static Result<BehavioralLexicon> load_file(const std::filesystem::path& path);
};

struct ScreenResult {
  bool clean = true;
  std::vector<std::string> matched_terms;
};

ScreenResult screen_behavioral(const std::string& label, const BehavioralLexicon& lexicon);
ScreenResult screen_behavioral(const std::string& label);

struct WorldAxis {
  std::string name;
  std::vector<std::string> options;

  bool operator==(const WorldAxis&) const = default;
};

struct WorldBank {
  banks::SettingSpec setting;
  std::vector<WorldAxis> axes;

  nlohmann::json to_json() const;
  static WorldBank from_json(const nlohmann::json& j);

  bool operator==(const WorldBank&) const = default;
};

struct WorldgenParams {
  double temperature = 0.8;
  int max_tokens = 512;
  BehavioralLexicon lexicon = BehavioralLexicon::default_lexicon();
};

/// Asks the backend for up to k non-behavioral axis names. Screened-out or
/// duplicate names are dropped; one re-prompt tops the list up when it comes
/// back short. Error only when nothing valid is obtainable at all.
Result<std::vector<std::string>> propose_axes(const banks::SettingSpec& setting, int k,
                                              llm::Gateway& gateway,
                                              const WorldgenParams& params = {});

/// Expands one axis into up to m setting-specific options, screened and
/// deduplicated case-insensitively (first spelling wins). One re-prompt on a
/// short or unparseable reply; error when no valid option survives.
Result<std::vector<std::string>> expand_axis(const banks::SettingSpec& setting,
                                             const std::string& axis_name, int m,
                                             llm::Gateway& gateway,
                                             const WorldgenParams& params = {});

/// Full world-building stage: propose axes, expand each concurrently through
/// the gateway batch path, validate the bank invariants (unique axis names,
/// >= 2 options per axis — violations name the axis).
Result<WorldBank> build_world_bank(const banks::SettingSpec& setting, int k, int m,
                                   llm::Gateway& gateway, const WorldgenParams& params = {});

}  // namespace pweaver::worldgen
