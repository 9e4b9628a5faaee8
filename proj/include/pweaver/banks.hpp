#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "pweaver/result.hpp"

namespace pweaver::banks {

struct MoralPosition {
  std::string id;  // M1..M8 for the built-in bank
  std::string text;

  bool operator==(const MoralPosition&) const = default;
};

struct ReactionStyle {
  int id = 0;  // contiguous from 0
  std::string name;
  std::string description;

  bool operator==(const ReactionStyle&) const = default;
};

enum class SettingCategory { realistic, fantastical };

std::string_view category_name(SettingCategory category);

struct SettingSpec {
  std::string name;
  SettingCategory category = SettingCategory::realistic;
  std::string prompt;

  bool operator==(const SettingSpec&) const = default;
};

struct ProbeCorpus {
  std::vector<std::string> moral_statements;    // 10 entries
  std::vector<std::string> sentiment_questions; // s1-s5
  std::vector<std::string> general_questions;   // q1-q5
};

/// Built-in assets. Compiled in; immutable and shareable.
const std::vector<MoralPosition>& load_moral_bank();
const std::vector<ReactionStyle>& load_reaction_bank();
const std::vector<SettingSpec>& load_settings();
const ProbeCorpus& load_probe_corpus();

/// Look up a built-in setting by exact name.
std::optional<SettingSpec> find_setting(const std::string& name);

/// Canonical digests used to pin asset fidelity.
std::string bank_digest(const std::vector<MoralPosition>& bank);
std::string bank_digest(const std::vector<ReactionStyle>& bank);
std::string settings_digest(const std::vector<SettingSpec>& settings);
std::string corpus_digest(const ProbeCorpus& corpus);

/// A parsed user-supplied bank file: a moral bank, a reaction bank, or a
/// newline-delimited persona list.
using BankFile = std::variant<std::vector<MoralPosition>, std::vector<ReactionStyle>, std::vector<std::string>>;

/// Reads a JSON-array bank file or a JSONL persona file, validating
/// invariants (unique ids, contiguous reaction ids, non-empty texts).
/// Malformed records report their position; duplicate ids are named.
Result<BankFile> parse_bank_file(const std::filesystem::path& path);

nlohmann::json to_json(const std::vector<MoralPosition>& bank);
nlohmann::json to_json(const std::vector<ReactionStyle>& bank);

/// Inverse of parse_bank_file for the JSON-array bank kinds; persona lists
/// are written as JSONL records {"persona": ...}.
Result<bool> save_bank_file(const std::filesystem::path& path, const BankFile& bank);

}  // namespace pweaver::banks
