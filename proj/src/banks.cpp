#include "pweaver/banks.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "pweaver/digest.hpp"

namespace pweaver::banks {

using nlohmann::json;

std::string_view category_name(SettingCategory category) {
  return category == SettingCategory::realistic ? "realistic" : "fantastical";
}

std::optional<SettingSpec> find_setting(const std::string& name) {
  for (const auto& setting : load_settings()) {
    if (setting.name == name) return setting;
  }
  return std::nullopt;
}

std::string bank_digest(const std::vector<MoralPosition>& bank) {
  std::string buf;
  for (const auto& p : bank) {
    buf += p.id;
    buf += '\t';
    buf += p.text;
    buf += '\n';
  }
  return sha256_hex(buf);
}

std::string bank_digest(const std::vector<ReactionStyle>& bank) {
  std::string buf;
  for (const auto& r : bank) {
    buf += std::to_string(r.id);
    buf += '\t';
    buf += r.name;
    buf += '\t';
    buf += r.description;
    buf += '\n';
  }
  return sha256_hex(buf);
}

std::string settings_digest(const std::vector<SettingSpec>& settings) {
  std::string buf;
  for (const auto& s : settings) {
    buf += s.name;
    buf += '\t';
    buf += category_name(s.category);
    buf += '\t';
    buf += s.prompt;
    buf += '\n';
  }
  return sha256_hex(buf);
}

std::string corpus_digest(const ProbeCorpus& corpus) {
  std::string buf;
  const auto append = [&buf](char prefix, const std::vector<std::string>& items) {
    for (std::size_t i = 0; i < items.size(); ++i) {
      buf += prefix;
      buf += std::to_string(i + 1);
      buf += '\t';
      buf += items[i];
      buf += '\n';
    }
  };
  append('m', corpus.moral_statements);
  append('s', corpus.sentiment_questions);
  append('q', corpus.general_questions);
  return sha256_hex(buf);
}

json to_json(const std::vector<MoralPosition>& bank) {
  json arr = json::array();
  for (const auto& p : bank) arr.push_back({{"id", p.id}, {"text", p.text}});
  return arr;
}

json to_json(const std::vector<ReactionStyle>& bank) {
  json arr = json::array();
  for (const auto& r : bank) {
    arr.push_back({{"id", r.id}, {"name", r.name}, {"description", r.description}});
  }
  return arr;
}

static Result<BankFile> parse_moral_array(const json& arr) {
  std::vector<MoralPosition> bank;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& e = arr[i];
    if (!e.contains("id") || !e.contains("text") || !e["id"].is_string() || !e["text"].is_string()) {
      return Result<BankFile>::failure("entry " + std::to_string(i + 1) +
                                       ": moral position needs string fields id and text");
    }
    MoralPosition p{e["id"].get<std::string>(), e["text"].get<std::string>()};
    if (p.text.empty()) {
      return Result<BankFile>::failure("entry " + std::to_string(i + 1) + ": empty text for id " + p.id);
    }
    if (!seen.insert(p.id).second) {
      return Result<BankFile>::failure("duplicate id " + p.id);
    }
    bank.push_back(std::move(p));
  }
  return Result<BankFile>::success(BankFile{std::move(bank)});
}

static Result<BankFile> parse_reaction_array(const json& arr) {
  std::vector<ReactionStyle> bank;
  std::set<int> seen;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& e = arr[i];
    if (!e.contains("id") || !e.contains("name") || !e.contains("description") ||
        !e["id"].is_number_integer() || !e["name"].is_string() || !e["description"].is_string()) {
      return Result<BankFile>::failure(
          "entry " + std::to_string(i + 1) +
          ": reaction style needs integer id and string name/description");
    }
    ReactionStyle r{e["id"].get<int>(), e["name"].get<std::string>(), e["description"].get<std::string>()};
    if (r.name.empty()) {
      return Result<BankFile>::failure("entry " + std::to_string(i + 1) + ": empty name for id " +
                                       std::to_string(r.id));
    }
    if (!seen.insert(r.id).second) {
      return Result<BankFile>::failure("duplicate id " + std::to_string(r.id));
    }
    bank.push_back(std::move(r));
  }
  // Reaction ids index the style bank, so they must run 0..n-1.
  for (int want = 0; want < static_cast<int>(bank.size()); ++want) {
    if (seen.count(want) == 0) {
      return Result<BankFile>::failure("reaction ids must be contiguous from 0; missing id " +
                                       std::to_string(want));
    }
  }
  return Result<BankFile>::success(BankFile{std::move(bank)});
}

static Result<BankFile> parse_persona_lines(std::istream& in) {
  std::vector<std::string> personas;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      return Result<BankFile>::failure("line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!record.is_object() || !record.contains("persona") || !record["persona"].is_string()) {
      return Result<BankFile>::failure("line " + std::to_string(lineno) +
                                       ": persona record needs a string field persona");
    }
    personas.push_back(record["persona"].get<std::string>());
  }
  return Result<BankFile>::success(BankFile{std::move(personas)});
}

Result<BankFile> parse_bank_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return Result<BankFile>::failure("cannot open bank file: " + path.string());

  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string content = buffer.str();
  const auto first = content.find_first_not_of(" \t\r\n");

  if (first != std::string::npos && content[first] == '[') {
    json arr;
    try {
      arr = json::parse(content);
    } catch (const json::exception& e) {
      return Result<BankFile>::failure(std::string(e.what()));  // message carries line/column
    }
    if (!arr.is_array()) return Result<BankFile>::failure("bank file must be a JSON array");
    if (arr.empty()) return Result<BankFile>::failure("bank file holds no entries");
    const auto& head = arr[0];
    if (head.is_object() && head.contains("text")) return parse_moral_array(arr);
    if (head.is_object() && head.contains("description")) return parse_reaction_array(arr);
    return Result<BankFile>::failure(
        "entry 1: unrecognized bank entry; expected fields {id, text} or {id, name, description}");
  }

  std::istringstream lines(content);
  return parse_persona_lines(lines);
}

Result<bool> save_bank_file(const std::filesystem::path& path, const BankFile& bank) {
  std::ofstream out(path);
  if (!out) return Result<bool>::failure("cannot open for writing: " + path.string());
  if (const auto* moral = std::get_if<std::vector<MoralPosition>>(&bank)) {
    out << to_json(*moral).dump(2) << '\n';
  } else if (const auto* reaction = std::get_if<std::vector<ReactionStyle>>(&bank)) {
    out << to_json(*reaction).dump(2) << '\n';
  } else {
    for (const auto& persona : std::get<std::vector<std::string>>(bank)) {
      out << json{{"persona", persona}}.dump() << '\n';
    }
  }
  out.close();
  if (!out) return Result<bool>::failure("write failed: " + path.string());
  return Result<bool>::success(true);
}

}  // namespace pweaver::banks
