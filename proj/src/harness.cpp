#include "pweaver/harness.hpp"

#include <algorithm>
#include <cctype>
#include <ctime>
#include <fstream>
#include <set>

#include "pweaver/digest.hpp"
#include "pweaver/gateway.hpp"
#include "pweaver/probes.hpp"
#include "pweaver/worldgen.hpp"

namespace pweaver::harness {

namespace fs = std::filesystem;
using nlohmann::json;

std::string setting_slug(const std::string& name) {
  std::string out;
  bool pending_dash = false;
  for (char c : name) {
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

json RunConfig::to_json() const {
  json settings_json = json::array();
  for (const auto& s : settings) {
    settings_json.push_back({{"name", s.name},
                             {"category", std::string(banks::category_name(s.category))},
                             {"prompt", s.prompt}});
  }
  json methods_json = json::array();
  for (const auto m : methods) methods_json.push_back(std::string(gen::method_name(m)));
  return {{"settings", std::move(settings_json)},
          {"methods", std::move(methods_json)},
          {"n_per_setting", n_per_setting},
          {"backend", backend.to_json()},
          {"aux_backend", aux_backend.to_json()},
          {"seed", seed},
          {"output_dir", output_dir},
          {"probe_moral", probe_moral},
          {"probe_reaction", probe_reaction},
          {"build_style", build_style},
          {"k_axes", k_axes},
          {"m_options", m_options},
          {"generation_temperature", generation_temperature},
          {"probe_temperature", probe_temperature},
          {"eightfold_classification", eightfold_classification},
          {"revise", revise},
          {"persona_file", persona_file},
          {"sample_with_replacement", sample_with_replacement}};
}

Result<RunConfig> RunConfig::from_json(const json& j) {
  using R = Result<RunConfig>;
  RunConfig c;
  try {
    if (j.contains("settings")) {
      for (const auto& entry : j.at("settings")) {
        if (entry.is_string()) {
          const auto name = entry.get<std::string>();
          auto found = banks::find_setting(name);
          if (!found) return R::failure("unknown setting: " + name);
          c.settings.push_back(std::move(*found));
        } else {
          banks::SettingSpec spec;
          spec.name = entry.at("name").get<std::string>();
          spec.category = entry.value("category", "realistic") == "fantastical"
                              ? banks::SettingCategory::fantastical
                              : banks::SettingCategory::realistic;
          spec.prompt = entry.at("prompt").get<std::string>();
          c.settings.push_back(std::move(spec));
        }
      }
    } else {
      c.settings = banks::load_settings();
    }
    if (j.contains("methods")) {
      for (const auto& entry : j.at("methods")) {
        const auto name = entry.get<std::string>();
        const auto method = gen::method_from_name(name);
        if (!method) return R::failure("unknown method: " + name);
        c.methods.push_back(*method);
      }
    } else {
      c.methods = {gen::Method::personaweaver, gen::Method::worldweaver, gen::Method::personahub};
    }
    c.n_per_setting = j.value("n_per_setting", 100);
    if (j.contains("backend")) c.backend = llm::BackendConfig::from_json(j.at("backend"));
    if (j.contains("aux_backend")) c.aux_backend = llm::BackendConfig::from_json(j.at("aux_backend"));
    c.seed = j.value("seed", std::uint64_t{0});
    c.output_dir = j.value("output_dir", "out");
    c.probe_moral = j.value("probe_moral", true);
    c.probe_reaction = j.value("probe_reaction", true);
    c.build_style = j.value("build_style", true);
    c.k_axes = j.value("k_axes", 6);
    c.m_options = j.value("m_options", 10);
    c.generation_temperature = j.value("generation_temperature", 0.8);
    c.probe_temperature = j.value("probe_temperature", 0.0);
    c.eightfold_classification = j.value("eightfold_classification", false);
    c.revise = j.value("revise", true);
    c.persona_file = j.value("persona_file", "");
    c.sample_with_replacement = j.value("sample_with_replacement", false);
  } catch (const std::exception& e) {
    return R::failure(std::string("malformed run config: ") + e.what());
  }
  return R::success(std::move(c));
}

Result<RunConfig> RunConfig::load_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return Result<RunConfig>::failure("cannot open config: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    return Result<RunConfig>::failure(path.string() + ": " + e.what());
  }
  return from_json(j);
}

std::string RunConfig::digest() const { return sha256_hex(to_json().dump()); }

std::optional<std::string> validate(const RunConfig& config) {
  if (config.settings.empty()) return "at least one setting is required";
  std::set<std::string> slugs;
  for (const auto& s : config.settings) {
    if (s.name.empty()) return "setting with empty name";
    if (s.prompt.empty()) return "setting " + s.name + " has an empty prompt";
    if (!slugs.insert(setting_slug(s.name)).second) {
      return "settings collide on directory name: " + s.name;
    }
  }
  if (config.methods.empty()) return "at least one method is required";
  std::set<std::string> methods;
  for (const auto m : config.methods) {
    if (!methods.insert(std::string(gen::method_name(m))).second) return "duplicate method";
  }
  if (config.n_per_setting < 1) return "n_per_setting must be >= 1";
  if (config.k_axes < 2) return "k_axes must be >= 2";
  if (config.m_options < 2) return "m_options must be >= 2";
  if (config.generation_temperature < 0.0 || config.generation_temperature > 2.0) {
    return "generation_temperature must be within [0, 2]";
  }
  if (config.probe_temperature < 0.0 || config.probe_temperature > 2.0) {
    return "probe_temperature must be within [0, 2]";
  }
  if (config.output_dir.empty()) return "output_dir must be non-empty";
  if (auto err = llm::validate(config.backend)) return "backend: " + *err;
  if (config.probe_reaction) {
    if (auto err = llm::validate(config.aux_backend)) return "aux_backend: " + *err;
  }
  if (config.build_style && !config.probe_reaction) {
    return "build_style requires probe_reaction (style reads the open-ended replies)";
  }
  if (methods.count("personahub") != 0 && config.persona_file.empty()) {
    return "personahub requires persona_file";
  }
  return std::nullopt;
}

json CellReport::to_json() const {
  return {{"setting", setting},
          {"method", method},
          {"artifacts", artifacts},
          {"error_count", error_count},
          {"failures", failures}};
}

CellReport CellReport::from_json(const json& j) {
  CellReport cell;
  cell.setting = j.at("setting").get<std::string>();
  cell.method = j.at("method").get<std::string>();
  if (j.contains("artifacts")) {
    cell.artifacts = j.at("artifacts").get<std::map<std::string, std::string>>();
  }
  cell.error_count = j.value("error_count", 0);
  if (j.contains("failures")) cell.failures = j.at("failures").get<std::vector<std::string>>();
  return cell;
}

int RunManifest::total_errors() const {
  int sum = 0;
  for (const auto& cell : cells) {
    sum += cell.error_count + static_cast<int>(cell.failures.size());
  }
  return sum;
}

json RunManifest::to_json() const {
  json cells_json = json::array();
  for (const auto& cell : cells) cells_json.push_back(cell.to_json());
  return {{"config_digest", config_digest},
          {"started_at", started_at},
          {"finished_at", finished_at},
          {"backend", {{"id", backend_id}, {"model", model}}},
          {"aux_backend", {{"id", aux_backend_id}, {"model", aux_model}}},
          {"classification_mode", classification_mode},
          {"seed", seed},
          {"cells", std::move(cells_json)}};
}

RunManifest RunManifest::from_json(const json& j) {
  RunManifest m;
  m.config_digest = j.value("config_digest", "");
  m.started_at = j.value("started_at", "");
  m.finished_at = j.value("finished_at", "");
  if (j.contains("backend")) {
    m.backend_id = j.at("backend").value("id", "");
    m.model = j.at("backend").value("model", "");
  }
  if (j.contains("aux_backend")) {
    m.aux_backend_id = j.at("aux_backend").value("id", "");
    m.aux_model = j.at("aux_backend").value("model", "");
  }
  m.classification_mode = j.value("classification_mode", "threeway");
  m.seed = j.value("seed", std::uint64_t{0});
  for (const auto& cell : j.value("cells", json::array())) {
    m.cells.push_back(CellReport::from_json(cell));
  }
  return m;
}

Result<bool> RunManifest::save(const fs::path& path) const {
  std::ofstream out(path);
  if (!out) return Result<bool>::failure("cannot open for writing: " + path.string());
  out << to_json().dump(2) << '\n';
  out.close();
  if (!out) return Result<bool>::failure("write failed: " + path.string());
  return Result<bool>::success(true);
}

Result<RunManifest> RunManifest::load_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return Result<RunManifest>::failure("cannot open manifest: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    return Result<RunManifest>::failure(path.string() + ": " + e.what());
  }
  RunManifest m = RunManifest::from_json(j);
  m.output_dir = path.parent_path();
  return Result<RunManifest>::success(std::move(m));
}

static std::string iso8601(std::chrono::system_clock::time_point tp) {
  const std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

static std::uint64_t cell_seed(std::uint64_t seed, const std::string& setting,
                               std::string_view method) {
  const std::string hex = sha256_hex(
      json{{"seed", seed}, {"setting", setting}, {"method", std::string(method)}}.dump());
  return std::stoull(hex.substr(0, 16), nullptr, 16);
}

static int record_errors(const std::vector<probes::ProbeRecord>& records) {
  int n = 0;
  for (const auto& r : records) {
    if (r.is_error()) ++n;
  }
  return n;
}

Result<RunManifest> run_experiment(const RunConfig& config, Clock clock) {
  using R = Result<RunManifest>;
  if (auto err = validate(config)) return R::failure("invalid config: " + *err);
  if (!clock) clock = [] { return std::chrono::system_clock::now(); };

  std::error_code ec;
  fs::create_directories(config.output_dir, ec);
  if (ec) return R::failure("cannot create output_dir: " + ec.message());

  std::unique_ptr<llm::Gateway> backend;
  std::unique_ptr<llm::Gateway> aux;
  try {
    backend = std::make_unique<llm::Gateway>(config.backend);
    if (config.probe_reaction) aux = std::make_unique<llm::Gateway>(config.aux_backend);
  } catch (const llm::GatewayError& e) {
    return R::failure(std::string("backend construction failed: ") + e.what());
  }

  RunManifest manifest;
  manifest.config_digest = config.digest();
  manifest.started_at = iso8601(clock());
  manifest.backend_id = backend->backend_id();
  manifest.model = config.backend.model;
  if (aux) {
    manifest.aux_backend_id = aux->backend_id();
    manifest.aux_model = config.aux_backend.model;
  }
  manifest.classification_mode = config.eightfold_classification ? "eightfold" : "threeway";
  manifest.seed = config.seed;
  manifest.output_dir = config.output_dir;

  const auto& corpus = banks::load_probe_corpus();
  gen::GenParams gen_params;
  gen_params.generation_temperature = config.generation_temperature;
  gen_params.revise = config.revise;
  gen_params.sample_with_replacement = config.sample_with_replacement;
  probes::ProbeParams probe_params;
  probe_params.temperature = config.probe_temperature;
  probe_params.eightfold = config.eightfold_classification;
  worldgen::WorldgenParams world_params;
  world_params.temperature = config.generation_temperature;

  for (const auto& setting : config.settings) {
    for (const auto method : config.methods) {
      CellReport cell;
      cell.setting = setting.name;
      cell.method = std::string(gen::method_name(method));
      const std::string rel_dir = setting_slug(setting.name) + "/" + cell.method;
      const fs::path cell_dir = fs::path(config.output_dir) / rel_dir;
      fs::create_directories(cell_dir, ec);
      if (ec) {
        cell.failures.push_back("cannot create cell directory: " + ec.message());
        manifest.cells.push_back(std::move(cell));
        continue;
      }
      const auto rel = [&rel_dir](const char* name) { return rel_dir + "/" + name; };

      Result<gen::Population> pop = Result<gen::Population>::failure("unreachable");
      if (method == gen::Method::personaweaver) {
        auto world =
            worldgen::build_world_bank(setting, config.k_axes, config.m_options, *backend, world_params);
        if (!world.ok()) {
          cell.failures.push_back("worldgen: " + world.error);
          manifest.cells.push_back(std::move(cell));
          continue;
        }
        {
          std::ofstream out(cell_dir / "world_bank.json");
          out << world->to_json().dump(2) << '\n';
          if (out) cell.artifacts["world_bank"] = rel("world_bank.json");
        }
        pop = gen::generate_personaweaver(setting, config.n_per_setting,
                                          gen::GeneratorBanks::builtin(*world), *backend,
                                          cell_seed(config.seed, setting.name, cell.method),
                                          gen_params);
      } else if (method == gen::Method::worldweaver) {
        pop = gen::generate_worldweaver(setting, config.n_per_setting, *backend, gen_params);
      } else {
        pop = gen::generate_personahub(setting, config.persona_file, config.n_per_setting,
                                       *backend, cell_seed(config.seed, setting.name, cell.method),
                                       gen_params);
      }
      if (!pop.ok()) {
        cell.failures.push_back("generation: " + pop.error);
        manifest.cells.push_back(std::move(cell));
        continue;
      }
      cell.error_count += static_cast<int>(pop->errors.size());
      if (auto saved = gen::save_population(cell_dir / "populations.jsonl", *pop); saved.ok()) {
        cell.artifacts["population"] = rel("populations.jsonl");
      } else {
        cell.failures.push_back(saved.error);
      }

      if (config.probe_moral) {
        auto probe = probes::run_moral_probe(*pop, setting, corpus, *backend, probe_params);
        const auto expected = static_cast<std::int64_t>(pop->profiles.size()) *
                              static_cast<std::int64_t>(corpus.moral_statements.size());
        if (probe.distribution.total() + record_errors(probe.records) != expected ||
            static_cast<std::int64_t>(probe.records.size()) != expected) {
          cell.failures.push_back("conservation violation in moral probe");
        }
        cell.error_count += record_errors(probe.records);
        if (auto saved = probes::save_records(cell_dir / "moral_records.jsonl", probe.records);
            saved.ok()) {
          cell.artifacts["moral_records"] = rel("moral_records.jsonl");
        } else {
          cell.failures.push_back(saved.error);
        }
        if (auto saved = probes::save_distribution_csv(cell_dir / "moral_dist.csv", probe.distribution);
            saved.ok()) {
          cell.artifacts["moral_dist"] = rel("moral_dist.csv");
        } else {
          cell.failures.push_back(saved.error);
        }
      }

      if (config.probe_reaction) {
        auto probe = probes::run_reaction_probe(*pop, setting, corpus, *backend, *aux, probe_params);
        const auto expected =
            static_cast<std::int64_t>(pop->profiles.size()) *
            static_cast<std::int64_t>(corpus.sentiment_questions.size() +
                                      corpus.general_questions.size());
        if (probe.distribution.total() + record_errors(probe.records) != expected ||
            static_cast<std::int64_t>(probe.records.size()) != expected) {
          cell.failures.push_back("conservation violation in reaction probe");
        }
        cell.error_count += record_errors(probe.records);
        if (auto saved = probes::save_records(cell_dir / "reaction_records.jsonl", probe.records);
            saved.ok()) {
          cell.artifacts["reaction_records"] = rel("reaction_records.jsonl");
        } else {
          cell.failures.push_back(saved.error);
        }
        if (auto saved =
                probes::save_distribution_csv(cell_dir / "reaction_dist.csv", probe.distribution);
            saved.ok()) {
          cell.artifacts["reaction_dist"] = rel("reaction_dist.csv");
        } else {
          cell.failures.push_back(saved.error);
        }

        if (config.build_style) {
          const auto report = style::build_style_report(probe.records);
          if (auto saved = style::save_style_csv(cell_dir / "style.csv", report); saved.ok()) {
            cell.artifacts["style_csv"] = rel("style.csv");
          } else {
            cell.failures.push_back(saved.error);
          }
          if (auto saved = style::save_style_json(cell_dir / "style.json", report); saved.ok()) {
            cell.artifacts["style_json"] = rel("style.json");
          } else {
            cell.failures.push_back(saved.error);
          }
        }
      }
      manifest.cells.push_back(std::move(cell));
    }
  }

  manifest.finished_at = iso8601(clock());
  for (auto& cell : manifest.cells) {
    for (const auto& [name, path] : cell.artifacts) {
      if (!fs::exists(fs::path(config.output_dir) / path)) {
        cell.failures.push_back("artifact missing at completion: " + path);
      }
    }
  }
  if (auto saved = manifest.save(fs::path(config.output_dir) / "manifest.json"); !saved.ok()) {
    return R::failure(saved.error);
  }
  return R::success(std::move(manifest));
}

// ---- comparison ----

static Result<bool> accumulate_csv(const fs::path& path, CategoricalDistribution& into) {
  auto loaded = probes::load_distribution_csv(path);
  if (!loaded.ok()) return Result<bool>::failure(loaded.error);
  try {
    for (std::size_t i = 0; i < loaded->categories.size(); ++i) {
      into.add(loaded->categories[i], loaded->counts[i]);
    }
  } catch (const std::out_of_range& e) {
    return Result<bool>::failure(path.string() + ": " + e.what());
  }
  return Result<bool>::success(true);
}

Result<ComparisonReport> compare_methods(const std::vector<RunManifest>& manifests) {
  using R = Result<ComparisonReport>;
  if (manifests.empty()) return R::failure("no manifests to compare");

  // the comparison covers the settings present in every manifest
  std::set<std::string> overlap;
  for (const auto& cell : manifests.front().cells) overlap.insert(cell.setting);
  for (std::size_t i = 1; i < manifests.size(); ++i) {
    std::set<std::string> here;
    for (const auto& cell : manifests[i].cells) here.insert(cell.setting);
    std::set<std::string> kept;
    for (const auto& name : overlap) {
      if (here.count(name) != 0) kept.insert(name);
    }
    overlap = std::move(kept);
  }
  if (overlap.empty()) return R::failure("manifests share no settings");

  struct UnitKey {
    std::size_t manifest;
    std::string method;
  };
  std::vector<UnitKey> keys;
  std::map<std::string, int> method_multiplicity;
  for (std::size_t i = 0; i < manifests.size(); ++i) {
    std::vector<std::string> seen;
    for (const auto& cell : manifests[i].cells) {
      if (std::find(seen.begin(), seen.end(), cell.method) != seen.end()) continue;
      seen.push_back(cell.method);
      keys.push_back(UnitKey{i, cell.method});
      ++method_multiplicity[cell.method];
    }
  }
  if (keys.size() < 2) return R::failure("need at least two method units to compare");

  ComparisonReport report;
  report.settings.assign(overlap.begin(), overlap.end());

  std::map<std::string, int> label_counter;
  for (const auto& key : keys) {
    ComparisonUnit unit;
    unit.method = key.method;
    if (method_multiplicity[key.method] > 1) {
      unit.label = key.method + "@" + std::to_string(++label_counter[key.method]);
    } else {
      unit.label = key.method;
    }
    unit.moral = CategoricalDistribution::with_support(probes::likert_support());
    unit.reaction = CategoricalDistribution::with_support(probes::reaction_support());

    bool any_moral = false;
    bool any_reaction = false;
    std::vector<style::StyleRow> rows;
    const auto& manifest = manifests[key.manifest];
    for (const auto& cell : manifest.cells) {
      if (cell.method != key.method || overlap.count(cell.setting) == 0) continue;
      if (auto it = cell.artifacts.find("moral_dist"); it != cell.artifacts.end()) {
        auto ok = accumulate_csv(manifest.output_dir / it->second, unit.moral);
        if (!ok.ok()) return R::failure(ok.error);
        any_moral = true;
      }
      if (auto it = cell.artifacts.find("reaction_dist"); it != cell.artifacts.end()) {
        auto ok = accumulate_csv(manifest.output_dir / it->second, unit.reaction);
        if (!ok.ok()) return R::failure(ok.error);
        any_reaction = true;
      }
      if (auto it = cell.artifacts.find("style_csv"); it != cell.artifacts.end()) {
        auto loaded = style::load_style_csv(manifest.output_dir / it->second);
        if (!loaded.ok()) return R::failure(loaded.error);
        rows.insert(rows.end(), loaded->begin(), loaded->end());
        unit.has_style = true;
      }
    }
    if (any_moral) {
      if (auto e = style::normalized_entropy(unit.moral); e.ok()) unit.moral_entropy = *e;
    }
    if (any_reaction) {
      if (auto e = style::normalized_entropy(unit.reaction); e.ok()) unit.reaction_entropy = *e;
    }
    unit.style = style::aggregate_rows(std::move(rows)).aggregates;
    report.units.push_back(std::move(unit));
  }

  for (std::size_t i = 0; i < report.units.size(); ++i) {
    for (std::size_t j = i + 1; j < report.units.size(); ++j) {
      PairwiseJsd pair;
      pair.a = report.units[i].label;
      pair.b = report.units[j].label;
      if (auto d = style::jensen_shannon(report.units[i].moral, report.units[j].moral); d.ok()) {
        pair.moral = *d;
      }
      if (auto d = style::jensen_shannon(report.units[i].reaction, report.units[j].reaction);
          d.ok()) {
        pair.reaction = *d;
      }
      report.pairwise.push_back(std::move(pair));
    }
  }
  return R::success(std::move(report));
}

json ComparisonReport::to_json() const {
  json units_json = json::array();
  for (const auto& unit : units) {
    json moral = json::object();
    for (std::size_t i = 0; i < unit.moral.categories.size(); ++i) {
      moral[unit.moral.categories[i]] = unit.moral.counts[i];
    }
    json reaction = json::object();
    for (std::size_t i = 0; i < unit.reaction.categories.size(); ++i) {
      reaction[unit.reaction.categories[i]] = unit.reaction.counts[i];
    }
    json u{{"label", unit.label},
           {"method", unit.method},
           {"moral", std::move(moral)},
           {"reaction", std::move(reaction)}};
    if (unit.moral_entropy) u["moral_entropy"] = *unit.moral_entropy;
    if (unit.reaction_entropy) u["reaction_entropy"] = *unit.reaction_entropy;
    if (unit.has_style) u["style"] = style::aggregates_to_json(unit.style);
    units_json.push_back(std::move(u));
  }
  json pairs_json = json::array();
  for (const auto& pair : pairwise) {
    json p{{"a", pair.a}, {"b", pair.b}};
    if (pair.moral) p["moral_jsd"] = *pair.moral;
    if (pair.reaction) p["reaction_jsd"] = *pair.reaction;
    pairs_json.push_back(std::move(p));
  }
  return {{"settings", settings}, {"units", std::move(units_json)}, {"pairwise", std::move(pairs_json)}};
}

}  // namespace pweaver::harness
