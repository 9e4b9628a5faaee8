#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pweaver/banks.hpp"
#include "pweaver/chat.hpp"
#include "pweaver/distribution.hpp"
#include "pweaver/generator.hpp"
#include "pweaver/result.hpp"
#include "pweaver/stylometry.hpp"

namespace pweaver::harness {

struct RunConfig {
  std::vector<banks::SettingSpec> settings;  // resolved specs, built-in or custom
  std::vector<gen::Method> methods;
  int n_per_setting = 100;
  llm::BackendConfig backend;
  llm::BackendConfig aux_backend;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  bool probe_moral = true;
  bool probe_reaction = true;
  bool build_style = true;  // needs reaction records
  int k_axes = 6;
  int m_options = 10;
  double generation_temperature = 0.8;
  double probe_temperature = 0.0;
  bool eightfold_classification = false;
  bool revise = true;
  std::string persona_file;
  bool sample_with_replacement = false;

  nlohmann::json to_json() const;
  /// Settings entries may be built-in names or full {name, category, prompt}
  /// objects; absent fields keep the defaults above.
  static Result<RunConfig> from_json(const nlohmann::json& j);
  static Result<RunConfig> load_file(const std::filesystem::path& path);

  /// SHA-256 of the canonical serialization; changes iff any field changes.
  std::string digest() const;
};

std::optional<std::string> validate(const RunConfig& config);

struct CellReport {
  std::string setting;
  std::string method;
  std::map<std::string, std::string> artifacts;  // artifact name -> path relative to output_dir
  int error_count = 0;                           // generation + probe error records
  std::vector<std::string> failures;             // stage-level failures

  nlohmann::json to_json() const;
  static CellReport from_json(const nlohmann::json& j);
};

struct RunManifest {
  std::string config_digest;
  std::string started_at;   // ISO 8601 UTC
  std::string finished_at;  // ISO 8601 UTC
  std::string backend_id;
  std::string model;
  std::string aux_backend_id;
  std::string aux_model;
  std::string classification_mode;  // "threeway" or "eightfold"
  std::uint64_t seed = 0;
  std::vector<CellReport> cells;
  std::filesystem::path output_dir;  // set at run/load time, not serialized

  int total_errors() const;

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
  Result<bool> save(const std::filesystem::path& path) const;
  static Result<RunManifest> load_file(const std::filesystem::path& path);
};

using Clock = std::function<std::chrono::system_clock::time_point()>;

/// Runs every (setting, method) cell: generate, persist, probe, style.
/// Stage failures are recorded per cell and the run continues; the manifest
/// is written last, to output_dir/manifest.json. The clock parameter exists
/// so reproducers can pin the manifest timestamps.
Result<RunManifest> run_experiment(const RunConfig& config, Clock clock = {});

struct ComparisonUnit {
  std::string label;   // method name, suffixed "@k" when several manifests share it
  std::string method;
  CategoricalDistribution moral;     // support A..E, zero counts when probe absent
  CategoricalDistribution reaction;  // support refusal/deflection/compliance
  std::optional<double> moral_entropy;
  std::optional<double> reaction_entropy;
  style::StyleAggregates style;
  bool has_style = false;
};

struct PairwiseJsd {
  std::string a;
  std::string b;
  std::optional<double> moral;
  std::optional<double> reaction;
};

struct ComparisonReport {
  std::vector<std::string> settings;  // the overlap the comparison covers
  std::vector<ComparisonUnit> units;
  std::vector<PairwiseJsd> pairwise;

  nlohmann::json to_json() const;
};

/// Aligns each manifest's methods over the settings all manifests share and
/// compares their distributions. Units are (manifest, method) pairs, so
/// comparing identical manifests yields zero divergence everywhere.
Result<ComparisonReport> compare_methods(const std::vector<RunManifest>& manifests);

/// Grouped-bar SVG per panel: moral, reaction, filler, punctuation, length
/// histogram, sentiment. Byte-deterministic for a fixed report.
Result<std::vector<std::string>> emit_charts(const ComparisonReport& report,
                                             const std::filesystem::path& out_dir);

/// Directory-safe slug used for per-setting artifact paths.
std::string setting_slug(const std::string& name);

}  // namespace pweaver::harness
