#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pweaver/banks.hpp"
#include "pweaver/gateway.hpp"
#include "pweaver/harness.hpp"
#include "pweaver/probes.hpp"
#include "pweaver/stylometry.hpp"

namespace fs = std::filesystem;
using namespace pweaver;

namespace {

struct GlobalOpts {
  std::string config_path;
  std::string backend;      // "mock", "live", or a backend JSON path
  std::string mock_script;  // MockScript JSON path
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

int fail(const std::string& message) {
  std::cerr << "error: " << message << "\n";
  return 2;
}

bool apply_backend_override(llm::BackendConfig& backend, const std::string& value,
                            std::string& error) {
  if (value == "mock") {
    backend.kind = llm::BackendKind::mock;
    return true;
  }
  if (value == "live") {
    backend.kind = llm::BackendKind::live;
    return true;
  }
  std::ifstream in(value);
  if (!in) {
    error = "cannot open backend file: " + value;
    return false;
  }
  try {
    nlohmann::json j;
    in >> j;
    backend = llm::BackendConfig::from_json(j);
  } catch (const std::exception& e) {
    error = value + ": " + e.what();
    return false;
  }
  return true;
}

int load_run_config(const GlobalOpts& opts, harness::RunConfig& config) {
  if (opts.config_path.empty()) return fail("--config is required for this subcommand");
  auto loaded = harness::RunConfig::load_file(opts.config_path);
  if (!loaded.ok()) return fail(loaded.error);
  config = *loaded;
  if (opts.seed_set) config.seed = opts.seed;
  if (!opts.out.empty()) config.output_dir = opts.out;
  if (!opts.backend.empty()) {
    std::string error;
    if (!apply_backend_override(config.backend, opts.backend, error)) return fail(error);
  }
  if (!opts.mock_script.empty()) {
    std::ifstream in(opts.mock_script);
    if (!in) return fail("cannot open mock script: " + opts.mock_script);
    try {
      nlohmann::json j;
      in >> j;
      const auto script = llm::MockScript::from_json(j);
      config.backend.kind = llm::BackendKind::mock;
      config.backend.script = script;
      // A lone script also stands in for an unconfigured aux backend so a
      // single --mock-script makes a full probe run possible.
      if (config.aux_backend.script.default_response.empty()) {
        config.aux_backend.kind = llm::BackendKind::mock;
        config.aux_backend.script = script;
      }
    } catch (const std::exception& e) {
      return fail(opts.mock_script + std::string(": ") + e.what());
    }
  }
  return 0;
}

int finish_run(const Result<harness::RunManifest>& run) {
  if (!run.ok()) {
    std::cerr << "run failed: " << run.error << "\n";
    return 1;
  }
  std::printf("%-28s %-14s %7s %9s\n", "setting", "method", "errors", "failures");
  for (const auto& cell : run->cells) {
    std::printf("%-28s %-14s %7d %9zu\n", cell.setting.c_str(), cell.method.c_str(),
                cell.error_count, cell.failures.size());
    for (const auto& f : cell.failures) std::printf("    ! %s\n", f.c_str());
  }
  const int errors = run->total_errors();
  std::printf("manifest: %s\n", (run->output_dir / "manifest.json").string().c_str());
  if (errors != 0) {
    std::printf("completed with %d error(s)\n", errors);
    return 1;
  }
  std::printf("completed cleanly\n");
  return 0;
}

int cmd_generate(const GlobalOpts& opts) {
  harness::RunConfig config;
  if (const int rc = load_run_config(opts, config)) return rc;
  config.probe_moral = false;
  config.probe_reaction = false;
  config.build_style = false;
  return finish_run(harness::run_experiment(config));
}

int cmd_probe(const GlobalOpts& opts) {
  harness::RunConfig config;
  if (const int rc = load_run_config(opts, config)) return rc;
  return finish_run(harness::run_experiment(config));
}

int cmd_style(const GlobalOpts& opts, const std::string& records_path) {
  auto records = probes::load_records(records_path);
  if (!records.ok()) return fail(records.error);
  const auto report = style::build_style_report(*records);
  const fs::path out_dir = opts.out.empty() ? fs::path(".") : fs::path(opts.out);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) return fail("cannot create output directory: " + ec.message());
  if (auto saved = style::save_style_csv(out_dir / "style.csv", report); !saved.ok()) {
    return fail(saved.error);
  }
  if (auto saved = style::save_style_json(out_dir / "style.json", report); !saved.ok()) {
    return fail(saved.error);
  }
  std::printf("responses: %lld\n", static_cast<long long>(report.aggregates.responses));
  std::printf("mean words: %.3f\n", report.aggregates.mean_words);
  std::printf("wrote %s and %s\n", (out_dir / "style.csv").string().c_str(),
              (out_dir / "style.json").string().c_str());
  return 0;
}

Result<harness::ComparisonReport> build_comparison(const std::vector<std::string>& manifest_paths) {
  std::vector<harness::RunManifest> manifests;
  for (const auto& path : manifest_paths) {
    auto loaded = harness::RunManifest::load_file(path);
    if (!loaded.ok()) return Result<harness::ComparisonReport>::failure(loaded.error);
    manifests.push_back(*loaded);
  }
  return harness::compare_methods(manifests);
}

std::string opt4(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", *v);
  return buf;
}

void print_comparison(const harness::ComparisonReport& report) {
  std::printf("settings:");
  for (const auto& s : report.settings) std::printf(" %s", s.c_str());
  std::printf("\n\n%-22s %14s %17s\n", "unit", "moral entropy", "reaction entropy");
  for (const auto& unit : report.units) {
    std::printf("%-22s %14s %17s\n", unit.label.c_str(), opt4(unit.moral_entropy).c_str(),
                opt4(unit.reaction_entropy).c_str());
  }
  std::printf("\n%-22s %-22s %11s %14s\n", "a", "b", "moral JSD", "reaction JSD");
  for (const auto& pair : report.pairwise) {
    std::printf("%-22s %-22s %11s %14s\n", pair.a.c_str(), pair.b.c_str(),
                opt4(pair.moral).c_str(), opt4(pair.reaction).c_str());
  }
}

int cmd_compare(const GlobalOpts& opts, const std::vector<std::string>& manifest_paths) {
  auto report = build_comparison(manifest_paths);
  if (!report.ok()) return fail(report.error);
  print_comparison(*report);
  const fs::path out = opts.out.empty() ? fs::path("comparison.json") : fs::path(opts.out);
  std::ofstream file(out);
  if (!file) return fail("cannot open for writing: " + out.string());
  file << report->to_json().dump(2) << '\n';
  std::printf("\nwrote %s\n", out.string().c_str());
  return 0;
}

int cmd_report(const GlobalOpts& opts, const std::vector<std::string>& manifest_paths) {
  auto report = build_comparison(manifest_paths);
  if (!report.ok()) return fail(report.error);
  const fs::path out_dir = opts.out.empty() ? fs::path("report") : fs::path(opts.out);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) return fail("cannot create report directory: " + ec.message());
  std::ofstream file(out_dir / "comparison.json");
  if (!file) return fail("cannot open for writing: " + (out_dir / "comparison.json").string());
  file << report->to_json().dump(2) << '\n';
  auto charts = harness::emit_charts(*report, out_dir);
  if (!charts.ok()) return fail(charts.error);
  print_comparison(*report);
  std::printf("\nwrote comparison.json");
  for (const auto& name : *charts) std::printf(" %s", name.c_str());
  std::printf(" to %s\n", out_dir.string().c_str());
  return 0;
}

int cmd_banks_show() {
  const auto& morals = banks::load_moral_bank();
  const auto& reactions = banks::load_reaction_bank();
  const auto& settings = banks::load_settings();
  const auto& corpus = banks::load_probe_corpus();
  std::printf("moral bank (%zu positions, sha256 %s)\n", morals.size(),
              banks::bank_digest(morals).c_str());
  for (const auto& m : morals) std::printf("  %-4s %s\n", m.id.c_str(), m.text.c_str());
  std::printf("\nreaction bank (%zu styles, sha256 %s)\n", reactions.size(),
              banks::bank_digest(reactions).c_str());
  for (const auto& r : reactions) {
    std::printf("  %d  %-20s %s\n", r.id, r.name.c_str(), r.description.c_str());
  }
  std::printf("\nsettings (%zu, sha256 %s)\n", settings.size(),
              banks::settings_digest(settings).c_str());
  for (const auto& s : settings) {
    std::printf("  %-28s %s\n", s.name.c_str(), std::string(banks::category_name(s.category)).c_str());
  }
  std::printf("\nprobe corpus (%zu statements, %zu+%zu questions, sha256 %s)\n",
              corpus.moral_statements.size(), corpus.sentiment_questions.size(),
              corpus.general_questions.size(), banks::corpus_digest(corpus).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"persona population generator and behavioral probe harness"};
  app.require_subcommand(1);

  GlobalOpts opts;
  app.add_option("--config", opts.config_path, "run configuration JSON")->expected(1);
  app.add_option("--seed", opts.seed, "override the configured seed")
      ->each([&opts](const std::string&) { opts.seed_set = true; });
  app.add_option("--backend", opts.backend, "mock | live | path to a backend JSON");
  app.add_option("--mock-script", opts.mock_script, "mock script JSON; forces the mock backend");
  app.add_option("--out", opts.out, "output directory or file (subcommand-dependent)");

  auto* generate = app.add_subcommand("generate", "generate populations only, no probes");
  generate->fallthrough();
  auto* probe = app.add_subcommand("probe", "full run: generate, probe, style");
  probe->fallthrough();
  auto* style_cmd = app.add_subcommand("style", "stylometry over saved probe records");
  style_cmd->fallthrough();
  std::string records_path;
  style_cmd->add_option("--records", records_path, "reaction_records.jsonl to analyze")->required();
  auto* compare = app.add_subcommand("compare", "compare methods across run manifests");
  compare->fallthrough();
  auto* report = app.add_subcommand("report", "comparison plus SVG charts");
  report->fallthrough();
  std::vector<std::string> compare_manifests;
  std::vector<std::string> report_manifests;
  compare->add_option("manifests", compare_manifests, "manifest.json paths")->required();
  report->add_option("manifests", report_manifests, "manifest.json paths")->required();
  auto* banks_cmd = app.add_subcommand("banks", "bank inspection");
  auto* banks_show = banks_cmd->add_subcommand("show", "print banks, settings and digests");
  banks_cmd->require_subcommand(1);

  CLI11_PARSE(app, argc, argv);

  if (generate->parsed()) return cmd_generate(opts);
  if (probe->parsed()) return cmd_probe(opts);
  if (style_cmd->parsed()) return cmd_style(opts, records_path);
  if (compare->parsed()) return cmd_compare(opts, compare_manifests);
  if (report->parsed()) return cmd_report(opts, report_manifests);
  if (banks_cmd->parsed() && banks_show->parsed()) return cmd_banks_show();
  return fail("unknown subcommand");
}
