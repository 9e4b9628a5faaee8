#include <chrono>
#include <fstream>
#include <map>
#include <sstream>

#include <doctest.h>

#include "pweaver/harness.hpp"
#include "pweaver/probes.hpp"
#include "support.hpp"

using namespace pweaver;
using namespace testsup;
namespace fs = std::filesystem;

namespace {

harness::RunConfig base_config(const fs::path& out) {
  harness::RunConfig config;
  config.settings = {*banks::find_setting("Fargo")};
  config.methods = {gen::Method::personaweaver, gen::Method::worldweaver,
                    gen::Method::personahub};
  config.n_per_setting = 4;
  config.k_axes = 3;
  config.m_options = 4;
  config.seed = 71;
  config.backend = mock_backend(reaction_conditioned_script());
  config.aux_backend = mock_backend(classifier_script());
  config.output_dir = (out / "run").string();
  config.persona_file = write_personas(out, 10).string();
  return config;
}

harness::Clock fixed_clock() {
  return [] { return std::chrono::system_clock::from_time_t(1700000000); };
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::map<std::string, std::string> snapshot_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    files[fs::relative(entry.path(), root).string()] = slurp(entry.path());
  }
  return files;
}

// One full mock-backed run, shared by the cases below.
struct RunFixture {
  harness::RunConfig config;
  harness::RunManifest manifest;
};

const RunFixture& fixture() {
  static const RunFixture f = [] {
    RunFixture fx;
    fx.config = base_config(temp_dir("harness-run"));
    auto run = harness::run_experiment(fx.config, fixed_clock());
    REQUIRE(run.ok());
    fx.manifest = *run;
    return fx;
  }();
  return f;
}

}  // namespace

TEST_CASE("setting slugs are directory safe") {
  CHECK(harness::setting_slug("Fargo") == "fargo");
  CHECK(harness::setting_slug("Friday Night Lights") == "friday-night-lights");
  CHECK(harness::setting_slug("Lady Bird") == "lady-bird");
  CHECK(harness::setting_slug("The Wire!") == "the-wire");
  CHECK(harness::setting_slug("A&B  C") == "a-b-c");
  CHECK(harness::setting_slug("  --  ") == "setting");
  CHECK(harness::setting_slug("") == "setting");
}

TEST_CASE("run config json round trip") {
  const auto dir = temp_dir("harness-config");
  auto config = base_config(dir);
  config.eightfold_classification = true;
  config.revise = false;
  config.probe_temperature = 0.3;

  const auto parsed = harness::RunConfig::from_json(config.to_json());
  REQUIRE(parsed.ok());
  CHECK(parsed->settings.size() == 1);
  CHECK(parsed->settings[0].name == "Fargo");
  CHECK(parsed->settings[0].prompt == config.settings[0].prompt);
  CHECK(parsed->methods == config.methods);
  CHECK(parsed->n_per_setting == 4);
  CHECK(parsed->k_axes == 3);
  CHECK(parsed->m_options == 4);
  CHECK(parsed->seed == 71);
  CHECK(parsed->eightfold_classification);
  CHECK(!parsed->revise);
  CHECK(parsed->probe_temperature == doctest::Approx(0.3));
  CHECK(parsed->persona_file == config.persona_file);
  CHECK(parsed->digest() == config.digest());
}

TEST_CASE("run config accepts names, objects, and defaults") {
  const auto by_name = harness::RunConfig::from_json(
      {{"settings", {"Fargo", "Seinfeld"}}, {"methods", {"worldweaver"}}});
  REQUIRE(by_name.ok());
  CHECK(by_name->settings.size() == 2);
  CHECK(by_name->settings[0].category == banks::SettingCategory::realistic);
  CHECK(!by_name->settings[0].prompt.empty());
  CHECK(by_name->methods == std::vector<gen::Method>{gen::Method::worldweaver});

  nlohmann::json custom_j;
  custom_j["settings"] = nlohmann::json::array(
      {nlohmann::json{{"name", "Dockside"}, {"prompt", "A fishing town."}}});
  const auto custom = harness::RunConfig::from_json(custom_j);
  REQUIRE(custom.ok());
  CHECK(custom->settings[0].name == "Dockside");
  CHECK(custom->settings[0].category == banks::SettingCategory::realistic);

  const auto defaults = harness::RunConfig::from_json(nlohmann::json::object());
  REQUIRE(defaults.ok());
  CHECK(defaults->settings.size() == banks::load_settings().size());
  CHECK(defaults->methods.size() == 3);
  CHECK(defaults->n_per_setting == 100);
  CHECK(defaults->k_axes == 6);
  CHECK(defaults->m_options == 10);

  CHECK(!harness::RunConfig::from_json({{"settings", {"Atlantis High"}}}).ok());
  CHECK(!harness::RunConfig::from_json({{"methods", {"markov"}}}).ok());
}

TEST_CASE("run config loads from a file") {
  const auto dir = temp_dir("harness-file");
  std::ofstream(dir / "run.json")
      << R"({"settings": ["Fargo"], "methods": ["personaweaver"], "n_per_setting": 7})";
  const auto loaded = harness::RunConfig::load_file(dir / "run.json");
  REQUIRE(loaded.ok());
  CHECK(loaded->settings[0].name == "Fargo");
  CHECK(loaded->n_per_setting == 7);

  std::ofstream(dir / "broken.json") << "{ not json";
  CHECK(!harness::RunConfig::load_file(dir / "broken.json").ok());
  CHECK(!harness::RunConfig::load_file(dir / "absent.json").ok());
}

TEST_CASE("config digests react to every field") {
  const auto dir = temp_dir("harness-digest");
  const auto config = base_config(dir);
  CHECK(config.digest().size() == 64);
  CHECK(config.digest() == base_config(dir).digest());

  auto reseeded = config;
  reseeded.seed = 72;
  CHECK(reseeded.digest() != config.digest());

  auto moved = config;
  moved.output_dir = (dir / "elsewhere").string();
  CHECK(moved.digest() != config.digest());

  auto resized = config;
  resized.n_per_setting = 5;
  CHECK(resized.digest() != config.digest());
}

TEST_CASE("validation rejects inconsistent configs") {
  const auto dir = temp_dir("harness-validate");
  const auto good = base_config(dir);
  CHECK(harness::validate(good) == std::nullopt);

  auto no_settings = good;
  no_settings.settings.clear();
  CHECK(harness::validate(no_settings).has_value());

  auto colliding = good;
  colliding.settings.push_back({"fargo!", banks::SettingCategory::realistic, "Another place."});
  REQUIRE(harness::validate(colliding).has_value());
  CHECK(harness::validate(colliding)->find("collide") != std::string::npos);

  auto no_methods = good;
  no_methods.methods.clear();
  CHECK(harness::validate(no_methods).has_value());

  auto duplicated = good;
  duplicated.methods.push_back(gen::Method::worldweaver);
  CHECK(harness::validate(duplicated).has_value());

  auto zero_n = good;
  zero_n.n_per_setting = 0;
  CHECK(harness::validate(zero_n).has_value());

  auto thin_axes = good;
  thin_axes.k_axes = 1;
  CHECK(harness::validate(thin_axes).has_value());

  auto thin_options = good;
  thin_options.m_options = 1;
  CHECK(harness::validate(thin_options).has_value());

  auto hot = good;
  hot.generation_temperature = 2.5;
  CHECK(harness::validate(hot).has_value());

  auto cold = good;
  cold.probe_temperature = -0.1;
  CHECK(harness::validate(cold).has_value());

  auto nowhere = good;
  nowhere.output_dir.clear();
  CHECK(harness::validate(nowhere).has_value());

  auto bad_backend = good;
  bad_backend.backend.script.default_response.clear();
  bad_backend.backend.script.rules.clear();
  REQUIRE(harness::validate(bad_backend).has_value());
  CHECK(harness::validate(bad_backend)->find("backend") != std::string::npos);

  auto bad_aux = good;
  bad_aux.aux_backend.script.default_response.clear();
  REQUIRE(harness::validate(bad_aux).has_value());
  CHECK(harness::validate(bad_aux)->find("aux") != std::string::npos);

  // the aux backend is irrelevant when reaction probes are off
  auto no_reaction = bad_aux;
  no_reaction.probe_reaction = false;
  no_reaction.build_style = false;
  CHECK(harness::validate(no_reaction) == std::nullopt);

  auto style_without_replies = good;
  style_without_replies.probe_reaction = false;
  REQUIRE(harness::validate(style_without_replies).has_value());
  CHECK(harness::validate(style_without_replies)->find("build_style") != std::string::npos);

  auto no_personas = good;
  no_personas.persona_file.clear();
  REQUIRE(harness::validate(no_personas).has_value());
  CHECK(harness::validate(no_personas)->find("persona_file") != std::string::npos);
}

TEST_CASE("experiment run covers every cell and conserves probe records") {
  const auto& fx = fixture();
  const auto& manifest = fx.manifest;
  const fs::path out(fx.config.output_dir);

  CHECK(manifest.config_digest == fx.config.digest());
  CHECK(manifest.started_at == "2023-11-14T22:13:20Z");
  CHECK(manifest.finished_at == "2023-11-14T22:13:20Z");
  CHECK(manifest.classification_mode == "threeway");
  CHECK(manifest.seed == 71);
  CHECK(!manifest.backend_id.empty());
  CHECK(!manifest.aux_backend_id.empty());
  CHECK(manifest.total_errors() == 0);

  REQUIRE(manifest.cells.size() == 3);
  for (const auto& cell : manifest.cells) {
    CHECK(cell.setting == "Fargo");
    CHECK(cell.failures.empty());
    CHECK(cell.error_count == 0);
    const std::size_t expected_artifacts = cell.method == "personaweaver" ? 8 : 7;
    CHECK(cell.artifacts.size() == expected_artifacts);
    for (const auto& [name, rel] : cell.artifacts) {
      CAPTURE(name);
      CHECK(fs::exists(out / rel));
    }
  }
  CHECK(manifest.cells[0].method == "personaweaver");
  CHECK(manifest.cells[0].artifacts.count("world_bank") == 1);
  CHECK(manifest.cells[1].method == "worldweaver");
  CHECK(manifest.cells[2].method == "personahub");
  CHECK(fs::exists(out / "manifest.json"));

  // populations reflect their generation method
  const auto pw =
      gen::load_population(out / "fargo" / "personaweaver" / "populations.jsonl");
  REQUIRE(pw.ok());
  REQUIRE(pw->profiles.size() == 4);
  CHECK(pw->profiles[0].id == "fargo-personaweaver-001");
  for (const auto& profile : pw->profiles) CHECK(profile.blueprint.has_value());

  const auto ww = gen::load_population(out / "fargo" / "worldweaver" / "populations.jsonl");
  REQUIRE(ww.ok());
  REQUIRE(ww->profiles.size() == 4);
  CHECK(ww->profiles[0].description.find("weathered farmer") != std::string::npos);
  for (const auto& profile : ww->profiles) CHECK(!profile.blueprint.has_value());

  const auto ph = gen::load_population(out / "fargo" / "personahub" / "populations.jsonl");
  REQUIRE(ph.ok());
  REQUIRE(ph->profiles.size() == 4);
  for (const auto& profile : ph->profiles) {
    CHECK(profile.description.find("adapted to daily life") != std::string::npos);
  }

  // every cell: 4 characters x 10 items per probe, all accounted for
  for (const auto& cell : manifest.cells) {
    const fs::path cell_dir = out / "fargo" / cell.method;
    const auto moral = probes::load_distribution_csv(cell_dir / "moral_dist.csv");
    REQUIRE(moral.ok());
    CHECK(moral->categories == probes::likert_support());
    CHECK(moral->total() == 40);
    CHECK(moral->counts[0] == 40);  // scripted moral answers are all (A)

    const auto reaction = probes::load_distribution_csv(cell_dir / "reaction_dist.csv");
    REQUIRE(reaction.ok());
    CHECK(reaction->categories == probes::reaction_support());
    CHECK(reaction->total() == 40);
    if (cell.method != "personaweaver") {
      CHECK(reaction->counts[2] == 40);  // unconditioned replies classify as compliance
    }

    const auto moral_records = probes::load_records(cell_dir / "moral_records.jsonl");
    REQUIRE(moral_records.ok());
    CHECK(moral_records->size() == 40);
    const auto reaction_records = probes::load_records(cell_dir / "reaction_records.jsonl");
    REQUIRE(reaction_records.ok());
    CHECK(reaction_records->size() == 40);

    const auto rows = style::load_style_csv(cell_dir / "style.csv");
    REQUIRE(rows.ok());
    CHECK(rows->size() == 40);
  }
}

TEST_CASE("experiment reruns are byte identical") {
  const auto& fx = fixture();
  const fs::path out(fx.config.output_dir);
  const auto before = snapshot_tree(out);
  REQUIRE(!before.empty());

  const auto rerun = harness::run_experiment(fx.config, fixed_clock());
  REQUIRE(rerun.ok());
  const auto after = snapshot_tree(out);
  CHECK(before == after);
}

TEST_CASE("stage failures are recorded without aborting the run") {
  const auto dir = temp_dir("harness-fail");
  auto config = base_config(dir);
  config.methods = {gen::Method::personahub, gen::Method::worldweaver};
  config.persona_file = (dir / "missing.jsonl").string();

  const auto run = harness::run_experiment(config, fixed_clock());
  REQUIRE(run.ok());
  REQUIRE(run->cells.size() == 2);
  REQUIRE(run->cells[0].failures.size() == 1);
  CHECK(run->cells[0].failures[0].find("generation:") != std::string::npos);
  CHECK(run->cells[0].artifacts.empty());
  CHECK(run->cells[1].failures.empty());
  CHECK(run->total_errors() == 1);
  CHECK(fs::exists(fs::path(config.output_dir) / "manifest.json"));
}

TEST_CASE("worldgen failures name the stage") {
  const auto dir = temp_dir("harness-worldgen-fail");
  auto config = base_config(dir);
  config.methods = {gen::Method::personaweaver};
  llm::MockScript hopeless;
  hopeless.rules.push_back(sub("axes of variation", "temperament, personality"));
  hopeless.default_response = "noise";
  config.backend = mock_backend(hopeless);

  const auto run = harness::run_experiment(config, fixed_clock());
  REQUIRE(run.ok());
  REQUIRE(run->cells.size() == 1);
  REQUIRE(run->cells[0].failures.size() == 1);
  CHECK(run->cells[0].failures[0].find("worldgen:") != std::string::npos);
}

TEST_CASE("invalid configs never start a run") {
  const auto dir = temp_dir("harness-invalid");
  auto config = base_config(dir);
  config.n_per_setting = 0;
  const auto run = harness::run_experiment(config, fixed_clock());
  REQUIRE(!run.ok());
  CHECK(run.error.find("invalid config") != std::string::npos);
}

TEST_CASE("manifest json round trips through disk") {
  const auto dir = temp_dir("harness-manifest");
  harness::RunManifest manifest;
  manifest.config_digest = "abc";
  manifest.started_at = "2023-11-14T22:13:20Z";
  manifest.finished_at = "2023-11-14T22:14:00Z";
  manifest.backend_id = "mock:m";
  manifest.model = "m";
  manifest.aux_backend_id = "mock:aux";
  manifest.aux_model = "aux";
  manifest.classification_mode = "eightfold";
  manifest.seed = 9;
  harness::CellReport cell;
  cell.setting = "Fargo";
  cell.method = "worldweaver";
  cell.artifacts["population"] = "fargo/worldweaver/populations.jsonl";
  cell.error_count = 2;
  cell.failures = {"conservation violation in moral probe"};
  manifest.cells.push_back(cell);
  CHECK(manifest.total_errors() == 3);

  REQUIRE(manifest.save(dir / "manifest.json").ok());
  const auto loaded = harness::RunManifest::load_file(dir / "manifest.json");
  REQUIRE(loaded.ok());
  CHECK(loaded->config_digest == "abc");
  CHECK(loaded->started_at == manifest.started_at);
  CHECK(loaded->finished_at == manifest.finished_at);
  CHECK(loaded->backend_id == "mock:m");
  CHECK(loaded->aux_backend_id == "mock:aux");
  CHECK(loaded->classification_mode == "eightfold");
  CHECK(loaded->seed == 9);
  CHECK(loaded->output_dir == dir);
  REQUIRE(loaded->cells.size() == 1);
  CHECK(loaded->cells[0].setting == "Fargo");
  CHECK(loaded->cells[0].artifacts.at("population") == cell.artifacts.at("population"));
  CHECK(loaded->cells[0].error_count == 2);
  CHECK(loaded->cells[0].failures == cell.failures);

  CHECK(!harness::RunManifest::load_file(dir / "absent.json").ok());
}

TEST_CASE("method comparison aligns units over shared settings") {
  const auto& fx = fixture();
  const auto report = harness::compare_methods({fx.manifest});
  REQUIRE(report.ok());
  CHECK(report->settings == std::vector<std::string>{"Fargo"});
  REQUIRE(report->units.size() == 3);
  CHECK(report->units[0].label == "personaweaver");
  CHECK(report->units[1].label == "worldweaver");
  CHECK(report->units[2].label == "personahub");

  for (const auto& unit : report->units) {
    CHECK(unit.moral.total() == 40);
    CHECK(unit.reaction.total() == 40);
    REQUIRE(unit.moral_entropy.has_value());
    CHECK(*unit.moral_entropy == doctest::Approx(0.0));  // every answer was (A)
    REQUIRE(unit.reaction_entropy.has_value());
    CHECK(unit.has_style);
    CHECK(unit.style.responses == 40);
  }
  CHECK(*report->units[1].reaction_entropy == doctest::Approx(0.0));
  CHECK(*report->units[2].reaction_entropy == doctest::Approx(0.0));

  REQUIRE(report->pairwise.size() == 3);
  for (const auto& pair : report->pairwise) {
    REQUIRE(pair.moral.has_value());
    CHECK(*pair.moral == doctest::Approx(0.0));
    CHECK(pair.reaction.has_value());
  }
  // worldweaver vs personahub: identical scripted outcomes on both probes
  CHECK(report->pairwise[2].a == "worldweaver");
  CHECK(report->pairwise[2].b == "personahub");
  CHECK(*report->pairwise[2].reaction == doctest::Approx(0.0));

  const auto j = report->to_json();
  CHECK(j["settings"][0] == "Fargo");
  CHECK(j["units"].size() == 3);
  CHECK(j["units"][0]["label"] == "personaweaver");
  CHECK(j["units"][0].contains("moral_entropy"));
  CHECK(j["units"][0].contains("style"));
  CHECK(j["pairwise"].size() == 3);
  CHECK(j["pairwise"][0].contains("moral_jsd"));
}

TEST_CASE("comparing a manifest against itself yields zero divergence") {
  const auto& fx = fixture();
  const auto report = harness::compare_methods({fx.manifest, fx.manifest});
  REQUIRE(report.ok());
  REQUIRE(report->units.size() == 6);
  CHECK(report->units[0].label == "personaweaver@1");
  CHECK(report->units[3].label == "personaweaver@2");

  bool found = false;
  for (const auto& pair : report->pairwise) {
    if (pair.a == "personaweaver@1" && pair.b == "personaweaver@2") {
      found = true;
      REQUIRE(pair.moral.has_value());
      REQUIRE(pair.reaction.has_value());
      CHECK(*pair.moral == doctest::Approx(0.0));
      CHECK(*pair.reaction == doctest::Approx(0.0));
    }
  }
  CHECK(found);
}

TEST_CASE("comparison failure modes") {
  CHECK(!harness::compare_methods({}).ok());

  harness::RunManifest lonely;
  harness::CellReport cell;
  cell.setting = "Fargo";
  cell.method = "worldweaver";
  lonely.cells.push_back(cell);
  const auto single = harness::compare_methods({lonely});
  REQUIRE(!single.ok());
  CHECK(single.error.find("two method units") != std::string::npos);

  harness::RunManifest other;
  harness::CellReport elsewhere;
  elsewhere.setting = "Seinfeld";
  elsewhere.method = "worldweaver";
  other.cells.push_back(elsewhere);
  const auto disjoint = harness::compare_methods({lonely, other});
  REQUIRE(!disjoint.ok());
  CHECK(disjoint.error.find("share no settings") != std::string::npos);
}

TEST_CASE("charts render one svg per populated panel") {
  const auto& fx = fixture();
  const auto report = harness::compare_methods({fx.manifest});
  REQUIRE(report.ok());

  const auto dir = temp_dir("harness-charts");
  const auto written = harness::emit_charts(*report, dir);
  REQUIRE(written.ok());
  const std::vector<std::string> expected{"moral_dist.svg",  "reaction_dist.svg",
                                          "filler.svg",      "punctuation.svg",
                                          "length_hist.svg", "sentiment.svg"};
  CHECK(*written == expected);
  for (const auto& name : expected) {
    CAPTURE(name);
    const auto svg = slurp(dir / name);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("class=\"bar\"") != std::string::npos);
  }

  // byte-deterministic re-render
  const auto before = snapshot_tree(dir);
  REQUIRE(harness::emit_charts(*report, dir).ok());
  CHECK(snapshot_tree(dir) == before);

  // a unit with no distributions and no style produces no panels
  harness::ComparisonReport empty;
  empty.units.push_back(harness::ComparisonUnit{});
  const auto none = harness::emit_charts(empty, temp_dir("harness-charts-empty"));
  REQUIRE(none.ok());
  CHECK(none->empty());

  CHECK(!harness::emit_charts(harness::ComparisonReport{}, dir).ok());
}
