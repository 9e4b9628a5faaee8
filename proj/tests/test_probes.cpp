#include <doctest.h>

#include "pweaver/probes.hpp"
#include "support.hpp"

using namespace pweaver;
using namespace testsup;

namespace {

banks::SettingSpec fargo() { return *banks::find_setting("Fargo"); }

gen::CharacterProfile profile_with_reaction(int reaction_id) {
  const auto banks_set = gen::GeneratorBanks::builtin(tiny_world_bank());
  gen::CharacterBlueprint bp;
  bp.world_choices = {{"Occupation", "farmer"}, {"Era", "spring"}, {"Standing", "founder"}};
  bp.moral_id = "M2";
  bp.reaction_id = reaction_id;
  gen::CharacterProfile profile;
  profile.id = "fargo-personaweaver-00" + std::to_string(reaction_id + 1);
  profile.setting_name = "Fargo";
  profile.description =
      *gen::render_profile(bp, fargo(), banks_set.morals, banks_set.reactions);
  profile.blueprint = bp;
  return profile;
}

gen::Population tiny_population(const std::vector<int>& reaction_ids) {
  gen::Population pop;
  pop.setting_name = "Fargo";
  pop.method = gen::Method::personaweaver;
  int i = 1;
  for (const int id : reaction_ids) {
    auto profile = profile_with_reaction(id);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%03d", i++);
    profile.id = "fargo-personaweaver-" + std::string(buf);
    pop.profiles.push_back(std::move(profile));
  }
  return pop;
}

}  // namespace

TEST_CASE("extraction corpus covers every grammar rule") {
  for (const auto& c : choice_corpus()) {
    const auto parsed = probes::parse_choice(c.text);
    INFO("input: ", c.text);
    if (c.ok) {
      REQUIRE(parsed.ok());
      CHECK(*probes::likert_letter(*parsed).data() == c.letter);
    } else {
      CHECK(!parsed.ok());
    }
  }
}

TEST_CASE("embodiment prompt carries setting and description") {
  const auto profile = profile_with_reaction(0);
  const auto prompt = probes::embody_character(profile, fargo());
  CHECK(prompt.find(fargo().prompt) != std::string::npos);
  CHECK(prompt.find(profile.description) != std::string::npos);
  CHECK(prompt.find("Stay in character") != std::string::npos);
  // no helpful-assistant framing
  CHECK(prompt.find("assistant") == std::string::npos);
}

TEST_CASE("moral asks re-prompt on unparseable replies") {
  const auto profile = profile_with_reaction(3);

  // parseable on the first try
  {
    llm::MockScript script;
    script.rules.push_back(sub("(A) Strongly agree", "(B)"));
    script.default_response = "unused";
    llm::Gateway gateway(mock_backend(script));
    const auto record =
        probes::ask_moral(profile, fargo(), "m1", "Keep promises.", gateway);
    CHECK(!record.is_error());
    REQUIRE(record.choice.has_value());
    CHECK(*record.choice == probes::Likert::B);
    CHECK(record.item_id == "m1");
    CHECK(record.character_id == profile.id);
    CHECK(record.raw_text == "(B)");
  }
  // the retry prompt asks for exactly one letter; the mock honors it
  {
    llm::MockScript script;
    script.rules.push_back(sub("exactly one letter in parentheses", "(C)"));
    script.rules.push_back(sub("(A) Strongly agree", "it depends on many things"));
    script.default_response = "unused";
    llm::Gateway gateway(mock_backend(script));
    const auto record = probes::ask_moral(profile, fargo(), "m2", "Honor your elders.", gateway);
    CHECK(!record.is_error());
    REQUIRE(record.choice.has_value());
    CHECK(*record.choice == probes::Likert::C);
  }
  // two unparseable replies yield an error record that keeps the raw text
  {
    llm::MockScript script;
    script.rules.push_back(sub("(A) Strongly agree", "no letter here"));
    script.default_response = "no letter here";
    llm::Gateway gateway(mock_backend(script));
    const auto record = probes::ask_moral(profile, fargo(), "m3", "Tell the truth.", gateway);
    CHECK(record.is_error());
    CHECK(!record.choice.has_value());
    CHECK(record.error.find("unparseable") != std::string::npos);
  }
}

TEST_CASE("classification stays inside the three-way taxonomy") {
  llm::Gateway aux(mock_backend(classifier_script()));

  const auto refusal = probes::classify_reaction("I will not answer that.", aux);
  REQUIRE(refusal.ok());
  CHECK(*refusal == probes::ReactionLabel::refusal);

  const auto deflection = probes::classify_reaction("Why do you ask? Anyway, lovely weather.", aux);
  REQUIRE(deflection.ok());
  CHECK(*deflection == probes::ReactionLabel::deflection);

  const auto compliance = probes::classify_reaction("The harvest was good.", aux);
  REQUIRE(compliance.ok());
  CHECK(*compliance == probes::ReactionLabel::compliance);

  CHECK(!probes::classify_reaction("", aux).ok());

  // a classifier emitting junk first resolves on the retry
  llm::MockScript flaky;
  flaky.rules.push_back(sub("allowed category names", "deflection"));
  flaky.rules.push_back(sub("Reply: \"mumble\"", "who knows"));
  flaky.default_response = "compliance";
  llm::Gateway flaky_aux(mock_backend(flaky));
  const auto retried = probes::classify_reaction("mumble", flaky_aux);
  REQUIRE(retried.ok());
  CHECK(*retried == probes::ReactionLabel::deflection);

  // junk on both asks is a failure, never a fabricated label
  llm::MockScript junk;
  junk.default_response = "elephant";
  llm::Gateway junk_aux(mock_backend(junk));
  CHECK(!probes::classify_reaction("anything", junk_aux).ok());
}

TEST_CASE("eightfold classification folds to the three-way taxonomy") {
  probes::ProbeParams params;
  params.eightfold = true;

  llm::MockScript script;
  script.rules.push_back(sub("Reply: \"silent\"", "Refusal"));
  script.rules.push_back(sub("Reply: \"pivot\"", "deflection"));
  script.rules.push_back(sub("Reply: \"meta\"", "Meta"));
  script.rules.push_back(sub("Reply: \"snark\"", "Playful/Subversive"));
  script.rules.push_back(sub("Reply: \"grump\"", "hostile"));
  script.default_response = "Compliance";
  llm::Gateway aux(mock_backend(script));

  const auto folded = [&](const std::string& text) {
    const auto result = probes::classify_reaction(text, aux, params);
    REQUIRE(result.ok());
    return *result;
  };
  CHECK(folded("silent") == probes::ReactionLabel::refusal);
  CHECK(folded("pivot") == probes::ReactionLabel::deflection);
  CHECK(folded("meta") == probes::ReactionLabel::deflection);
  CHECK(folded("snark") == probes::ReactionLabel::compliance);
  CHECK(folded("grump") == probes::ReactionLabel::compliance);
  CHECK(folded("plain answer") == probes::ReactionLabel::compliance);
}

TEST_CASE("moral probe asks every pair and conserves counts") {
  const auto pop = tiny_population({0, 3, 5});
  llm::Gateway gateway(mock_backend(assistant_biased_script()));

  const auto result = probes::run_moral_probe(pop, fargo(), banks::load_probe_corpus(), gateway);
  REQUIRE(result.records.size() == 30);
  CHECK(result.distribution.total() == 30);
  CHECK(result.distribution.counts[0] == 30);  // everything answered (A)
  for (const auto& record : result.records) {
    CHECK(!record.is_error());
    CHECK(record.item_id.front() == 'm');
  }
  // records arrive in population-major, statement-minor order
  CHECK(result.records[0].character_id == pop.profiles[0].id);
  CHECK(result.records[0].item_id == "m1");
  CHECK(result.records[10].character_id == pop.profiles[1].id);
}

TEST_CASE("reaction probe classifies through the aux gateway") {
  const auto pop = tiny_population({0, 1, 3, 7});
  llm::Gateway gateway(mock_backend(reaction_conditioned_script()));
  llm::Gateway aux(mock_backend(classifier_script()));

  const auto result =
      probes::run_reaction_probe(pop, fargo(), banks::load_probe_corpus(), gateway, aux);
  REQUIRE(result.records.size() == 40);
  CHECK(result.distribution.total() == 40);

  const auto& support = result.distribution.categories;
  REQUIRE(support == probes::reaction_support());
  CHECK(result.distribution.counts[0] == 10);  // reaction 0 -> refusal
  CHECK(result.distribution.counts[1] == 20);  // reactions 1 and 7 -> deflection
  CHECK(result.distribution.counts[2] == 10);  // reaction 3 -> compliance

  for (const auto& record : result.records) {
    CHECK(!record.raw_text.empty());
    REQUIRE(record.label.has_value());
  }
  CHECK(result.records[0].item_id == "s1");
  CHECK(result.records[5].item_id == "q1");
}

TEST_CASE("probe records round trip as jsonl") {
  const auto dir = temp_dir("records");
  std::vector<probes::ProbeRecord> records;
  probes::ProbeRecord moral;
  moral.character_id = "c1";
  moral.item_id = "m1";
  moral.raw_text = "(B)";
  moral.choice = probes::Likert::B;
  records.push_back(moral);
  probes::ProbeRecord reaction;
  reaction.character_id = "c1";
  reaction.item_id = "q2";
  reaction.raw_text = "Why do you ask?";
  reaction.label = probes::ReactionLabel::deflection;
  records.push_back(reaction);
  probes::ProbeRecord failed;
  failed.character_id = "c2";
  failed.item_id = "m4";
  failed.error = "backend failure: boom";
  records.push_back(failed);

  REQUIRE(probes::save_records(dir / "records.jsonl", records).ok());
  const auto loaded = probes::load_records(dir / "records.jsonl");
  REQUIRE(loaded.ok());
  REQUIRE(loaded->size() == 3);
  CHECK((*loaded)[0].choice == probes::Likert::B);
  CHECK((*loaded)[1].label == probes::ReactionLabel::deflection);
  CHECK((*loaded)[2].is_error());
}

TEST_CASE("distribution csv round trip") {
  const auto dir = temp_dir("dist");
  auto dist = CategoricalDistribution::with_support(probes::reaction_support());
  dist.add("refusal", 3);
  dist.add("compliance", 17);

  REQUIRE(probes::save_distribution_csv(dir / "dist.csv", dist).ok());
  const auto loaded = probes::load_distribution_csv(dir / "dist.csv");
  REQUIRE(loaded.ok());
  CHECK(loaded->categories == dist.categories);
  CHECK(loaded->counts == dist.counts);

  CHECK(!probes::load_distribution_csv(dir / "absent.csv").ok());
}
