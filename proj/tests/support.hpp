#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "pweaver/chat.hpp"
#include "pweaver/generator.hpp"
#include "pweaver/worldgen.hpp"

// Shared fixtures: scripted mock backends that emulate every request kind the
// pipeline issues, so full runs execute without a network.
namespace testsup {

using namespace pweaver;

namespace {
// Tests must not pick up a developer's cache redirection.
const bool cache_env_cleared = [] {
  ::unsetenv("PF_CACHE_DIR");
  return true;
}();
}  // namespace

inline std::filesystem::path temp_dir(const std::string& prefix) {
  static std::atomic<int> counter{0};
  const auto dir = std::filesystem::temp_directory_path() / "pweaver-tests" /
                   (prefix + "-" + std::to_string(::getpid()) + "-" +
                    std::to_string(counter.fetch_add(1)));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline llm::MockRule sub(std::string pattern, std::string response) {
  return {llm::MockRule::Kind::substring, std::move(pattern), std::move(response)};
}

inline llm::MockRule re(std::string pattern, std::string response) {
  return {llm::MockRule::Kind::regex, std::move(pattern), std::move(response)};
}

inline llm::BackendConfig mock_backend(llm::MockScript script) {
  llm::BackendConfig config;
  config.kind = llm::BackendKind::mock;
  config.script = std::move(script);
  config.retry.base_backoff = std::chrono::milliseconds(1);
  return config;
}

// One numbered batch of ten pastoral profiles; batch > 0 varies the wording
// so repeated batches stay distinct.
inline std::string numbered_profiles(int batch) {
  static const char* folk[] = {
      "A weathered farmer who tends the northern fields and sells grain at the market.",
      "A young clerk who keeps the ledgers of the grain exchange in careful script.",
      "A retired boat pilot who repairs nets by the waterfront and naps at noon.",
      "A schoolteacher who walks the same three streets every morning before class.",
      "A short-order cook famous for thin pancakes and strong black coffee.",
      "A mechanic who keeps the snowplows running through the long winters.",
      "A librarian who archives town records and knows every family by name.",
      "A seamstress who alters church suits and wedding dresses in a back room.",
      "A delivery driver who covers the county loop twice a day, rain or snow.",
      "A night watchman who does crosswords in the empty depot office.",
  };
  std::string out;
  for (int i = 0; i < 10; ++i) {
    const int number = batch * 10 + i + 1;
    out += std::to_string(number) + ". " + folk[i];
    if (batch > 0) out += " (cohort " + std::to_string(batch + 1) + ")";
    out += "\n";
  }
  return out;
}

// The eight scripted in-character replies, keyed by the disposition phrase a
// rendered profile embeds. Reply texts are distinct from the examples quoted
// inside the classifier prompt so classifier rules can match them uniquely.
struct DispositionReply {
  const char* phrase;
  const char* reply;
};

inline const std::vector<DispositionReply>& disposition_replies() {
  static const std::vector<DispositionReply> replies{
      {"tends to refuse to answer questions", "I will not answer that."},
      {"tends to redirect or dismiss questions", "Why do you ask? Anyway, lovely weather."},
      {"tends to hesitate about whether to answer",
       "Hmm, I suppose... it has been a quiet season, all told."},
      {"tends to answer questions directly", "The harvest was good and the neighbors are kind."},
      {"tends to answer fully and add extra details, even unasked ones",
       "The harvest was fine. We store grain in oak barrels, and my cousin visits on market days."},
      {"tends to reply in a teasing, sarcastic, or ironic way",
       "Oh, what a thrilling question. Truly, my day was legendary."},
      {"tends to respond with aggression, sarcasm, or dismissal of the asker",
       "That is none of your business, and I suggest you drop it."},
      {"tends to comment on the act of being questioned itself instead of answering",
       "You keep asking me questions - what is this, an interrogation?"},
  };
  return replies;
}

inline void append_worldgen_rules(llm::MockScript& script) {
  script.rules.push_back(sub("axes of variation",
                             "occupation, era, social standing, daily environment, signature "
                             "tool, reputation"));
  script.rules.push_back(re("attribute \"([^\"]+)\"",
                            "$1 alpha, $1 beta, $1 gamma, $1 delta, $1 epsilon, $1 zeta, $1 eta, "
                            "$1 theta, $1 iota, $1 kappa"));
}

inline void append_baseline_rules(llm::MockScript& script) {
  for (int batch = 0; batch < 6; ++batch) {
    script.rules.push_back(sub("Number them " + std::to_string(batch * 10 + 1) + ". through",
                               numbered_profiles(batch)));
  }
  script.rules.push_back(re("Persona: ([^\n]+)\nSetting:",
                            "$1 - adapted to daily life in this setting, plying the same trade "
                            "among new neighbors."));
}

// Regime that answers every probe the way a helpful assistant would: moral
// statements always "(A)", open questions always a direct answer.
inline llm::MockScript assistant_biased_script() {
  llm::MockScript script;
  script.rules.push_back(sub("PLAUSIBLE or IMPLAUSIBLE", "PLAUSIBLE"));
  script.rules.push_back(sub("(A) Strongly agree", "(A)"));
  append_worldgen_rules(script);
  append_baseline_rules(script);
  script.default_response = "I am glad to answer: the day went well and the work was honest.";
  return script;
}

// Regime that answers open questions according to the reaction style a
// profile embeds; everything else matches the assistant-biased regime.
inline llm::MockScript reaction_conditioned_script() {
  llm::MockScript script;
  script.rules.push_back(sub("PLAUSIBLE or IMPLAUSIBLE", "PLAUSIBLE"));
  script.rules.push_back(sub("(A) Strongly agree", "(A)"));
  for (const auto& d : disposition_replies()) {
    script.rules.push_back(sub(d.phrase, d.reply));
  }
  append_worldgen_rules(script);
  append_baseline_rules(script);
  script.default_response = "The harvest was good and the neighbors are kind.";
  return script;
}

// Three-way classifier for the scripted replies above. The reply is embedded
// in the classification prompt as: Reply: "<text>"
inline llm::MockScript classifier_script() {
  llm::MockScript script;
  script.rules.push_back(sub("Reply: \"I will not answer that.\"", "refusal"));
  script.rules.push_back(sub("Reply: \"Why do you ask? Anyway, lovely weather.\"", "deflection"));
  script.rules.push_back(sub("Reply: \"You keep asking me questions", "deflection"));
  script.default_response = "compliance";
  return script;
}

inline std::filesystem::path write_personas(const std::filesystem::path& dir, int count) {
  static const char* trades[] = {"carpenter", "nurse",  "poet",    "angler", "surveyor",
                                 "brewer",    "barber", "courier", "mason",  "astronomer"};
  const auto path = dir / "personas.jsonl";
  std::ofstream out(path);
  for (int i = 0; i < count; ++i) {
    out << "{\"persona\": \"a " << trades[i % 10] << " with " << (i / 10 + 1)
        << " decades of practice\"}\n";
  }
  return path;
}

// Small hand-built world bank for generator tests that skip the LLM
// world-building stage.
inline worldgen::WorldBank tiny_world_bank() {
  worldgen::WorldBank bank;
  bank.axes = {
      {"Occupation", {"farmer", "clerk", "pilot", "cook"}},
      {"Era", {"spring", "summer", "autumn", "winter"}},
      {"Standing", {"newcomer", "old family", "drifter", "founder"}},
  };
  return bank;
}

struct ChoiceCase {
  const char* text;
  bool ok;
  char letter;  // meaningful when ok
};

// Thirty-case extraction corpus spanning all three grammar rules, ambiguity
// at each level, and no-match inputs.
inline const std::vector<ChoiceCase>& choice_corpus() {
  static const std::vector<ChoiceCase> cases{
      // parenthesized letters
      {"(A)", true, 'A'},
      {"I choose (b) because it fits.", true, 'B'},
      {"Definitely (C).", true, 'C'},
      {"(a) then later (A) again", true, 'A'},
      {"(A) but also (B)", false, 0},
      {"(E)", true, 'E'},
      {"My answer: (d)", true, 'D'},
      {"(f) is not a valid option letter", false, 0},
      // standalone uppercase letters
      {"A", true, 'A'},
      {"I say B", true, 'B'},
      {"B.\nThat is final.", true, 'B'},
      {"A B", false, 0},
      {"Well\nC\nmaybe D later", true, 'C'},
      {"E!", true, 'E'},
      {"I'd say\nD", true, 'D'},
      {"CAB", false, 0},
      {"A dog barked outside", true, 'A'},
      {"b alone in lowercase", false, 0},
      // agreement labels
      {"Strongly agree", true, 'A'},
      {"strongly disagree.", true, 'E'},
      {"I agree with this statement.", true, 'B'},
      {"Disagree", true, 'D'},
      {"Neutral", true, 'C'},
      {"I strongly agree, truly agree", false, 0},
      {"They disagree strongly, and I disagree.", true, 'D'},
      {"agreeable weather today", false, 0},
      // priority and no-match
      {"(B) Strongly disagree", true, 'B'},
      {"A, as in strongly agree", true, 'A'},
      {"", false, 0},
      {"The weather is nice.", false, 0},
  };
  return cases;
}

}  // namespace testsup
