#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "pweaver/distribution.hpp"
#include "pweaver/probes.hpp"
#include "pweaver/result.hpp"

namespace pweaver::style {

enum class Sentiment { negative, neutral, positive };

std::string_view sentiment_name(Sentiment sentiment);

/// The fixed punctuation mark set, in canonical order. The em dash and
/// ellipsis are multi-byte UTF-8 sequences.
const std::vector<std::string>& punctuation_marks();

/// Stable ASCII column names aligned with punctuation_marks().
const std::vector<std::string>& punctuation_mark_names();

struct FillerLexicon {
  std::vector<std::string> entries;  // lowercase; may be multi-word

  static const FillerLexicon& default_lexicon();
  static Result<FillerLexicon> load_file(const std::filesystem::path& path);
};

struct ValenceLexicon {
  std::map<std::string, double> valences;  // lowercase term -> [-1, 1]
  std::set<std::string> negators;          // flip valence within a 2-word window

  static const ValenceLexicon& default_lexicon();
  /// term<TAB>valence lines; negators keep their defaults.
  static Result<ValenceLexicon> load_file(const std::filesystem::path& path);
};

/// Count of maximal non-whitespace runs.
std::int64_t word_count(const std::string& text);

/// Raw counts over the fixed mark set; every mark is present in the result,
/// zero when absent from the text.
std::map<std::string, std::int64_t> punctuation_profile(const std::string& text);

/// Greedy longest-match filler occurrences per 100 words; 0 for empty text.
double filler_rate(const std::string& text, const FillerLexicon& lexicon);
double filler_rate(const std::string& text);

/// Valence-sum sentiment with negation: a negator within the 2 preceding
/// words flips a term's sign. Positive above +0.05, negative below -0.05.
Sentiment sentiment_label(const std::string& text, const ValenceLexicon& lexicon);
Sentiment sentiment_label(const std::string& text);

/// Auxiliary-LLM sentiment as an opt-in alternative to the lexicon scorer.
/// One re-ask on an unrecognized label; never yields anything outside the
/// three-way taxonomy.
Result<Sentiment> sentiment_label_llm(const std::string& text, llm::Gateway& aux_gateway,
                                      double temperature = 0.0);

/// Shannon entropy over the declared support (zero-count categories count
/// toward k) divided by log k. Errors when total = 0 or k < 2.
Result<double> normalized_entropy(const CategoricalDistribution& dist);

/// Base-2 Jensen-Shannon divergence in [0, 1]; requires identical supports
/// and nonzero totals.
Result<double> jensen_shannon(const CategoricalDistribution& p, const CategoricalDistribution& q);

struct StyleFeatures {
  std::int64_t word_count = 0;
  double filler_per_100 = 0.0;
  std::map<std::string, std::int64_t> punctuation;
  Sentiment sentiment = Sentiment::neutral;
};

struct StyleRow {
  std::string character_id;
  std::string item_id;
  StyleFeatures features;
};

struct StyleAggregates {
  std::int64_t responses = 0;
  double mean_words = 0.0;
  double stddev_words = 0.0;  // population stddev
  std::int64_t min_words = 0;
  std::int64_t max_words = 0;
  double mean_filler_per_100 = 0.0;
  std::map<std::string, std::int64_t> punctuation_totals;
  CategoricalDistribution sentiment;       // negative / neutral / positive
  CategoricalDistribution length_buckets;  // 10-word buckets "0-9", "10-19", ...
  double sentiment_entropy = 0.0;          // 0 when undefined (no responses)
  double length_entropy = 0.0;             // 0 when undefined (< 2 buckets)
};

struct StyleReport {
  std::vector<StyleRow> per_response;
  StyleAggregates aggregates;
};

/// Extracts features for every record with raw text and folds aggregates.
/// Feature extraction runs in parallel when OpenMP is available; the serial
/// variant is the reference implementation with identical output.
StyleReport build_style_report(const std::vector<probes::ProbeRecord>& records,
                               const FillerLexicon& fillers = FillerLexicon::default_lexicon(),
                               const ValenceLexicon& valences = ValenceLexicon::default_lexicon());

StyleReport build_style_report_serial(
    const std::vector<probes::ProbeRecord>& records,
    const FillerLexicon& fillers = FillerLexicon::default_lexicon(),
    const ValenceLexicon& valences = ValenceLexicon::default_lexicon());

/// Builds the aggregate block over already-extracted rows; build_style_report
/// is extraction plus this fold.
StyleReport aggregate_rows(std::vector<StyleRow> rows);

/// One CSV row per response with all features.
Result<bool> save_style_csv(const std::filesystem::path& path, const StyleReport& report);

/// Inverse of save_style_csv; feature values are read back exactly enough to
/// re-aggregate (filler rates keep 6 decimals).
Result<std::vector<StyleRow>> load_style_csv(const std::filesystem::path& path);

/// Aggregate block as JSON.
nlohmann::json aggregates_to_json(const StyleAggregates& aggregates);
Result<bool> save_style_json(const std::filesystem::path& path, const StyleReport& report);

}  // namespace pweaver::style
