#include "pweaver/stylometry.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace pweaver::style {

std::string_view sentiment_name(Sentiment sentiment) {
  switch (sentiment) {
    case Sentiment::negative: return "negative";
    case Sentiment::neutral: return "neutral";
    case Sentiment::positive: return "positive";
  }
  return "neutral";
}

const std::vector<std::string>& punctuation_marks() {
  static const std::vector<std::string> marks{
      ".", ",", "!", "?", ";", ":", "\xE2\x80\x94" /* em dash */,
      "\xE2\x80\xA6" /* ellipsis */, "\"", "'",
  };
  return marks;
}

const std::vector<std::string>& punctuation_mark_names() {
  static const std::vector<std::string> names{
      "period",    "comma", "exclamation", "question",     "semicolon",
      "colon",     "em_dash", "ellipsis",  "double_quote", "apostrophe",
  };
  return names;
}

const FillerLexicon& FillerLexicon::default_lexicon() {
  static const FillerLexicon lexicon{
      {"um", "uh", "like", "well", "you know", "i mean", "i guess", "sort of", "kind of"}};
  return lexicon;
}

Result<FillerLexicon> FillerLexicon::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return Result<FillerLexicon>::failure("cannot open filler lexicon: " + path.string());
  FillerLexicon lexicon;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto begin = line.find_first_not_of(" \t");
    if (begin == std::string::npos) continue;
    const auto end = line.find_last_not_of(" \t");
    std::string entry = line.substr(begin, end - begin + 1);
    std::transform(entry.begin(), entry.end(), entry.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    lexicon.entries.push_back(std::move(entry));
  }
  if (lexicon.entries.empty()) {
    return Result<FillerLexicon>::failure("filler lexicon holds no entries: " + path.string());
  }
  return Result<FillerLexicon>::success(std::move(lexicon));
}

static std::set<std::string> default_negators() {
  return {"not", "no", "never", "neither", "nor", "without", "hardly", "barely", "scarcely"};
}

const ValenceLexicon& ValenceLexicon::default_lexicon() {
  static const ValenceLexicon lexicon{
      {
          {"love", 0.7},      {"adore", 0.7},     {"wonderful", 0.6}, {"amazing", 0.7},
          {"excellent", 0.7}, {"great", 0.6},     {"good", 0.5},      {"happy", 0.6},
          {"glad", 0.5},      {"joy", 0.6},       {"beautiful", 0.6}, {"nice", 0.4},
          {"fine", 0.3},      {"pleasant", 0.4},  {"delightful", 0.6}, {"fantastic", 0.7},
          {"awesome", 0.7},   {"enjoy", 0.5},     {"perfect", 0.7},   {"best", 0.6},
          {"hate", -0.7},     {"terrible", -0.7}, {"awful", -0.7},    {"horrible", -0.7},
          {"bad", -0.5},      {"sad", -0.5},      {"angry", -0.6},    {"miserable", -0.6},
          {"ugly", -0.5},     {"unpleasant", -0.4}, {"poor", -0.4},   {"worse", -0.5},
          {"worst", -0.7},    {"annoying", -0.5}, {"disgusting", -0.7}, {"afraid", -0.4},
          {"worried", -0.4},  {"lonely", -0.4},   {"pain", -0.5},     {"hurt", -0.4},
      },
      default_negators()};
  return lexicon;
}

Result<ValenceLexicon> ValenceLexicon::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return Result<ValenceLexicon>::failure("cannot open valence lexicon: " + path.string());
  ValenceLexicon lexicon;
  lexicon.negators = default_negators();
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      return Result<ValenceLexicon>::failure("line " + std::to_string(lineno) +
                                             ": expected term<TAB>valence");
    }
    std::string term = line.substr(0, tab);
    std::transform(term.begin(), term.end(), term.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    try {
      const double valence = std::stod(line.substr(tab + 1));
      if (valence < -1.0 || valence > 1.0) {
        return Result<ValenceLexicon>::failure("line " + std::to_string(lineno) +
                                               ": valence outside [-1, 1]");
      }
      lexicon.valences[term] = valence;
    } catch (const std::exception&) {
      return Result<ValenceLexicon>::failure("line " + std::to_string(lineno) +
                                             ": valence is not a number");
    }
  }
  if (lexicon.valences.empty()) {
    return Result<ValenceLexicon>::failure("valence lexicon holds no terms: " + path.string());
  }
  return Result<ValenceLexicon>::success(std::move(lexicon));
}

static bool space_byte(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::int64_t word_count(const std::string& text) {
  std::int64_t count = 0;
  bool in_word = false;
  for (char c : text) {
    if (space_byte(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++count;
    }
  }
  return count;
}

std::map<std::string, std::int64_t> punctuation_profile(const std::string& text) {
  std::map<std::string, std::int64_t> counts;
  for (const auto& mark : punctuation_marks()) counts[mark] = 0;
  for (const auto& mark : punctuation_marks()) {
    std::size_t pos = 0;
    while ((pos = text.find(mark, pos)) != std::string::npos) {
      ++counts[mark];
      pos += mark.size();
    }
  }
  return counts;
}

// Lowercased whitespace tokens with surrounding ASCII punctuation stripped;
// inner characters (apostrophes, multi-byte sequences) stay in place.
static std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && space_byte(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !space_byte(text[j])) ++j;
    if (j > i) {
      std::size_t begin = i;
      std::size_t end = j;
      const auto strippable = [&](char c) {
        const auto u = static_cast<unsigned char>(c);
        return u < 128 && std::isalnum(u) == 0;
      };
      while (begin < end && strippable(text[begin])) ++begin;
      while (end > begin && strippable(text[end - 1])) --end;
      if (end > begin) {
        std::string token = text.substr(begin, end - begin);
        std::transform(token.begin(), token.end(), token.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        tokens.push_back(std::move(token));
      }
    }
    i = j;
  }
  return tokens;
}

static std::vector<std::string> split_words(const std::string& entry) {
  std::vector<std::string> words;
  std::istringstream in(entry);
  std::string word;
  while (in >> word) words.push_back(word);
  return words;
}

double filler_rate(const std::string& text, const FillerLexicon& lexicon) {
  const std::int64_t words = word_count(text);
  if (words == 0) return 0.0;

  std::vector<std::vector<std::string>> entries;
  entries.reserve(lexicon.entries.size());
  for (const auto& entry : lexicon.entries) entries.push_back(split_words(entry));
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) { return a.size() > b.size(); });

  const auto tokens = tokenize(text);
  std::int64_t matches = 0;
  std::size_t i = 0;
  while (i < tokens.size()) {
    std::size_t advance = 1;
    for (const auto& entry : entries) {
      if (entry.empty() || i + entry.size() > tokens.size()) continue;
      if (std::equal(entry.begin(), entry.end(), tokens.begin() + i)) {
        ++matches;
        advance = entry.size();
        break;
      }
    }
    i += advance;
  }
  return static_cast<double>(matches) / static_cast<double>(words) * 100.0;
}

double filler_rate(const std::string& text) {
  return filler_rate(text, FillerLexicon::default_lexicon());
}

Sentiment sentiment_label(const std::string& text, const ValenceLexicon& lexicon) {
  const auto tokens = tokenize(text);
  double score = 0.0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto it = lexicon.valences.find(tokens[i]);
    if (it == lexicon.valences.end()) continue;
    bool negated = false;
    for (std::size_t back = 1; back <= 2 && back <= i; ++back) {
      const std::string& prev = tokens[i - back];
      if (lexicon.negators.count(prev) != 0 ||
          (prev.size() > 3 && prev.compare(prev.size() - 3, 3, "n't") == 0)) {
        negated = true;
        break;
      }
    }
    score += negated ? -it->second : it->second;
  }
  if (score > 0.05) return Sentiment::positive;
  if (score < -0.05) return Sentiment::negative;
  return Sentiment::neutral;
}

Sentiment sentiment_label(const std::string& text) {
  return sentiment_label(text, ValenceLexicon::default_lexicon());
}

static llm::ChatRequest sentiment_request(const std::string& text, const std::string& model,
                                          double temperature, bool retry) {
  llm::ChatRequest req;
  req.model = model;
  req.system = "You label conversational replies.";
  std::string ask =
      "Classify the sentiment of the reply below. Answer with exactly one of: "
      "negative, neutral, positive.\n\nReply: " +
      text;
  if (retry) ask += "\n\nYour previous answer was not one of the allowed labels.";
  req.turns.push_back({llm::Role::user, std::move(ask)});
  req.temperature = temperature;
  req.max_tokens = 16;
  return req;
}

static std::optional<Sentiment> parse_sentiment_reply(const std::string& reply) {
  std::string t = reply;
  while (!t.empty() && std::isspace(static_cast<unsigned char>(t.front()))) t.erase(t.begin());
  while (!t.empty() && (std::isspace(static_cast<unsigned char>(t.back())) || t.back() == '.')) {
    t.pop_back();
  }
  std::transform(t.begin(), t.end(), t.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (t == "negative") return Sentiment::negative;
  if (t == "neutral") return Sentiment::neutral;
  if (t == "positive") return Sentiment::positive;
  return std::nullopt;
}

Result<Sentiment> sentiment_label_llm(const std::string& text, llm::Gateway& aux_gateway,
                                      double temperature) {
  using R = Result<Sentiment>;
  const std::string& model = aux_gateway.config().model;
  auto first = aux_gateway.complete(sentiment_request(text, model, temperature, false));
  if (first.finish_reason == llm::FinishReason::error) {
    return R::failure("backend failure: " + first.text);
  }
  if (auto label = parse_sentiment_reply(first.text)) return R::success(*label);
  auto second = aux_gateway.complete(sentiment_request(text, model, temperature, true));
  if (second.finish_reason == llm::FinishReason::error) {
    return R::failure("backend failure: " + second.text);
  }
  if (auto label = parse_sentiment_reply(second.text)) return R::success(*label);
  return R::failure("unrecognized sentiment label: " + second.text);
}

Result<double> normalized_entropy(const CategoricalDistribution& dist) {
  using R = Result<double>;
  const auto total = dist.total();
  if (total <= 0) return R::failure("entropy undefined: empty distribution");
  const std::size_t k = dist.categories.size();
  if (k < 2) return R::failure("entropy undefined: support smaller than 2");
  double h = 0.0;
  for (std::size_t i = 0; i < dist.counts.size(); ++i) {
    const double p = static_cast<double>(dist.counts[i]) / static_cast<double>(total);
    if (p > 0.0) h -= p * std::log2(p);
  }
  return R::success(h / std::log2(static_cast<double>(k)));
}

Result<double> jensen_shannon(const CategoricalDistribution& p, const CategoricalDistribution& q) {
  using R = Result<double>;
  if (!p.same_support(q)) return R::failure("jensen-shannon requires identical supports");
  if (p.total() <= 0 || q.total() <= 0) return R::failure("jensen-shannon undefined: empty distribution");
  double jsd = 0.0;
  for (std::size_t i = 0; i < p.categories.size(); ++i) {
    const double pi = p.share(i);
    const double qi = q.share(i);
    const double mi = 0.5 * (pi + qi);
    if (pi > 0.0) jsd += 0.5 * pi * std::log2(pi / mi);
    if (qi > 0.0) jsd += 0.5 * qi * std::log2(qi / mi);
  }
  return R::success(jsd);
}

static StyleFeatures extract_features(const std::string& text, const FillerLexicon& fillers,
                                      const ValenceLexicon& valences) {
  StyleFeatures features;
  features.word_count = word_count(text);
  features.filler_per_100 = filler_rate(text, fillers);
  features.punctuation = punctuation_profile(text);
  features.sentiment = sentiment_label(text, valences);
  return features;
}

static std::string bucket_name(std::int64_t bucket) {
  return std::to_string(bucket * 10) + "-" + std::to_string(bucket * 10 + 9);
}

static StyleReport assemble_report(std::vector<StyleRow> rows) {
  StyleReport report;
  report.per_response = std::move(rows);
  auto& agg = report.aggregates;
  agg.responses = static_cast<std::int64_t>(report.per_response.size());
  for (const auto& mark : punctuation_marks()) agg.punctuation_totals[mark] = 0;
  agg.sentiment = CategoricalDistribution::with_support({"negative", "neutral", "positive"});
  if (report.per_response.empty()) return report;

  double sum_words = 0.0;
  double sum_filler = 0.0;
  std::int64_t max_bucket = 0;
  agg.min_words = report.per_response.front().features.word_count;
  agg.max_words = agg.min_words;
  for (const auto& row : report.per_response) {
    const auto& f = row.features;
    sum_words += static_cast<double>(f.word_count);
    sum_filler += f.filler_per_100;
    agg.min_words = std::min(agg.min_words, f.word_count);
    agg.max_words = std::max(agg.max_words, f.word_count);
    for (const auto& [mark, count] : f.punctuation) agg.punctuation_totals[mark] += count;
    agg.sentiment.add(sentiment_name(f.sentiment));
    max_bucket = std::max(max_bucket, f.word_count / 10);
  }
  const auto n = static_cast<double>(agg.responses);
  agg.mean_words = sum_words / n;
  agg.mean_filler_per_100 = sum_filler / n;
  double variance = 0.0;
  for (const auto& row : report.per_response) {
    const double d = static_cast<double>(row.features.word_count) - agg.mean_words;
    variance += d * d;
  }
  agg.stddev_words = std::sqrt(variance / n);

  std::vector<std::string> bucket_support;
  for (std::int64_t b = 0; b <= max_bucket; ++b) bucket_support.push_back(bucket_name(b));
  agg.length_buckets = CategoricalDistribution::with_support(std::move(bucket_support));
  for (const auto& row : report.per_response) {
    agg.length_buckets.counts[row.features.word_count / 10] += 1;
  }

  if (auto e = normalized_entropy(agg.sentiment); e.ok()) agg.sentiment_entropy = *e;
  if (auto e = normalized_entropy(agg.length_buckets); e.ok()) agg.length_entropy = *e;
  return report;
}

StyleReport aggregate_rows(std::vector<StyleRow> rows) { return assemble_report(std::move(rows)); }

static std::vector<const probes::ProbeRecord*> styled_records(
    const std::vector<probes::ProbeRecord>& records) {
  std::vector<const probes::ProbeRecord*> kept;
  for (const auto& record : records) {
    if (!record.raw_text.empty()) kept.push_back(&record);
  }
  return kept;
}

StyleReport build_style_report(const std::vector<probes::ProbeRecord>& records,
                               const FillerLexicon& fillers, const ValenceLexicon& valences) {
  const auto kept = styled_records(records);
  std::vector<StyleRow> rows(kept.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(kept.size()); ++i) {
    rows[i].character_id = kept[i]->character_id;
    rows[i].item_id = kept[i]->item_id;
    rows[i].features = extract_features(kept[i]->raw_text, fillers, valences);
  }
  return assemble_report(std::move(rows));
}

StyleReport build_style_report_serial(const std::vector<probes::ProbeRecord>& records,
                                      const FillerLexicon& fillers,
                                      const ValenceLexicon& valences) {
  const auto kept = styled_records(records);
  std::vector<StyleRow> rows(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    rows[i].character_id = kept[i]->character_id;
    rows[i].item_id = kept[i]->item_id;
    rows[i].features = extract_features(kept[i]->raw_text, fillers, valences);
  }
  return assemble_report(std::move(rows));
}

Result<bool> save_style_csv(const std::filesystem::path& path, const StyleReport& report) {
  std::ofstream out(path);
  if (!out) return Result<bool>::failure("cannot open for writing: " + path.string());
  out << "character_id,item_id,word_count,filler_per_100,sentiment";
  for (const auto& name : punctuation_mark_names()) out << ',' << name;
  out << '\n';
  char filler[32];
  for (const auto& row : report.per_response) {
    std::snprintf(filler, sizeof(filler), "%.6f", row.features.filler_per_100);
    out << row.character_id << ',' << row.item_id << ',' << row.features.word_count << ','
        << filler << ',' << sentiment_name(row.features.sentiment);
    for (const auto& mark : punctuation_marks()) out << ',' << row.features.punctuation.at(mark);
    out << '\n';
  }
  out.close();
  if (!out) return Result<bool>::failure("write failed: " + path.string());
  return Result<bool>::success(true);
}

Result<std::vector<StyleRow>> load_style_csv(const std::filesystem::path& path) {
  using R = Result<std::vector<StyleRow>>;
  std::ifstream in(path);
  if (!in) return R::failure("cannot open style file: " + path.string());
  std::vector<StyleRow> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("character_id,", 0) == 0) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        fields.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    if (fields.size() != 5 + punctuation_marks().size()) {
      return R::failure("line " + std::to_string(lineno) + ": wrong column count");
    }
    try {
      StyleRow row;
      row.character_id = fields[0];
      row.item_id = fields[1];
      row.features.word_count = std::stoll(fields[2]);
      row.features.filler_per_100 = std::stod(fields[3]);
      if (fields[4] == "negative") {
        row.features.sentiment = Sentiment::negative;
      } else if (fields[4] == "positive") {
        row.features.sentiment = Sentiment::positive;
      } else {
        row.features.sentiment = Sentiment::neutral;
      }
      for (std::size_t m = 0; m < punctuation_marks().size(); ++m) {
        row.features.punctuation[punctuation_marks()[m]] = std::stoll(fields[5 + m]);
      }
      rows.push_back(std::move(row));
    } catch (const std::exception&) {
      return R::failure("line " + std::to_string(lineno) + ": malformed numeric field");
    }
  }
  return R::success(std::move(rows));
}

nlohmann::json aggregates_to_json(const StyleAggregates& aggregates) {
  nlohmann::json sentiment;
  for (std::size_t i = 0; i < aggregates.sentiment.categories.size(); ++i) {
    sentiment[aggregates.sentiment.categories[i]] = aggregates.sentiment.counts[i];
  }
  nlohmann::json buckets = nlohmann::json::object();
  for (std::size_t i = 0; i < aggregates.length_buckets.categories.size(); ++i) {
    buckets[aggregates.length_buckets.categories[i]] = aggregates.length_buckets.counts[i];
  }
  nlohmann::json punctuation;
  for (std::size_t i = 0; i < punctuation_marks().size(); ++i) {
    punctuation[punctuation_mark_names()[i]] =
        aggregates.punctuation_totals.at(punctuation_marks()[i]);
  }
  return {{"responses", aggregates.responses},
          {"words",
           {{"mean", aggregates.mean_words},
            {"stddev", aggregates.stddev_words},
            {"min", aggregates.min_words},
            {"max", aggregates.max_words}}},
          {"filler_per_100_mean", aggregates.mean_filler_per_100},
          {"punctuation_totals", std::move(punctuation)},
          {"sentiment", std::move(sentiment)},
          {"sentiment_entropy", aggregates.sentiment_entropy},
          {"length_buckets", std::move(buckets)},
          {"length_entropy", aggregates.length_entropy}};
}

Result<bool> save_style_json(const std::filesystem::path& path, const StyleReport& report) {
  std::ofstream out(path);
  if (!out) return Result<bool>::failure("cannot open for writing: " + path.string());
  out << aggregates_to_json(report.aggregates).dump(2) << '\n';
  out.close();
  if (!out) return Result<bool>::failure("write failed: " + path.string());
  return Result<bool>::success(true);
}

}  // namespace pweaver::style
