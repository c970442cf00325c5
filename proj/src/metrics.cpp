// SPDX-License-Identifier: Apache-2.0
#include "chemamp/metrics.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <utility>

#include "chemamp/error.hpp"

namespace chemamp {
namespace {

constexpr std::array<std::pair<TaskKind, std::string_view>, 4> kTaskNames = {{
    {TaskKind::kMoleculeDesign, "molecule_design"},
    {TaskKind::kCaptioning, "captioning"},
    {TaskKind::kReactionPrediction, "reaction_prediction"},
    {TaskKind::kPropertyPrediction, "property_prediction"},
}};

constexpr std::array<std::pair<MetricId, std::string_view>, 10> kMetricNames = {{
    {MetricId::kExact, "exact"},
    {MetricId::kBleu2, "bleu2"},
    {MetricId::kBleu4, "bleu4"},
    {MetricId::kRouge1, "rouge1"},
    {MetricId::kRouge2, "rouge2"},
    {MetricId::kRougeL, "rougeL"},
    {MetricId::kLevenshtein, "levenshtein"},
    {MetricId::kValidity, "validity"},
    {MetricId::kTanimoto, "tanimoto"},
    {MetricId::kAccuracy, "accuracy"},
}};

}  // namespace

std::string_view to_string(TaskKind kind) {
  for (const auto& [k, name] : kTaskNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

TaskKind parse_task_kind(std::string_view name) {
  for (const auto& [k, n] : kTaskNames) {
    if (n == name) return k;
  }
  throw ConfigError("unknown task kind '" + std::string(name) + "'");
}

std::string_view to_string(MetricId id) {
  for (const auto& [m, name] : kMetricNames) {
    if (m == id) return name;
  }
  return "unknown";
}

MetricId parse_metric_id(std::string_view name) {
  for (const auto& [m, n] : kMetricNames) {
    if (n == name) return m;
  }
  throw ConfigError("unknown metric '" + std::string(name) + "'");
}

}  // namespace chemamp

namespace chemamp::metrics {
namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts count_ngrams(const TokenSequence& seq, int n) {
  NgramCounts counts;
  const auto len = seq.tokens.size();
  const auto order = static_cast<std::size_t>(n);
  if (len < order) return counts;
  for (std::size_t i = 0; i + order <= len; ++i) {
    std::vector<std::string> gram(seq.tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                  seq.tokens.begin() + static_cast<std::ptrdiff_t>(i + order));
    ++counts[std::move(gram)];
  }
  return counts;
}

std::size_t clipped_overlap(const NgramCounts& candidate, const NgramCounts& reference) {
  std::size_t overlap = 0;
  for (const auto& [gram, count] : candidate) {
    auto it = reference.find(gram);
    if (it != reference.end()) overlap += std::min(count, it->second);
  }
  return overlap;
}

std::size_t total(const NgramCounts& counts) {
  std::size_t sum = 0;
  for (const auto& entry : counts) sum += entry.second;
  return sum;
}

double f1_of(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

std::string lowercase(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

TokenSequence tokenize(std::string_view text, TokenMode mode) {
  TokenSequence seq;
  seq.mode = mode;
  if (mode == TokenMode::kCharacter) {
    seq.tokens.reserve(text.size());
    for (char c : text) seq.tokens.emplace_back(1, c);
    return seq;
  }
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) seq.tokens.emplace_back(text.substr(start, i - start));
  }
  return seq;
}

double bleu(const TokenSequence& candidate, const TokenSequence& reference, int max_n,
            Smoothing smoothing) {
  if (max_n < 1) throw ConfigError("bleu: max_n must be >= 1");
  const auto c = static_cast<double>(candidate.size());
  const auto r = static_cast<double>(reference.size());
  if (candidate.empty()) return 0.0;

  double log_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    const auto cand = count_ngrams(candidate, n);
    const auto ref = count_ngrams(reference, n);
    auto numerator = static_cast<double>(clipped_overlap(cand, ref));
    auto denominator = static_cast<double>(total(cand));
    if (smoothing == Smoothing::kAddOne) {
      numerator += 1.0;
      denominator += 1.0;
    }
    if (numerator == 0.0 || denominator == 0.0) return 0.0;
    log_sum += std::log(numerator / denominator);
  }
  const double brevity = c > r ? 1.0 : std::exp(1.0 - r / c);
  return std::clamp(brevity * std::exp(log_sum / max_n), 0.0, 1.0);
}

PrecisionRecall rouge_n(const TokenSequence& candidate, const TokenSequence& reference, int n) {
  if (n < 1) throw ConfigError("rouge_n: n must be >= 1");
  const auto cand = count_ngrams(candidate, n);
  const auto ref = count_ngrams(reference, n);
  const auto overlap = static_cast<double>(clipped_overlap(cand, ref));
  const auto cand_total = static_cast<double>(total(cand));
  const auto ref_total = static_cast<double>(total(ref));
  PrecisionRecall pr;
  pr.precision = cand_total > 0 ? overlap / cand_total : 0.0;
  pr.recall = ref_total > 0 ? overlap / ref_total : 0.0;
  pr.f1 = f1_of(pr.precision, pr.recall);
  return pr;
}

std::size_t lcs_length(const TokenSequence& a, const TokenSequence& b) {
  std::vector<std::size_t> row(b.size() + 1, 0);
  for (const auto& ta : a.tokens) {
    std::size_t diagonal = 0;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t above = row[j];
      row[j] = ta == b.tokens[j - 1] ? diagonal + 1 : std::max(row[j], row[j - 1]);
      diagonal = above;
    }
  }
  return row[b.size()];
}

PrecisionRecall rouge_l(const TokenSequence& candidate, const TokenSequence& reference) {
  PrecisionRecall pr;
  if (candidate.empty() || reference.empty()) return pr;
  const auto lcs = static_cast<double>(lcs_length(candidate, reference));
  pr.precision = lcs / static_cast<double>(candidate.size());
  pr.recall = lcs / static_cast<double>(reference.size());
  pr.f1 = f1_of(pr.precision, pr.recall);
  return pr;
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diagonal = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t above = row[j];
      std::size_t substitute = diagonal + (a[i - 1] == b[j - 1] ? 0 : 1);
      row[j] = std::min({above + 1, row[j - 1] + 1, substitute});
      diagonal = above;
    }
  }
  return row[b.size()];
}

std::optional<std::string> strip_whitespace(std::string_view text) {
  auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!text.empty() && is_space(text.front())) text.remove_prefix(1);
  while (!text.empty() && is_space(text.back())) text.remove_suffix(1);
  return std::string(text);
}

ExactMatch exact_match(std::string_view pred, std::string_view gold, const Normalizer& normalizer) {
  const auto& normalize = normalizer ? normalizer : Normalizer(strip_whitespace);
  std::optional<std::string> p;
  std::optional<std::string> g;
  try {
    p = normalize(pred);
    g = normalize(gold);
  } catch (const std::exception&) {
    return {false, true};
  }
  if (!p || !g) return {false, true};
  return {*p == *g, false};
}

const MetricContext& MetricContext::defaults() {
  static const MetricContext context{std::make_shared<HashedNgramFingerprint>(),
                                     std::make_shared<SmilesLiteChecker>()};
  return context;
}

std::vector<MetricId> metric_bundle(TaskKind task) {
  switch (task) {
    case TaskKind::kMoleculeDesign:
    case TaskKind::kReactionPrediction:
      return {MetricId::kExact, MetricId::kBleu2, MetricId::kLevenshtein, MetricId::kValidity,
              MetricId::kTanimoto};
    case TaskKind::kCaptioning:
      return {MetricId::kBleu2, MetricId::kBleu4, MetricId::kRouge1, MetricId::kRouge2,
              MetricId::kRougeL};
    case TaskKind::kPropertyPrediction:
      return {MetricId::kAccuracy};
  }
  throw ConfigError("unknown task kind");
}

InstanceScores score_instance(TaskKind task, std::string_view pred, std::string_view gold,
                              const MetricContext& context) {
  InstanceScores scores;
  switch (task) {
    case TaskKind::kMoleculeDesign:
    case TaskKind::kReactionPrediction: {
      const auto& fp = context.fingerprint ? *context.fingerprint
                                           : *MetricContext::defaults().fingerprint;
      const auto& checker =
          context.validity ? *context.validity : *MetricContext::defaults().validity;
      const auto p = strip_whitespace(pred).value_or("");
      const auto g = strip_whitespace(gold).value_or("");
      scores[MetricId::kExact] = exact_match(p, g).matched ? 1.0 : 0.0;
      scores[MetricId::kBleu2] = bleu(tokenize(p, TokenMode::kCharacter),
                                      tokenize(g, TokenMode::kCharacter), 2, Smoothing::kAddOne);
      scores[MetricId::kLevenshtein] = static_cast<double>(levenshtein(p, g));
      scores[MetricId::kValidity] = checker.valid(p) ? 1.0 : 0.0;
      scores[MetricId::kTanimoto] = tanimoto(fp.fingerprint(p), fp.fingerprint(g));
      return scores;
    }
    case TaskKind::kCaptioning: {
      const auto c = tokenize(lowercase(pred), TokenMode::kWhitespace);
      const auto r = tokenize(lowercase(gold), TokenMode::kWhitespace);
      scores[MetricId::kBleu2] = bleu(c, r, 2, Smoothing::kAddOne);
      scores[MetricId::kBleu4] = bleu(c, r, 4, Smoothing::kAddOne);
      scores[MetricId::kRouge1] = rouge_n(c, r, 1).f1;
      scores[MetricId::kRouge2] = rouge_n(c, r, 2).f1;
      scores[MetricId::kRougeL] = rouge_l(c, r).f1;
      return scores;
    }
    case TaskKind::kPropertyPrediction: {
      const auto p = lowercase(strip_whitespace(pred).value_or(""));
      const auto g = lowercase(strip_whitespace(gold).value_or(""));
      scores[MetricId::kAccuracy] = p == g ? 1.0 : 0.0;
      return scores;
    }
  }
  throw ConfigError("unknown task kind");
}

InstanceScores zero_scores(TaskKind task, std::string_view gold) {
  InstanceScores scores;
  for (MetricId id : metric_bundle(task)) scores[id] = 0.0;
  if (scores.count(MetricId::kLevenshtein) != 0) {
    scores[MetricId::kLevenshtein] = static_cast<double>(levenshtein("", gold));
  }
  return scores;
}

ScoreReport aggregate(const std::vector<InstanceScores>& instance_scores, MetricId fitness_metric) {
  if (instance_scores.empty()) throw DataError("aggregate: no instance scores");
  ScoreReport report;
  report.fitness_metric = fitness_metric;
  report.count = instance_scores.size();
  const auto& first = instance_scores.front();
  for (const auto& [id, value] : first) report.means[id] = 0.0;
  for (const auto& scores : instance_scores) {
    if (scores.size() != first.size()) throw DataError("aggregate: heterogeneous metric keys");
    for (const auto& [id, value] : scores) {
      auto it = report.means.find(id);
      if (it == report.means.end()) throw DataError("aggregate: heterogeneous metric keys");
      it->second += value;
    }
  }
  for (auto& [id, sum] : report.means) sum /= static_cast<double>(report.count);
  auto fit = report.means.find(fitness_metric);
  if (fit == report.means.end()) {
    throw ConfigError("fitness metric '" + std::string(to_string(fitness_metric)) +
                      "' is not scored for this task");
  }
  report.fitness = fit->second;
  return report;
}

}  // namespace chemamp::metrics
