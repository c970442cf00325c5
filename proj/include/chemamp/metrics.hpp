// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace chemamp {

enum class TaskKind {
  kMoleculeDesign,
  kCaptioning,
  kReactionPrediction,
  kPropertyPrediction,
};

std::string_view to_string(TaskKind kind);
/// Throws ConfigError for an unknown name.
TaskKind parse_task_kind(std::string_view name);

enum class MetricId {
  kExact,
  kBleu2,
  kBleu4,
  kRouge1,
  kRouge2,
  kRougeL,
  kLevenshtein,
  kValidity,
  kTanimoto,
  kAccuracy,
};

std::string_view to_string(MetricId id);
MetricId parse_metric_id(std::string_view name);
/// Every metric except levenshtein is a similarity in [0, 1].
constexpr bool higher_is_better(MetricId id) { return id != MetricId::kLevenshtein; }

}  // namespace chemamp

namespace chemamp::metrics {

// ---------------------------------------------------------------------------
// Tokenization
// ---------------------------------------------------------------------------

enum class TokenMode { kCharacter, kWhitespace };

struct TokenSequence {
  std::vector<std::string> tokens;
  TokenMode mode = TokenMode::kCharacter;

  std::size_t size() const noexcept { return tokens.size(); }
  bool empty() const noexcept { return tokens.empty(); }
};

/// Character mode yields one token per byte; whitespace mode splits on runs
/// of whitespace and drops empty tokens.
TokenSequence tokenize(std::string_view text, TokenMode mode);

// ---------------------------------------------------------------------------
// Text similarity
// ---------------------------------------------------------------------------

enum class Smoothing { kNone, kAddOne };

/// Sentence-level BLEU: geometric mean of modified n-gram precisions for
/// n = 1..max_n, times the brevity penalty. kAddOne adds one to numerator and
/// denominator of every order's precision. An empty candidate scores 0.
double bleu(const TokenSequence& candidate, const TokenSequence& reference, int max_n,
            Smoothing smoothing);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

PrecisionRecall rouge_n(const TokenSequence& candidate, const TokenSequence& reference, int n);
PrecisionRecall rouge_l(const TokenSequence& candidate, const TokenSequence& reference);

/// Length of the longest common subsequence (O(|a|·|b|) time, O(|b|) space).
std::size_t lcs_length(const TokenSequence& a, const TokenSequence& b);

/// Unit-cost edit distance over bytes.
std::size_t levenshtein(std::string_view a, std::string_view b);

/// Returns the normalized form, or nullopt when the input cannot be
/// normalized.
using Normalizer = std::function<std::optional<std::string>(std::string_view)>;

std::optional<std::string> strip_whitespace(std::string_view text);

struct ExactMatch {
  bool matched = false;
  bool normalizer_failed = false;
  explicit operator bool() const noexcept { return matched; }
};

ExactMatch exact_match(std::string_view pred, std::string_view gold,
                       const Normalizer& normalizer = strip_whitespace);

// ---------------------------------------------------------------------------
// Fingerprints
// ---------------------------------------------------------------------------

/// Fixed-width bit vector.
class Bitset {
 public:
  Bitset() = default;
  explicit Bitset(std::size_t width);

  std::size_t width() const noexcept { return width_; }
  void set(std::size_t index);
  bool test(std::size_t index) const;
  std::size_t count() const noexcept;
  bool none() const noexcept { return count() == 0; }
  std::vector<std::size_t> indices() const;

  std::size_t intersection_count(const Bitset& other) const;
  std::size_t union_count(const Bitset& other) const;

  friend bool operator==(const Bitset&, const Bitset&) = default;

 private:
  std::size_t width_ = 0;
  std::vector<std::uint64_t> words_;
};

/// Sets bit fnv1a64(g) mod width for every character n-gram g with
/// n_lo <= |g| <= n_hi. Requires 1 <= n_lo <= n_hi and width a power of two.
Bitset hashed_fingerprint(std::string_view text, int n_lo, int n_hi, std::size_t width);

/// |A ∩ B| / |A ∪ B|, 1.0 when both are empty. Throws DataError when widths
/// differ.
double tanimoto(const Bitset& a, const Bitset& b);

/// Source of molecule fingerprints used for the Tanimoto metric.
class FingerprintProvider {
 public:
  virtual ~FingerprintProvider() = default;
  virtual Bitset fingerprint(std::string_view smiles) const = 0;
  /// Shown in reports next to the similarity value.
  virtual std::string label() const = 0;
};

/// Character n-gram stand-in for chemical fingerprints (n in [2,4], 1024 bits
/// by default).
class HashedNgramFingerprint final : public FingerprintProvider {
 public:
  HashedNgramFingerprint(int n_lo = 2, int n_hi = 4, std::size_t width = 1024);
  Bitset fingerprint(std::string_view smiles) const override;
  std::string label() const override;

 private:
  int n_lo_;
  int n_hi_;
  std::size_t width_;
};

/// Delegates to an external command: one SMILES line in, one line of
/// whitespace-separated set-bit indices out.
class CommandFingerprint final : public FingerprintProvider {
 public:
  CommandFingerprint(std::string command, std::size_t width, int timeout_ms = 10000);
  Bitset fingerprint(std::string_view smiles) const override;
  std::string label() const override;

 private:
  std::string command_;
  std::size_t width_;
  int timeout_ms_;
};

// ---------------------------------------------------------------------------
// Validity
// ---------------------------------------------------------------------------

/// Structural SMILES check: balanced parentheses and brackets, paired ring
/// closures, and only organic-subset atoms, bracket atoms, bonds, ring
/// digits, branches and dots. No valence or aromaticity checks.
bool smiles_lite_valid(std::string_view text);

class ValidityChecker {
 public:
  virtual ~ValidityChecker() = default;
  virtual bool valid(std::string_view smiles) const = 0;
};

class SmilesLiteChecker final : public ValidityChecker {
 public:
  bool valid(std::string_view smiles) const override { return smiles_lite_valid(smiles); }
};

/// External validator: one SMILES line in, "1"/"true" or "0"/"false" out.
class CommandValidityChecker final : public ValidityChecker {
 public:
  explicit CommandValidityChecker(std::string command, int timeout_ms = 10000);
  bool valid(std::string_view smiles) const override;

 private:
  std::string command_;
  int timeout_ms_;
};

// ---------------------------------------------------------------------------
// Per-instance and aggregate scoring
// ---------------------------------------------------------------------------

using InstanceScores = std::map<MetricId, double>;

/// Plug-ins used by score_instance. Defaults are the built-in stand-ins.
struct MetricContext {
  std::shared_ptr<const FingerprintProvider> fingerprint;
  std::shared_ptr<const ValidityChecker> validity;

  static const MetricContext& defaults();
};

/// Metric bundle per task:
///   design / reaction -> exact, bleu2, levenshtein, validity, tanimoto
///   captioning        -> bleu2, bleu4, rouge1, rouge2, rougeL
///   property          -> accuracy (case-insensitive after trimming)
InstanceScores score_instance(TaskKind task, std::string_view pred, std::string_view gold,
                              const MetricContext& context = MetricContext::defaults());

/// Scores assigned to a failed or reserved answer: every similarity is 0 and
/// levenshtein is the gold length.
InstanceScores zero_scores(TaskKind task, std::string_view gold);

std::vector<MetricId> metric_bundle(TaskKind task);

struct ScoreReport {
  std::map<MetricId, double> means;
  std::size_t count = 0;
  MetricId fitness_metric = MetricId::kAccuracy;
  double fitness = 0.0;
  /// Instances whose candidate raised a tool failure (scored as zero).
  std::size_t failures = 0;
  /// Instances where the agent reserved its answer.
  std::size_t reserved = 0;
  std::string fingerprint_label;

  friend bool operator==(const ScoreReport&, const ScoreReport&) = default;
};

/// Arithmetic mean per metric, summed in list order. Throws DataError for an
/// empty list or mismatched metric keys, ConfigError when the fitness metric
/// is not part of the bundle.
ScoreReport aggregate(const std::vector<InstanceScores>& instance_scores, MetricId fitness_metric);

}  // namespace chemamp::metrics
