// SPDX-License-Identifier: Apache-2.0
#include <bit>
#include <sstream>

#include "chemamp/error.hpp"
#include "chemamp/hash.hpp"
#include "chemamp/metrics.hpp"
#include "chemamp/subprocess.hpp"

namespace chemamp::metrics {

Bitset::Bitset(std::size_t width) : width_(width), words_((width + 63) / 64, 0) {}

void Bitset::set(std::size_t index) {
  if (index >= width_) throw DataError("bit index " + std::to_string(index) + " out of range");
  words_[index / 64] |= std::uint64_t{1} << (index % 64);
}

bool Bitset::test(std::size_t index) const {
  if (index >= width_) return false;
  return (words_[index / 64] >> (index % 64)) & 1U;
}

std::size_t Bitset::count() const noexcept {
  std::size_t n = 0;
  for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

std::vector<std::size_t> Bitset::indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < width_; ++i) {
    if (test(i)) out.push_back(i);
  }
  return out;
}

std::size_t Bitset::intersection_count(const Bitset& other) const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < words_.size() && i < other.words_.size(); ++i) {
    n += static_cast<std::size_t>(std::popcount(words_[i] & other.words_[i]));
  }
  return n;
}

std::size_t Bitset::union_count(const Bitset& other) const {
  return count() + other.count() - intersection_count(other);
}

Bitset hashed_fingerprint(std::string_view text, int n_lo, int n_hi, std::size_t width) {
  if (n_lo < 1 || n_hi < n_lo) throw ConfigError("fingerprint: require 1 <= n_lo <= n_hi");
  if (!std::has_single_bit(width)) throw ConfigError("fingerprint: width must be a power of two");
  Bitset bits(width);
  for (int n = n_lo; n <= n_hi; ++n) {
    const auto order = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i + order <= text.size(); ++i) {
      bits.set(hash::fnv1a64(text.substr(i, order)) & (width - 1));
    }
  }
  return bits;
}

double tanimoto(const Bitset& a, const Bitset& b) {
  if (a.width() != b.width()) {
    throw DataError("incomparable fingerprints: widths " + std::to_string(a.width()) + " and " +
                    std::to_string(b.width()));
  }
  const auto unioned = a.union_count(b);
  if (unioned == 0) return 1.0;
  return static_cast<double>(a.intersection_count(b)) / static_cast<double>(unioned);
}

HashedNgramFingerprint::HashedNgramFingerprint(int n_lo, int n_hi, std::size_t width)
    : n_lo_(n_lo), n_hi_(n_hi), width_(width) {
  hashed_fingerprint("", n_lo, n_hi, width);  // validates the parameters
}

Bitset HashedNgramFingerprint::fingerprint(std::string_view smiles) const {
  return hashed_fingerprint(smiles, n_lo_, n_hi_, width_);
}

std::string HashedNgramFingerprint::label() const {
  return "hashed-char-ngram[" + std::to_string(n_lo_) + "," + std::to_string(n_hi_) + "]/" +
         std::to_string(width_) + " (stand-in, not a chemical fingerprint)";
}

CommandFingerprint::CommandFingerprint(std::string command, std::size_t width, int timeout_ms)
    : command_(std::move(command)), width_(width), timeout_ms_(timeout_ms) {}

Bitset CommandFingerprint::fingerprint(std::string_view smiles) const {
  const auto result = run_line_command(command_, smiles, timeout_ms_);
  Bitset bits(width_);
  std::istringstream in(result.answer);
  long long index = 0;
  while (in >> index) {
    if (index < 0 || static_cast<std::size_t>(index) >= width_) {
      throw ToolFailure("fingerprint command returned out-of-range bit " + std::to_string(index));
    }
    bits.set(static_cast<std::size_t>(index));
  }
  if (!in.eof()) throw ToolFailure("fingerprint command returned a malformed line");
  return bits;
}

std::string CommandFingerprint::label() const { return "external:" + command_; }

CommandValidityChecker::CommandValidityChecker(std::string command, int timeout_ms)
    : command_(std::move(command)), timeout_ms_(timeout_ms) {}

bool CommandValidityChecker::valid(std::string_view smiles) const {
  const auto answer = run_line_command(command_, smiles, timeout_ms_).answer;
  if (answer == "1" || answer == "true") return true;
  if (answer == "0" || answer == "false") return false;
  throw ToolFailure("validator returned '" + answer + "', expected 1/0/true/false");
}

}  // namespace chemamp::metrics
