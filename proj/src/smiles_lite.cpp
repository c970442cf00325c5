// SPDX-License-Identifier: Apache-2.0
#include <array>
#include <cctype>

#include "chemamp/metrics.hpp"

namespace chemamp::metrics {
namespace {

bool is_bond(char c) {
  switch (c) {
    case '-':
    case '=':
    case '#':
    case '$':
    case ':':
    case '/':
    case '\\':
      return true;
    default:
      return false;
  }
}

// Organic subset plus aromatic forms and the wildcard atom. Returns the token
// length, or 0 when no atom starts at `pos`.
std::size_t organic_atom_length(std::string_view s, std::size_t pos) {
  const char c = s[pos];
  const char next = pos + 1 < s.size() ? s[pos + 1] : '\0';
  if (c == 'C' && next == 'l') return 2;
  if (c == 'B' && next == 'r') return 2;
  switch (c) {
    case 'B':
    case 'C':
    case 'N':
    case 'O':
    case 'P':
    case 'S':
    case 'F':
    case 'I':
    case 'b':
    case 'c':
    case 'n':
    case 'o':
    case 'p':
    case 's':
    case '*':
      return 1;
    default:
      return 0;
  }
}

// Bracket atom body: isotope digits, an element symbol (or aromatic symbol or
// '*'), then chirality, hydrogen count, charge and atom class.
bool valid_bracket_body(std::string_view body) {
  std::size_t i = 0;
  while (i < body.size() && std::isdigit(static_cast<unsigned char>(body[i]))) ++i;
  if (i >= body.size()) return false;
  if (body[i] == '*') {
    ++i;
  } else if (std::isupper(static_cast<unsigned char>(body[i]))) {
    ++i;
    if (i < body.size() && std::islower(static_cast<unsigned char>(body[i]))) ++i;
  } else if (std::islower(static_cast<unsigned char>(body[i]))) {
    ++i;
    // aromatic two-letter forms such as "se" and "as"
    if (i < body.size() && (body[i] == 'e' || body[i] == 's')) ++i;
  } else {
    return false;
  }
  for (; i < body.size(); ++i) {
    const char c = body[i];
    if (c == '@' || c == 'H' || c == '+' || c == '-' || c == ':' ||
        std::isdigit(static_cast<unsigned char>(c)) || std::isupper(static_cast<unsigned char>(c))) {
      continue;  // chirality tags like @TH1 also fall in this set
    }
    return false;
  }
  return true;
}

}  // namespace

bool smiles_lite_valid(std::string_view s) {
  if (s.empty()) return false;
  std::array<int, 100> ring_counts{};
  int depth = 0;
  bool saw_atom = false;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (c == '(') {
      ++depth;
      ++i;
    } else if (c == ')') {
      if (--depth < 0) return false;
      ++i;
    } else if (c == '[') {
      auto close = s.find(']', i + 1);
      if (close == std::string_view::npos) return false;
      auto body = s.substr(i + 1, close - i - 1);
      if (body.find('[') != std::string_view::npos || !valid_bracket_body(body)) return false;
      saw_atom = true;
      i = close + 1;
    } else if (c == ']') {
      return false;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      ++ring_counts[static_cast<std::size_t>(c - '0')];
      ++i;
    } else if (c == '%') {
      if (i + 2 >= s.size() || !std::isdigit(static_cast<unsigned char>(s[i + 1])) ||
          !std::isdigit(static_cast<unsigned char>(s[i + 2]))) {
        return false;
      }
      ++ring_counts[static_cast<std::size_t>((s[i + 1] - '0') * 10 + (s[i + 2] - '0'))];
      i += 3;
    } else if (is_bond(c) || c == '.') {
      ++i;
    } else if (auto len = organic_atom_length(s, i); len > 0) {
      saw_atom = true;
      i += len;
    } else {
      return false;
    }
  }
  if (depth != 0 || !saw_atom) return false;
  for (int count : ring_counts) {
    if (count % 2 != 0) return false;
  }
  return true;
}

}  // namespace chemamp::metrics
