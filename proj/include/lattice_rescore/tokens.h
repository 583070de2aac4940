// Copyright 2026 The lattice-rescore Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LATTICE_RESCORE_TOKENS_H_
#define LATTICE_RESCORE_TOKENS_H_

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lattice_rescore {

using TokenSequence = std::vector<std::string>;

inline bool IsSpace(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

// Pure whitespace splitting. With `lowercase` set, ASCII letters are folded;
// other bytes (including UTF-8 sequences) pass through untouched.
inline TokenSequence Tokenize(std::string_view text, bool lowercase = false) {
  TokenSequence tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && IsSpace(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !IsSpace(text[j])) ++j;
    if (j > i) {
      std::string token(text.substr(i, j - i));
      if (lowercase) {
        for (char& c : token) {
          if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        }
      }
      tokens.push_back(std::move(token));
    }
    i = j;
  }
  return tokens;
}

inline std::string Join(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

inline bool IsValidToken(std::string_view token) {
  if (token.empty()) return false;
  for (char c : token) {
    if (IsSpace(c)) return false;
  }
  return true;
}

}  // namespace lattice_rescore

#endif  // LATTICE_RESCORE_TOKENS_H_
