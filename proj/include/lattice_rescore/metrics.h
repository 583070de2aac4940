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

// Word alignment, WER, lattice oracle WER and path statistics.

#ifndef LATTICE_RESCORE_METRICS_H_
#define LATTICE_RESCORE_METRICS_H_

#include <algorithm>
#include <cstdio>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "lattice_rescore/errors.h"
#include "lattice_rescore/lattice.h"
#include "lattice_rescore/tokens.h"

namespace lattice_rescore {

enum class EditOp { kMatch, kSubstitution, kDeletion, kInsertion };

struct AlignStep {
  EditOp op;
  std::string ref;  // empty for insertions
  std::string hyp;  // empty for deletions
};

struct ErrorCounts {
  long ref_words = 0;
  long matches = 0;
  long substitutions = 0;
  long deletions = 0;
  long insertions = 0;

  long errors() const { return substitutions + deletions + insertions; }

  ErrorCounts& operator+=(const ErrorCounts& o) {
    ref_words += o.ref_words;
    matches += o.matches;
    substitutions += o.substitutions;
    deletions += o.deletions;
    insertions += o.insertions;
    return *this;
  }

  bool operator==(const ErrorCounts&) const = default;
};

struct Alignment {
  std::vector<AlignStep> steps;

  ErrorCounts Counts() const {
    ErrorCounts c;
    for (const AlignStep& s : steps) {
      switch (s.op) {
        case EditOp::kMatch: ++c.matches; ++c.ref_words; break;
        case EditOp::kSubstitution: ++c.substitutions; ++c.ref_words; break;
        case EditOp::kDeletion: ++c.deletions; ++c.ref_words; break;
        case EditOp::kInsertion: ++c.insertions; break;
      }
    }
    return c;
  }

  long cost() const { return Counts().errors(); }
};

// Minimal-cost Levenshtein alignment. Among optimal alignments the backtrace
// from the end prefers match, then substitution, deletion, insertion.
inline Alignment Align(std::span<const std::string> ref, std::span<const std::string> hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::vector<long>> d(n + 1, std::vector<long>(m + 1, 0));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = static_cast<long>(i);
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = static_cast<long>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      d[i][j] = std::min({d[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1),
                          d[i - 1][j] + 1, d[i][j - 1] + 1});
    }
  }
  Alignment a;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && ref[i - 1] == hyp[j - 1] && d[i][j] == d[i - 1][j - 1]) {
      a.steps.push_back({EditOp::kMatch, ref[i - 1], hyp[j - 1]});
      --i, --j;
    } else if (i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + 1) {
      a.steps.push_back({EditOp::kSubstitution, ref[i - 1], hyp[j - 1]});
      --i, --j;
    } else if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
      a.steps.push_back({EditOp::kDeletion, ref[i - 1], ""});
      --i;
    } else {
      a.steps.push_back({EditOp::kInsertion, "", hyp[j - 1]});
      --j;
    }
  }
  std::reverse(a.steps.begin(), a.steps.end());
  return a;
}

struct WerResult {
  double wer = 0.0;
  ErrorCounts counts;
};

// Corpus-pooled WER: total errors over total reference words.
inline WerResult Wer(std::span<const std::pair<TokenSequence, TokenSequence>> pairs) {
  WerResult r;
  for (const auto& [ref, hyp] : pairs) r.counts += Align(ref, hyp).Counts();
  if (r.counts.ref_words < 1) throw DataError("WER needs at least one reference word");
  r.wer = static_cast<double>(r.counts.errors()) / static_cast<double>(r.counts.ref_words);
  return r;
}

// Fewest edits between `ref` and any path of `lattice`, by dynamic
// programming over (state, reference position).
inline long OracleErrors(const Lattice& lattice, std::span<const std::string> ref) {
  RequireValid(lattice);
  const std::size_t n = ref.size();
  constexpr long kInf = std::numeric_limits<long>::max() / 4;
  std::vector<std::vector<long>> cost(static_cast<std::size_t>(lattice.num_states),
                                      std::vector<long>(n + 1, kInf));
  std::vector<std::vector<const Arc*>> out(static_cast<std::size_t>(lattice.num_states));
  for (const Arc& arc : lattice.arcs) out[static_cast<std::size_t>(arc.from)].push_back(&arc);
  cost[static_cast<std::size_t>(lattice.start)][0] = 0;
  for (StateId s : TopologicalOrder(lattice)) {
    std::vector<long>& c = cost[static_cast<std::size_t>(s)];
    for (std::size_t j = 1; j <= n; ++j) c[j] = std::min(c[j], c[j - 1] + 1);  // deletion
    for (const Arc* arc : out[static_cast<std::size_t>(s)]) {
      std::vector<long>& t = cost[static_cast<std::size_t>(arc->to)];
      for (std::size_t j = 0; j <= n; ++j) {
        t[j] = std::min(t[j], c[j] + 1);  // insertion
        if (j > 0) t[j] = std::min(t[j], c[j - 1] + (arc->label == ref[j - 1] ? 0 : 1));
      }
    }
  }
  long best = kInf;
  for (StateId f : lattice.finals) best = std::min(best, cost[static_cast<std::size_t>(f)][n]);
  return best;
}

inline double OracleWer(const Lattice& lattice, std::span<const std::string> ref) {
  if (ref.empty()) throw DataError("oracle WER needs a non-empty reference");
  return static_cast<double>(OracleErrors(lattice, ref)) / static_cast<double>(ref.size());
}

// Renders a count the way lattice-quality tables do: plain below 1e6,
// otherwise one-decimal scientific with trailing ".0" dropped ("4e20").
inline std::string FormatCount(double value) {
  char buf[64];
  if (value < 1e6) {
    std::snprintf(buf, sizeof(buf), "%.2f", value);
    std::string s = buf;
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
    return s;
  }
  std::snprintf(buf, sizeof(buf), "%.1e", value);
  std::string s = buf;
  const std::size_t e = s.find('e');
  std::string mantissa = s.substr(0, e);
  if (mantissa.size() > 2 && mantissa.substr(mantissa.size() - 2) == ".0") {
    mantissa.resize(mantissa.size() - 2);
  }
  const int exponent = std::stoi(s.substr(e + 1));
  return mantissa + "e" + std::to_string(exponent);
}

struct PathStats {
  PathCount total = 0;
  std::size_t segments = 0;
  double mean = 0.0;

  std::string Rendered() const { return FormatCount(mean); }
};

// Mean exact path count per segment; the sum is exact, the division is done
// in 50-digit binary floating point before rounding to double.
inline PathStats AvgPathsPerSegment(std::span<const Utterance> utterances) {
  PathStats stats;
  for (const Utterance& u : utterances) {
    for (const Lattice& l : u.segments) {
      stats.total += CountPaths(l);
      ++stats.segments;
    }
  }
  if (stats.segments == 0) throw DataError("path statistics need at least one segment");
  using Float = boost::multiprecision::cpp_bin_float_50;
  stats.mean = static_cast<double>(Float(stats.total) / Float(stats.segments));
  return stats;
}

}  // namespace lattice_rescore

#endif  // LATTICE_RESCORE_METRICS_H_
