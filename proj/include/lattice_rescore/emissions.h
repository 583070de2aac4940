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

// Per-frame label log-distributions standing in for an acoustic encoder.
//
// File format (JSON, or JSON-lines with one utterance per line):
//   {"utterance_id": str (optional), "vocab": [str], "blank": str,
//    "segments": [[[float, ...] per frame], ...]}

#ifndef LATTICE_RESCORE_EMISSIONS_H_
#define LATTICE_RESCORE_EMISSIONS_H_

#include <cmath>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "lattice_rescore/errors.h"
#include "lattice_rescore/label_lm.h"
#include "lattice_rescore/lattice_io.h"
#include "lattice_rescore/tokens.h"

namespace lattice_rescore {

struct EmissionMatrix {
  TokenSequence vocab;
  int blank = 0;
  int frames = 0;
  std::vector<double> logits;  // frames x vocab, row-major

  double at(int frame, int label) const {
    return logits[static_cast<std::size_t>(frame) * vocab.size() +
                  static_cast<std::size_t>(label)];
  }

  std::span<const double> row(int frame) const {
    return std::span<const double>(logits).subspan(
        static_cast<std::size_t>(frame) * vocab.size(), vocab.size());
  }

  // Vocabulary without the blank, in vocabulary order.
  TokenSequence Labels() const {
    TokenSequence labels;
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      if (static_cast<int>(i) != blank) labels.push_back(vocab[i]);
    }
    return labels;
  }
};

// Throws DataError unless every row is a normalized log-distribution.
inline void ValidateEmissions(const EmissionMatrix& m) {
  if (m.vocab.size() < 2) throw DataError("emission vocab needs a blank and a token");
  std::set<std::string> seen;
  for (const std::string& token : m.vocab) {
    if (!IsValidToken(token)) throw DataError("invalid vocab token '" + token + "'");
    if (!seen.insert(token).second) throw DataError("duplicate vocab token '" + token + "'");
  }
  if (m.blank < 0 || m.blank >= static_cast<int>(m.vocab.size())) {
    throw DataError("blank index out of range");
  }
  if (m.frames < 0 ||
      m.logits.size() != static_cast<std::size_t>(m.frames) * m.vocab.size()) {
    throw DataError("emission matrix shape does not match frames x vocab");
  }
  for (int t = 0; t < m.frames; ++t) {
    for (double v : m.row(t)) {
      if (std::isnan(v) || v > 0.0) throw DataError("emission log-prob out of range");
    }
    if (std::abs(LogSumExp(m.row(t))) > 1e-9) {
      throw DataError("emission frame " + std::to_string(t) + " is not normalized");
    }
  }
}

struct EmissionUtterance {
  std::string utterance_id;
  TokenSequence vocab;
  std::string blank;
  std::vector<EmissionMatrix> segments;
};

inline OrderedJson EmissionUtteranceToJson(const EmissionUtterance& u) {
  OrderedJson j;
  if (!u.utterance_id.empty()) j["utterance_id"] = u.utterance_id;
  j["vocab"] = u.vocab;
  j["blank"] = u.blank;
  OrderedJson segments = OrderedJson::array();
  for (const EmissionMatrix& m : u.segments) {
    OrderedJson frames = OrderedJson::array();
    for (int t = 0; t < m.frames; ++t) {
      auto r = m.row(t);
      frames.push_back(std::vector<double>(r.begin(), r.end()));
    }
    segments.push_back(std::move(frames));
  }
  j["segments"] = std::move(segments);
  return j;
}

inline EmissionUtterance EmissionUtteranceFromJson(const Json& j,
                                                   std::string_view where) {
  io::RejectUnknownFields(j, {"utterance_id", "vocab", "blank", "segments"}, where);
  EmissionUtterance u;
  if (j.contains("utterance_id")) {
    u.utterance_id = io::Get<std::string>(j, "utterance_id", where);
  }
  u.vocab = io::Get<TokenSequence>(j, "vocab", where);
  u.blank = io::Get<std::string>(j, "blank", where);
  int blank = -1;
  for (std::size_t i = 0; i < u.vocab.size(); ++i) {
    if (u.vocab[i] == u.blank) blank = static_cast<int>(i);
  }
  if (blank < 0) throw DataError(std::string(where) + ": blank is not in the vocab");
  const Json& segments = io::Field(j, "segments", where);
  if (!segments.is_array()) throw DataError(std::string(where) + ": 'segments' must be a list");
  for (std::size_t s = 0; s < segments.size(); ++s) {
    EmissionMatrix m;
    m.vocab = u.vocab;
    m.blank = blank;
    const std::string seg_where = std::string(where) + " segment " + std::to_string(s);
    if (!segments[s].is_array()) throw DataError(seg_where + ": expected a list of frames");
    for (const Json& frame : segments[s]) {
      std::vector<double> row;
      try {
        row = frame.get<std::vector<double>>();
      } catch (const nlohmann::json::exception&) {
        throw DataError(seg_where + ": frame must be a list of numbers");
      }
      if (row.size() != u.vocab.size()) {
        throw DataError(seg_where + ": frame width does not match the vocab");
      }
      m.logits.insert(m.logits.end(), row.begin(), row.end());
      ++m.frames;
    }
    try {
      ValidateEmissions(m);
    } catch (const DataError& e) {
      throw DataError(seg_where + ": " + e.what());
    }
    u.segments.push_back(std::move(m));
  }
  return u;
}

inline std::vector<EmissionUtterance> ReadEmissions(const std::string& path) {
  std::vector<EmissionUtterance> out;
  const std::vector<std::string> lines = io::ReadLines(path);
  bool json_lines = !lines.empty();
  for (const std::string& line : lines) json_lines = json_lines && Json::accept(line);
  if (json_lines) {
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const std::string where = path + ":" + std::to_string(i + 1);
      out.push_back(EmissionUtteranceFromJson(io::ParseJson(lines[i], where), where));
    }
  } else {
    std::string text;
    for (const std::string& line : lines) text += line + "\n";
    out.push_back(EmissionUtteranceFromJson(io::ParseJson(text, path), path));
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].utterance_id.empty()) out[i].utterance_id = "utt" + std::to_string(i);
  }
  return out;
}

}  // namespace lattice_rescore

#endif  // LATTICE_RESCORE_EMISSIONS_H_
