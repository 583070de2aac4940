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

// JSON lattice files. One utterance per document:
//
//   {"utterance_id": str, "reference": str|null,
//    "segments": [{"segment_id": str, "num_states": int, "start": int,
//                  "finals": [int],
//                  "arcs": [{"from": int, "to": int, "label": str,
//                            "hat": float, "ilm": float}]}]}
//
// Corpora are JSON-lines, one utterance per line. Doubles are written in
// shortest round-trip form, so reading back yields bit-identical scores.

#ifndef LATTICE_RESCORE_LATTICE_IO_H_
#define LATTICE_RESCORE_LATTICE_IO_H_

#include <fstream>
#include <initializer_list>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "lattice_rescore/errors.h"
#include "lattice_rescore/lattice.h"
#include "lattice_rescore/tokens.h"

namespace lattice_rescore {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

namespace io {

inline void RejectUnknownFields(const Json& object,
                                std::initializer_list<std::string_view> known,
                                std::string_view where) {
  if (!object.is_object()) {
    throw DataError(std::string(where) + ": expected a JSON object");
  }
  for (const auto& [key, value] : object.items()) {
    bool found = false;
    for (std::string_view k : known) found = found || k == key;
    if (!found) {
      throw DataError(std::string(where) + ": unknown field '" + key + "'");
    }
  }
}

inline const Json& Field(const Json& object, const char* name,
                         std::string_view where) {
  auto it = object.find(name);
  if (it == object.end()) {
    throw DataError(std::string(where) + ": missing field '" + name + "'");
  }
  return *it;
}

template <typename T>
T Get(const Json& object, const char* name, std::string_view where) {
  const Json& value = Field(object, name, where);
  try {
    return value.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw DataError(std::string(where) + ": field '" + name +
                    "' has the wrong type");
  }
}

inline Json ParseJson(std::string_view text, std::string_view where) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string(where) + ": malformed JSON: " + e.what());
  }
}

// Non-empty, non-blank lines of a text file.
inline std::vector<std::string> ReadLines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (Tokenize(line).empty()) continue;
    lines.push_back(line);
  }
  return lines;
}

inline void WriteFile(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << contents;
  if (!out) throw DataError("failed writing '" + path + "'");
}

}  // namespace io

inline OrderedJson LatticeToJson(const Lattice& lattice) {
  OrderedJson arcs = OrderedJson::array();
  for (const Arc& arc : lattice.arcs) {
    OrderedJson a;
    a["from"] = arc.from;
    a["to"] = arc.to;
    a["label"] = arc.label;
    a["hat"] = arc.hat;
    a["ilm"] = arc.ilm;
    arcs.push_back(std::move(a));
  }
  OrderedJson j;
  j["segment_id"] = lattice.segment_id;
  j["num_states"] = lattice.num_states;
  j["start"] = lattice.start;
  j["finals"] = lattice.finals;
  j["arcs"] = std::move(arcs);
  return j;
}

inline Lattice LatticeFromJson(const Json& j, std::string_view where) {
  io::RejectUnknownFields(
      j, {"segment_id", "num_states", "start", "finals", "arcs"}, where);
  Lattice lattice;
  lattice.segment_id = io::Get<std::string>(j, "segment_id", where);
  lattice.num_states = io::Get<StateId>(j, "num_states", where);
  lattice.start = io::Get<StateId>(j, "start", where);
  lattice.finals = io::Get<std::vector<StateId>>(j, "finals", where);
  const Json& arcs = io::Field(j, "arcs", where);
  if (!arcs.is_array()) throw DataError(std::string(where) + ": 'arcs' must be a list");
  for (std::size_t i = 0; i < arcs.size(); ++i) {
    const std::string arc_where =
        std::string(where) + " arc " + std::to_string(i);
    io::RejectUnknownFields(arcs[i], {"from", "to", "label", "hat", "ilm"},
                            arc_where);
    Arc arc;
    arc.from = io::Get<StateId>(arcs[i], "from", arc_where);
    arc.to = io::Get<StateId>(arcs[i], "to", arc_where);
    arc.label = io::Get<std::string>(arcs[i], "label", arc_where);
    arc.hat = io::Get<double>(arcs[i], "hat", arc_where);
    arc.ilm = io::Get<double>(arcs[i], "ilm", arc_where);
    lattice.arcs.push_back(std::move(arc));
  }
  return lattice;
}

inline OrderedJson UtteranceToJson(const Utterance& utterance) {
  OrderedJson j;
  j["utterance_id"] = utterance.utterance_id;
  if (utterance.reference) {
    j["reference"] = Join(*utterance.reference);
  } else {
    j["reference"] = nullptr;
  }
  OrderedJson segments = OrderedJson::array();
  for (const Lattice& lattice : utterance.segments) {
    segments.push_back(LatticeToJson(lattice));
  }
  j["segments"] = std::move(segments);
  return j;
}

inline Utterance UtteranceFromJson(const Json& j, std::string_view where = "utterance") {
  io::RejectUnknownFields(j, {"utterance_id", "reference", "segments"}, where);
  Utterance utterance;
  utterance.utterance_id = io::Get<std::string>(j, "utterance_id", where);
  const Json& reference = io::Field(j, "reference", where);
  if (reference.is_string()) {
    utterance.reference = Tokenize(reference.get<std::string>());
  } else if (!reference.is_null()) {
    throw DataError(std::string(where) + ": 'reference' must be a string or null");
  }
  const Json& segments = io::Field(j, "segments", where);
  if (!segments.is_array()) {
    throw DataError(std::string(where) + ": 'segments' must be a list");
  }
  for (std::size_t i = 0; i < segments.size(); ++i) {
    utterance.segments.push_back(LatticeFromJson(
        segments[i], std::string(where) + " segment " + std::to_string(i)));
  }
  return utterance;
}

inline std::string SerializeUtterance(const Utterance& utterance) {
  return UtteranceToJson(utterance).dump();
}

inline Utterance ParseUtterance(std::string_view text,
                                std::string_view where = "utterance") {
  return UtteranceFromJson(io::ParseJson(text, where), where);
}

// Reads either a single JSON document or JSON-lines.
inline std::vector<Utterance> ReadUtterances(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  std::vector<Utterance> utterances;
  std::size_t line_number = 0;
  std::size_t begin = 0;
  std::vector<std::string> lines;
  while (begin <= text.size()) {
    std::size_t end = text.find('\n', begin);
    if (end == std::string::npos) end = text.size();
    lines.push_back(text.substr(begin, end - begin));
    begin = end + 1;
  }
  bool json_lines = true;
  for (const std::string& line : lines) {
    if (Tokenize(line).empty()) continue;
    if (!Json::accept(line)) json_lines = false;
  }
  if (!json_lines) {
    utterances.push_back(ParseUtterance(text, path));
    return utterances;
  }
  for (const std::string& line : lines) {
    ++line_number;
    if (Tokenize(line).empty()) continue;
    utterances.push_back(
        ParseUtterance(line, path + ":" + std::to_string(line_number)));
  }
  return utterances;
}

inline void WriteUtterances(const std::string& path,
                            const std::vector<Utterance>& utterances) {
  std::string out;
  for (const Utterance& u : utterances) {
    out += SerializeUtterance(u);
    out.push_back('\n');
  }
  io::WriteFile(path, out);
}

}  // namespace lattice_rescore

#endif  // LATTICE_RESCORE_LATTICE_IO_H_
