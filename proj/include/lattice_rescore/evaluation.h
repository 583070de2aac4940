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

// Corpus evaluation reports: WER, lattice oracle WER, STER and paths per
// segment, with per-document breakdowns.

#ifndef LATTICE_RESCORE_EVALUATION_H_
#define LATTICE_RESCORE_EVALUATION_H_

#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lattice_rescore/errors.h"
#include "lattice_rescore/lattice.h"
#include "lattice_rescore/lattice_io.h"
#include "lattice_rescore/metrics.h"
#include "lattice_rescore/salient.h"
#include "lattice_rescore/tokens.h"

namespace lattice_rescore {

struct EvalItem {
  std::string doc_id;
  TokenSequence ref;
  TokenSequence hyp;
  const Utterance* lattices = nullptr;  // enables oracle WER and path stats
};

struct DocumentReport {
  std::string doc_id;
  ErrorCounts counts;
  std::optional<long> oracle_errors;
  SterCounts ster;
};

struct EvalReport {
  double wer = 0.0;
  std::optional<double> oracle_wer;
  std::optional<double> ster;
  std::optional<PathStats> paths;
  ErrorCounts counts;
  long oracle_errors = 0;
  SterCounts ster_counts;
  std::size_t utterances = 0;
  std::vector<DocumentReport> documents;
};

// Oracle WER and path statistics are reported only when every item carries
// its lattices; STER only when `terms` is given.
inline EvalReport Evaluate(std::span<const EvalItem> items,
                           const SalientTermSet* terms = nullptr) {
  if (items.empty()) throw DataError("nothing to evaluate");
  EvalReport r;
  r.utterances = items.size();
  bool have_lattices = true;
  std::vector<Utterance> with_lattices;
  for (const EvalItem& item : items) {
    DocumentReport doc;
    doc.doc_id = item.doc_id;
    doc.counts = Align(item.ref, item.hyp).Counts();
    r.counts += doc.counts;
    if (item.lattices == nullptr) {
      have_lattices = false;
    } else {
      doc.oracle_errors = OracleErrors(Concat(*item.lattices), item.ref);
      r.oracle_errors += *doc.oracle_errors;
      with_lattices.push_back(*item.lattices);
    }
    if (terms != nullptr) {
      auto it = terms->terms.find(item.doc_id);
      if (it != terms->terms.end()) {
        doc.ster = SterForDocument(it->second, item.ref, item.hyp);
        r.ster_counts += doc.ster;
      }
    }
    r.documents.push_back(std::move(doc));
  }
  if (r.counts.ref_words < 1) throw DataError("WER needs at least one reference word");
  const auto ref_words = static_cast<double>(r.counts.ref_words);
  r.wer = static_cast<double>(r.counts.errors()) / ref_words;
  if (have_lattices) {
    r.oracle_wer = static_cast<double>(r.oracle_errors) / ref_words;
    r.paths = AvgPathsPerSegment(with_lattices);
  }
  if (terms != nullptr) {
    if (r.ster_counts.occurrences == 0) {
      throw DataError("no salient-term occurrences in the references");
    }
    r.ster = static_cast<double>(r.ster_counts.errors) /
             static_cast<double>(r.ster_counts.occurrences);
  }
  return r;
}

inline OrderedJson EvalReportToJson(const EvalReport& r) {
  auto optional = [](const auto& v) -> OrderedJson {
    if (!v) return nullptr;
    return *v;
  };
  auto ratio = [](long num, long den) -> OrderedJson {
    if (den == 0) return nullptr;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  OrderedJson j;
  j["wer"] = r.wer;
  j["oracle_wer"] = optional(r.oracle_wer);
  j["ster"] = optional(r.ster);
  if (r.paths) {
    j["avg_paths_per_segment"] = r.paths->mean;
    j["avg_paths_per_segment_rendered"] = r.paths->Rendered();
    j["total_paths"] = r.paths->total.str();
    j["segments"] = r.paths->segments;
  } else {
    j["avg_paths_per_segment"] = nullptr;
  }
  OrderedJson c;
  c["utterances"] = r.utterances;
  c["ref_words"] = r.counts.ref_words;
  c["matches"] = r.counts.matches;
  c["substitutions"] = r.counts.substitutions;
  c["deletions"] = r.counts.deletions;
  c["insertions"] = r.counts.insertions;
  c["errors"] = r.counts.errors();
  if (r.oracle_wer) c["oracle_errors"] = r.oracle_errors;
  if (r.ster) {
    c["salient_terms"] = r.ster_counts.occurrences;
    c["salient_errors"] = r.ster_counts.errors;
  }
  j["counts"] = std::move(c);
  OrderedJson docs = OrderedJson::array();
  for (const DocumentReport& d : r.documents) {
    OrderedJson e;
    e["doc_id"] = d.doc_id;
    e["ref_words"] = d.counts.ref_words;
    e["substitutions"] = d.counts.substitutions;
    e["deletions"] = d.counts.deletions;
    e["insertions"] = d.counts.insertions;
    e["wer"] = ratio(d.counts.errors(), d.counts.ref_words);
    if (d.oracle_errors) e["oracle_wer"] = ratio(*d.oracle_errors, d.counts.ref_words);
    if (r.ster) {
      e["salient_terms"] = d.ster.occurrences;
      e["salient_errors"] = d.ster.errors;
      e["ster"] = ratio(d.ster.errors, d.ster.occurrences);
    }
    docs.push_back(std::move(e));
  }
  j["documents"] = std::move(docs);
  return j;
}

namespace internal {

inline std::string CsvNumber(std::optional<double> v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", *v);
  return buf;
}

inline std::optional<double> Ratio(long num, long den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

inline std::string CsvField(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace internal

// One row per document followed by a "*" row for the corpus.
inline std::string EvalReportToCsv(const EvalReport& r) {
  using internal::CsvNumber;
  using internal::Ratio;
  std::string out =
      "doc_id,ref_words,substitutions,deletions,insertions,wer,oracle_wer,"
      "salient_terms,salient_errors,ster\n";
  auto row = [&](const std::string& id, const ErrorCounts& c, std::optional<long> oracle,
                 const SterCounts& s) {
    out += internal::CsvField(id) + "," + std::to_string(c.ref_words) + "," +
           std::to_string(c.substitutions) + "," + std::to_string(c.deletions) + "," +
           std::to_string(c.insertions) + "," + CsvNumber(Ratio(c.errors(), c.ref_words)) + ",";
    if (oracle) out += CsvNumber(Ratio(*oracle, c.ref_words));
    out += ",";
    if (r.ster) {
      out += std::to_string(s.occurrences) + "," + std::to_string(s.errors) + "," +
             CsvNumber(Ratio(s.errors, s.occurrences));
    } else {
      out += ",,";
    }
    out += "\n";
  };
  for (const DocumentReport& d : r.documents) row(d.doc_id, d.counts, d.oracle_errors, d.ster);
  row("*", r.counts, r.oracle_wer ? std::optional<long>(r.oracle_errors) : std::nullopt,
      r.ster_counts);
  return out;
}

// Lattice-quality table: one row per labelled report, WER columns in
// percent, path counts in the "4e20" style.
inline std::string QualityBlock(std::span<const std::pair<std::string, EvalReport>> rows) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-10s %8s %11s %15s\n", "lattice", "WER", "oracle WER",
                "#paths/segment");
  out += buf;
  auto pct = [](std::optional<double> v) {
    if (!v) return std::string("-");
    char b[32];
    std::snprintf(b, sizeof(b), "%.1f", 100.0 * *v);
    return std::string(b);
  };
  for (const auto& [label, r] : rows) {
    const std::optional<double> wer =
        r.counts.ref_words > 0 ? std::optional<double>(r.wer) : std::nullopt;
    std::snprintf(buf, sizeof(buf), "%-10s %8s %11s %15s\n", label.c_str(), pct(wer).c_str(),
                  pct(r.oracle_wer).c_str(), r.paths ? r.paths->Rendered().c_str() : "-");
    out += buf;
  }
  return out;
}

}  // namespace lattice_rescore

#endif  // LATTICE_RESCORE_EVALUATION_H_
