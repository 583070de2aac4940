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

// TF-IDF salient terms and the salient-term error rate (STER).
//
// Each reference document contributes its unigrams and bigrams. With tf the
// raw count in the document and idf = ln(D / df), terms are ranked by tf*idf
// (ties: higher idf, then token order) and taken greedily until the token
// positions they cover reach the requested fraction of the document.
//
// STER counts salient-term occurrences in each reference. An occurrence is an
// error when the reference/hypothesis alignment deletes or substitutes any of
// its positions; insertions never count.

#ifndef LATTICE_RESCORE_SALIENT_H_
#define LATTICE_RESCORE_SALIENT_H_

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "lattice_rescore/errors.h"
#include "lattice_rescore/lattice_io.h"
#include "lattice_rescore/metrics.h"
#include "lattice_rescore/tokens.h"

namespace lattice_rescore {

struct Document {
  std::string doc_id;
  TokenSequence tokens;
};

struct SalientTerm {
  TokenSequence tokens;  // one or two words
  double tf = 0.0;
  double idf = 0.0;
  double tfidf = 0.0;
};

struct SalientTermSet {
  double fraction = 0.0;
  std::map<std::string, std::vector<SalientTerm>> terms;  // by doc_id, rank order
};

namespace internal {

inline std::map<TokenSequence, int> TermCounts(const TokenSequence& tokens) {
  std::map<TokenSequence, int> counts;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    ++counts[{tokens[i]}];
    if (i + 1 < tokens.size()) ++counts[{tokens[i], tokens[i + 1]}];
  }
  return counts;
}

// Start positions of `term` in `tokens`.
inline std::vector<std::size_t> Occurrences(const TokenSequence& tokens,
                                            const TokenSequence& term) {
  std::vector<std::size_t> at;
  if (term.empty() || term.size() > tokens.size()) return at;
  for (std::size_t i = 0; i + term.size() <= tokens.size(); ++i) {
    if (std::equal(term.begin(), term.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) {
      at.push_back(i);
    }
  }
  return at;
}

}  // namespace internal

inline SalientTermSet SelectSalientTerms(std::span<const Document> docs, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw UsageError("salient fraction must be in (0, 1]");
  }
  if (docs.size() < 2) throw DataError("salient terms need at least two documents");
  std::vector<std::map<TokenSequence, int>> counts;
  std::map<TokenSequence, int> df;
  std::set<std::string> ids;
  for (const Document& d : docs) {
    if (!ids.insert(d.doc_id).second) throw DataError("duplicate doc_id '" + d.doc_id + "'");
    counts.push_back(internal::TermCounts(d.tokens));
    for (const auto& [term, c] : counts.back()) ++df[term];
  }
  const auto num_docs = static_cast<double>(docs.size());
  SalientTermSet set;
  set.fraction = fraction;
  for (std::size_t k = 0; k < docs.size(); ++k) {
    std::vector<SalientTerm> ranked;
    for (const auto& [term, c] : counts[k]) {
      SalientTerm t;
      t.tokens = term;
      t.tf = c;
      t.idf = std::log(num_docs / df[term]);
      t.tfidf = t.tf * t.idf;
      ranked.push_back(std::move(t));
    }
    std::sort(ranked.begin(), ranked.end(), [](const SalientTerm& a, const SalientTerm& b) {
      if (a.tfidf != b.tfidf) return a.tfidf > b.tfidf;
      if (a.idf != b.idf) return a.idf > b.idf;
      return a.tokens < b.tokens;
    });
    const TokenSequence& tokens = docs[k].tokens;
    const double needed = fraction * static_cast<double>(tokens.size());
    std::vector<bool> covered(tokens.size(), false);
    std::size_t num_covered = 0;
    std::vector<SalientTerm>& chosen = set.terms[docs[k].doc_id];
    for (SalientTerm& t : ranked) {
      if (static_cast<double>(num_covered) >= needed) break;
      for (std::size_t start : internal::Occurrences(tokens, t.tokens)) {
        for (std::size_t p = start; p < start + t.tokens.size(); ++p) {
          if (!covered[p]) {
            covered[p] = true;
            ++num_covered;
          }
        }
      }
      chosen.push_back(std::move(t));
    }
  }
  return set;
}

struct SterCounts {
  long occurrences = 0;
  long errors = 0;

  SterCounts& operator+=(const SterCounts& o) {
    occurrences += o.occurrences;
    errors += o.errors;
    return *this;
  }
};

// Salient occurrences of `terms` in `ref`, judged against `hyp`.
inline SterCounts SterForDocument(const std::vector<SalientTerm>& terms,
                                  const TokenSequence& ref, const TokenSequence& hyp) {
  std::vector<bool> wrong(ref.size(), false);
  std::size_t pos = 0;
  for (const AlignStep& step : Align(ref, hyp).steps) {
    if (step.op == EditOp::kInsertion) continue;
    wrong[pos++] = step.op != EditOp::kMatch;
  }
  SterCounts c;
  for (const SalientTerm& t : terms) {
    for (std::size_t start : internal::Occurrences(ref, t.tokens)) {
      ++c.occurrences;
      bool bad = false;
      for (std::size_t p = start; p < start + t.tokens.size(); ++p) bad = bad || wrong[p];
      if (bad) ++c.errors;
    }
  }
  return c;
}

struct SterItem {
  std::string doc_id;
  TokenSequence ref;
  TokenSequence hyp;
};

struct SterResult {
  double ster = 0.0;
  SterCounts counts;
};

inline SterResult Ster(std::span<const SterItem> items, const SalientTermSet& terms) {
  SterResult r;
  static const std::vector<SalientTerm> kNone;
  for (const SterItem& item : items) {
    auto it = terms.terms.find(item.doc_id);
    r.counts += SterForDocument(it == terms.terms.end() ? kNone : it->second, item.ref,
                                item.hyp);
  }
  if (r.counts.occurrences == 0) throw DataError("no salient-term occurrences in the references");
  r.ster = static_cast<double>(r.counts.errors) / static_cast<double>(r.counts.occurrences);
  return r;
}

// File format: JSON-lines, one document per line:
//   {"doc_id": str, "fraction": f, "terms": [{"term": str, "tf": f, "idf": f, "tfidf": f}]}
inline std::string SerializeSalientTerms(const SalientTermSet& set) {
  std::string out;
  for (const auto& [doc_id, terms] : set.terms) {
    OrderedJson j;
    j["doc_id"] = doc_id;
    j["fraction"] = set.fraction;
    OrderedJson list = OrderedJson::array();
    for (const SalientTerm& t : terms) {
      OrderedJson e;
      e["term"] = Join(t.tokens);
      e["tf"] = t.tf;
      e["idf"] = t.idf;
      e["tfidf"] = t.tfidf;
      list.push_back(std::move(e));
    }
    j["terms"] = std::move(list);
    out += j.dump() + "\n";
  }
  return out;
}

inline SalientTermSet ReadSalientTerms(const std::string& path) {
  SalientTermSet set;
  const std::vector<std::string> lines = io::ReadLines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const std::string where = path + ":" + std::to_string(i + 1);
    Json j = io::ParseJson(lines[i], where);
    io::RejectUnknownFields(j, {"doc_id", "fraction", "terms"}, where);
    const auto doc_id = io::Get<std::string>(j, "doc_id", where);
    set.fraction = io::Get<double>(j, "fraction", where);
    std::vector<SalientTerm>& terms = set.terms[doc_id];
    const Json& list = io::Field(j, "terms", where);
    if (!list.is_array()) throw DataError(where + ": 'terms' must be a list");
    for (const Json& e : list) {
      io::RejectUnknownFields(e, {"term", "tf", "idf", "tfidf"}, where);
      SalientTerm t;
      t.tokens = Tokenize(io::Get<std::string>(e, "term", where));
      if (t.tokens.empty() || t.tokens.size() > 2) {
        throw DataError(where + ": salient terms are one or two words");
      }
      t.tf = io::Get<double>(e, "tf", where);
      t.idf = io::Get<double>(e, "idf", where);
      t.tfidf = io::Get<double>(e, "tfidf", where);
      terms.push_back(std::move(t));
    }
  }
  return set;
}

// Reference corpus: JSON-lines {"doc_id": str, "text": str}.
inline std::vector<Document> ReadReferences(const std::string& path, bool lowercase = false) {
  std::vector<Document> docs;
  const std::vector<std::string> lines = io::ReadLines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const std::string where = path + ":" + std::to_string(i + 1);
    Json j = io::ParseJson(lines[i], where);
    io::RejectUnknownFields(j, {"doc_id", "text"}, where);
    docs.push_back({io::Get<std::string>(j, "doc_id", where),
                    Tokenize(io::Get<std::string>(j, "text", where), lowercase)});
  }
  return docs;
}

}  // namespace lattice_rescore

#endif  // LATTICE_RESCORE_SALIENT_H_
