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

// lattice-rescore: generate, decode, rescore, tune and evaluate.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 scorer error.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "lattice_rescore/decoder.h"
#include "lattice_rescore/emissions.h"
#include "lattice_rescore/errors.h"
#include "lattice_rescore/evaluation.h"
#include "lattice_rescore/label_lm.h"
#include "lattice_rescore/lattice.h"
#include "lattice_rescore/lattice_io.h"
#include "lattice_rescore/metrics.h"
#include "lattice_rescore/ngram.h"
#include "lattice_rescore/parallel.h"
#include "lattice_rescore/protocol.h"
#include "lattice_rescore/rescorer.h"
#include "lattice_rescore/salient.h"
#include "lattice_rescore/scorer.h"
#include "lattice_rescore/synth.h"
#include "lattice_rescore/tuner.h"

namespace lattice_rescore {
namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitScorer = 3;

struct GlobalFlags {
  std::uint64_t seed = 7;
  int jobs = 1;
  int verbose = 0;
  bool json_errors = false;
};

void Log(const GlobalFlags& g, const std::string& message) {
  if (g.verbose > 0) std::cerr << message << "\n";
}

// ---------------------------------------------------------------------------
// Scorer selection.

struct ScorerFlags {
  std::string ngram_corpus;
  int ngram_order = 3;
  std::string command;
  std::string tcp;
  int timeout_ms = 30000;

  void Register(CLI::App* app) {
    app->add_option("--ngram-corpus", ngram_corpus,
                    "Train the built-in n-gram scorer on this text file")
        ->check(CLI::ExistingFile);
    app->add_option("--ngram-order", ngram_order, "N-gram order")->capture_default_str();
    app->add_option("--scorer-cmd", command,
                    "Spawn a protocol-v1 scorer with this shell command");
    app->add_option("--scorer-tcp", tcp, "Connect to a protocol-v1 scorer at host:port");
    app->add_option("--scorer-timeout", timeout_ms, "Protocol timeout in milliseconds")
        ->capture_default_str();
  }

  bool Given() const { return !ngram_corpus.empty() || !command.empty() || !tcp.empty(); }
};

std::shared_ptr<Scorer> Connect(std::unique_ptr<LineChannel> channel, int timeout_ms) {
  auto client =
      std::make_shared<ProtocolClient>(std::move(channel), std::chrono::milliseconds(timeout_ms));
  return std::make_shared<ProtocolScorer>(std::move(client));
}

// Exactly one scorer: from the flags, else from RESCORE_SCORER
// ("tcp://host:port" or a command line).
std::shared_ptr<Scorer> MakeScorer(const ScorerFlags& f) {
  const int given = !f.ngram_corpus.empty() + !f.command.empty() + !f.tcp.empty();
  if (given > 1) throw UsageError("give exactly one of --ngram-corpus, --scorer-cmd, --scorer-tcp");
  if (f.timeout_ms < 1) throw UsageError("--scorer-timeout must be positive");
  if (!f.ngram_corpus.empty()) {
    const std::vector<std::string> corpus = io::ReadLines(f.ngram_corpus);
    return std::make_shared<NGramScorer>(NGramScorer::Train(corpus, f.ngram_order));
  }
  if (!f.command.empty()) return Connect(ProcessChannel::Spawn(f.command), f.timeout_ms);
  if (!f.tcp.empty()) return Connect(ConnectTcp(f.tcp), f.timeout_ms);
  const char* env = std::getenv("RESCORE_SCORER");
  if (env == nullptr || *env == '\0') {
    throw UsageError("no scorer: use --ngram-corpus, --scorer-cmd, --scorer-tcp or RESCORE_SCORER");
  }
  const std::string spec = env;
  if (spec.rfind("tcp://", 0) == 0) return Connect(ConnectTcp(spec.substr(6)), f.timeout_ms);
  return Connect(ProcessChannel::Spawn(spec), f.timeout_ms);
}

// ---------------------------------------------------------------------------
// Shared plumbing.

void RequireWritable(const std::string& path) {
  const std::filesystem::path parent = std::filesystem::path(path).parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent)) {
    throw UsageError("output directory '" + parent.string() + "' does not exist");
  }
}

std::map<std::string, TokenSequence> ReferenceMap(const std::string& path, bool lowercase) {
  std::map<std::string, TokenSequence> refs;
  for (Document& d : ReadReferences(path, lowercase)) {
    if (!refs.emplace(d.doc_id, std::move(d.tokens)).second) {
      throw DataError(path + ": duplicate doc_id '" + d.doc_id + "'");
    }
  }
  return refs;
}

const TokenSequence& LookupRef(const std::map<std::string, TokenSequence>& refs,
                               const std::string& id) {
  auto it = refs.find(id);
  if (it == refs.end()) throw DataError("no reference for utterance '" + id + "'");
  return it->second;
}

// ---------------------------------------------------------------------------
// gen

struct GenFlags {
  std::string out_dir;
  SynthConfig config;
};

std::string EmissionLines(const std::vector<SynthUtterance>& utts) {
  std::string out;
  for (const SynthUtterance& u : utts) out += EmissionUtteranceToJson(u.emissions).dump() + "\n";
  return out;
}

std::string ReferenceLines(const std::vector<SynthUtterance>& utts) {
  std::string out;
  for (const SynthUtterance& u : utts) {
    OrderedJson j;
    j["doc_id"] = u.reference.doc_id;
    j["text"] = Join(u.reference.tokens);
    out += j.dump() + "\n";
  }
  return out;
}

int RunGen(const GlobalFlags& g, GenFlags f) {
  f.config.seed = g.seed;
  f.config.Check();
  std::filesystem::create_directories(f.out_dir);
  const SynthCorpus corpus = GenerateCorpus(f.config);
  const std::filesystem::path dir(f.out_dir);
  io::WriteFile((dir / "emissions.jsonl").string(), EmissionLines(corpus.eval));
  io::WriteFile((dir / "refs.jsonl").string(), ReferenceLines(corpus.eval));
  std::string lm;
  for (const std::string& s : corpus.lm_corpus) lm += s + "\n";
  io::WriteFile((dir / "lm_corpus.txt").string(), lm);
  if (!corpus.dev.empty()) {
    io::WriteFile((dir / "dev_emissions.jsonl").string(), EmissionLines(corpus.dev));
    io::WriteFile((dir / "dev_refs.jsonl").string(), ReferenceLines(corpus.dev));
  }
  std::cout << "wrote " << corpus.eval.size() << " utterances";
  if (!corpus.dev.empty()) std::cout << " + " << corpus.dev.size() << " dev";
  std::cout << " to " << f.out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// decode

struct DecodeFlags {
  std::string emissions;
  std::string out;
  std::string trie_out;
  std::string refs;
  DecoderConfig config;
  bool merge = true;
  std::string label_lm_corpus;
  int label_lm_order = 0;
  bool fusion = false;
  double fusion_weight = 0.3;
  double fusion_ilm_weight = 0.0;
  ScorerFlags scorer;
};

int RunDecode(const GlobalFlags& g, DecodeFlags f) {
  RequireWritable(f.out);
  if (!f.trie_out.empty()) RequireWritable(f.trie_out);
  f.config.merge_states = f.merge;
  if (f.fusion) {
    f.config.fusion = FusionConfig{MakeScorer(f.scorer), f.fusion_weight, f.fusion_ilm_weight};
  } else if (f.scorer.Given()) {
    throw UsageError("scorer flags on decode need --fusion");
  }
  const std::vector<EmissionUtterance> input = ReadEmissions(f.emissions);
  std::optional<std::map<std::string, TokenSequence>> refs;
  if (!f.refs.empty()) refs = ReferenceMap(f.refs, false);

  std::vector<std::string> lm_corpus;
  int order = f.label_lm_order;
  if (!f.label_lm_corpus.empty()) {
    lm_corpus = io::ReadLines(f.label_lm_corpus);
    if (order == 0) order = f.config.label_context + 1;
  } else if (order == 0) {
    order = 1;
  }
  std::map<TokenSequence, std::shared_ptr<LabelLM>> label_lms;
  for (const EmissionUtterance& u : input) {
    if (u.segments.empty()) continue;
    const TokenSequence labels = u.segments.front().Labels();
    if (label_lms.count(labels)) continue;
    label_lms[labels] = std::make_shared<LabelLM>(
        lm_corpus.empty() ? LabelLM(labels, order) : LabelLM::Train(lm_corpus, labels, order));
  }

  std::vector<UtteranceDecodeResult> decoded(input.size());
  ParallelFor(input.size(), g.jobs, [&](std::size_t i) {
    const EmissionUtterance& u = input[i];
    if (u.segments.empty()) throw DataError("utterance '" + u.utterance_id + "' has no segments");
    decoded[i] = DecodeUtterance(u.segments, *label_lms.at(u.segments.front().Labels()),
                                 f.config, u.utterance_id);
  });

  const bool merged = f.config.EffectiveMerge();
  std::vector<Utterance> main_lattices, trie_lattices;
  for (const UtteranceDecodeResult& d : decoded) {
    main_lattices.push_back(d.utterance);
    if (merged) {
      Utterance trie;
      trie.utterance_id = d.utterance.utterance_id;
      for (const SegmentDecodeResult& s : d.segments) {
        trie.segments.push_back(BuildLattice(s.trace, false));
      }
      trie_lattices.push_back(std::move(trie));
    }
  }
  WriteUtterances(f.out, main_lattices);
  if (!f.trie_out.empty()) WriteUtterances(f.trie_out, merged ? trie_lattices : main_lattices);

  auto report = [&](const std::vector<Utterance>& utts) {
    if (!refs) {
      EvalReport r;
      r.utterances = utts.size();
      r.paths = AvgPathsPerSegment(utts);
      return r;
    }
    std::vector<EvalItem> items;
    for (const Utterance& u : utts) {
      items.push_back(
          {u.utterance_id, LookupRef(*refs, u.utterance_id), FirstPassTranscript(u), &u});
    }
    return Evaluate(items);
  };
  std::vector<std::pair<std::string, EvalReport>> rows;
  rows.emplace_back(merged ? "merged" : (f.config.fusion ? "fusion" : "trie"),
                    report(main_lattices));
  if (merged) rows.emplace_back("trie", report(trie_lattices));
  std::cout << QualityBlock(rows);
  Log(g, "decoded " + std::to_string(decoded.size()) + " utterances");
  return 0;
}

// ---------------------------------------------------------------------------
// rescore

struct RescoreFlags {
  std::string lattices;
  std::string out;
  std::string params_file;
  RescoreParams params;
  ScorerFlags scorer;
};

int RunRescore(const GlobalFlags& g, RescoreFlags f) {
  RequireWritable(f.out);
  RescoreParams params = f.params;
  if (!f.params_file.empty()) params = ReadTunedParams(f.params_file);
  params.Check();
  const std::vector<Utterance> utts = ReadUtterances(f.lattices);
  std::shared_ptr<Scorer> scorer = MakeScorer(f.scorer);
  std::vector<RescoredUtterance> rescored(utts.size());
  ParallelFor(utts.size(), g.jobs,
              [&](std::size_t i) { rescored[i] = RescoreUtterance(utts[i], *scorer, params); });
  std::string out;
  for (const RescoredUtterance& r : rescored) out += SerializeTranscript(r) + "\n";
  io::WriteFile(f.out, out);
  std::cout << "rescored " << rescored.size() << " utterances with mu=" << params.mu
            << " nu=" << params.nu << " nbest=" << params.nbest
            << " context_segments=" << params.context_segments << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// tune

struct TuneFlags {
  std::string lattices;
  std::string refs;
  std::string out;
  std::string mu_grid = "0:1:0.1";
  std::string nu_grid = "0:1:0.1";
  bool no_anchor = false;
  bool no_cache = false;
  std::string objective = "wer";
  std::string salient;
  RescoreParams base;
  ScorerFlags scorer;
};

int RunTune(const GlobalFlags& g, TuneFlags f) {
  RequireWritable(f.out);
  TuneGrid grid{ParseGridAxis(f.mu_grid), ParseGridAxis(f.nu_grid), !f.no_anchor};
  grid.Check();
  TuneOptions options;
  options.jobs = g.jobs;
  options.cache = !f.no_cache;
  std::optional<SalientTermSet> terms;
  if (f.objective == "ster") {
    if (f.salient.empty()) throw UsageError("--objective ster needs --salient");
    terms = ReadSalientTerms(f.salient);
    options.objective = TuneObjective::kSter;
    options.terms = &*terms;
  }
  const std::vector<Utterance> utts = ReadUtterances(f.lattices);
  const auto refs = ReferenceMap(f.refs, false);
  std::vector<LabeledUtterance> dev;
  for (const Utterance& u : utts) dev.push_back({&u, LookupRef(refs, u.utterance_id)});
  std::shared_ptr<Scorer> scorer = MakeScorer(f.scorer);
  const TuneResult result = Tune(dev, *scorer, grid, f.base, options);
  io::WriteFile(f.out, SerializeSurface(result, f.base));
  std::cout << SurfaceTable(result);
  Log(g, "scorer calls: " + std::to_string(result.scorer_calls));
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalFlags {
  std::string transcripts;
  std::string refs;
  std::string lattices;
  std::string salient;
  std::string out;
  bool csv = false;
  bool lowercase = false;
};

int RunEval(const GlobalFlags&, const EvalFlags& f) {
  if (!f.out.empty()) RequireWritable(f.out);
  const auto refs = ReferenceMap(f.refs, f.lowercase);
  const std::vector<TranscriptRecord> hyps = ReadTranscripts(f.transcripts, f.lowercase);
  std::vector<Utterance> lattices;
  std::map<std::string, const Utterance*> by_id;
  if (!f.lattices.empty()) {
    lattices = ReadUtterances(f.lattices);
    for (const Utterance& u : lattices) by_id[u.utterance_id] = &u;
  }
  std::optional<SalientTermSet> terms;
  if (!f.salient.empty()) terms = ReadSalientTerms(f.salient);
  std::vector<EvalItem> items;
  std::map<std::string, int> seen;
  for (const TranscriptRecord& h : hyps) {
    if (seen[h.utterance_id]++ > 0) {
      throw DataError("duplicate transcript for '" + h.utterance_id + "'");
    }
    EvalItem item{h.utterance_id, LookupRef(refs, h.utterance_id), h.transcript, nullptr};
    if (!f.lattices.empty()) {
      auto it = by_id.find(h.utterance_id);
      if (it == by_id.end()) throw DataError("no lattices for '" + h.utterance_id + "'");
      item.lattices = it->second;
    }
    items.push_back(std::move(item));
  }
  for (const auto& [id, tokens] : refs) {
    if (!seen.count(id)) throw DataError("no transcript for reference '" + id + "'");
  }
  const EvalReport report = Evaluate(items, terms ? &*terms : nullptr);
  const std::string text = f.csv ? EvalReportToCsv(report) : EvalReportToJson(report).dump(2) + "\n";
  if (f.out.empty()) {
    std::cout << text;
  } else {
    io::WriteFile(f.out, text);
    char buf[128];
    std::snprintf(buf, sizeof(buf), "WER %.2f%%", 100.0 * report.wer);
    std::cout << buf;
    if (report.ster) {
      std::snprintf(buf, sizeof(buf), "  STER %.2f%%", 100.0 * *report.ster);
      std::cout << buf;
    }
    std::cout << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// salient, ppl, vectors

struct SalientFlags {
  std::string refs;
  std::string out;
  double fraction = 0.10;
  bool lowercase = false;
};

int RunSalient(const GlobalFlags&, const SalientFlags& f) {
  RequireWritable(f.out);
  const std::vector<Document> docs = ReadReferences(f.refs, f.lowercase);
  const SalientTermSet set = SelectSalientTerms(docs, f.fraction);
  io::WriteFile(f.out, SerializeSalientTerms(set));
  std::size_t n = 0;
  for (const auto& [id, terms] : set.terms) n += terms.size();
  std::cout << "selected " << n << " terms for " << set.terms.size() << " documents\n";
  return 0;
}

struct PplFlags {
  std::string text;
  ScorerFlags scorer;
};

int RunPpl(const GlobalFlags&, const PplFlags& f) {
  const std::vector<std::string> texts = io::ReadLines(f.text);
  std::shared_ptr<Scorer> scorer = MakeScorer(f.scorer);
  const double lppw = LogPerplexityPerWord(*scorer, texts);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "log perplexity per word: %.6f (%zu texts, scorer %s)\n", lppw,
                texts.size(), scorer->Name().c_str());
  std::cout << buf;
  return 0;
}

struct VectorsFlags {
  std::string out;
  std::string check;
  ScorerFlags scorer;
};

int RunVectors(const GlobalFlags&, const VectorsFlags& f) {
  if (f.out.empty() == f.check.empty()) throw UsageError("give exactly one of --out, --check");
  std::shared_ptr<Scorer> scorer = MakeScorer(f.scorer);
  if (!f.out.empty()) {
    RequireWritable(f.out);
    const std::vector<ScoreRequest> requests = StandardConformanceRequests();
    io::WriteFile(f.out, SerializeVectors(MakeConformanceVectors(*scorer, requests)));
    std::cout << "wrote " << requests.size() << " vectors\n";
    return 0;
  }
  const std::vector<ConformanceVector> vectors = ParseVectors(io::ReadLines(f.check), f.check);
  const std::vector<std::string> failed = CheckConformanceVectors(vectors, *scorer);
  for (const std::string& id : failed) std::cout << "FAIL " << id << "\n";
  std::cout << (vectors.size() - failed.size()) << "/" << vectors.size() << " vectors pass\n";
  return failed.empty() ? 0 : kExitScorer;
}

// ---------------------------------------------------------------------------

void ReportError(const GlobalFlags& g, const char* kind, const std::string& message) {
  if (g.json_errors) {
    Json j;
    j["error"] = {{"kind", kind}, {"message", message}};
    std::cerr << j.dump() << "\n";
  } else {
    std::cerr << "lattice-rescore: " << kind << " error: " << message << "\n";
  }
}

int Main(int argc, char** argv) {
  CLI::App app{"ASR lattice rescoring toolkit", "lattice-rescore"};
  app.require_subcommand(1);
  GlobalFlags g;
  app.add_option("--seed", g.seed, "Seed for every random choice")->capture_default_str();
  app.add_option("--jobs", g.jobs, "Utterance-level parallelism")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_flag("-v,--verbose", g.verbose, "Progress messages on stderr");
  app.add_flag("--json-errors", g.json_errors, "Report errors as one JSON line on stderr");

  GenFlags gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "Generate synthetic emissions and references");
  gen_cmd->add_option("--out", gen.out_dir, "Output directory")->required();
  gen_cmd->add_option("--utterances", gen.config.utterances)->capture_default_str();
  gen_cmd->add_option("--dev", gen.config.dev_utterances, "Extra development utterances")
      ->capture_default_str();
  gen_cmd->add_option("--noise", gen.config.noise, "Probability a word is misheard")
      ->capture_default_str();
  gen_cmd->add_option("--word-pairs", gen.config.word_pairs)->capture_default_str();
  gen_cmd->add_option("--min-segments", gen.config.min_segments)->capture_default_str();
  gen_cmd->add_option("--max-segments", gen.config.max_segments)->capture_default_str();
  gen_cmd->add_option("--min-words", gen.config.min_words, "Words per segment, at least")
      ->capture_default_str();
  gen_cmd->add_option("--max-words", gen.config.max_words, "Words per segment, at most")
      ->capture_default_str();
  gen_cmd->add_option("--lm-sentences", gen.config.lm_sentences)->capture_default_str();

  DecodeFlags dec;
  CLI::App* dec_cmd = app.add_subcommand("decode", "Beam-search emissions into lattices");
  dec_cmd->add_option("--emissions", dec.emissions)->required()->check(CLI::ExistingFile);
  dec_cmd->add_option("--out", dec.out, "Lattice file (JSON-lines)")->required();
  dec_cmd->add_option("--trie-out", dec.trie_out, "Also write trie lattices from the same search");
  dec_cmd->add_option("--refs", dec.refs, "References for the quality block")
      ->check(CLI::ExistingFile);
  dec_cmd->add_option("--beam", dec.config.beam_size)->capture_default_str();
  dec_cmd->add_option("--label-context", dec.config.label_context)->capture_default_str();
  dec_cmd->add_flag("--merge,!--no-merge", dec.merge, "Merge states sharing label context");
  dec_cmd->add_option("--label-lm-weight", dec.config.label_lm_weight)->capture_default_str();
  dec_cmd->add_option("--label-lm-corpus", dec.label_lm_corpus, "Train the label LM on this text")
      ->check(CLI::ExistingFile);
  dec_cmd->add_option("--label-lm-order", dec.label_lm_order,
                      "Label LM order (default: label context + 1 with a corpus, else 1)");
  dec_cmd->add_flag("--fusion", dec.fusion, "Shallow fusion with the scorer (forces a trie)");
  dec_cmd->add_option("--fusion-weight", dec.fusion_weight)->capture_default_str();
  dec_cmd->add_option("--fusion-ilm-weight", dec.fusion_ilm_weight)->capture_default_str();
  dec.scorer.Register(dec_cmd);

  RescoreFlags res;
  CLI::App* res_cmd = app.add_subcommand("rescore", "Rescore lattices into transcripts");
  res_cmd->add_option("--lattices", res.lattices)->required()->check(CLI::ExistingFile);
  res_cmd->add_option("--out", res.out, "Transcript file (JSON-lines)")->required();
  auto* params_opt = res_cmd->add_option("--params", res.params_file, "Surface file from tune")
                         ->check(CLI::ExistingFile);
  res_cmd->add_option("--mu", res.params.mu)->capture_default_str()->excludes(params_opt);
  res_cmd->add_option("--nu", res.params.nu)->capture_default_str()->excludes(params_opt);
  res_cmd->add_option("--nbest", res.params.nbest)->capture_default_str()->excludes(params_opt);
  res_cmd->add_option("--context-segments", res.params.context_segments)
      ->capture_default_str()
      ->excludes(params_opt);
  res.scorer.Register(res_cmd);

  TuneFlags tun;
  CLI::App* tun_cmd = app.add_subcommand("tune", "Grid-search mu and nu on a development set");
  tun_cmd->add_option("--lattices", tun.lattices)->required()->check(CLI::ExistingFile);
  tun_cmd->add_option("--refs", tun.refs)->required()->check(CLI::ExistingFile);
  tun_cmd->add_option("--out", tun.out, "Surface file (JSON)")->required();
  tun_cmd->add_option("--mu-grid", tun.mu_grid, "start:stop:step or a,b,c")->capture_default_str();
  tun_cmd->add_option("--nu-grid", tun.nu_grid, "start:stop:step or a,b,c")->capture_default_str();
  tun_cmd->add_flag("--no-anchor", tun.no_anchor, "Allow grids without (0, 0)");
  tun_cmd->add_flag("--no-cache", tun.no_cache, "Query the scorer at every grid point");
  tun_cmd->add_option("--objective", tun.objective)
      ->check(CLI::IsMember({"wer", "ster"}))
      ->capture_default_str();
  tun_cmd->add_option("--salient", tun.salient, "Salient terms for --objective ster")
      ->check(CLI::ExistingFile);
  tun_cmd->add_option("--nbest", tun.base.nbest)->capture_default_str();
  tun_cmd->add_option("--context-segments", tun.base.context_segments)->capture_default_str();
  tun.scorer.Register(tun_cmd);

  EvalFlags ev;
  CLI::App* ev_cmd = app.add_subcommand("eval", "Score transcripts against references");
  ev_cmd->add_option("--transcripts", ev.transcripts)->required()->check(CLI::ExistingFile);
  ev_cmd->add_option("--refs", ev.refs)->required()->check(CLI::ExistingFile);
  ev_cmd->add_option("--lattices", ev.lattices, "Lattices for oracle WER and path counts")
      ->check(CLI::ExistingFile);
  ev_cmd->add_option("--salient", ev.salient, "Salient terms for STER")->check(CLI::ExistingFile);
  ev_cmd->add_option("--out", ev.out, "Report file (default: stdout)");
  ev_cmd->add_flag("--csv", ev.csv, "Flat table instead of JSON");
  ev_cmd->add_flag("--lowercase", ev.lowercase, "Lowercase references and transcripts");

  SalientFlags sal;
  CLI::App* sal_cmd = app.add_subcommand("salient", "Select TF-IDF salient terms");
  sal_cmd->add_option("--refs", sal.refs)->required()->check(CLI::ExistingFile);
  sal_cmd->add_option("--out", sal.out)->required();
  sal_cmd->add_option("--fraction", sal.fraction, "Share of reference tokens to cover")
      ->capture_default_str();
  sal_cmd->add_flag("--lowercase", sal.lowercase);

  PplFlags ppl;
  CLI::App* ppl_cmd = app.add_subcommand("ppl", "Log perplexity per word of a text file");
  ppl_cmd->add_option("--text", ppl.text)->required()->check(CLI::ExistingFile);
  ppl.scorer.Register(ppl_cmd);

  VectorsFlags vec;
  CLI::App* vec_cmd = app.add_subcommand("vectors", "Write or check protocol conformance vectors");
  vec_cmd->add_option("--out", vec.out, "Write vectors scored by the scorer");
  vec_cmd->add_option("--check", vec.check, "Replay vectors against the scorer")
      ->check(CLI::ExistingFile);
  vec.scorer.Register(vec_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    ReportError(g, "usage", e.what());
    return kExitUsage;
  }

  try {
    if (gen_cmd->parsed()) return RunGen(g, gen);
    if (dec_cmd->parsed()) return RunDecode(g, dec);
    if (res_cmd->parsed()) return RunRescore(g, res);
    if (tun_cmd->parsed()) return RunTune(g, tun);
    if (ev_cmd->parsed()) return RunEval(g, ev);
    if (sal_cmd->parsed()) return RunSalient(g, sal);
    if (ppl_cmd->parsed()) return RunPpl(g, ppl);
    if (vec_cmd->parsed()) return RunVectors(g, vec);
  } catch (const UsageError& e) {
    ReportError(g, "usage", e.what());
    return kExitUsage;
  } catch (const ScorerError& e) {
    ReportError(g, "scorer", e.what());
    return kExitScorer;
  } catch (const DataError& e) {
    ReportError(g, "data", e.what());
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    ReportError(g, "data", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    ReportError(g, "data", e.what());
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace
}  // namespace lattice_rescore

int main(int argc, char** argv) { return lattice_rescore::Main(argc, argv); }
