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

// Scorer wire protocol, version 1.
//
// Newline-delimited JSON over a child process's stdin/stdout or a TCP
// stream. One object per line, UTF-8, no pretty-printing:
//
//   client -> server  {"hello":{"proto":1}}
//   server -> client  {"hello":{"proto":1,"name":"..."}}
//   client -> server  {"id":7,"context":"...","targets":["...", ...]}
//   server -> client  {"id":7,"scores":[-3.2, ...]}   or   {"id":7,"error":"..."}
//
// Scores are natural-log. A score of -infinity travels as null since JSON
// has no infinities. Responses may arrive in any order; the client matches
// them to requests by id.
//
// POSIX only (fork/exec, poll, BSD sockets).

#ifndef LATTICE_RESCORE_PROTOCOL_H_
#define LATTICE_RESCORE_PROTOCOL_H_

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "lattice_rescore/errors.h"
#include "lattice_rescore/lattice_io.h"
#include "lattice_rescore/scorer.h"

namespace lattice_rescore {

inline constexpr int kProtocolVersion = 1;

// ---------------------------------------------------------------------------
// Message encoding.

struct ScoreRequest {
  std::int64_t id = 0;
  std::string context;
  std::vector<std::string> targets;
};

struct ScoreResponse {
  std::int64_t id = 0;
  std::vector<double> scores;
  std::optional<std::string> error;
};

inline std::string EncodeHello() {
  OrderedJson j;
  j["hello"]["proto"] = kProtocolVersion;
  return j.dump();
}

inline std::string EncodeHelloReply(const std::string& name) {
  OrderedJson j;
  j["hello"]["proto"] = kProtocolVersion;
  j["hello"]["name"] = name;
  return j.dump();
}

inline OrderedJson RequestToJson(const ScoreRequest& r) {
  OrderedJson j;
  j["id"] = r.id;
  j["context"] = r.context;
  j["targets"] = r.targets;
  return j;
}

inline std::string EncodeRequest(const ScoreRequest& r) { return RequestToJson(r).dump(); }

inline OrderedJson ResponseToJson(const ScoreResponse& r) {
  OrderedJson j;
  j["id"] = r.id;
  if (r.error) {
    j["error"] = *r.error;
    return j;
  }
  OrderedJson scores = OrderedJson::array();
  for (double s : r.scores) {
    if (std::isinf(s) && s < 0) {
      scores.push_back(nullptr);
    } else {
      scores.push_back(s);
    }
  }
  j["scores"] = std::move(scores);
  return j;
}

inline std::string EncodeResponse(const ScoreResponse& r) { return ResponseToJson(r).dump(); }

// Parses a server response line. Throws MalformedResponseError unless the
// line is exactly one of the two response shapes.
inline ScoreResponse DecodeResponse(std::string_view line) {
  Json j = Json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw MalformedResponseError("scorer response is not a JSON object: " +
                                 std::string(line.substr(0, 200)));
  }
  if (!j.contains("id") || !j["id"].is_number_integer()) {
    throw MalformedResponseError("scorer response has no integer id");
  }
  ScoreResponse r;
  r.id = j["id"].get<std::int64_t>();
  const bool has_scores = j.contains("scores");
  const bool has_error = j.contains("error");
  if (has_scores == has_error || j.size() != 2) {
    throw MalformedResponseError("scorer response must have 'id' and exactly one of "
                                 "'scores' or 'error'", r.id);
  }
  if (has_error) {
    if (!j["error"].is_string()) {
      throw MalformedResponseError("scorer 'error' must be a string", r.id);
    }
    r.error = j["error"].get<std::string>();
    return r;
  }
  if (!j["scores"].is_array()) throw MalformedResponseError("'scores' must be a list", r.id);
  for (const Json& s : j["scores"]) {
    if (s.is_null()) {
      r.scores.push_back(-std::numeric_limits<double>::infinity());
    } else if (s.is_number()) {
      r.scores.push_back(s.get<double>());
    } else {
      throw MalformedResponseError("scores must be numbers or null", r.id);
    }
  }
  return r;
}

// Server side: parses a request line. Sets `id` to the request's id when it
// can be recovered, else -1.
inline std::optional<ScoreRequest> DecodeRequest(std::string_view line, std::int64_t& id,
                                                 std::string& problem) {
  id = -1;
  Json j = Json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    problem = "request is not a JSON object";
    return std::nullopt;
  }
  if (!j.contains("id") || !j["id"].is_number_integer()) {
    problem = "request has no integer id";
    return std::nullopt;
  }
  id = j["id"].get<std::int64_t>();
  if (!j.contains("context") || !j["context"].is_string()) {
    problem = "request has no string context";
    return std::nullopt;
  }
  if (!j.contains("targets") || !j["targets"].is_array() || j["targets"].empty()) {
    problem = "request needs a non-empty targets list";
    return std::nullopt;
  }
  ScoreRequest r;
  r.id = id;
  r.context = j["context"].get<std::string>();
  for (const Json& t : j["targets"]) {
    if (!t.is_string()) {
      problem = "targets must be strings";
      return std::nullopt;
    }
    r.targets.push_back(t.get<std::string>());
  }
  return r;
}

// Server side: one response line for one request line. Bad requests and
// scorer exceptions become error objects.
inline std::string AnswerRequestLine(std::string_view line, Scorer& scorer) {
  std::int64_t id = -1;
  std::string problem;
  std::optional<ScoreRequest> request = DecodeRequest(line, id, problem);
  ScoreResponse response;
  response.id = id;
  if (!request) {
    response.error = problem;
    return EncodeResponse(response);
  }
  try {
    response.scores = scorer.Score(request->context, request->targets);
  } catch (const std::exception& e) {
    response.error = e.what();
  }
  return EncodeResponse(response);
}

// ---------------------------------------------------------------------------
// Transports.

class LineChannel {
 public:
  virtual ~LineChannel() = default;

  virtual void WriteLine(std::string_view line) = 0;

  // Next line without its newline. A non-positive timeout waits forever.
  virtual std::string ReadLine(std::chrono::milliseconds timeout) = 0;
};

// Line I/O over a pair of file descriptors, owned by this object.
class FdChannel : public LineChannel {
 public:
  FdChannel(int read_fd, int write_fd) : read_fd_(read_fd), write_fd_(write_fd) {}

  FdChannel(const FdChannel&) = delete;
  FdChannel& operator=(const FdChannel&) = delete;

  ~FdChannel() override { CloseFds(); }

  void WriteLine(std::string_view line) override {
    std::string data(line);
    data.push_back('\n');
    std::size_t done = 0;
    while (done < data.size()) {
      const ssize_t n = write(write_fd_, data.data() + done, data.size() - done);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw TransportError(std::string("write to scorer failed: ") + std::strerror(errno));
      }
      done += static_cast<std::size_t>(n);
    }
  }

  std::string ReadLine(std::chrono::milliseconds timeout) override {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (true) {
      const std::size_t newline = buffer_.find('\n');
      if (newline != std::string::npos) {
        std::string line = buffer_.substr(0, newline);
        buffer_.erase(0, newline + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      int wait_ms = -1;
      if (timeout.count() > 0) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
            deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) throw TimeoutError("scorer did not answer in time");
        wait_ms = static_cast<int>(left.count());
      }
      pollfd p{read_fd_, POLLIN, 0};
      const int ready = poll(&p, 1, wait_ms);
      if (ready < 0) {
        if (errno == EINTR) continue;
        throw TransportError(std::string("poll failed: ") + std::strerror(errno));
      }
      if (ready == 0) throw TimeoutError("scorer did not answer in time");
      char chunk[4096];
      const ssize_t n = read(read_fd_, chunk, sizeof(chunk));
      if (n < 0) {
        if (errno == EINTR) continue;
        throw TransportError(std::string("read from scorer failed: ") + std::strerror(errno));
      }
      if (n == 0) throw TransportError("scorer closed the connection");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 protected:
  void CloseWrite() {
    if (write_fd_ >= 0 && write_fd_ != read_fd_) close(write_fd_);
    if (write_fd_ == read_fd_ && write_fd_ >= 0) shutdown(write_fd_, SHUT_WR);
    write_fd_ = -1;
  }

  void CloseFds() {
    if (write_fd_ >= 0 && write_fd_ != read_fd_) close(write_fd_);
    if (read_fd_ >= 0) close(read_fd_);
    read_fd_ = write_fd_ = -1;
  }

 private:
  int read_fd_;
  int write_fd_;
  std::string buffer_;
};

// A child process started with /bin/sh -c; talks over its stdin/stdout,
// stderr is inherited.
class ProcessChannel final : public FdChannel {
 public:
  static std::unique_ptr<ProcessChannel> Spawn(const std::string& command) {
    signal(SIGPIPE, SIG_IGN);
    int to_child[2], from_child[2];
    if (pipe(to_child) != 0) throw TransportError("pipe() failed");
    if (pipe(from_child) != 0) {
      close(to_child[0]);
      close(to_child[1]);
      throw TransportError("pipe() failed");
    }
    const pid_t pid = fork();
    if (pid < 0) throw TransportError("fork() failed");
    if (pid == 0) {
      dup2(to_child[0], STDIN_FILENO);
      dup2(from_child[1], STDOUT_FILENO);
      close(to_child[0]);
      close(to_child[1]);
      close(from_child[0]);
      close(from_child[1]);
      execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);
    fcntl(to_child[1], F_SETFD, FD_CLOEXEC);
    fcntl(from_child[0], F_SETFD, FD_CLOEXEC);
    return std::unique_ptr<ProcessChannel>(
        new ProcessChannel(from_child[0], to_child[1], pid));
  }

  // Closes the child's stdin, gives it a moment to exit, then kills it.
  ~ProcessChannel() override {
    CloseWrite();
    int status = 0;
    for (int i = 0; i < 100; ++i) {
      if (waitpid(pid_, &status, WNOHANG) != 0) return;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    kill(pid_, SIGKILL);
    waitpid(pid_, &status, 0);
  }

 private:
  ProcessChannel(int read_fd, int write_fd, pid_t pid)
      : FdChannel(read_fd, write_fd), pid_(pid) {}

  pid_t pid_;
};

// "host:port" over TCP.
inline std::unique_ptr<FdChannel> ConnectTcp(const std::string& endpoint) {
  const std::size_t colon = endpoint.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == endpoint.size()) {
    throw UsageError("TCP scorer endpoint must be host:port, got '" + endpoint + "'");
  }
  const std::string host = endpoint.substr(0, colon);
  const std::string port = endpoint.substr(colon + 1);
  signal(SIGPIPE, SIG_IGN);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  if (getaddrinfo(host.c_str(), port.c_str(), &hints, &found) != 0) {
    throw TransportError("cannot resolve scorer endpoint " + endpoint);
  }
  int fd = -1;
  for (addrinfo* a = found; a != nullptr; a = a->ai_next) {
    fd = socket(a->ai_family, a->ai_socktype | SOCK_CLOEXEC, a->ai_protocol);
    if (fd < 0) continue;
    if (connect(fd, a->ai_addr, a->ai_addrlen) == 0) break;
    close(fd);
    fd = -1;
  }
  freeaddrinfo(found);
  if (fd < 0) throw TransportError("cannot connect to scorer at " + endpoint);
  return std::make_unique<FdChannel>(fd, fd);
}

// ---------------------------------------------------------------------------
// Client.

// One protocol session. Calls are serialized; a timeout or transport failure
// leaves the session unusable since the stream position is unknown.
class ProtocolClient {
 public:
  ProtocolClient(std::unique_ptr<LineChannel> channel, std::chrono::milliseconds timeout)
      : channel_(std::move(channel)), timeout_(timeout) {
    channel_->WriteLine(EncodeHello());
    const std::string line = channel_->ReadLine(timeout_);
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || j.size() != 1 || !j.contains("hello") ||
        !j["hello"].is_object() || !j["hello"].contains("proto") ||
        !j["hello"]["proto"].is_number_integer() || !j["hello"].contains("name") ||
        !j["hello"]["name"].is_string()) {
      throw MalformedResponseError("bad hello from scorer: " + line.substr(0, 200));
    }
    if (j["hello"]["proto"].get<int>() != kProtocolVersion) {
      throw MalformedResponseError("scorer speaks protocol " +
                                   j["hello"]["proto"].dump() + ", expected 1");
    }
    name_ = j["hello"]["name"].get<std::string>();
  }

  const std::string& server_name() const { return name_; }

  // Sends every request before reading any response, then matches responses
  // by id. Returns scores in request order.
  std::vector<std::vector<double>> ScoreBatch(std::span<const ScoreRequest> requests) {
    std::lock_guard lock(mutex_);
    if (broken_) throw TransportError("scorer session is no longer usable");
    try {
      std::map<std::int64_t, std::size_t> slot;
      std::vector<std::int64_t> ids;
      for (std::size_t i = 0; i < requests.size(); ++i) {
        ScoreRequest r = requests[i];
        r.id = next_id_++;
        slot[r.id] = i;
        ids.push_back(r.id);
        channel_->WriteLine(EncodeRequest(r));
      }
      std::vector<std::vector<double>> out(requests.size());
      std::vector<bool> done(requests.size(), false);
      for (std::size_t received = 0; received < requests.size(); ++received) {
        const ScoreResponse response = DecodeResponse(channel_->ReadLine(timeout_));
        auto it = slot.find(response.id);
        if (it == slot.end() || done[it->second]) {
          throw IdMismatchError("scorer answered id " + std::to_string(response.id) +
                                    " which is not outstanding",
                                response.id);
        }
        const std::size_t i = it->second;
        if (response.error) {
          throw BackendError("scorer error for request " + std::to_string(response.id) +
                                 ": " + *response.error,
                             response.id);
        }
        if (response.scores.size() != requests[i].targets.size()) {
          throw LengthMismatchError(
              "scorer returned " + std::to_string(response.scores.size()) + " scores for " +
                  std::to_string(requests[i].targets.size()) + " targets in request " +
                  std::to_string(response.id),
              response.id);
        }
        for (double s : response.scores) {
          if (std::isnan(s) || s == std::numeric_limits<double>::infinity()) {
            throw MalformedResponseError("scorer returned a non-log-probability", response.id);
          }
        }
        out[i] = response.scores;
        done[i] = true;
      }
      return out;
    } catch (...) {
      broken_ = true;
      throw;
    }
  }

  std::vector<double> Score(std::string_view context, std::span<const std::string> targets) {
    ScoreRequest r;
    r.context = std::string(context);
    r.targets.assign(targets.begin(), targets.end());
    return ScoreBatch(std::span<const ScoreRequest>(&r, 1)).front();
  }

 private:
  std::unique_ptr<LineChannel> channel_;
  std::chrono::milliseconds timeout_;
  std::string name_;
  std::mutex mutex_;
  std::int64_t next_id_ = 1;
  bool broken_ = false;
};

// Scorer backed by a protocol session. Target lists longer than `max_batch`
// (when positive) are split into several pipelined requests.
class ProtocolScorer final : public Scorer {
 public:
  explicit ProtocolScorer(std::shared_ptr<ProtocolClient> client, std::size_t max_batch = 0)
      : client_(std::move(client)), max_batch_(max_batch) {}

  std::string Name() const override { return "protocol:" + client_->server_name(); }

  std::vector<double> Score(std::string_view context,
                            std::span<const std::string> targets) override {
    if (targets.empty()) return {};
    const std::size_t chunk = max_batch_ > 0 ? max_batch_ : targets.size();
    std::vector<ScoreRequest> requests;
    for (std::size_t begin = 0; begin < targets.size(); begin += chunk) {
      ScoreRequest r;
      r.context = std::string(context);
      const std::size_t end = std::min(targets.size(), begin + chunk);
      r.targets.assign(targets.begin() + static_cast<std::ptrdiff_t>(begin),
                       targets.begin() + static_cast<std::ptrdiff_t>(end));
      requests.push_back(std::move(r));
    }
    std::vector<double> scores;
    for (const auto& part : client_->ScoreBatch(requests)) {
      scores.insert(scores.end(), part.begin(), part.end());
    }
    return scores;
  }

 private:
  std::shared_ptr<ProtocolClient> client_;
  std::size_t max_batch_;
};

// ---------------------------------------------------------------------------
// Conformance vectors: canonical requests with the responses a reference
// backend produced. File format, one per line:
//   {"vector_id": str, "request": {...}, "expected": {...}}

struct ConformanceVector {
  std::string vector_id;
  ScoreRequest request;
  ScoreResponse expected;
};

inline std::vector<ConformanceVector> MakeConformanceVectors(
    Scorer& scorer, std::span<const ScoreRequest> requests) {
  std::vector<ConformanceVector> out;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    ConformanceVector v;
    char id[32];
    std::snprintf(id, sizeof(id), "v%03zu", i);
    v.vector_id = id;
    v.request = requests[i];
    v.request.id = static_cast<std::int64_t>(i + 1);
    v.expected.id = v.request.id;
    v.expected.scores = scorer.Score(v.request.context, v.request.targets);
    out.push_back(std::move(v));
  }
  return out;
}

// Requests replayed by the shipped conformance vectors: empty and non-empty
// contexts, out-of-vocabulary words, repeated targets and non-ASCII text.
inline std::vector<ScoreRequest> StandardConformanceRequests() {
  return {
      {0, "", {"the cat sat on the mat"}},
      {0, "", {"the dog sat", "the cat sat", "a cat and a dog"}},
      {0, "the cat", {"sat on the mat", "sat on the log", "is on the log"}},
      {0, "the", {"cat", "dog", "zebra"}},
      {0, "", {"unseen words only"}},
      {0, "a dog", {"and a cat", "and a cat"}},
      {0, "", {"मैं घर जा रहा हूँ", "main ghar ja raha hoon"}},
      {0, "मैं घर", {"जा रहा हूँ", "ja raha hoon"}},
      {0, "main ghar", {"ja raha hoon", "जा रहा हूँ"}},
      {0, "the cat sat on the mat", {"the dog sat on the log"}},
      {0, "log", {"the"}},
      {0, "", {"on"}},
  };
}

inline std::string SerializeVectors(std::span<const ConformanceVector> vectors) {
  std::string out;
  for (const ConformanceVector& v : vectors) {
    OrderedJson j;
    j["vector_id"] = v.vector_id;
    j["request"] = RequestToJson(v.request);
    j["expected"] = ResponseToJson(v.expected);
    out += j.dump() + "\n";
  }
  return out;
}

inline std::vector<ConformanceVector> ParseVectors(const std::vector<std::string>& lines,
                                                   const std::string& where) {
  std::vector<ConformanceVector> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const std::string at = where + ":" + std::to_string(i + 1);
    Json j = io::ParseJson(lines[i], at);
    io::RejectUnknownFields(j, {"vector_id", "request", "expected"}, at);
    ConformanceVector v;
    v.vector_id = io::Get<std::string>(j, "vector_id", at);
    std::int64_t id = -1;
    std::string problem;
    auto request = DecodeRequest(io::Field(j, "request", at).dump(), id, problem);
    if (!request) throw DataError(at + ": bad request: " + problem);
    v.request = *request;
    try {
      v.expected = DecodeResponse(io::Field(j, "expected", at).dump());
    } catch (const ScorerError& e) {
      throw DataError(at + ": bad expected response: " + e.what());
    }
    out.push_back(std::move(v));
  }
  if (out.empty()) throw DataError(where + ": no conformance vectors");
  return out;
}

// Ids of vectors whose replayed scores differ from the expected ones by more
// than `tolerance` (or whose kind of answer differs).
inline std::vector<std::string> CheckConformanceVectors(
    std::span<const ConformanceVector> vectors, Scorer& scorer, double tolerance = 1e-9) {
  std::vector<std::string> failed;
  for (const ConformanceVector& v : vectors) {
    bool ok = true;
    if (v.expected.error) {
      try {
        scorer.Score(v.request.context, v.request.targets);
        ok = false;
      } catch (const ScorerError&) {
      }
    } else {
      const std::vector<double> got = scorer.Score(v.request.context, v.request.targets);
      ok = got.size() == v.expected.scores.size();
      for (std::size_t i = 0; ok && i < got.size(); ++i) {
        const double want = v.expected.scores[i];
        ok = (std::isinf(want) && got[i] == want) || std::abs(got[i] - want) <= tolerance;
      }
    }
    if (!ok) failed.push_back(v.vector_id);
  }
  return failed;
}

}  // namespace lattice_rescore

#endif  // LATTICE_RESCORE_PROTOCOL_H_
