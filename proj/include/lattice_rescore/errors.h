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

// Exception hierarchy shared by every module. The CLI maps the three roots
// (UsageError, DataError, ScorerError) onto its exit codes.

#ifndef LATTICE_RESCORE_ERRORS_H_
#define LATTICE_RESCORE_ERRORS_H_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace lattice_rescore {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad flags or arguments supplied by the caller.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data (files, lattices, emissions).
class DataError : public Error {
 public:
  using Error::Error;
};

// A lattice violates one of its structural invariants.
class InvalidLatticeError : public DataError {
 public:
  InvalidLatticeError(std::string invariant, const std::string& detail)
      : DataError("invalid lattice: " + invariant + ": " + detail),
        invariant_(std::move(invariant)) {}

  const std::string& invariant() const { return invariant_; }

 private:
  std::string invariant_;
};

// Path enumeration refused because the lattice holds too many paths. The
// exact count is kept in decimal form since it may exceed 64 bits.
class PathLimitError : public DataError {
 public:
  PathLimitError(std::string count, std::uint64_t limit)
      : DataError("lattice has " + count + " paths, above the limit of " +
                  std::to_string(limit)),
        count_(std::move(count)) {}

  const std::string& count() const { return count_; }

 private:
  std::string count_;
};

// Any failure while obtaining external-LM scores.
class ScorerError : public Error {
 public:
  explicit ScorerError(const std::string& what, std::int64_t request_id = -1)
      : Error(what), request_id_(request_id) {}

  std::int64_t request_id() const { return request_id_; }

 private:
  std::int64_t request_id_;
};

class TransportError : public ScorerError {
 public:
  using ScorerError::ScorerError;
};

class MalformedResponseError : public ScorerError {
 public:
  using ScorerError::ScorerError;
};

class IdMismatchError : public ScorerError {
 public:
  using ScorerError::ScorerError;
};

class LengthMismatchError : public ScorerError {
 public:
  using ScorerError::ScorerError;
};

class TimeoutError : public ScorerError {
 public:
  using ScorerError::ScorerError;
};

// The backend answered with {"id": ..., "error": ...}.
class BackendError : public ScorerError {
 public:
  using ScorerError::ScorerError;
};

}  // namespace lattice_rescore

#endif  // LATTICE_RESCORE_ERRORS_H_
