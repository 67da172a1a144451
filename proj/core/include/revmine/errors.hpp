#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace revmine {

// Base for every error raised by the library. The CLI maps subclasses onto
// process exit codes (validation 2, backend 3, resumable checkpoint 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: malformed files, violated preconditions, invalid configuration.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Ingestion rejected more than half of the records in a file.
class SchemaMismatchError : public ValidationError {
 public:
  SchemaMismatchError(const std::string& what, std::size_t rejected, std::size_t total)
      : ValidationError(what), rejected_(rejected), total_(total) {}

  std::size_t rejected() const { return rejected_; }
  std::size_t total() const { return total_; }

 private:
  std::size_t rejected_;
  std::size_t total_;
};

// An inference service could not be reached or answered garbage, after retries.
class BackendError : public Error {
 public:
  using Error::Error;
};

// Backend failure during corpus scoring. Cells finished before the failure are
// already in the score cache, so rerunning resumes from there.
class ScoringError : public BackendError {
 public:
  ScoringError(const std::string& what, std::size_t completed_cells, std::size_t total_cells)
      : BackendError(what), completed_cells_(completed_cells), total_cells_(total_cells) {}

  std::size_t completed_cells() const { return completed_cells_; }
  std::size_t total_cells() const { return total_cells_; }

 private:
  std::size_t completed_cells_;
  std::size_t total_cells_;
};

// A pipeline stage stopped after persisting partial progress.
class CheckpointError : public Error {
 public:
  CheckpointError(const std::string& what, std::string stage)
      : Error(what), stage_(std::move(stage)) {}

  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace revmine
