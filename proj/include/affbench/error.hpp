#pragma once

#include <stdexcept>
#include <string>

namespace affbench {

enum class ErrorKind {
  Syntax,          // malformed document text
  Schema,          // missing field, wrong type, bad enum value
  Invariant,       // structurally loaded but violates a data invariant
  UnknownEntity,
  UnknownPart,
  CrossRef,        // name fails to resolve against the knowledge base
  Asset,           // strict mode, referenced file missing
  Config,
  Backend,         // transport failure / retries exhausted
  Auth,
  OverLimit,       // context-length rejection
  EmptyResponse,
  UnparseableVerdict,
  Domain,          // numeric precondition violated
  Io,
  StillRunning,
  EventMismatch,
  BadPermutation,
  TemplateSlot,
  Leakage,         // internal leakage check tripped; a bug signal
  Alignment,
  TaskMismatch,
  NotEnoughEntities,
  EmptyKb,
  Precondition,
  AgentError,
  TripleDropped,
};

const char* error_kind_name(ErrorKind kind);

/// Single exception type for the whole engine. `path` points at the
/// offending node for file-format errors ("entities[1].parts[0].name").
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::string path = {})
      : std::runtime_error(path.empty() ? message : message + " (at " + path + ")"),
        kind_(kind),
        path_(std::move(path)) {}

  ErrorKind kind() const { return kind_; }
  const std::string& path() const { return path_; }

 private:
  ErrorKind kind_;
  std::string path_;
};

}  // namespace affbench
