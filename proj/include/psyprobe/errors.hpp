#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace psyprobe {

/// Base of every typed failure raised by the engine. `code()` is the stable
/// machine-readable name used in HTTP error bodies and CLI output.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

/// A structured document failed validation. `path` names the first offending
/// field in JSON-pointer-like dotted form, e.g. `ops.question.text`.
class SchemaViolation : public Error {
 public:
  SchemaViolation(std::string path, std::string reason)
      : Error("SchemaViolation", path + ": " + reason),
        path_(std::move(path)),
        reason_(std::move(reason)) {}

  const std::string& path() const noexcept { return path_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string path_;
  std::string reason_;
};

class PreconditionViolation : public Error {
 public:
  explicit PreconditionViolation(const std::string& message)
      : Error("PreconditionViolation", message) {}
};

class BackendUnavailable : public Error {
 public:
  explicit BackendUnavailable(const std::string& message)
      : Error("BackendUnavailable", message) {}
};

class MalformedAfterRetries : public Error {
 public:
  MalformedAfterRetries(const std::string& kind, int attempts, SchemaViolation last)
      : Error("MalformedAfterRetries",
              kind + " output rejected after " + std::to_string(attempts) +
                  " attempt(s); last violation " + last.what()),
        attempts_(attempts),
        last_(std::move(last)) {}

  int attempts() const noexcept { return attempts_; }
  const SchemaViolation& last_violation() const noexcept { return last_; }

 private:
  int attempts_;
  SchemaViolation last_;
};

class RuleTableInvalid : public Error {
 public:
  explicit RuleTableInvalid(const std::string& message) : Error("RuleTableInvalid", message) {}
};

class TemplateError : public Error {
 public:
  explicit TemplateError(const std::string& message) : Error("TemplateError", message) {}
};

class ConservatismViolation : public Error {
 public:
  explicit ConservatismViolation(const std::string& message)
      : Error("ConservatismViolation", message) {}
};

class ExclusionViolation : public Error {
 public:
  explicit ExclusionViolation(const std::string& message) : Error("ExclusionViolation", message) {}
};

class LengthViolation : public Error {
 public:
  explicit LengthViolation(const std::string& message) : Error("LengthViolation", message) {}
};

class NoCandidateForSlot : public Error {
 public:
  explicit NoCandidateForSlot(const std::string& message) : Error("NoCandidateForSlot", message) {}
};

class EmptyStore : public Error {
 public:
  explicit EmptyStore(const std::string& message) : Error("EmptyStore", message) {}
};

class InvalidConfig : public Error {
 public:
  explicit InvalidConfig(const std::string& message) : Error("InvalidConfig", message) {}
};

class SessionClosed : public Error {
 public:
  explicit SessionClosed(const std::string& message) : Error("SessionClosed", message) {}
};

class TimeLimitExceeded : public Error {
 public:
  explicit TimeLimitExceeded(const std::string& message) : Error("TimeLimitExceeded", message) {}
};

class UnknownSession : public Error {
 public:
  explicit UnknownSession(const std::string& message) : Error("UnknownSession", message) {}
};

class SessionBusy : public Error {
 public:
  explicit SessionBusy(const std::string& message) : Error("SessionBusy", message) {}
};

class EmptyTranscript : public Error {
 public:
  explicit EmptyTranscript(const std::string& message) : Error("EmptyTranscript", message) {}
};

class MissingReference : public Error {
 public:
  explicit MissingReference(const std::string& message) : Error("MissingReference", message) {}
};

/// A pipeline stage failed. Carries the stage name and the code of the
/// underlying error so callers can attribute failures.
class StageError : public Error {
 public:
  StageError(std::string stage, std::string inner_code, const std::string& message)
      : Error("StageError", stage + " failed (" + inner_code + "): " + message),
        stage_(std::move(stage)),
        inner_code_(std::move(inner_code)) {}

  const std::string& stage() const noexcept { return stage_; }
  const std::string& inner_code() const noexcept { return inner_code_; }

 private:
  std::string stage_;
  std::string inner_code_;
};

}  // namespace psyprobe
