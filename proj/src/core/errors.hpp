#pragma once

#include <stdexcept>
#include <string>

namespace prag {

// Mirrors prag_status in the C API; values are part of the ABI.
enum class ErrorCode : int {
  kInvalidArgument = 1,
  kParse = 2,
  kConflict = 3,
  kIo = 4,
  kDomain = 5,
  kLookup = 6,
  kCapability = 7,
  kConfig = 8,
  kGeneration = 9,
  kProtocol = 10,
  kExperiment = 11,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error(ErrorCode::kParse,
              "line " + std::to_string(line) + ": " + message),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ConflictError : public Error {
 public:
  explicit ConflictError(const std::string& id)
      : Error(ErrorCode::kConflict, "duplicate id '" + id + "'"), id_(id) {}
  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

class IoError : public Error {
 public:
  IoError(const std::string& path, const std::string& what)
      : Error(ErrorCode::kIo, path + ": " + what) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& message)
      : Error(ErrorCode::kDomain, message) {}
};

class LookupError : public Error {
 public:
  explicit LookupError(const std::string& id)
      : Error(ErrorCode::kLookup, "no precomputed embedding for id '" + id + "'") {}
};

class CapabilityError : public Error {
 public:
  explicit CapabilityError(const std::string& message)
      : Error(ErrorCode::kCapability, message) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message)
      : Error(ErrorCode::kConfig, message) {}
};

// http_status is 0 for transport-level failures.
class GenerationError : public Error {
 public:
  GenerationError(int http_status, const std::string& message)
      : Error(ErrorCode::kGeneration, message), http_status_(http_status) {}
  int http_status() const noexcept { return http_status_; }

 private:
  int http_status_;
};

class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& message)
      : Error(ErrorCode::kProtocol, message) {}
};

// Wraps a component failure with the pipeline stage and case it happened in.
class ExperimentError : public Error {
 public:
  ExperimentError(std::string stage, std::string case_id, const std::string& cause)
      : Error(ErrorCode::kExperiment,
              "stage '" + stage + "'" +
                  (case_id.empty() ? std::string() : ", case '" + case_id + "'") +
                  ": " + cause),
        stage_(std::move(stage)),
        case_id_(std::move(case_id)) {}
  const std::string& stage() const noexcept { return stage_; }
  const std::string& case_id() const noexcept { return case_id_; }

 private:
  std::string stage_;
  std::string case_id_;
};

}  // namespace prag
