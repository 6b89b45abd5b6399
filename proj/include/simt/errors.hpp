#pragma once

#include <stdexcept>
#include <string>

namespace simt {

// Base class for all toolkit errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input file content; carries a 1-based line number when known.
struct ParseError : Error {
  ParseError(const std::string& msg, int line = 0)
      : Error(line > 0 ? msg + " (line " + std::to_string(line) + ")" : msg),
        line_number(line) {}
  int line_number = 0;
};

// Corpus-level problems: mismatched files, missing sidecars.
struct CorpusError : Error {
  using Error::Error;
};

// A caller violated an operation precondition.
struct ContractError : Error {
  using Error::Error;
};

// The model adapter answered with a malformed or inconsistent message.
struct ProtocolError : Error {
  using Error::Error;
};

// The model adapter connection failed or dropped.
struct TransportError : Error {
  using Error::Error;
};

// Invalid run configuration (CLI flags, pipeline config file).
struct ConfigError : Error {
  using Error::Error;
};

// A pipeline stage failed; outputs of earlier stages are left intact.
struct StageError : Error {
  StageError(const std::string& stage_name, const std::string& msg)
      : Error("stage " + stage_name + ": " + msg), stage(stage_name) {}
  std::string stage;
};

}  // namespace simt
