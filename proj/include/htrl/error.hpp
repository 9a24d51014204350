#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace htrl {

// Base class for all library failures. `stage()` names the pipeline stage
// (parse, scoap, atpg, trojan, env, ppo, harness) for CLI diagnostics.
class Error : public std::runtime_error {
 public:
  Error(std::string stage, const std::string& what)
      : std::runtime_error(what), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("parse", line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  // 0 when the error is not tied to a specific line.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace htrl
