#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cpsattack {

// Base for every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A value lies outside the domain of a scaling or scoring function.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A caller broke an operation precondition (e.g. compromising an unknown node).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Malformed input text (JSON, XML, CSV).
class ParseError : public Error {
 public:
  using Error::Error;
};

// A file could not be opened, read, or written.
class IoError : public Error {
 public:
  using Error::Error;
};

// Structural validation failed; carries every problem found.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> problems)
      : Error(join(problems)), problems_(std::move(problems)) {}

  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& problems) {
    std::string out;
    for (const auto& p : problems) {
      if (!out.empty()) out += "; ";
      out += p;
    }
    return out;
  }

  std::vector<std::string> problems_;
};

struct Violation {
  std::string subject;  // offending id, or "system"/"schema"/... for global problems
  std::string message;

  std::string str() const { return subject + ": " + message; }
  bool operator==(const Violation&) const = default;
};

// Accumulates violations; empty iff the checked object is well-formed.
class ValidationReport {
 public:
  void add(std::string subject, std::string message) {
    violations_.push_back({std::move(subject), std::move(message)});
  }

  void merge(const ValidationReport& other) {
    violations_.insert(violations_.end(), other.violations_.begin(), other.violations_.end());
  }

  bool ok() const noexcept { return violations_.empty(); }
  std::size_t size() const noexcept { return violations_.size(); }
  const std::vector<Violation>& violations() const noexcept { return violations_; }

  std::vector<std::string> lines() const {
    std::vector<std::string> out;
    out.reserve(violations_.size());
    for (const auto& v : violations_) out.push_back(v.str());
    return out;
  }

  // True if any violation mentions `needle` in its subject or message.
  bool mentions(const std::string& needle) const {
    for (const auto& v : violations_) {
      if (v.subject.find(needle) != std::string::npos ||
          v.message.find(needle) != std::string::npos)
        return true;
    }
    return false;
  }

  void throw_if_failed() const {
    if (!ok()) throw ValidationError(lines());
  }

 private:
  std::vector<Violation> violations_;
};

}  // namespace cpsattack
