#pragma once

#include <stdexcept>
#include <string>

namespace fcseg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent file content.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A file or directory could not be opened, read, or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Input that is well-formed but violates a domain rule (unknown label,
/// duplicate id, non-monotone alignment, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A sequence is too short to host the requested subaction states.
class InfeasibleError : public DomainError {
 public:
  explicit InfeasibleError(const std::string& what, std::string video_id = {})
      : DomainError(what), video_id_(std::move(video_id)) {}

  const std::string& video_id() const noexcept { return video_id_; }

 private:
  std::string video_id_;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace fcseg
