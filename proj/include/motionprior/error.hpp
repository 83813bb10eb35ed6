#pragma once

#include <stdexcept>
#include <string>

namespace motionprior {

enum class ErrorKind {
  Config,
  Topology,
  Format,
  LengthMismatch,
  VersionMismatch,
  Precondition,
  DimensionMismatch,
  Numeric,
  Divergence,
  Fitting,
  Io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

  /// True for failures of the numerics (as opposed to bad inputs or configuration).
  bool is_numeric() const {
    return kind_ == ErrorKind::Numeric || kind_ == ErrorKind::Divergence ||
           kind_ == ErrorKind::Fitting;
  }

 private:
  ErrorKind kind_;
};

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) throw Error(kind, what);
}

}  // namespace motionprior
