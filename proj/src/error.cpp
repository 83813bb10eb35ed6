#include "motionprior/error.hpp"

namespace motionprior {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return "config error";
    case ErrorKind::Topology: return "topology error";
    case ErrorKind::Format: return "format error";
    case ErrorKind::LengthMismatch: return "length mismatch";
    case ErrorKind::VersionMismatch: return "version mismatch";
    case ErrorKind::Precondition: return "precondition violated";
    case ErrorKind::DimensionMismatch: return "dimension mismatch";
    case ErrorKind::Numeric: return "numeric failure";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::Fitting: return "fitting failure";
    case ErrorKind::Io: return "i/o error";
  }
  return "error";
}

}  // namespace motionprior
