#include "tep/backend_types.hpp"

#include <cmath>

#include "tep/errors.hpp"

namespace tep {

void TrackOutput::validate() const {
  if (!std::isfinite(confidence) || confidence < 0.0 || confidence > 1.0) {
    throw Error(ErrorKind::ProtocolViolation, "confidence must lie in [0,1]");
  }
  if (!bbox && confidence != 0.0) {
    throw Error(ErrorKind::ProtocolViolation, "a missing bbox requires confidence 0");
  }
}

}  // namespace tep
