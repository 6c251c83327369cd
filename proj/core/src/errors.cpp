#include "lvcox/errors.hpp"

#include <cmath>

namespace lvcox {

double require_finite(double value, const std::string& context) {
  if (!std::isfinite(value)) {
    throw NumericError("non-finite value in " + context);
  }
  return value;
}

}  // namespace lvcox
