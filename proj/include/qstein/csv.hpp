#pragma once

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>

namespace qstein::csv {

// Round-trippable decimal; infinities as "inf"/"-inf".
inline std::string real(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

}  // namespace qstein::csv
