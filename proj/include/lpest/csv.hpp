#pragma once

#include <cmath>
#include <locale>
#include <sstream>
#include <string>

#include "lpest/core.hpp"

namespace lpest {

// 12 significant digits, C locale. NaN is an error; infinities print as inf/-inf.
inline std::string csv_number(double v) {
  if (std::isnan(v)) throw NumericalError("refusing to write NaN to CSV");
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream o;
  o.imbue(std::locale::classic());
  o.precision(12);
  o << v;
  return o.str();
}

}  // namespace lpest
