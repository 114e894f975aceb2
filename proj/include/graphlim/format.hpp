#pragma once

#include <iomanip>
#include <locale>
#include <sstream>
#include <string>

namespace graphlim {

/// Locale-independent rendering with 12 significant digits, used for every
/// number the library writes.
inline std::string format_double(double x) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::setprecision(12) << x;
  return os.str();
}

}  // namespace graphlim
