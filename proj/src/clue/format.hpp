#pragma once

#include <cstdio>
#include <string>

namespace clue {

// Fixed formatting for CSV/report numbers so reruns are byte-identical.
inline std::string fmt_double(double v, int precision = 10) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

}  // namespace clue
