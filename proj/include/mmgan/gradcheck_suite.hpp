#pragma once

#include <functional>
#include <string>
#include <vector>

namespace mmgan::train {

/// One finite-difference probe; run() returns the max relative error.
struct GradcheckEntry {
  std::string name;
  std::function<double()> run;
};

/// Every op family plus Eqs. 1-4 through the full G/D/encoder stack at tiny dims.
std::vector<GradcheckEntry> gradcheck_entries();

struct GradcheckResult {
  std::string name;
  double error = 0;
  bool pass = false;
  double ms = 0;
};

/// Entries whose name contains `filter` (all when empty).
std::vector<GradcheckResult> run_gradcheck(const std::string& filter = "", double tolerance = 1e-4);

}  // namespace mmgan::train
