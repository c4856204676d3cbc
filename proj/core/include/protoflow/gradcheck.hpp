#pragma once

#include <map>
#include <string>

namespace protoflow {

struct GradCheckReport {
  std::map<std::string, double> max_rel_err;  // per checked path
  double tolerance = 1e-4;
  double eps = 1e-5;
  int seeds = 20;
  double seconds = 0.0;

  bool pass() const {
    for (const auto& [name, err] : max_rel_err)
      if (err > tolerance) return false;
    return true;
  }
};

// Analytic gradients of every loss and every MLP path against central finite
// differences, across `seeds` random instances (feature dims <= 8, class
// counts <= 5).
GradCheckReport run_gradcheck_suite(int seeds = 20, double eps = 1e-5,
                                    double tolerance = 1e-4);

}  // namespace protoflow
