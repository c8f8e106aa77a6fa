/*!
 *  Copyright (c) 2026 by Contributors
 * \file log_math.cc
 */
#include <cdtax/error.h>
#include <cdtax/log_math.h>

#include <algorithm>

namespace cdtax {

const char* ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kValidation: return "validation";
    case ErrorKind::kLookup: return "lookup";
    case ErrorKind::kContract: return "contract";
    case ErrorKind::kCoverage: return "coverage";
    case ErrorKind::kZeroMass: return "zero-mass";
    case ErrorKind::kDomain: return "domain";
    case ErrorKind::kSharedSupport: return "shared-support";
    case ErrorKind::kBudget: return "budget";
    case ErrorKind::kBackend: return "backend";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

double LogSumExp(std::span<const double> values) {
  double max_value = kNegInf;
  for (double v : values) max_value = std::max(max_value, v);
  if (max_value == kNegInf) return kNegInf;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - max_value);
  return max_value + std::log(sum);
}

double LogAddExp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  double hi = std::max(a, b);
  double lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

double Log1mExp(double x) {
  // Maechler's split: log(-expm1(x)) near 0, log1p(-exp(x)) further out.
  if (x > -0.6931471805599453) return std::log(-std::expm1(x));
  return std::log1p(-std::exp(x));
}

}  // namespace cdtax
