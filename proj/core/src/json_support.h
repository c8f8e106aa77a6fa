/*!
 *  Copyright (c) 2026 by Contributors
 * \file json_support.h
 * \brief Internal JSON helpers for log-probability vectors.
 */
#ifndef CDTAX_SRC_JSON_SUPPORT_H_
#define CDTAX_SRC_JSON_SUPPORT_H_

#include <cdtax/error.h>
#include <cdtax/log_math.h>

#include <span>
#include <vector>

#include "json.hpp"

namespace cdtax::detail {

inline nlohmann::json LogprobsToJson(std::span<const double> logprobs) {
  nlohmann::json out = nlohmann::json::array();
  for (double v : logprobs) {
    if (v == kNegInf) {
      out.push_back("-inf");
    } else {
      out.push_back(v);
    }
  }
  return out;
}

inline std::vector<double> LogprobsFromJson(const nlohmann::json& array) {
  if (!array.is_array()) throw ParseError("log-probabilities must be an array");
  std::vector<double> out;
  out.reserve(array.size());
  for (const auto& v : array) {
    if (v.is_string() && v.get<std::string>() == "-inf") {
      out.push_back(kNegInf);
    } else if (v.is_number()) {
      out.push_back(v.get<double>());
    } else {
      throw ParseError("log-probability entries must be numbers or \"-inf\"");
    }
  }
  return out;
}

}  // namespace cdtax::detail

#endif  // CDTAX_SRC_JSON_SUPPORT_H_
